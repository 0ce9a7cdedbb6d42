//! Projected gradient descent over the feasible set with Armijo
//! backtracking, and a seeded multi-start driver on top of it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{is_feasible, project_feasible, Placement, Point, Polygon, DEFAULT_MAX_SWEEPS};
use crate::objective_gradient::{
    ObjectiveValue, Pipeline, PlacementGradient, State, MIN_RAMP_CELLS, RAMP_OFFSET_CELLS,
};
use crate::solver::SolverOptions;

/// Rejection-sampling budget of [`random_feasible_placement`].
pub const SAMPLING_BUDGET: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescentConfig {
    pub p: f64,
    pub eps: f64,
    pub target_h: f64,
    /// First trial step of every line search, in length units.
    pub alpha0: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking factor.
    pub shrink: f64,
    pub max_iter: usize,
    /// Runs stop once a step (accepted or trial) is at most this long.
    pub step_tol: f64,
    pub max_trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl DescentConfig {
    /// Defaults tied to the grid: `alpha0 = 10h`, `step_tol = h/4`,
    /// `c = 1e-4`, `beta = 1/2`, 30 trials, 200 iterations.
    pub fn new(p: f64, eps: f64, target_h: f64) -> Self {
        Self {
            p,
            eps,
            target_h,
            alpha0: 10.0 * target_h,
            armijo: 1e-4,
            shrink: 0.5,
            max_iter: 200,
            step_tol: 0.25 * target_h,
            max_trials: 30,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p", self.p),
            ("eps", self.eps),
            ("target_h", self.target_h),
            ("alpha0", self.alpha0),
            ("step_tol", self.step_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
            }
        }
        if self.p < 1.0 {
            return Err(Error::InvalidArgument(format!("p = {} must be >= 1", self.p)));
        }
        for (name, v) in [("armijo", self.armijo), ("shrink", self.shrink)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if self.max_trials == 0 {
            return Err(Error::InvalidArgument("max_trials must be positive".into()));
        }
        Ok(())
    }

    pub fn pipeline(&self, poly: &Polygon) -> Result<Pipeline> {
        self.validate()?;
        Pipeline::new(poly, self.target_h, self.eps, self.p, self.solver)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    StepTol,
    MaxIter,
    LinesearchFail,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::StepTol => "STEP_TOL",
            Termination::MaxIter => "MAX_ITER",
            Termination::LinesearchFail => "LINESEARCH_FAIL",
        })
    }
}

/// One outer iteration: the iterate's objective and gradient norm, and the
/// length of the step taken from it (or of the last trial if none was
/// accepted).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub g: f64,
    pub f: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    /// Accepted iterates, starting point first.
    pub placements: Vec<Placement>,
    pub objective: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Seed of the random start, if any.
    pub seed: Option<u64>,
}

impl RunResult {
    pub fn final_placement(&self) -> &Placement {
        self.placements.last().expect("a run holds its starting point")
    }

    pub fn final_g(&self) -> f64 {
        *self.objective.last().expect("a run holds its starting value")
    }
}

/// Uniform draws in the bounding box of `poly`, kept when at depth `r` or
/// more inside the polygon and `2r` or more from every accepted center.
pub fn random_feasible_placement(poly: &Polygon, r: f64, n: usize, rng: &mut impl Rng) -> Result<Placement> {
    random_spaced_placement(poly, r, n, 0.0, rng)
}

/// Extra center spacing for descent starts, enough for two gradient ramps
/// of minimal width between neighbouring sensors.
pub fn start_gap(h: f64) -> f64 {
    (2.0 * RAMP_OFFSET_CELLS + MIN_RAMP_CELLS + 1.0) * h
}

/// As [`random_feasible_placement`] with centers at least `2r + gap` apart.
pub fn random_spaced_placement(poly: &Polygon, r: f64, n: usize, gap: f64, rng: &mut impl Rng) -> Result<Placement> {
    if n == 0 || !(r > 0.0 && r.is_finite()) || !(gap >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and r > 0, got n = {n}, r = {r}"
        )));
    }
    let (lo, hi) = poly.bounding_box();
    let mut centers: Vec<Point> = Vec::with_capacity(n);
    for _ in 0..SAMPLING_BUDGET {
        let x = Point::new(rng.gen_range(lo.x..=hi.x), rng.gen_range(lo.y..=hi.y));
        if poly.signed_distance(x) <= -r && centers.iter().all(|c| c.distance(x) >= 2.0 * r + gap) {
            centers.push(x);
            if centers.len() == n {
                return Placement::new(centers, r);
            }
        }
    }
    Err(Error::InfeasibleInstance(format!(
        "placed {} of {n} sensors of radius {r} in {SAMPLING_BUDGET} draws",
        centers.len()
    )))
}

/// Gradient of a trial; a placement too crowded for the gradient ramps
/// counts as a rejected trial rather than a failure.
fn trial_gradient(pipe: &Pipeline, state: &State, pl: &Placement) -> Result<Option<PlacementGradient>> {
    match pipe.gradient_of(state, pl) {
        Ok(g) => Ok(Some(g)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Descent on a prepared pipeline. Each iteration moves along the
/// normalized negative gradient: trial `x+ = P(x - alpha grad / |grad|)`,
/// accepted when `g(x+) <= g(x) - c alpha |grad|`.
pub fn descend_with(pipe: &Pipeline, cfg: &DescentConfig, start: &Placement) -> Result<RunResult> {
    cfg.validate()?;
    if !is_feasible(start, &pipe.poly) {
        return Err(Error::Infeasible("starting placement is not feasible".into()));
    }
    let state = pipe.state(start)?;
    let mut value: ObjectiveValue = pipe.objective_of(&state)?;
    let mut grad = pipe.gradient_of(&state, start)?;
    let mut x = start.clone();
    let mut run = RunResult {
        placements: vec![x.clone()],
        objective: vec![value.g],
        grad_norms: vec![grad.norm()],
        records: Vec::new(),
        termination: Termination::MaxIter,
        seed: None,
    };

    for iter in 0..cfg.max_iter {
        let norm = grad.norm();
        let mut record = IterationRecord {
            iter,
            g: value.g,
            f: value.f,
            grad_norm: norm,
            step: 0.0,
            accepted: false,
        };
        if norm == 0.0 {
            run.records.push(record);
            run.termination = Termination::StepTol;
            return Ok(run);
        }
        let coords = x.coordinates();
        let dir: Vec<f64> = grad.to_vec().iter().map(|d| d / norm).collect();
        let mut alpha = cfg.alpha0;
        let mut stop = None;
        let mut next = None;
        for _ in 0..cfg.max_trials {
            let moved: Vec<f64> = coords.iter().zip(&dir).map(|(c, d)| c - alpha * d).collect();
            let proj = project_feasible(&x.with_coordinates(&moved), &pipe.poly, DEFAULT_MAX_SWEEPS);
            let step = x.displacement(&proj.placement);
            record.step = step;
            if step <= cfg.step_tol {
                stop = Some(Termination::StepTol);
                break;
            }
            if proj.feasible {
                let state = pipe.state(&proj.placement)?;
                let trial = pipe.objective_of(&state)?;
                if trial.g <= value.g - cfg.armijo * alpha * norm {
                    if let Some(g) = trial_gradient(pipe, &state, &proj.placement)? {
                        next = Some((proj.placement, trial, g));
                        break;
                    }
                }
            }
            alpha *= cfg.shrink;
        }
        match next {
            Some((pl, trial, g)) => {
                record.accepted = true;
                run.records.push(record);
                x = pl;
                value = trial;
                grad = g;
                run.placements.push(x.clone());
                run.objective.push(value.g);
                run.grad_norms.push(grad.norm());
            }
            None => {
                run.records.push(record);
                run.termination = stop.unwrap_or(Termination::LinesearchFail);
                return Ok(run);
            }
        }
    }
    Ok(run)
}

/// One descent run from `start`.
pub fn descend(cfg: &DescentConfig, poly: &Polygon, start: &Placement) -> Result<RunResult> {
    descend_with(&cfg.pipeline(poly)?, cfg, start)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultistartResult {
    /// Successful runs in start order.
    pub runs: Vec<RunResult>,
    /// Starts that failed, with the error text.
    pub failures: Vec<(usize, String)>,
    /// Index into `runs` of the lowest final objective.
    pub best: usize,
}

impl MultistartResult {
    pub fn best_run(&self) -> &RunResult {
        &self.runs[self.best]
    }

    pub fn best_placement(&self) -> &Placement {
        self.best_run().final_placement()
    }
}

/// `k` runs from random starts seeded `seed, seed + 1, ...`, run
/// concurrently and reported in start order.
pub fn multistart(cfg: &DescentConfig, poly: &Polygon, r: f64, n: usize, k: usize) -> Result<MultistartResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let pipe = cfg.pipeline(poly)?;
    let outcomes: Vec<Result<RunResult>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = random_spaced_placement(poly, r, n, start_gap(pipe.h()), &mut rng)?;
            let mut run = descend_with(&pipe, cfg, &start)?;
            run.seed = Some(seed);
            Ok(run)
        })
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(run) => runs.push(run),
            Err(Error::InfeasibleInstance(msg)) => return Err(Error::InfeasibleInstance(msg)),
            Err(e) => {
                log::warn!("start {i} failed: {e}");
                failures.push((i, e.to_string()));
            }
        }
    }
    if runs.is_empty() {
        return Err(Error::AllRunsFailed(k));
    }
    let best = (0..runs.len())
        .min_by(|&a, &b| runs[a].final_g().total_cmp(&runs[b].final_g()))
        .expect("nonempty");
    Ok(MultistartResult { runs, failures, best })
}

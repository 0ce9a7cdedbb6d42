//! Experiment configuration, the four run modes, and artifact export.
//!
//! A config is plain `key = value` text, one pair per line, `#` starts a
//! comment. Relative paths are taken from the config file's directory.
//!
//! ```text
//! polygon = disk.poly
//! n = 1
//! r = 0.25
//! p = 2
//! mode = OPTIMIZE
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Placement, Point, Polygon};
use crate::grid::{omega_mask, Grid, ScalarField};
use crate::objective_gradient::{GradientCheck, Pipeline};
use crate::optimizer::{multistart, random_feasible_placement, DescentConfig, RunResult};
use crate::solver::{SolverOptions, DEFAULT_TOL};
use crate::varadhan::{eikonal_residual, epsilon_sweep, log_transform, sup_error_vs_exact, SAFETY_BAND_CELLS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Optimize,
    DistanceField,
    GradientCheck,
    EpsilonSweep,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "OPTIMIZE" => Ok(Mode::Optimize),
            "DISTANCE_FIELD" => Ok(Mode::DistanceField),
            "GRADIENT_CHECK" => Ok(Mode::GradientCheck),
            "EPSILON_SWEEP" => Ok(Mode::EpsilonSweep),
            other => Err(format!(
                "unknown mode `{other}`; expected OPTIMIZE, DISTANCE_FIELD, GRADIENT_CHECK or EPSILON_SWEEP"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Optimize => "OPTIMIZE",
            Mode::DistanceField => "DISTANCE_FIELD",
            Mode::GradientCheck => "GRADIENT_CHECK",
            Mode::EpsilonSweep => "EPSILON_SWEEP",
        })
    }
}

/// A fully resolved experiment. Optional keys hold `None` until
/// [`ExperimentConfig::resolved`] fills them from the defaults, which
/// depend on the mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub polygon_path: PathBuf,
    #[serde(skip)]
    pub polygon: Polygon,
    pub mode: Mode,
    pub n: usize,
    pub r: f64,
    pub p: f64,
    /// Default `1e-3 diam^2`.
    pub eps: f64,
    /// Default `[4 eps, eps, eps / 4]`.
    pub eps_list: Vec<f64>,
    /// Default `sqrt(eps) / 3`, with the smallest swept `eps` in sweep mode.
    pub h: Option<f64>,
    /// Fixed centers for the single-placement modes; drawn from `seed`
    /// when absent.
    pub centers: Option<Vec<Point>>,
    pub starts: usize,
    pub seed: u64,
    pub alpha0: Option<f64>,
    pub armijo: f64,
    pub shrink: f64,
    pub max_iter: usize,
    pub step_tol: Option<f64>,
    pub max_trials: usize,
    /// Finite-difference step; default `2h`.
    pub fd_step: Option<f64>,
    pub tol: f64,
    pub out: PathBuf,
}

const KEYS: &[&str] = &[
    "polygon",
    "mode",
    "n",
    "r",
    "p",
    "eps",
    "eps_list",
    "h",
    "centers",
    "starts",
    "seed",
    "alpha0",
    "armijo",
    "shrink",
    "max_iter",
    "step_tol",
    "max_trials",
    "fd_step",
    "tol",
    "out",
];

fn validation(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        message: message.into(),
    }
}

fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("bad number `{s}`")))
        .collect()
}

/// `x y; x y; ...`
fn parse_centers(text: &str) -> std::result::Result<Vec<Point>, String> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| match parse_list(pair)?.as_slice() {
            [x, y] => Ok(Point::new(*x, *y)),
            _ => Err(format!("center `{}` needs two coordinates", pair.trim())),
        })
        .collect()
}

impl ExperimentConfig {
    /// Reads and validates a config file, loading the polygon it names.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut pairs: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: PathBuf::new(),
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if pairs.insert(key, (line_no, value)).is_some() {
                return Err(err(format!("key `{key}` given twice")));
            }
        }

        fn get<T: FromStr>(pairs: &BTreeMap<&str, (usize, &str)>, key: &str) -> Result<Option<T>> {
            pairs
                .get(key)
                .map(|&(line, v)| {
                    v.parse::<T>().map_err(|_| Error::Parse {
                        path: PathBuf::new(),
                        line,
                        message: format!("bad value `{v}` for `{key}`"),
                    })
                })
                .transpose()
        }
        let required = |key: &str| {
            pairs
                .get(key)
                .map(|&(_, v)| v)
                .ok_or_else(|| validation(key, "missing required key"))
        };

        let polygon_path = base.join(required("polygon")?);
        let polygon = Polygon::from_file(&polygon_path).map_err(|e| match e {
            Error::Io(io) => validation("polygon", format!("{}: {io}", polygon_path.display())),
            other => other,
        })?;
        let mode = match pairs.get("mode") {
            Some(&(line, v)) => v.parse::<Mode>().map_err(|message| Error::Parse {
                path: PathBuf::new(),
                line,
                message,
            })?,
            None => Mode::Optimize,
        };
        let n: usize = get(&pairs, "n")?.ok_or_else(|| validation("n", "missing required key"))?;
        let r: f64 = get(&pairs, "r")?.ok_or_else(|| validation("r", "missing required key"))?;
        let p: f64 = get(&pairs, "p")?.ok_or_else(|| validation("p", "missing required key"))?;
        let diam = polygon.diameter();
        let eps = get(&pairs, "eps")?.unwrap_or(1e-3 * diam * diam);
        let eps_list = match pairs.get("eps_list") {
            Some(&(line, v)) => parse_list(v).map_err(|message| Error::Parse {
                path: PathBuf::new(),
                line,
                message,
            })?,
            None => vec![4.0 * eps, eps, 0.25 * eps],
        };
        let centers = match pairs.get("centers") {
            Some(&(line, v)) => Some(parse_centers(v).map_err(|message| Error::Parse {
                path: PathBuf::new(),
                line,
                message,
            })?),
            None => None,
        };
        let cfg = Self {
            polygon_path,
            polygon,
            mode,
            n,
            r,
            p,
            eps,
            eps_list,
            h: get(&pairs, "h")?,
            centers,
            starts: get(&pairs, "starts")?.unwrap_or(1),
            seed: get(&pairs, "seed")?.unwrap_or(0),
            alpha0: get(&pairs, "alpha0")?,
            armijo: get(&pairs, "armijo")?.unwrap_or(1e-4),
            shrink: get(&pairs, "shrink")?.unwrap_or(0.5),
            max_iter: get(&pairs, "max_iter")?.unwrap_or(200),
            step_tol: get(&pairs, "step_tol")?,
            max_trials: get(&pairs, "max_trials")?.unwrap_or(30),
            fd_step: get(&pairs, "fd_step")?,
            tol: get(&pairs, "tol")?.unwrap_or(DEFAULT_TOL),
            out: base.join(pairs.get("out").map_or("out", |&(_, v)| v)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks on every field. Whether the sensors fit is left to run
    /// time.
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(validation(field, format!("{v} must be positive")))
            }
        };
        if self.n == 0 {
            return Err(validation("n", "need at least one sensor"));
        }
        positive("r", self.r)?;
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(validation("p", format!("{} must be >= 1", self.p)));
        }
        positive("eps", self.eps)?;
        if self.eps_list.is_empty() {
            return Err(validation("eps_list", "empty list"));
        }
        for &e in &self.eps_list {
            positive("eps_list", e)?;
        }
        for (field, v) in [
            ("h", self.h),
            ("alpha0", self.alpha0),
            ("step_tol", self.step_tol),
            ("fd_step", self.fd_step),
        ] {
            if let Some(v) = v {
                positive(field, v)?;
            }
        }
        if self.starts == 0 {
            return Err(validation("starts", "need at least one start"));
        }
        for (field, v) in [("armijo", self.armijo), ("shrink", self.shrink)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(validation(field, format!("{v} must lie in (0, 1)")));
            }
        }
        if self.max_iter == 0 {
            return Err(validation("max_iter", "must be positive"));
        }
        if self.max_trials == 0 {
            return Err(validation("max_trials", "must be positive"));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(validation("tol", format!("{} must lie in (0, 1e-2]", self.tol)));
        }
        if let Some(c) = &self.centers {
            if c.len() != self.n {
                return Err(validation(
                    "centers",
                    format!("{} centers given for n = {}", c.len(), self.n),
                ));
            }
        }
        Ok(())
    }

    /// Grid spacing: explicit `h`, else `sqrt(eps) / 3` for the smallest
    /// `eps` the mode solves with.
    pub fn target_h(&self) -> f64 {
        self.h.unwrap_or_else(|| {
            let eps = match self.mode {
                Mode::EpsilonSweep => self.eps_list.iter().copied().fold(f64::INFINITY, f64::min),
                _ => self.eps,
            };
            eps.sqrt() / 3.0
        })
    }

    /// Copy with every default made explicit, as recorded in the manifest.
    pub fn resolved(&self) -> Self {
        let h = self.target_h();
        Self {
            h: Some(h),
            alpha0: Some(self.alpha0.unwrap_or(10.0 * h)),
            step_tol: Some(self.step_tol.unwrap_or(0.25 * h)),
            fd_step: Some(self.fd_step.unwrap_or(2.0 * h)),
            ..self.clone()
        }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            ..SolverOptions::default()
        }
    }

    pub fn descent(&self) -> DescentConfig {
        let cfg = self.resolved();
        let h = cfg.target_h();
        DescentConfig {
            alpha0: cfg.alpha0.unwrap_or(10.0 * h),
            armijo: cfg.armijo,
            shrink: cfg.shrink,
            max_iter: cfg.max_iter,
            step_tol: cfg.step_tol.unwrap_or(0.25 * h),
            max_trials: cfg.max_trials,
            seed: cfg.seed,
            solver: cfg.solver(),
            ..DescentConfig::new(cfg.p, cfg.eps, h)
        }
    }

    /// The configured centers, or a random feasible draw from `seed`.
    pub fn placement(&self) -> Result<Placement> {
        match &self.centers {
            Some(c) => Placement::new(c.clone(), self.r),
            None => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
                random_feasible_placement(&self.polygon, self.r, self.n, &mut rng)
            }
        }
    }
}

/// Shortest text that reads back to the same `f64`, in plain notation for
/// moderate magnitudes and integers, scientific otherwise.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if v == v.trunc() && a < 1e16 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldFormat {
    Csv,
    Pgm16,
}

/// Writes a nodal field. CSV: one line per grid row, `y` increasing. PGM:
/// 16-bit binary graymap, north up, values scaled linearly from the field
/// minimum (0) to its maximum (65535), all 0 for a constant field; the
/// range goes to `<path>.range.txt`. Returns every path written.
pub fn export_field(field: &ScalarField, path: &Path, format: FieldFormat) -> Result<Vec<PathBuf>> {
    match format {
        FieldFormat::Csv => {
            let mut text = String::with_capacity(field.values.len() * 20);
            for row in field.rows() {
                let line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
                text.push_str(&line.join(","));
                text.push('\n');
            }
            fs::write(path, text)?;
            Ok(vec![path.to_path_buf()])
        }
        FieldFormat::Pgm16 => {
            let (lo, hi) = field.min_max();
            let span = hi - lo;
            let mut bytes = format!("P5\n{} {}\n65535\n", field.nx, field.ny).into_bytes();
            for row in field.rows().rev() {
                for &v in row {
                    let level = if span > 0.0 {
                        ((v - lo) / span * 65535.0).round() as u16
                    } else {
                        0
                    };
                    bytes.extend_from_slice(&level.to_be_bytes());
                }
            }
            fs::write(path, bytes)?;
            let sidecar = PathBuf::from(format!("{}.range.txt", path.display()));
            fs::write(
                &sidecar,
                format!("min {}\nmax {}\n", format_value(lo), format_value(hi)),
            )?;
            Ok(vec![path.to_path_buf(), sidecar])
        }
    }
}

/// Reads a CSV written by [`export_field`].
pub fn read_field_csv(path: &Path) -> Result<ScalarField> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let (mut nx, mut ny) = (0, 0);
    for (idx, line) in text.lines().enumerate() {
        let row = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        if ny > 0 && row.len() != nx {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("{} values, expected {nx}", row.len()),
            });
        }
        nx = row.len();
        ny += 1;
        values.extend(row);
    }
    ScalarField::from_values(nx, ny, values)
}

/// Writes `header` and `rows` as CSV.
fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_convergence_csv(run: &RunResult, path: &Path) -> Result<()> {
    write_csv(
        path,
        &["iter", "g", "f", "grad_norm", "step", "accepted"],
        run.records.iter().map(|r| {
            vec![
                r.iter.to_string(),
                format_value(r.g),
                format_value(r.f),
                format_value(r.grad_norm),
                format_value(r.step),
                r.accepted.to_string(),
            ]
        }),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlacementRecord {
    pub centers: Vec<Point>,
    pub radius: f64,
    pub g: f64,
    pub f: f64,
    pub p: f64,
    pub eps: f64,
    pub h: f64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub mode: Mode,
    pub config: ExperimentConfig,
    /// Paths relative to the output directory, in write order; the
    /// manifest itself comes last.
    pub artifacts: Vec<String>,
    /// Headline numbers of the run.
    pub summary: BTreeMap<String, serde_json::Value>,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        for p in paths {
            let rel = p.strip_prefix(&self.dir).unwrap_or(&p);
            self.written.push(rel.display().to_string());
        }
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.path(name);
        write_csv(&path, header, rows)?;
        self.record([path]);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
        self.record([path]);
        Ok(())
    }

    fn field(&mut self, name: &str, field: &ScalarField) -> Result<()> {
        for (ext, format) in [("csv", FieldFormat::Csv), ("pgm", FieldFormat::Pgm16)] {
            let paths = export_field(field, &self.path(&format!("{name}.{ext}")), format)?;
            self.record(paths);
        }
        Ok(())
    }
}

type Summary = BTreeMap<String, serde_json::Value>;

fn put(summary: &mut Summary, key: &str, value: impl Serialize) -> Result<()> {
    summary.insert(key.into(), serde_json::to_value(value)?);
    Ok(())
}

/// Runs one experiment and writes its artifacts and `manifest.json` under
/// the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    fs::create_dir_all(&cfg.out)?;
    let mut art = Artifacts {
        dir: cfg.out.clone(),
        written: Vec::new(),
    };
    let mut summary = Summary::new();
    log::info!(
        "{} on {} with h = {}",
        cfg.mode,
        cfg.polygon_path.display(),
        cfg.target_h()
    );
    match cfg.mode {
        Mode::Optimize => optimize(&cfg, &mut art, &mut summary)?,
        Mode::DistanceField => distance_field(&cfg, &mut art, &mut summary)?,
        Mode::GradientCheck => gradient_check(&cfg, &mut art, &mut summary)?,
        Mode::EpsilonSweep => sweep(&cfg, &mut art, &mut summary)?,
    }
    art.written.push("manifest.json".into());
    let manifest = Manifest {
        mode: cfg.mode,
        config: cfg.clone(),
        artifacts: art.written.clone(),
        summary,
    };
    fs::write(
        art.path("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

fn pipeline(cfg: &ExperimentConfig) -> Result<Pipeline> {
    Pipeline::new(&cfg.polygon, cfg.target_h(), cfg.eps, cfg.p, cfg.solver())
}

/// Writes `v` for a solved placement; returns the grid for reuse.
fn write_distance(pipe: &Pipeline, pl: &Placement, art: &mut Artifacts, summary: &mut Summary) -> Result<Grid> {
    let state = pipe.state(pl)?;
    let v = log_transform(&state.w, &state.mask, pipe.eps)?;
    art.field("v", &v.v)?;
    let sup = sup_error_vs_exact(&v, &pipe.grid, pl, &state.mask);
    let (_, residual) = eikonal_residual(&v, &pipe.grid, &state.mask, SAFETY_BAND_CELLS * pipe.grid.h)?;
    let value = pipe.objective_of(&state)?;
    art.csv(
        "error_report.csv",
        &[
            "eps",
            "h",
            "sup_error",
            "eikonal_residual_max",
            "g",
            "f",
            "solver_iterations",
        ],
        [vec![
            format_value(pipe.eps),
            format_value(pipe.grid.h),
            format_value(sup),
            format_value(residual),
            format_value(value.g),
            format_value(value.f),
            state.report.iterations.to_string(),
        ]],
    )?;
    put(summary, "sup_error", sup)?;
    put(summary, "eikonal_residual_max", residual)?;
    put(summary, "g", value.g)?;
    Ok(pipe.grid)
}

fn optimize(cfg: &ExperimentConfig, art: &mut Artifacts, summary: &mut Summary) -> Result<()> {
    let descent = cfg.descent();
    let result = multistart(&descent, &cfg.polygon, cfg.r, cfg.n, cfg.starts)?;
    for run in &result.runs {
        let seed = run.seed.expect("multistart seeds every run");
        let path = art.path(&format!("convergence_seed{seed}.csv"));
        write_convergence_csv(run, &path)?;
        art.record([path]);
    }
    art.csv(
        "runs.csv",
        &["seed", "iterations", "final_g", "termination"],
        result.runs.iter().map(|run| {
            vec![
                run.seed.map_or(String::new(), |s| s.to_string()),
                run.records.len().to_string(),
                format_value(run.final_g()),
                run.termination.to_string(),
            ]
        }),
    )?;
    let best = result.best_run();
    let pl = best.final_placement();
    let g = best.final_g();
    let record = PlacementRecord {
        centers: pl.centers.clone(),
        radius: pl.radius,
        g,
        f: g.powf(1.0 / cfg.p),
        p: cfg.p,
        eps: cfg.eps,
        h: cfg.target_h(),
        seed: best.seed,
    };
    art.json("placement.json", &record)?;
    let pipe = pipeline(cfg)?;
    write_distance(&pipe, pl, art, summary)?;
    put(summary, "best_g", g)?;
    put(summary, "best_seed", best.seed)?;
    put(summary, "failed_starts", &result.failures)?;
    Ok(())
}

fn distance_field(cfg: &ExperimentConfig, art: &mut Artifacts, summary: &mut Summary) -> Result<()> {
    let pl = cfg.placement()?;
    let pipe = pipeline(cfg)?;
    let grid = write_distance(&pipe, &pl, art, summary)?;
    let omega = omega_mask(&grid, &cfg.polygon);
    put(summary, "domain_nodes", omega.iter().filter(|&&b| b).count())?;
    Ok(())
}

fn gradient_check(cfg: &ExperimentConfig, art: &mut Artifacts, summary: &mut Summary) -> Result<()> {
    let pl = cfg.placement()?;
    let pipe = pipeline(cfg)?;
    let step = cfg.fd_step.unwrap_or(2.0 * pipe.h());
    let (_, analytic) = pipe.evaluate(&pl)?;
    let fd = pipe.fd_gradient(&pl, step)?;
    let check = GradientCheck::new(&analytic, &fd);
    art.csv(
        "gradient_check.csv",
        &["sensor", "axis", "analytic", "fd", "relative_error", "cosine"],
        check.analytic.iter().zip(&check.fd).enumerate().map(|(k, (a, f))| {
            vec![
                (k / 2).to_string(),
                if k % 2 == 0 { "x" } else { "y" }.to_string(),
                format_value(*a),
                format_value(*f),
                format_value(check.relative_error),
                format_value(check.cosine),
            ]
        }),
    )?;
    put(summary, "relative_error", check.relative_error)?;
    put(summary, "cosine", check.cosine)?;
    put(summary, "fd_step", step)?;
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, art: &mut Artifacts, summary: &mut Summary) -> Result<()> {
    let pl = cfg.placement()?;
    let rows = epsilon_sweep(&cfg.polygon, &pl, cfg.target_h(), &cfg.eps_list, &cfg.solver())?;
    art.csv(
        "sweep.csv",
        &["eps", "h", "sup_error", "c_hat", "rate_bound", "eikonal_residual_max"],
        rows.iter().map(|r| {
            vec![
                format_value(r.eps),
                format_value(r.h),
                format_value(r.sup_error),
                format_value(r.c_hat),
                format_value(r.rate_bound()),
                format_value(r.residual_max),
            ]
        }),
    )?;
    let mut by_eps = rows.clone();
    by_eps.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    put(
        summary,
        "errors_decrease",
        by_eps.windows(2).all(|w| w[1].sup_error < w[0].sup_error),
    )?;
    put(
        summary,
        "within_rate_bound",
        rows.iter().all(|r| r.sup_error <= r.rate_bound() * (1.0 + 1e-12)),
    )?;
    Ok(())
}

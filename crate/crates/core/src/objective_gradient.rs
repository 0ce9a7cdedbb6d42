//! The objective `g = integral of v^p over the domain minus the sensors`
//! and its gradient with respect to the sensor centers, computed from the
//! state and an adjoint solve. A central finite-difference gradient serves
//! as the independent check.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{compute_box, exact_distance_to_sensors, is_feasible, Ball, Placement, Point, Polygon};
use crate::grid::{
    build_grid, classify_with_omega, integrate_masked, interpolate, omega_mask, pairwise_sum, Grid, NodeMask,
    ScalarField,
};
use crate::solver::{solve_adjoint, solve_state, SolveReport, SolverOptions};
use crate::varadhan::distance_value;

/// Quadrature points per sensor circle.
pub const DEFAULT_QUADRATURE: usize = 64;
/// Probe offset in cells.
pub const DEFAULT_PROBE_CELLS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObjectiveValue {
    /// `g = f^p`.
    pub g: f64,
    pub f: f64,
    pub p: f64,
    /// Screening parameter; `None` for the exact-distance integrand.
    pub eps: Option<f64>,
}

impl ObjectiveValue {
    fn new(g: f64, p: f64, eps: Option<f64>) -> Self {
        Self {
            g,
            f: g.powf(1.0 / p),
            p,
            eps,
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "exponent p = {p} must be finite and >= 1"
        )))
    }
}

/// `g` from a state solution: the nodal integral of `v^p` over fluid nodes
/// in the domain, `v = -sqrt(eps) ln w`.
pub fn evaluate_objective(grid: &Grid, mask: &NodeMask, eps: f64, p: f64, w: &ScalarField) -> Result<ObjectiveValue> {
    check_exponent(p)?;
    let v = crate::varadhan::log_transform(w, mask, eps)?;
    let integrand = v.v.map(|x| x.powf(p));
    Ok(ObjectiveValue::new(
        integrate_masked(&integrand, grid, mask),
        p,
        Some(eps),
    ))
}

/// `g` with the exact distance to the sensors in place of `v`.
pub fn exact_objective(grid: &Grid, mask: &NodeMask, placement: &Placement, p: f64) -> Result<ObjectiveValue> {
    check_exponent(p)?;
    let integrand = ScalarField::from_fn(grid, |x| exact_distance_to_sensors(x, placement).powf(p));
    Ok(ObjectiveValue::new(integrate_masked(&integrand, grid, mask), p, None))
}

/// Derivatives along the outward normal of `ball` (into the fluid) at `m`
/// equispaced angles, from the one-sided second-order stencil
/// `(-3 u_b + 4 u(b + delta n) - u(b + 2 delta n)) / (2 delta)` anchored at
/// the exact boundary value `u_b`.
pub fn boundary_normal_derivative(
    field: &ScalarField,
    grid: &Grid,
    ball: &Ball,
    boundary_value: f64,
    m: usize,
    delta: f64,
) -> Result<Vec<f64>> {
    if m < 16 {
        return Err(Error::InvalidArgument(format!(
            "{m} quadrature points, need at least 16"
        )));
    }
    if !(delta >= grid.h * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "probe offset {delta} is below h = {}",
            grid.h
        )));
    }
    (0..m)
        .map(|j| {
            let n = Point::from_angle(2.0 * PI * j as f64 / m as f64);
            let b = ball.center + n * ball.radius;
            let near = interpolate(field, grid, b + n * delta)?;
            let far = interpolate(field, grid, b + n * (2.0 * delta))?;
            Ok((-3.0 * boundary_value + 4.0 * near - far) / (2.0 * delta))
        })
        .collect()
}

/// Integrand pieces at one quadrature point of a sensor circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryTerm {
    pub theta: f64,
    /// `(-sqrt(eps) ln w)^p` at the boundary point, where `w = 1`.
    pub j_term: f64,
    /// Normal derivative of the state into the fluid.
    pub dw: f64,
    /// Normal derivative of the adjoint into the fluid.
    pub dq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlacementGradient {
    /// `dg/dx_i` for each sensor.
    pub components: Vec<Point>,
}

impl PlacementGradient {
    /// Flattened `[x0, y0, x1, y1, ...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| [c.x, c.y]).collect()
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c.dot(*c)).sum::<f64>().sqrt()
    }
}

/// Quadrature data on every sensor circle; outer index is the sensor.
pub fn boundary_terms(
    w: &ScalarField,
    q: &ScalarField,
    grid: &Grid,
    placement: &Placement,
    eps: f64,
    p: f64,
    m: usize,
    delta: f64,
) -> Result<Vec<Vec<BoundaryTerm>>> {
    check_exponent(p)?;
    check_probe_clearance(grid, placement, delta)?;
    let j_term = distance_value(1.0, eps.sqrt()).powf(p);
    placement
        .balls()
        .map(|ball| {
            let dw = boundary_normal_derivative(w, grid, &ball, 1.0, m, delta)?;
            let dq = boundary_normal_derivative(q, grid, &ball, 0.0, m, delta)?;
            Ok((0..m)
                .map(|j| BoundaryTerm {
                    theta: 2.0 * PI * j as f64 / m as f64,
                    j_term,
                    dw: dw[j],
                    dq: dq[j],
                })
                .collect())
        })
        .collect()
}

/// Probes reach `2 delta` past each circle; that band must stay clear of the
/// other sensors and of the grid edge.
fn check_probe_clearance(grid: &Grid, placement: &Placement, delta: f64) -> Result<()> {
    let reach = 2.0 * delta;
    let balls: Vec<Ball> = placement.balls().collect();
    let hi = grid.upper();
    for (i, a) in balls.iter().enumerate() {
        let c = a.center;
        let room = (c.x - grid.origin.x)
            .min(hi.x - c.x)
            .min(c.y - grid.origin.y)
            .min(hi.y - c.y);
        if room - a.radius < reach + grid.h {
            return Err(Error::Infeasible(format!("sensor {i} probes leave the grid")));
        }
        for (k, b) in balls.iter().enumerate().skip(i + 1) {
            if c.distance(b.center) - a.radius - b.radius < reach {
                return Err(Error::Infeasible(format!(
                    "sensors {i} and {k} are closer than the probe reach {reach}"
                )));
            }
        }
    }
    Ok(())
}

/// Boundary form of the gradient,
/// `dg/dx_i^k = (2 pi r / m) sum_j (J_j + eps^(3/2) Dw_j Dq_j) nu_j^k` with
/// `nu_j` the unit normal pointing into the ball. The `sqrt(eps)` beyond
/// `eps` converts `q` into the multiplier of `g` itself. Kept for
/// diagnostics: the one-sided probes straddle the staircase of sensor nodes
/// and the estimate drifts with the probe offset; see [`volume_gradient`].
pub fn boundary_gradient(terms: &[Vec<BoundaryTerm>], radius: f64, eps: f64) -> PlacementGradient {
    let components = terms
        .iter()
        .map(|circle| {
            let weight = 2.0 * PI * radius / circle.len() as f64;
            let mut acc = Point::ORIGIN;
            for t in circle {
                let nu = -Point::from_angle(t.theta);
                acc = acc + nu * (t.j_term + eps * eps.sqrt() * t.dw * t.dq);
            }
            acc * weight
        })
        .collect();
    PlacementGradient { components }
}

/// Radial cutoff that moves one sensor rigidly: 1 out to `r + inner`,
/// a cubic ramp down to 0 at `r + outer`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoff {
    pub center: Point,
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    /// Value and gradient at `x`.
    pub fn eval(&self, x: Point) -> (f64, Point) {
        let d = x - self.center;
        let s = d.norm();
        if s <= self.inner {
            return (1.0, Point::ORIGIN);
        }
        if s >= self.outer {
            return (0.0, Point::ORIGIN);
        }
        let width = self.outer - self.inner;
        let t = (s - self.inner) / width;
        let value = 1.0 - t * t * (3.0 - 2.0 * t);
        let slope = -6.0 * t * (1.0 - t) / width;
        (value, d * (slope / s))
    }
}

/// Preferred ramp width in units of the boundary-layer scale `sqrt(eps)`.
pub const RAMP_LAYERS: f64 = 4.0;
/// The ramp starts this many cells outside each circle so that no
/// difference stencil inside it touches a sensor node.
pub const RAMP_OFFSET_CELLS: f64 = 2.0;
/// Narrowest admissible ramp, in cells.
pub const MIN_RAMP_CELLS: f64 = 3.0;

/// One cutoff per sensor. The ramp of sensor `i` stays clear of every other
/// sensor and of the grid edge; `Infeasible` when there is no room for a
/// ramp of `MIN_RAMP_CELLS`.
pub fn cutoffs(grid: &Grid, placement: &Placement, eps: f64) -> Result<Vec<Cutoff>> {
    let h = grid.h;
    let hi = grid.upper();
    let offset = RAMP_OFFSET_CELLS * h;
    let centers = &placement.centers;
    let r = placement.radius;
    centers
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let edge = (c.x - grid.origin.x)
                .min(hi.x - c.x)
                .min(c.y - grid.origin.y)
                .min(hi.y - c.y)
                - 2.0 * h;
            let others = centers
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, &o)| c.distance(o) - r - 2.0 * h)
                .fold(f64::INFINITY, f64::min);
            let room = edge.min(others) - r - offset;
            let width = (RAMP_LAYERS * eps.sqrt()).max(2.0 * MIN_RAMP_CELLS * h).min(room);
            if width < MIN_RAMP_CELLS * h {
                return Err(Error::Infeasible(format!("sensor {i} has no room for a gradient ramp")));
            }
            Ok(Cutoff {
                center: c,
                inner: r + offset,
                outer: r + offset + width,
            })
        })
        .collect()
}

/// Central-difference gradient at an interior node.
fn nodal_gradient(f: &ScalarField, grid: &Grid, i: usize, j: usize) -> Point {
    let s = 0.5 / grid.h;
    Point::new(
        (f.get(i + 1, j) - f.get(i - 1, j)) * s,
        (f.get(i, j + 1) - f.get(i, j - 1)) * s,
    )
}

/// Gradient of `g` with respect to the sensor centers in volume form.
///
/// Moving sensor `i` along `e_k` with the velocity field `theta_i e_k`
/// gives
///
/// ```text
/// dg = int_Omega j d_k theta
///    + int_fluid [(w lam + eps grad w . grad lam) d_k theta
///                 - eps (d_k w grad theta . grad lam + d_k lam grad theta . grad w)]
///    - int_{boundary of Omega} j theta n_k
/// ```
///
/// with `j = v^p` and the multiplier `lam = -sqrt(eps) q` built from the
/// adjoint `q`. Only the ramp of each cutoff contributes to the volume
/// terms, so the result never differentiates across the staircase of
/// sensor nodes. The last term keeps the polygon fixed where a ramp
/// crosses its boundary.
pub fn volume_gradient(
    w: &ScalarField,
    q: &ScalarField,
    grid: &Grid,
    mask: &NodeMask,
    poly: &Polygon,
    placement: &Placement,
    eps: f64,
    p: f64,
) -> Result<PlacementGradient> {
    check_exponent(p)?;
    let cuts = cutoffs(grid, placement, eps)?;
    let se = eps.sqrt();
    let lam = q.map(|x| -se * x);
    let j_of = |wv: f64| distance_value(wv, se).powf(p);
    let area = grid.h * grid.h;
    let mut components = Vec::with_capacity(cuts.len());
    for cut in &cuts {
        let reach = Point::new(cut.outer, cut.outer);
        let Some(((i0, i1), (j0, j1))) = grid.node_range(cut.center - reach, cut.center + reach) else {
            return Err(Error::OutsideGrid {
                x: cut.center.x,
                y: cut.center.y,
            });
        };
        let (mut gx, mut gy) = (Vec::new(), Vec::new());
        for j in j0.max(1)..=j1.min(grid.ny - 2) {
            for i in i0.max(1)..=i1.min(grid.nx - 2) {
                let idx = grid.index(i, j);
                if !mask.is_fluid(idx) {
                    continue;
                }
                let (_, dt) = cut.eval(grid.node(i, j));
                if dt == Point::ORIGIN {
                    continue;
                }
                let (wv, lv) = (w.values[idx], lam.values[idx]);
                let dw = nodal_gradient(w, grid, i, j);
                let dl = nodal_gradient(&lam, grid, i, j);
                let mut div_coef = wv * lv + eps * dw.dot(dl);
                if mask.in_omega[idx] {
                    div_coef += j_of(wv);
                }
                let (tl, tw) = (dt.dot(dl), dt.dot(dw));
                gx.push(div_coef * dt.x - eps * (dw.x * tl + dl.x * tw));
                gy.push(div_coef * dt.y - eps * (dw.y * tl + dl.y * tw));
            }
        }
        let mut g = Point::new(pairwise_sum(&gx), pairwise_sum(&gy)) * area;
        g = g - boundary_flux(w, grid, poly, cut, &j_of)?;
        components.push(g);
    }
    Ok(PlacementGradient { components })
}

/// `int_{boundary of Omega} j theta n ds` by the midpoint rule on pieces of
/// length at most `h / 2`.
fn boundary_flux(
    w: &ScalarField,
    grid: &Grid,
    poly: &Polygon,
    cut: &Cutoff,
    j_of: &impl Fn(f64) -> f64,
) -> Result<Point> {
    let orientation = poly.area().signum();
    let mut acc = Point::ORIGIN;
    for (a, b) in poly.edges() {
        let len = a.distance(b);
        let seg = b - a;
        // skip edges that stay outside the cutoff support
        let t = ((cut.center - a).dot(seg) / (len * len)).clamp(0.0, 1.0);
        if (a + seg * t).distance(cut.center) >= cut.outer {
            continue;
        }
        let outward = -seg.perp() * (orientation / len);
        let pieces = (2.0 * len / grid.h).ceil().max(1.0) as usize;
        let ds = len / pieces as f64;
        for k in 0..pieces {
            let x = a + seg * ((k as f64 + 0.5) / pieces as f64);
            let (theta, _) = cut.eval(x);
            if theta > 0.0 {
                acc = acc + outward * (j_of(interpolate(w, grid, x)?) * theta * ds);
            }
        }
    }
    Ok(acc)
}

/// Solved state on one placement.
#[derive(Clone, Debug)]
pub struct State {
    pub mask: NodeMask,
    pub w: ScalarField,
    pub report: SolveReport,
}

/// Everything fixed while sensors move: the domain, grid, `eps`, `p`, and
/// the discretization parameters of the gradient.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub poly: Polygon,
    pub grid: Grid,
    pub eps: f64,
    pub p: f64,
    pub solver: SolverOptions,
    pub quadrature: usize,
    pub probe: f64,
    omega: Vec<bool>,
}

impl Pipeline {
    /// Grid over the embedding box of `poly` with spacing `target_h`, probe
    /// offset `2h`, 64 quadrature points.
    pub fn new(poly: &Polygon, target_h: f64, eps: f64, p: f64, solver: SolverOptions) -> Result<Self> {
        check_exponent(p)?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
        }
        let grid = build_grid(&compute_box(poly), target_h)?;
        let omega = omega_mask(&grid, poly);
        Ok(Self {
            poly: poly.clone(),
            probe: DEFAULT_PROBE_CELLS * grid.h,
            grid,
            eps,
            p,
            solver,
            quadrature: DEFAULT_QUADRATURE,
            omega,
        })
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn mask(&self, placement: &Placement) -> Result<NodeMask> {
        classify_with_omega(&self.grid, self.omega.clone(), placement)
    }

    pub fn state(&self, placement: &Placement) -> Result<State> {
        let mask = self.mask(placement)?;
        let (w, report) = solve_state(&self.grid, &mask, self.eps, &self.solver)?;
        Ok(State { mask, w, report })
    }

    pub fn objective_of(&self, state: &State) -> Result<ObjectiveValue> {
        evaluate_objective(&self.grid, &state.mask, self.eps, self.p, &state.w)
    }

    pub fn objective(&self, placement: &Placement) -> Result<ObjectiveValue> {
        self.objective_of(&self.state(placement)?)
    }

    pub fn adjoint_of(&self, state: &State) -> Result<ScalarField> {
        Ok(solve_adjoint(&self.grid, &state.mask, self.eps, self.p, &state.w, &self.solver)?.0)
    }

    /// Adjoint solve plus the volume-form gradient on a solved state.
    pub fn gradient_of(&self, state: &State, placement: &Placement) -> Result<PlacementGradient> {
        let q = self.adjoint_of(state)?;
        volume_gradient(
            &state.w,
            &q,
            &self.grid,
            &state.mask,
            &self.poly,
            placement,
            self.eps,
            self.p,
        )
    }

    pub fn boundary_terms_of(&self, state: &State, placement: &Placement) -> Result<Vec<Vec<BoundaryTerm>>> {
        let q = self.adjoint_of(state)?;
        boundary_terms(
            &state.w,
            &q,
            &self.grid,
            placement,
            self.eps,
            self.p,
            self.quadrature,
            self.probe,
        )
    }

    /// Objective and adjoint gradient: one state and one adjoint solve.
    pub fn evaluate(&self, placement: &Placement) -> Result<(ObjectiveValue, PlacementGradient)> {
        let state = self.state(placement)?;
        Ok((self.objective_of(&state)?, self.gradient_of(&state, placement)?))
    }

    /// Central differences of the objective, `4N` state solves.
    pub fn fd_gradient(&self, placement: &Placement, step: f64) -> Result<PlacementGradient> {
        let coords = placement.coordinates();
        for k in 0..coords.len() {
            for s in [-step, step] {
                let mut c = coords.clone();
                c[k] += s;
                if !is_feasible(&placement.with_coordinates(&c), &self.poly) {
                    return Err(Error::Infeasible(format!(
                        "perturbation {s:+} of coordinate {k} leaves the feasible set"
                    )));
                }
            }
        }
        let flat = central_differences(&coords, step, |c| Ok(self.objective(&placement.with_coordinates(c))?.g))?;
        Ok(PlacementGradient {
            components: flat.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect(),
        })
    }
}

/// `(f(x + s e_k) - f(x - s e_k)) / 2s` for every coordinate `k`.
pub fn central_differences(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step {step} must be positive")));
    }
    let mut out = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        probe[k] = x[k] + step;
        let plus = f(&probe)?;
        probe[k] = x[k] - step;
        let minus = f(&probe)?;
        probe[k] = x[k];
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// Analytic-versus-finite-difference comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientCheck {
    pub analytic: Vec<f64>,
    pub fd: Vec<f64>,
    /// `|analytic - fd| / |fd|` in the Euclidean norm.
    pub relative_error: f64,
    pub cosine: f64,
}

impl GradientCheck {
    pub fn new(analytic: &PlacementGradient, fd: &PlacementGradient) -> Self {
        let (a, f) = (analytic.to_vec(), fd.to_vec());
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = a.iter().zip(&f).map(|(x, y)| x - y).collect();
        let dot: f64 = a.iter().zip(&f).map(|(x, y)| x * y).sum();
        Self {
            relative_error: norm(&diff) / norm(&f),
            cosine: dot / (norm(&a) * norm(&f)),
            analytic: a,
            fd: f,
        }
    }
}

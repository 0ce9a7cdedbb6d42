//! Approximate distance fields `v = -sqrt(eps) ln w` and the checks that go
//! with them: the error against the exact distance, the viscous eikonal
//! residual, and the epsilon sweep.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::compute_box;
use crate::geometry::{exact_distance_to_sensors, Placement, Polygon};
use crate::grid::{build_grid, classify_nodes, discrete_gradient, discrete_laplacian, Grid, NodeMask, ScalarField};
use crate::solver::{solve_state, SolverOptions, W_FLOOR};

/// Distance field recovered from a state solution.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    pub v: ScalarField,
    pub eps: f64,
}

/// `v = -sqrt(eps) ln max(w, w_floor)`.
///
/// Nodes with `w >= 1` (every Dirichlet node) map to exactly `0.0`. Fails
/// when a fluid node inside the domain carries a nonpositive state; outside
/// the domain such values are clamped to the floor.
pub fn log_transform(w: &ScalarField, mask: &NodeMask, eps: f64) -> Result<DistanceField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    if mask.class.len() != w.values.len() {
        return Err(Error::InvalidArgument("field does not match mask".into()));
    }
    let se = eps.sqrt();
    let mut values = Vec::with_capacity(w.values.len());
    for (k, &wk) in w.values.iter().enumerate() {
        if mask.omega_fluid(k) && !(wk > 0.0) {
            return Err(Error::NonPositiveState { node: k, value: wk });
        }
        values.push(distance_value(wk, se));
    }
    Ok(DistanceField {
        v: ScalarField::from_values(w.nx, w.ny, values)?,
        eps,
    })
}

/// Pointwise log transform with `se = sqrt(eps)`.
pub(crate) fn distance_value(w: f64, se: f64) -> f64 {
    if w >= 1.0 {
        0.0
    } else {
        -se * w.max(W_FLOOR).ln()
    }
}

/// Largest `|v - d|` over fluid nodes inside the domain, `d` being the exact
/// distance to the sensor disks.
pub fn sup_error_vs_exact(v: &DistanceField, grid: &Grid, placement: &Placement, mask: &NodeMask) -> f64 {
    (0..grid.len())
        .filter(|&k| mask.omega_fluid(k))
        .map(|k| (v.v.values[k] - exact_distance_to_sensors(grid.node_at(k), placement)).abs())
        .fold(0.0, f64::max)
}

/// Nodes kept by the residual checks: interior fluid nodes inside the
/// domain whose distance to every Dirichlet node is at least `band`.
pub fn retained_nodes(grid: &Grid, mask: &NodeMask, band: f64) -> Vec<bool> {
    let mut keep: Vec<bool> = (0..grid.len()).map(|k| mask.omega_fluid(k)).collect();
    let reach = (band / grid.h).ceil() as isize;
    let band2 = band * band;
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    for j in 0..ny {
        for i in 0..nx {
            let k = (j * nx + i) as usize;
            if mask.is_fluid(k) {
                continue;
            }
            // A Dirichlet node surrounded by Dirichlet nodes is never the
            // nearest one to a fluid node.
            let exposed = [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|&(di, dj)| {
                let (a, b) = (i + di, j + dj);
                a >= 0 && b >= 0 && a < nx && b < ny && mask.is_fluid((b * nx + a) as usize)
            });
            if !exposed {
                continue;
            }
            for b in (j - reach).max(0)..=(j + reach).min(ny - 1) {
                for a in (i - reach).max(0)..=(i + reach).min(nx - 1) {
                    let (dx, dy) = ((a - i) as f64 * grid.h, (b - j) as f64 * grid.h);
                    if dx * dx + dy * dy < band2 {
                        keep[(b * nx + a) as usize] = false;
                    }
                }
            }
        }
    }
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.is_boundary(i, j) {
                keep[grid.index(i, j)] = false;
            }
        }
    }
    keep
}

/// Viscous eikonal residual `1 - |grad_h v|^2 + sqrt(eps) Lap_h v` on the
/// nodes kept by [`retained_nodes`] (zero elsewhere), and its largest
/// magnitude. `band` must be at least `3h`.
pub fn eikonal_residual(v: &DistanceField, grid: &Grid, mask: &NodeMask, band: f64) -> Result<(ScalarField, f64)> {
    if !(band >= 3.0 * grid.h * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "safety band {band} is below 3h = {}",
            3.0 * grid.h
        )));
    }
    let keep = retained_nodes(grid, mask, band);
    let (gx, gy) = discrete_gradient(&v.v, grid);
    let lap = discrete_laplacian(&v.v, grid);
    let se = v.eps.sqrt();
    let mut worst = 0.0f64;
    let values = (0..grid.len())
        .map(|k| {
            if !keep[k] {
                return 0.0;
            }
            let g2 = gx.values[k].powi(2) + gy.values[k].powi(2);
            let res = 1.0 - g2 + se * lap.values[k];
            worst = worst.max(res.abs());
            res
        })
        .collect();
    Ok((ScalarField::from_values(grid.nx, grid.ny, values)?, worst))
}

/// Largest discrete gradient norm `|grad_h v|` over the retained nodes.
pub fn max_gradient_norm(v: &DistanceField, grid: &Grid, keep: &[bool]) -> f64 {
    let (gx, gy) = discrete_gradient(&v.v, grid);
    (0..grid.len())
        .filter(|&k| keep[k])
        .map(|k| gx.values[k].hypot(gy.values[k]))
        .fold(0.0, f64::max)
}

/// One line of the epsilon-sweep report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub h: f64,
    pub sup_error: f64,
    /// Rate constant calibrated at the largest epsilon of the sweep.
    pub c_hat: f64,
    pub residual_max: f64,
}

impl SweepRow {
    /// The rate bound `c_hat * eps^(1/4)` this row is held to.
    pub fn rate_bound(&self) -> f64 {
        self.c_hat * self.eps.powf(0.25)
    }
}

/// Safety band used by the residual checks, in cells.
pub const SAFETY_BAND_CELLS: f64 = 4.0;

/// Solves the state for each `eps` on one grid and records the sup error
/// and the eikonal residual. Rows come back in the order of `eps_list`;
/// `c_hat` is `sup_error / eps^(1/4)` at the largest epsilon.
pub fn epsilon_sweep(
    poly: &Polygon,
    placement: &Placement,
    target_h: f64,
    eps_list: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<SweepRow>> {
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("empty epsilon list".into()));
    }
    let grid = build_grid(&compute_box(poly), target_h)?;
    let mask = classify_nodes(&grid, poly, placement)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (w, _) = solve_state(&grid, &mask, eps, opts)?;
        let v = log_transform(&w, &mask, eps)?;
        let (_, residual_max) = eikonal_residual(&v, &grid, &mask, SAFETY_BAND_CELLS * grid.h)?;
        rows.push(SweepRow {
            eps,
            h: grid.h,
            sup_error: sup_error_vs_exact(&v, &grid, placement, &mask),
            c_hat: f64::NAN,
            residual_max,
        });
    }
    let anchor = rows
        .iter()
        .max_by(|a, b| a.eps.total_cmp(&b.eps))
        .copied()
        .expect("nonempty");
    let c_hat = anchor.sup_error / anchor.eps.powf(0.25);
    for row in &mut rows {
        row.c_hat = c_hat;
    }
    Ok(rows)
}

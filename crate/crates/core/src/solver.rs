//! Screened Poisson solves `u - eps * Lap u = s` on the fluid nodes of a
//! grid, with Dirichlet values on sensor and outer nodes eliminated into the
//! right-hand side.
//!
//! The five-point operator with Dirichlet elimination is a symmetric
//! M-matrix, solved by conjugate gradients with a diagonal preconditioner.
//! All reductions run in a fixed row-major order, so results are bitwise
//! reproducible.

use log::warn;

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Grid, NodeClass, NodeMask, ScalarField};

/// Lower clamp for the state before taking logarithms.
pub const W_FLOOR: f64 = 1e-290;

pub const DEFAULT_TOL: f64 = 1e-10;

const COMPONENTWISE_CHECK_EVERY: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target `|b - Au| <= tol * |b|`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 * (nx + ny)`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
            preconditioner: Preconditioner::default(),
        }
    }
}

impl SolverOptions {
    pub fn max_iter_for(&self, grid: &Grid) -> usize {
        self.max_iter.unwrap_or(10 * (grid.nx + grid.ny))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual `|b - Au| / |b|`.
    pub residual: f64,
    pub converged: bool,
}

impl SolveReport {
    pub fn check(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

/// One screened Poisson problem on a classified grid.
#[derive(Clone, Copy, Debug)]
pub struct LinearProblem<'a> {
    pub grid: &'a Grid,
    pub mask: &'a NodeMask,
    pub eps: f64,
    /// Right-hand side on fluid nodes; `None` is the zero source.
    pub source: Option<&'a ScalarField>,
    pub sensor_value: f64,
    pub outer_value: f64,
}

impl LinearProblem<'_> {
    fn dirichlet_value(&self, class: NodeClass) -> f64 {
        match class {
            NodeClass::SensorDirichlet => self.sensor_value,
            NodeClass::OuterDirichlet => self.outer_value,
            NodeClass::Fluid => 0.0,
        }
    }
}

/// Preconditioner for the conjugate gradient iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Preconditioner {
    /// Diagonal scaling.
    Jacobi,
    /// Modified incomplete Cholesky with zero fill.
    #[default]
    Mic,
}

/// Matrix-free operator `I - eps * Lap_h` restricted to fluid nodes.
pub(crate) struct ScreenedOperator {
    nx: usize,
    #[cfg(test)]
    ny: usize,
    fluid: Vec<bool>,
    diag: f64,
    off: f64,
    /// Extra diagonal on cut nodes as `(column, value)`, grouped by row;
    /// row `j` owns `cuts[cut_rows[j]..cut_rows[j + 1]]`.
    cuts: Vec<(usize, f64)>,
    cut_rows: Vec<usize>,
}

impl ScreenedOperator {
    pub(crate) fn new(grid: &Grid, mask: &NodeMask, eps: f64) -> Self {
        let c = eps / (grid.h * grid.h);
        // A link cut at fraction theta: ghost value extrapolated linearly
        // through the circle, which keeps the matrix symmetric and adds
        // c (1/theta - 1) to the diagonal.
        let cuts = mask
            .cuts
            .iter()
            .map(|cut| (cut.node % grid.nx, c * (cut.inv_theta - cut.links as f64)))
            .collect();
        let mut cut_rows = vec![0; grid.ny + 1];
        for cut in &mask.cuts {
            cut_rows[cut.node / grid.nx + 1] += 1;
        }
        for j in 0..grid.ny {
            cut_rows[j + 1] += cut_rows[j];
        }
        Self {
            nx: grid.nx,
            #[cfg(test)]
            ny: grid.ny,
            fluid: mask.class.iter().map(|&k| k == NodeClass::Fluid).collect(),
            diag: 1.0 + 4.0 * c,
            off: c,
            cuts,
            cut_rows,
        }
    }

    fn row_cuts(&self, j: usize) -> &[(usize, f64)] {
        &self.cuts[self.cut_rows[j]..self.cut_rows[j + 1]]
    }

    /// `out = A p` on fluid nodes, zero elsewhere. `p` must vanish on
    /// non-fluid nodes.
    #[cfg(test)]
    pub(crate) fn apply(&self, p: &[f64], out: &mut [f64]) {
        let nx = self.nx;
        out.fill(0.0);
        for j in 1..self.ny - 1 {
            for k in j * nx + 1..(j + 1) * nx - 1 {
                if self.fluid[k] {
                    out[k] = self.diag * p[k] - self.off * (p[k - 1] + p[k + 1] + p[k - nx] + p[k + nx]);
                }
            }
            for &(i, e) in self.row_cuts(j) {
                out[j * nx + i] += e * p[j * nx + i];
            }
        }
    }

    /// Inverse pivots of the preconditioner, zero on non-fluid nodes. The
    /// zeros double as the fluid mask inside the iteration kernels.
    fn inverse_pivots(&self, kind: Preconditioner) -> Vec<f32> {
        let (nx, c) = (self.nx, self.off);
        let fluid = &self.fluid;
        match kind {
            Preconditioner::Jacobi => {
                let inv = (1.0 / self.diag) as f32;
                let mut out: Vec<f32> = fluid.iter().map(|&f| if f { inv } else { 0.0 }).collect();
                for j in 0..self.cut_rows.len() - 1 {
                    for &(i, e) in self.row_cuts(j) {
                        out[j * nx + i] = (1.0 / (self.diag + e)) as f32;
                    }
                }
                out
            }
            Preconditioner::Mic => {
                // Couplings to the east and north neighbours.
                let east = |k: usize| if fluid[k] && fluid[k + 1] { c } else { 0.0 };
                let north = |k: usize| if fluid[k] && fluid[k + nx] { c } else { 0.0 };
                let mut d = vec![0.0f64; fluid.len()];
                let mut inv = vec![0.0f32; fluid.len()];
                let mut extra = self.cuts.iter().enumerate().map(|(n, &(i, e))| {
                    let j = self.cut_rows.partition_point(|&s| s <= n) - 1;
                    (j * nx + i, e)
                });
                let mut next_cut = extra.next();
                for k in nx..fluid.len() - nx {
                    if !fluid[k] {
                        continue;
                    }
                    let mut dk = self.diag;
                    if let Some((kc, e)) = next_cut {
                        if kc == k {
                            dk += e;
                            next_cut = extra.next();
                        }
                    }
                    let (w, s) = (k - 1, k - nx);
                    let cw = east(w);
                    if cw != 0.0 {
                        dk -= cw * (cw + north(w)) / d[w];
                    }
                    let cs = north(s);
                    if cs != 0.0 {
                        dk -= cs * (cs + east(s)) / d[s];
                    }
                    // Pivots stay above the interior fixed point (a + sqrt(1 + 8c)) / 2 > 1.
                    d[k] = dk;
                    inv[k] = (1.0 / dk) as f32;
                }
                inv
            }
        }
    }
}

/// Dot product with eight interleaved partial sums, so the loop
/// vectorizes while the summation order stays fixed.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (xa, xb) in ca.zip(cb) {
        for l in 0..8 {
            lanes[l] += xa[l] * xb[l];
        }
    }
    pairwise_sum(&lanes) + tail
}

fn dot_rows(a: &[f64], b: &[f64], nx: usize, row_buf: &mut [f64]) -> f64 {
    for (j, (ra, rb)) in a.chunks_exact(nx).zip(b.chunks_exact(nx)).enumerate() {
        row_buf[j] = dot(ra, rb);
    }
    pairwise_sum(row_buf)
}

/// `<v, A v>` over one interior row given the rows below, at and above it,
/// counting only entries with a nonzero inverse pivot.
fn energy_row(
    a: f64,
    c: f64,
    below: &[f64],
    row: &[f64],
    above: &[f64],
    inv: &[f32],
    cuts: &[(usize, f64)],
    buf: &mut [f64],
) -> f64 {
    stencil_row(a, c, below, row, above, inv, cuts, buf);
    dot(row, buf)
}

/// `q = A p` on one interior row given the rows below, at and above it.
/// Entries with a zero inverse pivot (non-fluid) are set to zero.
fn stencil_row(
    a: f64,
    c: f64,
    below: &[f64],
    row: &[f64],
    above: &[f64],
    inv: &[f32],
    cuts: &[(usize, f64)],
    q: &mut [f64],
) {
    let n = q.len();
    assert!(below.len() == n && row.len() == n && above.len() == n && inv.len() == n);
    q[0] = 0.0;
    q[n - 1] = 0.0;
    for i in 1..n - 1 {
        let v = a * row[i] - c * ((row[i - 1] + row[i + 1]) + (below[i] + above[i]));
        q[i] = if inv[i] != 0.0 { v } else { 0.0 };
    }
    for &(i, e) in cuts {
        q[i] += e * row[i];
    }
}

/// Rows per wavefront block in the triangular sweeps.
const SWEEP_BLOCK: usize = 8;

/// Forward substitution `z = D^-1 (r + c z_west + c z_south)` over a block
/// of consecutive rows, given the finished row `below` the block.
///
/// Row `l` of the block runs `l` columns behind row `l - 1`, so the
/// recurrences of different rows are independent at each step and their
/// latencies overlap. Every node sees the same arithmetic as a plain
/// row-by-row sweep.
fn forward_rows(c: f64, r: &[f64], below: &[f64], inv: &[f32], z: &mut [f64]) {
    let nx = below.len();
    let m = z.len() / nx;
    debug_assert!(m <= SWEEP_BLOCK && r.len() == z.len() && inv.len() == z.len());
    // lane[l]: last value produced on row l; it is also the south value
    // row l + 1 needs on the next step.
    let mut lane = [0.0; SWEEP_BLOCK];
    let ragged = |lane: &mut [f64; SWEEP_BLOCK], z: &mut [f64], steps: std::ops::Range<usize>| {
        for step in steps {
            let prev = *lane;
            for l in step.saturating_sub(nx - 1)..m.min(step + 1) {
                let i = step - l;
                let k = l * nx + i;
                let south = if l == 0 { below[i] } else { prev[l - 1] };
                let iv = inv[k] as f64;
                let mk = c * iv;
                let v = (r[k] * iv + mk * south) + mk * if i == 0 { 0.0 } else { prev[l] };
                lane[l] = v;
                z[k] = v;
            }
        }
    };
    if m < SWEEP_BLOCK || nx <= SWEEP_BLOCK {
        ragged(&mut lane, z, 0..nx + m - 1);
        return;
    }
    ragged(&mut lane, z, 0..SWEEP_BLOCK);
    {
        let rr: [&[f64]; SWEEP_BLOCK] = std::array::from_fn(|l| &r[l * nx..(l + 1) * nx]);
        let ir: [&[f32]; SWEEP_BLOCK] = std::array::from_fn(|l| &inv[l * nx..(l + 1) * nx]);
        let mut rows = z.chunks_exact_mut(nx);
        let zr: [&mut [f64]; SWEEP_BLOCK] = std::array::from_fn(|_| rows.next().unwrap());
        for step in SWEEP_BLOCK..nx {
            let prev = lane;
            for l in 0..SWEEP_BLOCK {
                let i = step - l;
                let south = if l == 0 { below[i] } else { prev[l - 1] };
                let iv = ir[l][i] as f64;
                let mk = c * iv;
                let v = (rr[l][i] * iv + mk * south) + mk * prev[l];
                lane[l] = v;
                zr[l][i] = v;
            }
        }
    }
    ragged(&mut lane, z, nx..nx + m - 1);
}

/// Backward substitution `z += D^-1 (c z_east + c z_north)` over a block of
/// consecutive rows, given the finished row `above` the block. The mirror
/// image of [`forward_rows`]: lane `l` works on block row `m - 1 - l` from
/// the right end.
fn backward_rows(c: f64, above: &[f64], inv: &[f32], z: &mut [f64]) {
    let nx = above.len();
    let m = z.len() / nx;
    debug_assert!(m <= SWEEP_BLOCK && inv.len() == z.len());
    let mut lane = [0.0; SWEEP_BLOCK];
    let ragged = |lane: &mut [f64; SWEEP_BLOCK], z: &mut [f64], steps: std::ops::Range<usize>| {
        for step in steps {
            let prev = *lane;
            for l in step.saturating_sub(nx - 1)..m.min(step + 1) {
                let i = nx - 1 - (step - l);
                let k = (m - 1 - l) * nx + i;
                let north = if l == 0 { above[i] } else { prev[l - 1] };
                let mk = c * inv[k] as f64;
                let v = (z[k] + mk * north) + mk * if i == nx - 1 { 0.0 } else { prev[l] };
                lane[l] = v;
                z[k] = v;
            }
        }
    };
    if m < SWEEP_BLOCK || nx <= SWEEP_BLOCK {
        ragged(&mut lane, z, 0..nx + m - 1);
        return;
    }
    ragged(&mut lane, z, 0..SWEEP_BLOCK);
    {
        let ir: [&[f32]; SWEEP_BLOCK] = std::array::from_fn(|l| &inv[(m - 1 - l) * nx..(m - l) * nx]);
        let mut rows = z.chunks_exact_mut(nx).rev();
        let zr: [&mut [f64]; SWEEP_BLOCK] = std::array::from_fn(|_| rows.next().unwrap());
        for step in SWEEP_BLOCK..nx {
            let prev = lane;
            for l in 0..SWEEP_BLOCK {
                let i = nx - 1 - (step - l);
                let north = if l == 0 { above[i] } else { prev[l - 1] };
                let mk = c * ir[l][i] as f64;
                let v = (zr[l][i] + mk * north) + mk * prev[l];
                lane[l] = v;
                zr[l][i] = v;
            }
        }
    }
    ragged(&mut lane, z, nx..nx + m - 1);
}

/// Solves the problem by preconditioned conjugate gradients with the
/// default [`Preconditioner`].
///
/// Dirichlet nodes hold their prescribed values exactly. A report with
/// `converged == false` is returned when `max_iter` is exhausted.
pub fn solve_screened_poisson(
    prob: &LinearProblem<'_>,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, SolveReport)> {
    solve_screened_poisson_with(prob, Preconditioner::default(), tol, max_iter)
}

/// As [`solve_screened_poisson`] with an explicit preconditioner.
///
/// Convergence requires both the global relative residual and, on fluid
/// nodes inside the domain and next to it, the componentwise backward error
/// `|r_k| / (|b_k| + d |u_k|)` to drop below `tol`. The second condition is
/// what makes values many decades below the Dirichlet data accurate to a
/// relative tolerance, which the log transform needs.
pub fn solve_screened_poisson_with(
    prob: &LinearProblem<'_>,
    kind: Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, SolveReport)> {
    let grid = prob.grid;
    let mask = prob.mask;
    if !(prob.eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {} must be positive", prob.eps)));
    }
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must lie in (0, 1e-2]")));
    }
    if mask.class.len() != grid.len() || prob.source.is_some_and(|f| f.values.len() != grid.len()) {
        return Err(Error::InvalidArgument("field or mask does not match grid".into()));
    }
    let (n, nx, ny) = (grid.len(), grid.nx, grid.ny);
    let op = ScreenedOperator::new(grid, mask, prob.eps);
    if !op.fluid.iter().any(|&f| f) {
        return Err(Error::InvalidArgument("no fluid nodes to solve for".into()));
    }

    // Dirichlet values and the eliminated right-hand side.
    let mut u: Vec<f64> = mask.class.iter().map(|&class| prob.dirichlet_value(class)).collect();
    let mut b = vec![0.0; n];
    for j in 1..ny - 1 {
        for k in j * nx + 1..(j + 1) * nx - 1 {
            if !op.fluid[k] {
                continue;
            }
            let mut rhs = prob.source.map_or(0.0, |s| s.values[k]);
            for nb in [k - 1, k + 1, k - nx, k + nx] {
                if !op.fluid[nb] {
                    rhs += op.off * u[nb];
                }
            }
            b[k] = rhs;
        }
    }
    for cut in &mask.cuts {
        b[cut.node] += op.off * prob.sensor_value * (cut.inv_theta - cut.links as f64);
    }

    let mut row_buf = vec![0.0; ny];
    let b_norm = dot_rows(&b, &b, nx, &mut row_buf).sqrt();
    if b_norm == 0.0 {
        return Ok((
            ScalarField::from_values(nx, ny, u)?,
            SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        ));
    }

    let inv = op.inverse_pivots(kind);
    let sweep = kind == Preconditioner::Mic;
    let (a, c) = (op.diag, op.off);
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q_row = vec![0.0; nx];
    let mut dot_buf = vec![0.0; ny];

    // First half of z = M^-1 r on rows lo..hi (forward substitution). Rows
    // 0 and ny-1 and every non-fluid node stay zero because their inverse
    // pivots are zero.
    let forward = |z: &mut [f64], r: &[f64], lo: usize, hi: usize| {
        let rows = lo * nx..hi * nx;
        let (done, rest) = z.split_at_mut(lo * nx);
        let zr = &mut rest[..(hi - lo) * nx];
        if sweep {
            forward_rows(c, &r[rows.clone()], &done[(lo - 1) * nx..], &inv[rows], zr);
        } else {
            for ((zk, &rk), &ik) in zr.iter_mut().zip(&r[rows.clone()]).zip(&inv[rows]) {
                *zk = rk * ik as f64;
            }
        }
    };
    let interior = 1..ny - 1;
    let blocks_up: Vec<(usize, usize)> = interior
        .clone()
        .step_by(SWEEP_BLOCK)
        .map(|lo| (lo, (lo + SWEEP_BLOCK).min(ny - 1)))
        .collect();

    for &(lo, hi) in &blocks_up {
        forward(&mut z, &r, lo, hi);
    }
    let mut rr = b_norm * b_norm;
    let mut iterations = 0;
    let target = tol * b_norm;
    // Domain nodes plus a one-node halo, so interpolation across the
    // polygon boundary reads accurate values too.
    let mut checked = mask.in_omega.clone();
    for k in nx + 1..n - nx - 1 {
        checked[k] = [k - nx, k, k + nx]
            .iter()
            .any(|&m| mask.in_omega[m - 1] || mask.in_omega[m] || mask.in_omega[m + 1]);
    }
    let componentwise_ok = |x: &[f64], r: &[f64]| {
        (0..n).all(|k| !checked[k] || r[k].abs() <= tol * (b[k].abs() + a * x[k].abs()).max(W_FLOOR))
    };
    let (mut gamma_old, mut alpha_old) = (0.0, 0.0);

    loop {
        if rr.sqrt() <= target && iterations % COMPONENTWISE_CHECK_EVERY == 0 && componentwise_ok(&x, &r) {
            break;
        }
        if iterations >= max_iter {
            break;
        }
        // Backward substitution completes z, block by block from the top;
        // gamma = <r, z> and delta = <z, A z> ride along, the energy lagging
        // one row behind the finished rows.
        row_buf.fill(0.0);
        dot_buf.fill(0.0);
        for &(lo, hi) in blocks_up.iter().rev() {
            if sweep {
                let (head, tail) = z.split_at_mut(hi * nx);
                backward_rows(c, &tail[..nx], &inv[lo * nx..hi * nx], &mut head[lo * nx..]);
            }
            for j in (lo..hi).rev() {
                let rows = j * nx..(j + 1) * nx;
                row_buf[j] = dot(&r[rows.clone()], &z[rows]);
                let e = j + 1;
                if e < ny - 1 {
                    let er = e * nx..(e + 1) * nx;
                    dot_buf[e] = energy_row(
                        a,
                        c,
                        &z[j * nx..e * nx],
                        &z[er.clone()],
                        &z[(e + 1) * nx..(e + 2) * nx],
                        &inv[er],
                        op.row_cuts(e),
                        &mut q_row,
                    );
                }
            }
        }
        dot_buf[1] = energy_row(
            a,
            c,
            &z[..nx],
            &z[nx..2 * nx],
            &z[2 * nx..3 * nx],
            &inv[nx..2 * nx],
            op.row_cuts(1),
            &mut q_row,
        );
        let gamma = pairwise_sum(&row_buf);
        let delta = pairwise_sum(&dot_buf);
        let (alpha, beta) = if iterations == 0 {
            (gamma / delta, 0.0)
        } else {
            let beta = gamma / gamma_old;
            (gamma / (delta - beta * gamma / alpha_old), beta)
        };
        gamma_old = gamma;
        alpha_old = alpha;

        // p = z + beta p one row ahead; then q = A p, the x and r updates,
        // and the forward half of the next preconditioner solve.
        let update_p = |p: &mut [f64], z: &[f64], j: usize| {
            let rows = j * nx..(j + 1) * nx;
            for (pk, zk) in p[rows.clone()].iter_mut().zip(&z[rows]) {
                *pk = zk + beta * *pk;
            }
        };
        update_p(&mut p, &z, 1);
        for &(lo, hi) in &blocks_up {
            for j in lo..hi {
                if j + 1 < ny - 1 {
                    update_p(&mut p, &z, j + 1);
                }
                let rows = j * nx..(j + 1) * nx;
                stencil_row(
                    a,
                    c,
                    &p[(j - 1) * nx..j * nx],
                    &p[rows.clone()],
                    &p[(j + 1) * nx..(j + 2) * nx],
                    &inv[rows.clone()],
                    op.row_cuts(j),
                    &mut q_row,
                );
                for (xk, pk) in x[rows.clone()].iter_mut().zip(&p[rows.clone()]) {
                    *xk += alpha * pk;
                }
                for (rk, qk) in r[rows.clone()].iter_mut().zip(&q_row) {
                    *rk -= alpha * qk;
                }
                row_buf[j] = dot(&r[rows.clone()], &r[rows]);
            }
            forward(&mut z, &r, lo, hi);
        }
        rr = pairwise_sum(&row_buf);
        iterations += 1;
    }

    let converged = rr.sqrt() <= target && componentwise_ok(&x, &r);
    for k in 0..n {
        if op.fluid[k] {
            u[k] = x[k];
        }
    }
    Ok((
        ScalarField::from_values(nx, ny, u)?,
        SolveReport {
            iterations,
            residual: rr.sqrt() / b_norm,
            converged,
        },
    ))
}

/// Warning text when the boundary layer of width `sqrt(eps)` spans fewer
/// than three cells.
pub fn resolution_warning(grid: &Grid, eps: f64) -> Option<String> {
    (eps.sqrt() < 3.0 * grid.h).then(|| {
        format!(
            "sqrt(eps) = {:.4e} is below 3h = {:.4e}; the boundary layer is under-resolved",
            eps.sqrt(),
            3.0 * grid.h
        )
    })
}

/// State `w`: zero source, value 1 on every Dirichlet node.
pub fn solve_state(grid: &Grid, mask: &NodeMask, eps: f64, opts: &SolverOptions) -> Result<(ScalarField, SolveReport)> {
    if let Some(msg) = resolution_warning(grid, eps) {
        warn!("{msg}");
    }
    let prob = LinearProblem {
        grid,
        mask,
        eps,
        source: None,
        sensor_value: 1.0,
        outer_value: 1.0,
    };
    let (w, report) = solve_screened_poisson_with(&prob, opts.preconditioner, opts.tol, opts.max_iter_for(grid))?;
    report.check()?;
    Ok((w, report))
}

/// Nodewise adjoint source `-(p / w) (-sqrt(eps) ln w)^(p-1)` on fluid
/// nodes inside the domain, zero elsewhere.
pub fn adjoint_source(mask: &NodeMask, eps: f64, p: f64, w: &ScalarField) -> Result<ScalarField> {
    let se = eps.sqrt();
    let mut values = vec![0.0; w.values.len()];
    for (k, slot) in values.iter_mut().enumerate() {
        if !mask.omega_fluid(k) {
            continue;
        }
        let wk = w.values[k];
        if !(wk > 0.0) {
            return Err(Error::NonPositiveState { node: k, value: wk });
        }
        let wc = wk.max(W_FLOOR);
        let v = -se * wc.ln();
        *slot = -(p / wc) * v.max(0.0).powf(p - 1.0);
    }
    ScalarField::from_values(w.nx, w.ny, values)
}

/// Adjoint state `q`: source from [`adjoint_source`], zero on every
/// Dirichlet node.
pub fn solve_adjoint(
    grid: &Grid,
    mask: &NodeMask,
    eps: f64,
    p: f64,
    w: &ScalarField,
    opts: &SolverOptions,
) -> Result<(ScalarField, SolveReport)> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must be >= 1")));
    }
    let source = adjoint_source(mask, eps, p, w)?;
    let prob = LinearProblem {
        grid,
        mask,
        eps,
        source: Some(&source),
        sensor_value: 0.0,
        outer_value: 0.0,
    };
    let (q, report) = solve_screened_poisson_with(&prob, opts.preconditioner, opts.tol, opts.max_iter_for(grid))?;
    report.check()?;
    Ok((q, report))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::{compute_box, EmbeddingBox, Placement, Point, Polygon};
    use crate::grid::{build_grid, classify_nodes, classify_with_omega};

    fn unit_box() -> EmbeddingBox {
        EmbeddingBox {
            lower: Point::ORIGIN,
            upper: Point::new(1.0, 1.0),
        }
    }

    fn empty() -> Placement {
        Placement::new(vec![], 0.1).unwrap()
    }

    /// Unit box with every node in the domain and no sensors.
    fn box_problem(h: f64) -> (Grid, NodeMask) {
        let g = build_grid(&unit_box(), h).unwrap();
        let mask = classify_with_omega(&g, vec![true; g.len()], &empty()).unwrap();
        (g, mask)
    }

    /// Square domain with one centered sensor inside its embedding box.
    fn centered_square(h: f64, r: f64) -> (Grid, NodeMask) {
        let sq = Polygon::unit_square();
        let g = build_grid(&compute_box(&sq), h).unwrap();
        let pl = Placement::new(vec![Point::new(0.5, 0.5)], r).unwrap();
        let mask = classify_nodes(&g, &sq, &pl).unwrap();
        (g, mask)
    }

    fn manufactured_error(h: f64) -> (f64, f64) {
        let eps = 0.01;
        let (g, mask) = box_problem(h);
        let exact = |x: Point| 1.0 + (PI * x.x).sin() * (PI * x.y).sin();
        let src = ScalarField::from_fn(&g, |x| {
            1.0 + (1.0 + 2.0 * PI * PI * eps) * (PI * x.x).sin() * (PI * x.y).sin()
        });
        let prob = LinearProblem {
            grid: &g,
            mask: &mask,
            eps,
            source: Some(&src),
            sensor_value: 1.0,
            outer_value: 1.0,
        };
        let (u, rep) = solve_screened_poisson(&prob, 1e-12, 10_000).unwrap();
        assert!(rep.converged);
        let err = (0..g.len())
            .map(|k| (u.values[k] - exact(g.node_at(k))).abs())
            .fold(0.0, f64::max);
        let mid = g.len() / 2;
        assert_eq!(g.node_at(mid), Point::new(0.5, 0.5));
        (err, u.values[mid])
    }

    #[test]
    fn constant_source_gives_constant_solution() {
        let (g, mask) = box_problem(1.0 / 16.0);
        let ones = ScalarField::constant(&g, 1.0);
        for kind in [Preconditioner::Jacobi, Preconditioner::Mic] {
            let prob = LinearProblem {
                grid: &g,
                mask: &mask,
                eps: 0.05,
                source: Some(&ones),
                sensor_value: 1.0,
                outer_value: 1.0,
            };
            let (u, rep) = solve_screened_poisson_with(&prob, kind, 1e-12, 1000).unwrap();
            assert!(rep.converged);
            assert!(u.values.iter().all(|v| (v - 1.0).abs() < 1e-12), "{kind:?}");
        }
    }

    #[test]
    fn manufactured_solution_is_second_order() {
        let (e64, mid64) = manufactured_error(1.0 / 64.0);
        let (e128, mid128) = manufactured_error(1.0 / 128.0);
        assert!(e64 / e128 >= 3.5, "ratio {}", e64 / e128);
        // The centre value carries the O(h^2) error of the whole field.
        assert!((mid64 - 2.0).abs() <= e64 + 1e-12);
        assert!((mid128 - 2.0).abs() < 1e-3);
    }

    #[test]
    fn maximum_principle_for_state() {
        let (g, mask) = centered_square(1.0 / 64.0, 0.1);
        let (w, _) = solve_state(&g, &mask, 4e-3, &SolverOptions::default()).unwrap();
        for k in 0..g.len() {
            if mask.is_fluid(k) {
                assert!(w.values[k] > 0.0 && w.values[k] < 1.0, "node {k}: {}", w.values[k]);
            } else {
                assert_eq!(w.values[k], 1.0);
            }
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let (g, mask) = centered_square(1.0 / 32.0, 0.1);
        let op = ScreenedOperator::new(&g, &mask, 1e-3);
        assert_eq!((op.nx, op.ny), (g.nx, g.ny));
        assert!(!op.cuts.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut random = || -> Vec<f64> {
            (0..g.len())
                .map(|k| if op.fluid[k] { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect()
        };
        for _ in 0..5 {
            let (u, v) = (random(), random());
            let (mut au, mut av) = (vec![0.0; g.len()], vec![0.0; g.len()]);
            op.apply(&u, &mut au);
            op.apply(&v, &mut av);
            let lhs: f64 = au.iter().zip(&v).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(&av).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
        }
    }

    #[test]
    fn error_energy_norm_is_monotone() {
        let (g, mask) = centered_square(1.0 / 32.0, 0.1);
        let prob = LinearProblem {
            grid: &g,
            mask: &mask,
            eps: 1e-2,
            source: None,
            sensor_value: 1.0,
            outer_value: 1.0,
        };
        let op = ScreenedOperator::new(&g, &mask, prob.eps);
        for kind in [Preconditioner::Jacobi, Preconditioner::Mic] {
            let (exact, rep) = solve_screened_poisson_with(&prob, kind, 1e-13, 10_000).unwrap();
            assert!(rep.converged);
            let mut last = f64::INFINITY;
            for k in 1..rep.iterations.min(40) {
                let (u, _) = solve_screened_poisson_with(&prob, kind, 1e-13, k).unwrap();
                let e: Vec<f64> = (0..g.len())
                    .map(|i| {
                        if op.fluid[i] {
                            u.values[i] - exact.values[i]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let mut ae = vec![0.0; g.len()];
                op.apply(&e, &mut ae);
                let energy: f64 = e.iter().zip(&ae).map(|(a, b)| a * b).sum();
                assert!(
                    energy <= last * (1.0 + 1e-9),
                    "{kind:?} iteration {k}: {energy} > {last}"
                );
                last = energy;
            }
        }
    }

    #[test]
    fn preconditioners_agree() {
        let (g, mask) = centered_square(1.0 / 64.0, 0.1);
        let opts = |preconditioner| SolverOptions {
            preconditioner,
            ..SolverOptions::default()
        };
        let (wj, rj) = solve_state(&g, &mask, 1e-3, &opts(Preconditioner::Jacobi)).unwrap();
        let (wm, rm) = solve_state(&g, &mask, 1e-3, &opts(Preconditioner::Mic)).unwrap();
        assert!(rm.iterations < rj.iterations);
        for k in 0..g.len() {
            if mask.omega_fluid(k) {
                let rel = (wj.values[k] - wm.values[k]).abs() / wm.values[k];
                assert!(rel < 1e-8, "node {k}: relative difference {rel}");
            }
        }
    }

    #[test]
    fn far_field_has_relative_accuracy() {
        // Against a much tighter solve, values many decades below 1 must
        // still agree to a relative tolerance.
        let (g, mask) = centered_square(1.0 / 64.0, 0.1);
        let eps = 4e-4;
        let (w, _) = solve_state(&g, &mask, eps, &SolverOptions::default()).unwrap();
        let tight = SolverOptions {
            tol: 1e-14,
            ..SolverOptions::default()
        };
        let (wt, _) = solve_state(&g, &mask, eps, &tight).unwrap();
        let smallest = (0..g.len())
            .filter(|&k| mask.omega_fluid(k))
            .map(|k| wt.values[k])
            .fold(1.0, f64::min);
        assert!(smallest < 1e-8, "test needs a deep far field, got {smallest}");
        for k in (0..g.len()).filter(|&k| mask.omega_fluid(k)) {
            let rel = (w.values[k] - wt.values[k]).abs() / wt.values[k];
            assert!(rel < 1e-6, "node {k}: relative difference {rel}");
        }
    }

    #[test]
    fn weak_screening_is_nearly_constant() {
        let sq = Polygon::unit_square();
        let (g, mask) = centered_square(1.0 / 32.0, 0.1);
        let eps = sq.diameter().powi(2);
        let (w, _) = solve_state(&g, &mask, eps, &SolverOptions::default()).unwrap();
        let dev = (0..g.len())
            .filter(|&k| mask.is_fluid(k))
            .map(|k| 1.0 - w.values[k])
            .fold(0.0, f64::max);
        assert!(dev <= 0.5, "max deviation {dev}");
    }

    #[test]
    fn resolution_warning_policy() {
        let (g, mask) = centered_square(1.0 / 32.0, 0.1);
        assert!(resolution_warning(&g, 1e-2).is_none());
        let eps = 1e-4;
        assert!(resolution_warning(&g, eps).is_some());
        let (_, rep) = solve_state(&g, &mask, eps, &SolverOptions::default()).unwrap();
        assert!(rep.converged);
    }

    #[test]
    fn non_convergence_is_reported() {
        let (g, mask) = centered_square(1.0 / 32.0, 0.1);
        let opts = SolverOptions {
            max_iter: Some(2),
            ..SolverOptions::default()
        };
        assert!(matches!(
            solve_state(&g, &mask, 1e-3, &opts),
            Err(Error::NotConverged { iterations: 2, .. })
        ));
    }

    #[test]
    fn invalid_arguments() {
        let (g, mask) = box_problem(0.25);
        let prob = |eps| LinearProblem {
            grid: &g,
            mask: &mask,
            eps,
            source: None,
            sensor_value: 1.0,
            outer_value: 1.0,
        };
        assert!(solve_screened_poisson(&prob(0.0), 1e-10, 10).is_err());
        assert!(solve_screened_poisson(&prob(1e-2), 0.5, 10).is_err());
        let all_outer = NodeMask {
            class: vec![NodeClass::OuterDirichlet; g.len()],
            in_omega: vec![true; g.len()],
            cuts: Vec::new(),
        };
        let p = LinearProblem {
            mask: &all_outer,
            ..prob(1e-2)
        };
        assert!(solve_screened_poisson(&p, 1e-10, 10).is_err());
    }

    #[test]
    fn adjoint_is_nonpositive() {
        let (g, mask) = centered_square(1.0 / 128.0, 0.1);
        let eps = 1e-3;
        let opts = SolverOptions::default();
        let (w, _) = solve_state(&g, &mask, eps, &opts).unwrap();
        for p in [1.0, 2.0, 10.0] {
            let src = adjoint_source(&mask, eps, p, &w).unwrap();
            let (q, _) = solve_adjoint(&g, &mask, eps, p, &w, &opts).unwrap();
            // Outside the domain the solve is accurate in the absolute sense
            // only, so the sign holds up to the solver tolerance there.
            let scale = q.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..g.len() {
                if !mask.is_fluid(k) {
                    assert_eq!(q.values[k], 0.0);
                } else {
                    let bound = if mask.in_omega[k] { 0.0 } else { opts.tol * scale };
                    assert!(q.values[k] <= bound, "p={p} node {k}: {}", q.values[k]);
                    assert!(src.values[k] <= 0.0);
                    if p == 1.0 && mask.in_omega[k] {
                        assert_eq!(src.values[k], -1.0 / w.values[k]);
                        assert!(q.values[k] < 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn adjoint_source_vanishes_for_unit_state() {
        let (g, mask) = centered_square(1.0 / 32.0, 0.1);
        let w = ScalarField::constant(&g, 1.0);
        let src = adjoint_source(&mask, 1e-3, 2.0, &w).unwrap();
        assert!(src.values.iter().all(|&v| v == 0.0));
        let (q, _) = solve_adjoint(&g, &mask, 1e-3, 2.0, &w, &SolverOptions::default()).unwrap();
        assert!(q.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_rejects_nonpositive_state() {
        let (g, mask) = centered_square(1.0 / 32.0, 0.1);
        let mut w = ScalarField::constant(&g, 0.5);
        let k = (0..g.len()).find(|&k| mask.omega_fluid(k)).unwrap();
        w.values[k] = 0.0;
        assert!(matches!(adjoint_source(&mask, 1e-3, 2.0, &w), Err(Error::NonPositiveState { node, .. }) if node == k));
        assert!(solve_adjoint(&g, &mask, 1e-3, 0.5, &w, &SolverOptions::default()).is_err());
    }

    /// `K0(x) = int_0^inf exp(-x cosh t) dt` by the trapezoid rule, which
    /// converges geometrically for this integrand.
    fn bessel_k0(x: f64) -> f64 {
        let top = (700.0 / x).acosh();
        let n = 4000;
        let dt = top / n as f64;
        let sum: f64 = (1..n).map(|i| (-x * (i as f64 * dt).cosh()).exp()).sum();
        dt * (0.5 * (-x).exp() + sum)
    }

    /// Max error against the free-space radial solution
    /// `K0(s / sqrt(eps)) / K0(r / sqrt(eps))` within 0.3 of the circle.
    fn radial_error(h: f64, staircase: bool) -> f64 {
        let (eps, r) = (1e-2, 0.2);
        let (g, mask) = centered_square(h, r);
        let mask = if staircase { mask.staircase() } else { mask };
        let (w, rep) = solve_state(&g, &mask, eps, &SolverOptions::default()).unwrap();
        assert!(rep.converged);
        let se = eps.sqrt();
        let scale = bessel_k0(r / se);
        let c = Point::new(0.5, 0.5);
        (0..g.len())
            .filter(|&k| mask.is_fluid(k) && g.node_at(k).distance(c) <= r + 0.3)
            .map(|k| (w.values[k] - bessel_k0(g.node_at(k).distance(c) / se) / scale).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_k0(1.0) - 0.421_024_438_240_708_3).abs() < 1e-13);
        assert!((bessel_k0(2.0) - 0.113_893_872_749_533_4).abs() < 1e-13);
    }

    #[test]
    fn cut_links_converge_at_second_order_around_a_sensor() {
        let cut: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
            .iter()
            .map(|&h| radial_error(h, false))
            .collect();
        let stair = radial_error(1.0 / 128.0, true);
        assert!(cut[0] / cut[1] >= 3.0 && cut[1] / cut[2] >= 3.0, "{cut:?}");
        assert!(cut[2] * 4.0 <= stair, "cut {} vs staircase {stair}", cut[2]);
    }

    #[test]
    fn objective_data_move_continuously_with_the_sensor() {
        // At h = 1/32 the circle of radius 8h about a node passes through
        // four nodes; a 1e-7 shift drops one of them from the sensor.
        let g = build_grid(&unit_box(), 1.0 / 32.0).unwrap();
        let omega = vec![true; g.len()];
        let solve = |x: f64, staircase: bool| {
            let pl = Placement::new(vec![Point::new(x, 0.5)], 0.25).unwrap();
            let mut mask = classify_with_omega(&g, omega.clone(), &pl).unwrap();
            if staircase {
                mask = mask.staircase();
            }
            let (w, _) = solve_state(&g, &mask, 1e-2, &SolverOptions::default()).unwrap();
            (0..g.len())
                .filter(|&k| mask.is_fluid(k))
                .map(|k| 1.0 - w.values[k])
                .sum::<f64>()
        };
        let jump = |staircase| (solve(0.5, staircase) - solve(0.5 - 1e-7, staircase)).abs();
        let (cut, stair) = (jump(false), jump(true));
        assert!(cut <= 1e-3, "{cut}");
        assert!(stair >= 1e3 * cut, "staircase {stair} vs cut {cut}");
    }
}

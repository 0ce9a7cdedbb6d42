//! Uniform Cartesian grids over the embedding box, node classification,
//! interpolation and nodal quadrature.

use crate::error::{Error, Result};
use crate::geometry::{EmbeddingBox, Placement, Point, Polygon};

/// Rounding allowance for lattice comparisons, in units of the spacing.
const LATTICE_TOL: f64 = 1e-9;

/// Isotropic node lattice. Node `(i, j)` sits at `origin + h * (i, j)` and is
/// stored at flat index `j * nx + i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(self.origin.x + self.h * i as f64, self.origin.y + self.h * j as f64)
    }

    pub fn node_at(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        self.node(i, j)
    }

    pub fn upper(&self) -> Point {
        self.node(self.nx - 1, self.ny - 1)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Inclusive index range of nodes whose coordinate along one axis lies
    /// in `[lo, hi]`, clipped to the grid.
    fn axis_range(&self, origin: f64, n: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let a = ((lo - origin) / self.h - LATTICE_TOL).ceil().max(0.0);
        let b = ((hi - origin) / self.h + LATTICE_TOL).floor().min(n as f64 - 1.0);
        (a <= b).then_some((a as usize, b as usize))
    }

    /// Nodes inside the axis-aligned rectangle `[lo, hi]`.
    pub fn node_range(&self, lo: Point, hi: Point) -> Option<((usize, usize), (usize, usize))> {
        let xi = self.axis_range(self.origin.x, self.nx, lo.x, hi.x)?;
        let yj = self.axis_range(self.origin.y, self.ny, lo.y, hi.y)?;
        Some((xi, yj))
    }
}

/// Grid covering `bbox` with spacing exactly `target_h`; the box is padded
/// symmetrically up to a whole number of cells on each axis.
pub fn build_grid(bbox: &EmbeddingBox, target_h: f64) -> Result<Grid> {
    let (w, hgt) = (bbox.width(), bbox.height());
    if !(target_h > 0.0) || !(target_h <= w.min(hgt) / 2.0) {
        return Err(Error::ResolutionTooCoarse(format!(
            "spacing {target_h} must be positive and leave at least two cells on the shorter box side {}",
            w.min(hgt)
        )));
    }
    let h = target_h;
    let cells_x = (w / h - 1e-6).ceil() as usize;
    let cells_y = (hgt / h - 1e-6).ceil() as usize;
    let cx = 0.5 * (bbox.lower.x + bbox.upper.x);
    let cy = 0.5 * (bbox.lower.y + bbox.upper.y);
    Ok(Grid {
        origin: Point::new(cx - 0.5 * h * cells_x as f64, cy - 0.5 * h * cells_y as f64),
        h,
        nx: cells_x + 1,
        ny: cells_y + 1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum NodeClass {
    Fluid = 0,
    SensorDirichlet = 1,
    OuterDirichlet = 2,
}

/// Fluid node with one or more stencil links into a sensor. Each link
/// crosses the circle at a fraction `theta` of its length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cut {
    pub node: usize,
    pub links: u8,
    /// Sum of `1 / theta` over the links.
    pub inv_theta: f64,
}

/// Smallest link fraction; closer crossings are clamped to it.
pub const MIN_CUT_FRACTION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct NodeMask {
    pub class: Vec<NodeClass>,
    pub in_omega: Vec<bool>,
    /// Fluid nodes next to sensors, sorted by node. Empty means the plain
    /// staircase treatment.
    pub cuts: Vec<Cut>,
}

impl NodeMask {
    pub fn is_fluid(&self, idx: usize) -> bool {
        self.class[idx] == NodeClass::Fluid
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.class.iter().filter(|&&c| c == class).count()
    }

    /// The same classification with the sensor circles snapped to the
    /// staircase of sensor nodes.
    pub fn staircase(mut self) -> Self {
        self.cuts.clear();
        self
    }

    /// Nodes that carry the domain quadrature: inside the polygon and not
    /// covered by a sensor.
    pub fn omega_fluid(&self, idx: usize) -> bool {
        self.in_omega[idx] && self.class[idx] == NodeClass::Fluid
    }
}

/// Per-node polygon membership. Independent of the placement, so callers
/// that re-classify for many placements can compute it once.
pub fn omega_mask(grid: &Grid, poly: &Polygon) -> Vec<bool> {
    let mut inside = vec![false; grid.len()];
    let (lo, hi) = poly.bounding_box();
    if let Some(((i0, i1), (j0, j1))) = grid.node_range(lo, hi) {
        for j in j0..=j1 {
            for i in i0..=i1 {
                inside[grid.index(i, j)] = poly.contains(grid.node(i, j));
            }
        }
    }
    inside
}

pub fn classify_nodes(grid: &Grid, poly: &Polygon, placement: &Placement) -> Result<NodeMask> {
    classify_with_omega(grid, omega_mask(grid, poly), placement)
}

/// Classification given a precomputed [`omega_mask`].
pub fn classify_with_omega(grid: &Grid, in_omega: Vec<bool>, placement: &Placement) -> Result<NodeMask> {
    let r = placement.radius;
    if !placement.is_empty() && r < 3.0 * grid.h * (1.0 - LATTICE_TOL) {
        return Err(Error::UnderResolvedSensor {
            radius: r,
            min: 3.0 * grid.h,
        });
    }
    let mut class = vec![NodeClass::Fluid; grid.len()];
    let reach = r * (1.0 + LATTICE_TOL) + LATTICE_TOL * grid.h;
    for ball in placement.balls() {
        let span = Point::new(reach, reach);
        let Some(((i0, i1), (j0, j1))) = grid.node_range(ball.center - span, ball.center + span) else {
            continue;
        };
        for j in j0..=j1 {
            for i in i0..=i1 {
                if grid.node(i, j).distance(ball.center) <= reach {
                    class[grid.index(i, j)] = NodeClass::SensorDirichlet;
                }
            }
        }
    }
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.is_boundary(i, j) {
                class[grid.index(i, j)] = NodeClass::OuterDirichlet;
            }
        }
    }
    let cuts = sensor_cuts(grid, &class, placement, reach);
    Ok(NodeMask { class, in_omega, cuts })
}

/// Fraction of the link from `x` to its neighbour along `dir` (a unit axis
/// vector) that lies outside the ball.
fn link_fraction(x: Point, dir: Point, center: Point, r: f64, h: f64) -> f64 {
    let d = x - center;
    let b = d.dot(dir);
    let disc = (b * b - d.dot(d) + r * r).max(0.0);
    ((-b - disc.sqrt()) / h).clamp(MIN_CUT_FRACTION, 1.0)
}

fn sensor_cuts(grid: &Grid, class: &[NodeClass], placement: &Placement, reach: f64) -> Vec<Cut> {
    let mut cuts = std::collections::BTreeMap::new();
    let dirs = [
        Point::new(-1.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(0.0, -1.0),
        Point::new(0.0, 1.0),
    ];
    let nx = grid.nx as isize;
    let offsets = [-1, 1, -nx, nx];
    for ball in placement.balls() {
        let span = Point::new(ball.radius + 2.0 * grid.h, ball.radius + 2.0 * grid.h);
        let Some(((i0, i1), (j0, j1))) = grid.node_range(ball.center - span, ball.center + span) else {
            continue;
        };
        for j in j0.max(1)..=j1.min(grid.ny - 2) {
            for i in i0.max(1)..=i1.min(grid.nx - 2) {
                let k = grid.index(i, j);
                if class[k] != NodeClass::Fluid {
                    continue;
                }
                let x = grid.node(i, j);
                for (dir, off) in dirs.iter().zip(offsets) {
                    let nb = (k as isize + off) as usize;
                    if class[nb] != NodeClass::SensorDirichlet || grid.node_at(nb).distance(ball.center) > reach {
                        continue;
                    }
                    let theta = link_fraction(x, *dir, ball.center, ball.radius, grid.h);
                    let cut = cuts.entry(k).or_insert(Cut {
                        node: k,
                        links: 0,
                        inv_theta: 0.0,
                    });
                    cut.links += 1;
                    cut.inv_theta += 1.0 / theta;
                }
            }
        }
    }
    cuts.into_values().collect()
}

/// Nodal values on a grid, row-major with `x` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.node_at(idx))).collect();
        Self {
            nx: grid.nx,
            ny: grid.ny,
            values,
        }
    }

    pub fn from_values(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {nx}x{ny} field",
                values.len()
            )));
        }
        Ok(Self { nx, ny, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.nx)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    fn matches(&self, grid: &Grid) -> bool {
        self.nx == grid.nx && self.ny == grid.ny
    }
}

/// Bilinear interpolation from the four nodes of the enclosing cell.
pub fn interpolate(field: &ScalarField, grid: &Grid, x: Point) -> Result<f64> {
    debug_assert!(field.matches(grid));
    let s = (x.x - grid.origin.x) / grid.h;
    let t = (x.y - grid.origin.y) / grid.h;
    let (mx, my) = ((grid.nx - 1) as f64, (grid.ny - 1) as f64);
    if !(s >= -LATTICE_TOL && t >= -LATTICE_TOL && s <= mx + LATTICE_TOL && t <= my + LATTICE_TOL) {
        return Err(Error::OutsideGrid { x: x.x, y: x.y });
    }
    // Points within rounding distance of a lattice line sit on it.
    let snap = |u: f64, top: f64| {
        let near = u.round();
        (if (u - near).abs() <= LATTICE_TOL { near } else { u }).clamp(0.0, top)
    };
    let (s, t) = (snap(s, mx), snap(t, my));
    let i = (s.floor() as usize).min(grid.nx - 2);
    let j = (t.floor() as usize).min(grid.ny - 2);
    let (fx, fy) = (s - i as f64, t - j as f64);
    let v00 = field.get(i, j);
    let v10 = field.get(i + 1, j);
    let v01 = field.get(i, j + 1);
    let v11 = field.get(i + 1, j + 1);
    Ok((1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11))
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Row-major reduction: each row summed left to right, rows combined
/// pairwise.
pub fn reduce_rows(nx: usize, ny: usize, mut term: impl FnMut(usize) -> f64) -> f64 {
    let row_sums: Vec<f64> = (0..ny).map(|j| (0..nx).map(|i| term(j * nx + i)).sum()).collect();
    pairwise_sum(&row_sums)
}

/// `h^2` times the sum of `field` over nodes inside the domain that are
/// not covered by a sensor.
pub fn integrate_masked(field: &ScalarField, grid: &Grid, mask: &NodeMask) -> f64 {
    debug_assert!(field.matches(grid));
    let h2 = grid.h * grid.h;
    h2 * reduce_rows(grid.nx, grid.ny, |idx| {
        if mask.omega_fluid(idx) {
            field.values[idx]
        } else {
            0.0
        }
    })
}

/// Central-difference gradient; zero on grid boundary nodes.
pub fn discrete_gradient(field: &ScalarField, grid: &Grid) -> (ScalarField, ScalarField) {
    let mut gx = ScalarField::zeros(grid);
    let mut gy = ScalarField::zeros(grid);
    let inv = 0.5 / grid.h;
    let nx = grid.nx;
    for j in 1..grid.ny.saturating_sub(1) {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            gx.values[k] = (field.values[k + 1] - field.values[k - 1]) * inv;
            gy.values[k] = (field.values[k + nx] - field.values[k - nx]) * inv;
        }
    }
    (gx, gy)
}

/// Five-point Laplacian; zero on grid boundary nodes.
pub fn discrete_laplacian(field: &ScalarField, grid: &Grid) -> ScalarField {
    let mut lap = ScalarField::zeros(grid);
    let inv = 1.0 / (grid.h * grid.h);
    let nx = grid.nx;
    let v = &field.values;
    for j in 1..grid.ny.saturating_sub(1) {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            lap.values[k] = (v[k + 1] + v[k - 1] + v[k + nx] + v[k - nx] - 4.0 * v[k]) * inv;
        }
    }
    lap
}

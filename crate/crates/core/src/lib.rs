//! Placement of circular sensors in a polygon.
//!
//! The distance from a point to the nearest sensor is approximated by
//! `v = -sqrt(eps) ln w`, where `w - eps Lap w = 0` on a box around the
//! domain with `w = 1` on the sensors and on the box edge. Sensor centers
//! are then moved by projected gradient descent on
//! `g = int_Omega v^p`, with the gradient from one adjoint solve.
//!
//! Modules, bottom up:
//!
//! - [`geometry`]: polygons, signed distance, feasibility and projection.
//! - [`grid`]: the uniform grid, node classes and nodal fields.
//! - [`solver`]: preconditioned conjugate gradients for the state and adjoint.
//! - [`varadhan`]: the log transform and its error checks.
//! - [`objective_gradient`]: `g`, its adjoint gradient and a finite-difference check.
//! - [`optimizer`]: descent and multistart.
//! - [`cli_io`]: config files, run modes and exported artifacts.
//!
//! ```no_run
//! use sensor_place::geometry::{Point, Polygon};
//! use sensor_place::optimizer::{multistart, DescentConfig};
//!
//! let disk = Polygon::regular(Point::ORIGIN, 1.0, 256)?;
//! let cfg = DescentConfig::new(2.0, 4e-3, 1.0 / 48.0);
//! let best = multistart(&cfg, &disk, 0.25, 1, 5)?;
//! println!("{:?}", best.best_placement().centers);
//! # Ok::<(), sensor_place::Error>(())
//! ```

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod cli_io;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod objective_gradient;
pub mod optimizer;
pub mod solver;
pub mod varadhan;

pub use error::{Error, Result};

// Adjoint gradient of the placement objective against central
// differences, for an off-center sensor.

use sensor_place::geometry::{Placement, Point, Polygon};
use sensor_place::objective_gradient::{GradientCheck, Pipeline};
use sensor_place::solver::SolverOptions;

pub fn run_example() -> sensor_place::Result<()> {
    let disk = Polygon::regular(Point::ORIGIN, 1.0, 256)?;
    let at = Placement::new(vec![Point::new(0.2, 0.1)], 0.25)?;

    for p in [1.0, 2.0, 10.0] {
        let pipe = Pipeline::new(&disk, 1.0 / 64.0, 4e-3, p, SolverOptions::default())?;
        let (value, grad) = pipe.evaluate(&at)?;
        let fd = pipe.fd_gradient(&at, 2.0 * pipe.h())?;
        let check = GradientCheck::new(&grad, &fd);
        println!(
            "p = {p:>4}: g = {:.5}, adjoint {:?}, differences {:?}, rel {:.1e}, cos {:.6}",
            value.g, check.analytic, check.fd, check.relative_error, check.cosine
        );
        assert!(check.relative_error < 0.1 && check.cosine > 0.99);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

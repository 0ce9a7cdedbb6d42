// How the distance error shrinks with the screening parameter.

use sensor_place::geometry::{Placement, Point, Polygon};
use sensor_place::solver::SolverOptions;
use sensor_place::varadhan::epsilon_sweep;

pub fn run_example() -> sensor_place::Result<()> {
    let disk = Polygon::regular(Point::ORIGIN, 1.0, 256)?;
    let sensor = Placement::new(vec![Point::ORIGIN], 0.25)?;
    let rows = epsilon_sweep(
        &disk,
        &sensor,
        1.0 / 128.0,
        &[1.6e-2, 4e-3, 1e-3],
        &SolverOptions::default(),
    )?;
    println!("{:>8} {:>10} {:>10} {:>10}", "eps", "sup error", "bound", "residual");
    for r in &rows {
        println!(
            "{:>8.1e} {:>10.5} {:>10.5} {:>10.2e}",
            r.eps,
            r.sup_error,
            r.rate_bound(),
            r.residual_max
        );
    }
    assert!(rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

// Multistart descent for one sensor in the unit disk. Every start should
// end at the center.

use sensor_place::geometry::{Point, Polygon};
use sensor_place::optimizer::{multistart, DescentConfig};

pub fn run_example() -> sensor_place::Result<()> {
    let disk = Polygon::regular(Point::ORIGIN, 1.0, 256)?;
    let cfg = DescentConfig {
        seed: 3,
        ..DescentConfig::new(2.0, 4e-3, 1.0 / 32.0)
    };
    let result = multistart(&cfg, &disk, 0.25, 1, 3)?;
    for run in &result.runs {
        let start = run.placements[0].centers[0];
        let end = run.final_placement().centers[0];
        println!(
            "seed {:?}: ({:+.3}, {:+.3}) -> ({:+.4}, {:+.4}) in {} steps, g = {:.5}, {}",
            run.seed,
            start.x,
            start.y,
            end.x,
            end.y,
            run.records.len(),
            run.final_g(),
            run.termination
        );
        assert!(end.norm() < 2.0 * cfg.target_h);
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

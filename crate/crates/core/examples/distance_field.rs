// Distance to one centered sensor in the unit disk, from a single
// screened Poisson solve, compared against the exact distance.
//
// `cargo run --release --example distance_field`

use sensor_place::cli_io::{export_field, FieldFormat};
use sensor_place::geometry::{compute_box, Placement, Point, Polygon};
use sensor_place::grid::{build_grid, classify_nodes, interpolate};
use sensor_place::solver::{solve_state, SolverOptions};
use sensor_place::varadhan::{log_transform, sup_error_vs_exact};

pub fn run_example() -> sensor_place::Result<()> {
    let disk = Polygon::regular(Point::ORIGIN, 1.0, 256)?;
    let sensor = Placement::new(vec![Point::ORIGIN], 0.25)?;
    let eps = 4e-3;
    let grid = build_grid(&compute_box(&disk), 1.0 / 64.0)?;
    let mask = classify_nodes(&grid, &disk, &sensor)?;

    let (w, report) = solve_state(&grid, &mask, eps, &SolverOptions::default())?;
    let v = log_transform(&w, &mask, eps)?;
    println!("{} x {} nodes, {} iterations", grid.nx, grid.ny, report.iterations);

    for s in [0.4, 0.6, 0.8, 1.0] {
        let approx = interpolate(&v.v, &grid, Point::new(s, 0.0))?;
        println!("  s = {s:.1}: v = {approx:.4}, exact {:.4}", s - 0.25);
    }
    let err = sup_error_vs_exact(&v, &grid, &sensor, &mask);
    println!("sup error on the domain: {err:.4}");
    assert!(err < 0.1);

    let out = std::env::temp_dir().join("sensor_place_distance_field");
    std::fs::create_dir_all(&out)?;
    let written = export_field(&v.v, &out.join("v.pgm"), FieldFormat::Pgm16)?;
    println!("wrote {}", written[0].display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

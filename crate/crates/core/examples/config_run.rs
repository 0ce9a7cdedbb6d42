// Runs an experiment from a config file, the same path `place` takes,
// and lists what it wrote.

use std::path::Path;

use sensor_place::cli_io::{run_experiment, ExperimentConfig, Mode};

pub fn run_example() -> sensor_place::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut cfg = ExperimentConfig::from_file(data.join("disk_distance.cfg"))?;
    cfg.h = Some(1.0 / 64.0);
    cfg.out = std::env::temp_dir().join("sensor_place_config_run");

    for mode in [Mode::DistanceField, Mode::GradientCheck] {
        cfg.mode = mode;
        if mode == Mode::GradientCheck {
            cfg.centers = Some(vec![sensor_place::geometry::Point::new(0.2, 0.1)]);
        }
        let manifest = run_experiment(&cfg)?;
        println!("{mode}: {}", manifest.artifacts.join(", "));
        for (key, value) in &manifest.summary {
            println!("  {key} = {value}");
        }
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

// Three sensors in an L-shaped room, one descent from a random start.

use rand::SeedableRng;
use sensor_place::geometry::Polygon;
use sensor_place::optimizer::{descend, random_feasible_placement, DescentConfig};

pub fn run_example() -> sensor_place::Result<()> {
    let room = Polygon::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/l_room.poly"))?;
    let r = 0.15;
    let cfg = DescentConfig::new(2.0, 1e-2, 1.0 / 24.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let start = random_feasible_placement(&room, r, 3, &mut rng)?;

    let run = descend(&cfg, &room, &start)?;
    let first = &run.records[0];
    println!(
        "g: {:.4} -> {:.4} after {} steps ({})",
        first.g,
        run.final_g(),
        run.records.len(),
        run.termination
    );
    for c in &run.final_placement().centers {
        println!("  sensor at ({:.3}, {:.3})", c.x, c.y);
    }
    assert!(run.final_g() <= first.g);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

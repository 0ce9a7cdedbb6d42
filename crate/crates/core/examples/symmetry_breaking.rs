// Two sensors in a rhombus with a nearly sup-norm objective. The best
// descent result is compared with the best mirror-symmetric pair.

use sensor_place::geometry::{is_feasible, Placement, Point, Polygon};
use sensor_place::optimizer::{multistart, DescentConfig};

pub fn run_example() -> sensor_place::Result<()> {
    let rhombus = Polygon::parse("1 0\n0 0.5\n-1 0\n0 -0.5\n")?;
    let r = 0.1;
    let cfg = DescentConfig {
        seed: 11,
        ..DescentConfig::new(10.0, 4e-3, 1.0 / 32.0)
    };
    let pipe = cfg.pipeline(&rhombus)?;

    let mut symmetric = (0.0, f64::INFINITY);
    let mut t = r;
    while t < 1.0 {
        let pair = Placement::new(vec![Point::new(-t, 0.0), Point::new(t, 0.0)], r)?;
        if is_feasible(&pair, &rhombus) {
            let g = pipe.objective(&pair)?.g;
            if g < symmetric.1 {
                symmetric = (t, g);
            }
        }
        t += pipe.h();
    }
    println!("best symmetric pair: t = {:.3}, g = {:.4e}", symmetric.0, symmetric.1);

    let result = multistart(&cfg, &rhombus, r, 2, 4)?;
    let best = result.best_run();
    let c = &best.final_placement().centers;
    println!(
        "best of {} starts: ({:+.3}, {:+.3}) and ({:+.3}, {:+.3}), g = {:.4e}",
        result.runs.len(),
        c[0].x,
        c[0].y,
        c[1].x,
        c[1].y,
        best.final_g()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

//! Train predictor then compensator, and print the held-out parts both ways.
//!
//! cargo run --release --example compensation_loop -- [epochs]

use warpcomp::eval::deviation_report;
use warpcomp::oracle::{simulate_print, WarpSpec};
use warpcomp::synth::bar_dataset;
use warpcomp::trainer::{compensate, iterate_loop, TrainingConfig};

fn main() -> warpcomp::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("epochs"));
    let spec = WarpSpec::default();
    let ds = bar_dataset(&spec, 5.0, 0)?;
    let rounds = iterate_loop(&ds, &TrainingConfig { epochs, ..Default::default() }, 1, None)?;
    let comp = &rounds[0].compensator.engine;
    for s in ds.validation() {
        let before = deviation_report(&s.cad, &simulate_print(&s.cad, &spec)?, &s.graph)?.0;
        let printed = simulate_print(&compensate(s, comp)?, &spec)?;
        let after = deviation_report(&s.cad, &printed, &s.graph)?.0.with_baseline(&before)?;
        println!(
            "part {}: {:.3} -> {:.3} mm ({:.1}% better)",
            s.part_id,
            before.abs_mean,
            after.abs_mean,
            after.improvement.unwrap_or(0.0)
        );
    }
    Ok(())
}

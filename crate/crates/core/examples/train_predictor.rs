//! Fit the deformation predictor on a coarse bar dataset.
//!
//! cargo run --release --example train_predictor -- [epochs]

use warpcomp::oracle::WarpSpec;
use warpcomp::synth::bar_dataset;
use warpcomp::trainer::{train_predictor, TrainingConfig};

fn main() -> warpcomp::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(100, |s| s.parse().expect("epochs"));
    let ds = bar_dataset(&WarpSpec::default(), 5.0, 0)?;
    let out = train_predictor(&ds, &TrainingConfig { epochs, ..Default::default() })?;
    for r in out.history.iter().step_by((epochs / 10).max(1)) {
        let v = r.validation.map_or(f64::NAN, |v| v.total);
        println!("epoch {:>4}  train {:.5}  validation {:.5}", r.epoch, r.train.total, v);
    }
    println!("selected epoch {}", out.best_epoch);
    Ok(())
}

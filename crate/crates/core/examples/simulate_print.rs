//! Print the bar layout through the warp oracle and summarize each part.

use warpcomp::eval::deviation_report;
use warpcomp::oracle::WarpSpec;
use warpcomp::synth::bar_dataset;

fn main() -> warpcomp::Result<()> {
    let spec = WarpSpec::default();
    let ds = bar_dataset(&spec, 4.0, 0)?;
    println!("part split      abs_mean    min     max");
    for s in ds.samples() {
        let (r, _) = deviation_report(&s.cad, &s.scan, &s.graph)?;
        println!("{:>4} {:<10} {:>7.3} {:>7.3} {:>7.3}", s.part_id, s.split.as_str(), r.abs_mean, r.min, r.max);
    }
    Ok(())
}

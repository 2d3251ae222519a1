//! Write a signed deviation heatmap and a report table to a directory.
//!
//! cargo run --release --example heatmap_report -- [out_dir]

use warpcomp::eval::{deviation_report, export_heatmap, read_heatmap, write_report_csv};
use warpcomp::oracle::{simulate_print, WarpSpec};
use warpcomp::synth::bar_dataset;

fn main() -> warpcomp::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "heatmap_out".into()));
    std::fs::create_dir_all(&dir)?;
    let spec = WarpSpec::default();
    let ds = bar_dataset(&spec, 4.0, 0)?;
    let s = &ds.samples()[0];
    let scan = simulate_print(&s.cad, &spec)?;
    let (report, field) = deviation_report(&s.cad, &scan, &s.graph)?;
    let path = dir.join("heatmap.ply");
    export_heatmap(&field, &s.cad, &path)?;
    write_report_csv(&[(format!("part{}", s.part_id), report)], dir.join("report.csv"))?;
    let (_, back, max_abs) = read_heatmap(&path)?;
    println!("{} values, color scale ±{:.3} mm, written to {}", back.len(), max_abs, dir.display());
    Ok(())
}

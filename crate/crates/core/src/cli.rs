//! The `warpcomp` command line.
//!
//! Every run writes `manifest_<command>.txt` into `--out` with the resolved
//! settings, the seed and the SHA-256 of each input, and nothing time dependent.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{deviation_report, export_heatmap, write_report_csv, DeviationReport};
use crate::geometry::TriangleMesh;
use crate::graphnet::{engine_grad_check, Engine, EngineKind, NetworkConfig, PositionEncoding};
use crate::io::{file_sha256, read_cloud_ply, read_obj, write_cloud_ply, Manifest, PlyData};
use crate::oracle::{simulate_print, WarpSpec};
use crate::remesh::{default_voxel_size, isometry_report, remesh, IsoGraph};
use crate::synth::{bar_dataset, bar_mesh, part_seed, BAR_VOXEL_SIZE};
use crate::trainer::{compensate, train_compensator, train_compensator_with, train_predictor, Dataset, ForwardModel, Sample, TrainingOutcome};

/// Largest relative gradient error `gradcheck` accepts.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "warpcomp", version, about = "Predict and compensate print distortion with graph networks")]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// key=value settings file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created when missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct WarpArgs {
    /// Base warp amplitude in mm.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Extra warp factor at the chamber corners.
    #[arg(long)]
    edge_gain: Option<f64>,
    /// Dome wavelength in mm.
    #[arg(long)]
    wavelength: Option<f64>,
    /// Scanner noise standard deviation in mm.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Also save the engine every N epochs under `checkpoints/`.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Re-center each part before it enters the network (position-blind ablation).
    #[arg(long)]
    recentered: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn a triangle mesh into a uniform surface graph (`graph.ply` + `graph.edges`).
    Remesh {
        /// Input mesh, OBJ or PLY with faces.
        #[arg(long, required_unless_present = "bar", conflicts_with = "bar")]
        mesh: Option<PathBuf>,
        /// Use the built-in 100 × 12 × 6 mm bar (voxel size defaults to 2.2 mm).
        #[arg(long)]
        bar: bool,
        #[arg(long)]
        voxel_size: Option<f64>,
    },
    /// Print a cloud through the warp oracle, or build the twelve-bar dataset.
    Simulate {
        /// Placed cloud (PLY) to print; writes `scan.ply`.
        #[arg(long, required_unless_present = "bar_layout", conflicts_with = "bar_layout")]
        cad: Option<PathBuf>,
        /// Write the twelve-bar dataset (`dataset.csv` and per-part PLYs).
        #[arg(long)]
        bar_layout: bool,
        #[arg(long)]
        voxel_size: Option<f64>,
        #[command(flatten)]
        warp: WarpArgs,
    },
    /// Train the predictor on a dataset.
    TrainPredict {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train the compensator through a frozen predictor or the exact oracle.
    TrainCompensate {
        #[arg(long)]
        dataset: PathBuf,
        /// Predictor model file.
        #[arg(long, required_unless_present = "oracle", conflicts_with = "oracle")]
        predictor: Option<PathBuf>,
        /// Train through the analytic warp instead of a learned predictor.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        warp: WarpArgs,
    },
    /// Apply a compensator to a placed graph; writes `compensated.ply` + `compensated.edges`.
    Compensate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        graph: PathBuf,
    },
    /// Deviation report and heatmaps for a scan, or for compensated dataset parts.
    Evaluate {
        #[arg(long, requires_all = ["scan", "graph"], conflicts_with = "dataset")]
        cad: Option<PathBuf>,
        #[arg(long)]
        scan: Option<PathBuf>,
        /// Graph giving the vertex normals; must be the placed CAD graph.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Scan of the uncompensated part, for the improvement column.
        #[arg(long, requires = "cad")]
        baseline: Option<PathBuf>,
        /// Row label in the report.
        #[arg(long, default_value = "part")]
        name: String,
        /// Dataset whose parts are compensated, printed and compared.
        #[arg(long, requires = "compensator", required_unless_present = "cad")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        compensator: Option<PathBuf>,
        /// Evaluate training parts too, not just held-out ones.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        warp: WarpArgs,
    },
    /// Compare analytic and finite-difference gradients of both engines.
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Remesh { .. } => "remesh",
            Command::Simulate { .. } => "simulate",
            Command::TrainPredict { .. } => "train-predict",
            Command::TrainCompensate { .. } => "train-compensate",
            Command::Compensate { .. } => "compensate",
            Command::Evaluate { .. } => "evaluate",
            Command::Gradcheck { .. } => "gradcheck",
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code: 0 on success, 1 on a domain error, 2 on a usage error.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Run {
    out: PathBuf,
    manifest: Manifest,
    outputs: Vec<String>,
}

impl Run {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        require_file(path)?;
        self.manifest.set(format!("input.{role}.sha256"), file_sha256(path)?);
        Ok(())
    }
}

fn run(cli: Cli) -> Result<bool> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    config.warp.seed = cli.seed;
    config.training.seed = cli.seed;
    std::fs::create_dir_all(&cli.out)?;

    let mut run = Run {
        out: cli.out.clone(),
        manifest: Manifest::new(),
        outputs: Vec::new(),
    };
    let name = cli.command.name();
    run.manifest
        .set("command", name)
        .set("version", env!("CARGO_PKG_VERSION"))
        .set("seed", cli.seed);
    if let Some(p) = &cli.config {
        run.input("config", p)?;
    }

    let ok = match cli.command {
        Command::Remesh { mesh, bar, voxel_size } => {
            let mesh = match &mesh {
                Some(p) => {
                    run.input("mesh", p)?;
                    read_mesh(p)?
                }
                None => bar_mesh(),
            };
            let fallback = if bar { BAR_VOXEL_SIZE } else { default_voxel_size(&mesh) };
            let v = voxel_size.or(config.voxel_size).unwrap_or(fallback);
            let graph = remesh(&mesh, v, cli.seed)?;
            let iso = isometry_report(&graph)?;
            println!(
                "{} vertices, {} edges, edge length mean {:.4} mm, cv {:.4}",
                graph.len(),
                graph.edges().len(),
                iso.mean,
                iso.cv
            );
            run.manifest.set("voxel_size", v);
            graph.save(run.path("graph.ply"))?;
            run.outputs.push("graph.edges".into());
            true
        }
        Command::Simulate { cad, bar_layout: _, voxel_size, warp } => {
            apply_warp(&mut config, &warp)?;
            config.write_warp_to_manifest(&mut run.manifest);
            match &cad {
                Some(p) => {
                    run.input("cad", p)?;
                    let scan = simulate_print(&read_cloud_ply(p)?, &config.warp)?;
                    write_cloud_ply(&scan, run.path("scan.ply"))?;
                    println!("printed {} points", scan.len());
                }
                None => {
                    let v = voxel_size.or(config.voxel_size).unwrap_or(BAR_VOXEL_SIZE);
                    run.manifest.set("voxel_size", v);
                    let ds = bar_dataset(&config.warp, v, cli.seed)?;
                    ds.save(&run.out)?;
                    run.outputs.push("dataset.csv".into());
                    run.manifest.set("dataset_sha256", ds.hash());
                    println!(
                        "{} parts of {} vertices, held out {:?}",
                        ds.len(),
                        ds.samples()[0].graph.len(),
                        ds.validation().map(|s| s.part_id).collect::<Vec<_>>()
                    );
                }
            }
            true
        }
        Command::TrainPredict { dataset, train } => {
            let ds = load_dataset(&mut run, &dataset)?;
            apply_train(&mut config, &train, &run.out)?;
            config.training.write_to_manifest(&mut run.manifest);
            let outcome = train_predictor(&ds, &config.training)?;
            finish_training(&mut run, &outcome, "predictor")?;
            true
        }
        Command::TrainCompensate {
            dataset,
            predictor,
            oracle: _,
            train,
            warp,
        } => {
            let ds = load_dataset(&mut run, &dataset)?;
            apply_train(&mut config, &train, &run.out)?;
            config.training.write_to_manifest(&mut run.manifest);
            let outcome = match &predictor {
                Some(p) => {
                    run.input("predictor", p)?;
                    let pred = Engine::load(p)?.frozen();
                    train_compensator(&ds, &pred, &config.training)?
                }
                None => {
                    apply_warp(&mut config, &warp)?;
                    config.write_warp_to_manifest(&mut run.manifest);
                    run.manifest.set("forward_model", "oracle");
                    train_compensator_with(&ds, ForwardModel::Oracle(&config.warp), &config.training)?
                }
            };
            finish_training(&mut run, &outcome, "compensator")?;
            true
        }
        Command::Compensate { model, graph } => {
            run.input("model", &model)?;
            run.input("graph", &graph)?;
            let engine = Engine::load(&model)?;
            let g = IsoGraph::load(&graph)?;
            let cad = engine.forward(&g.cloud()?, &g)?;
            g.with_vertices(cad.into_points())?.save(run.path("compensated.ply"))?;
            run.outputs.push("compensated.edges".into());
            println!("compensated {} vertices", g.len());
            true
        }
        Command::Evaluate {
            cad,
            scan,
            graph,
            baseline,
            name,
            dataset,
            compensator,
            all,
            warp,
        } => {
            let rows = match (cad, dataset) {
                (Some(cad), _) => {
                    let (scan, graph) = (scan.expect("clap requires --scan"), graph.expect("clap requires --graph"));
                    evaluate_files(&mut run, &cad, &scan, &graph, baseline.as_deref(), &name)?
                }
                (None, Some(ds)) => {
                    apply_warp(&mut config, &warp)?;
                    config.write_warp_to_manifest(&mut run.manifest);
                    let comp = compensator.expect("clap requires --compensator");
                    evaluate_dataset(&mut run, &ds, &comp, all, &config.warp)?
                }
                (None, None) => unreachable!("clap requires --cad or --dataset"),
            };
            println!("{}", crate::eval::report_csv(&rows).trim_end());
            write_report_csv(&rows, run.path("report.csv"))?;
            true
        }
        Command::Gradcheck { eps } => {
            run.manifest.set("eps", eps);
            let mut worst: f64 = 0.0;
            for kind in [EngineKind::Predictor, EngineKind::Compensator] {
                let r = engine_grad_check(kind, &NetworkConfig::default(), cli.seed, eps)?;
                println!(
                    "{} max relative error {:.3e} over {} parameters",
                    kind.as_str(),
                    r.max_rel_error,
                    r.checked
                );
                run.manifest.set(format!("{}.max_rel_error", kind.as_str()), format!("{:e}", r.max_rel_error));
                worst = worst.max(r.max_rel_error);
            }
            let pass = worst <= GRAD_CHECK_TOLERANCE;
            println!("{} (tolerance {GRAD_CHECK_TOLERANCE:e})", if pass { "PASS" } else { "FAIL" });
            pass
        }
    };

    run.manifest.set("outputs", run.outputs.join(" "));
    run.manifest.write(cli.out.join(format!("manifest_{name}.txt")))?;
    Ok(ok)
}

fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    let is_ply = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    if !is_ply {
        return read_obj(path);
    }
    let ply = PlyData::read(path)?;
    let mut faces = Vec::with_capacity(ply.faces.len());
    for f in &ply.faces {
        // Fan-triangulate polygons.
        for k in 1..f.len().saturating_sub(1) {
            faces.push([f[0], f[k], f[k + 1]]);
        }
    }
    TriangleMesh::new(ply.positions()?, faces).map_err(|e| Error::parse(path, e.to_string()))
}

fn apply_warp(config: &mut RunConfig, w: &WarpArgs) -> Result<()> {
    let spec = &mut config.warp;
    for (flag, slot) in [
        (w.amplitude, &mut spec.amplitude),
        (w.edge_gain, &mut spec.edge_gain),
        (w.wavelength, &mut spec.wavelength),
        (w.noise, &mut spec.noise),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    spec.validate()
}

fn apply_train(config: &mut RunConfig, t: &TrainArgs, out: &Path) -> Result<()> {
    let c = &mut config.training;
    if let Some(v) = t.epochs {
        c.epochs = v;
    }
    if let Some(v) = t.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = t.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = t.checkpoint_every {
        c.checkpoint_every = v;
    }
    if t.recentered {
        c.encoding = PositionEncoding::Recentered;
    }
    if c.checkpoint_every > 0 {
        c.checkpoint_dir = Some(out.join("checkpoints"));
    }
    c.validate()
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{}: no such file", path.display())))
    }
}

fn load_dataset(run: &mut Run, csv: &Path) -> Result<Dataset> {
    require_file(csv)?;
    let ds = Dataset::load(csv)?;
    run.manifest.set("input.dataset.sha256", ds.hash());
    Ok(ds)
}

fn finish_training(run: &mut Run, outcome: &TrainingOutcome, stem: &str) -> Result<()> {
    outcome.engine.save(run.path(&format!("{stem}.wcp")))?;
    outcome.train_curve().write_csv(run.path(&format!("{stem}_train_loss.csv")))?;
    if let Some(v) = outcome.validation_curve() {
        v.write_csv(run.path(&format!("{stem}_validation_loss.csv")))?;
    }
    run.manifest
        .set("best_epoch", outcome.best_epoch)
        .set("model_sha256", outcome.engine.params.checksum());
    println!(
        "{stem}: train loss {:.6} -> {:.6} (min {:.6}), kept epoch {}",
        outcome.initial_train_loss(),
        outcome.final_train_loss(),
        outcome.min_train_loss(),
        outcome.best_epoch
    );
    Ok(())
}

fn evaluate_files(
    run: &mut Run,
    cad: &Path,
    scan: &Path,
    graph: &Path,
    baseline: Option<&Path>,
    name: &str,
) -> Result<Vec<(String, DeviationReport)>> {
    run.input("cad", cad)?;
    run.input("scan", scan)?;
    run.input("graph", graph)?;
    let cad = read_cloud_ply(cad)?;
    let graph = IsoGraph::load(graph)?;
    let scan = read_cloud_ply(scan)?;
    if scan.len() < cad.len() {
        eprintln!(
            "warning: scan has {} points for {} CAD points; matches are many-to-one",
            scan.len(),
            cad.len()
        );
    }
    let (mut report, field) = deviation_report(&cad, &scan, &graph)?;
    let mut rows = Vec::new();
    if let Some(b) = baseline {
        run.input("baseline", b)?;
        let (base, base_field) = deviation_report(&cad, &read_cloud_ply(b)?, &graph)?;
        export_heatmap(&base_field, &cad, run.path("heatmap_baseline.ply"))?;
        report = report.with_baseline(&base)?;
        rows.push(("baseline".to_string(), base));
    }
    export_heatmap(&field, &cad, run.path("heatmap.ply"))?;
    rows.push((name.to_string(), report));
    Ok(rows)
}

/// Original and compensated print of one part, measured against its CAD.
fn evaluate_part(s: &Sample, comp: &Engine, spec: &WarpSpec) -> Result<[(DeviationReport, crate::eval::SignedDeviationField); 2]> {
    let printer = WarpSpec {
        seed: part_seed(spec.seed, s.part_id),
        ..*spec
    };
    let base = deviation_report(&s.cad, &simulate_print(&s.cad, &printer)?, &s.graph)?;
    let printed = simulate_print(&compensate(s, comp)?, &printer)?;
    let (after, field) = deviation_report(&s.cad, &printed, &s.graph)?;
    let after = after.with_baseline(&base.0)?;
    Ok([base, (after, field)])
}

fn evaluate_dataset(run: &mut Run, csv: &Path, comp: &Path, all: bool, spec: &WarpSpec) -> Result<Vec<(String, DeviationReport)>> {
    let ds = load_dataset(run, csv)?;
    run.input("compensator", comp)?;
    let comp = Engine::load(comp)?;
    let parts: Vec<&Sample> = if all { ds.samples().iter().collect() } else { ds.validation().collect() };
    if parts.is_empty() {
        return Err(Error::InvalidArgument("dataset has no held-out parts; pass --all".into()));
    }
    // One thread per part; results are joined in dataset order.
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = parts.iter().map(|s| scope.spawn(|| evaluate_part(s, &comp, spec))).collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect()
    });
    let mut rows = Vec::new();
    for (s, r) in parts.iter().zip(results) {
        let [(base, base_field), (after, field)] = r?;
        export_heatmap(&base_field, &s.cad, run.path(&format!("heatmap_{}_original.ply", s.part_id)))?;
        export_heatmap(&field, &s.cad, run.path(&format!("heatmap_{}_compensated.ply", s.part_id)))?;
        rows.push((format!("{}_original", s.part_id), base));
        rows.push((format!("{}_compensated", s.part_id), after));
    }
    Ok(rows)
}

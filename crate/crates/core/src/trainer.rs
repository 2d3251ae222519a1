//! Two-stage training: fit the predictor to (CAD, scan) pairs, then freeze
//! it and fit the compensator so that predicting its output reproduces the
//! CAD.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Matrix3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::autodiff::{Adjacency, ParamSet, ParamVars, Tape, Tensor};
use crate::error::{Error, Result};
use crate::geometry::{ChamberSpec, Placement, PointCloud, Vec3};
use crate::graphnet::{cloud_tensor, record_composition, require_frozen, Engine, EngineKind, NetworkConfig, PositionEncoding};
use crate::io::{fmt_f64, read_cloud_ply, write_cloud_ply, Manifest};
use crate::losses::{record_deformation_loss, LossBreakdown, LossCurve, LossNodes, LossWeights};
use crate::oracle::{simulate_print, warp_with_jacobian, WarpSpec};
use crate::remesh::IsoGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Parts per Adam step.
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weights: LossWeights,
    pub network: NetworkConfig,
    pub encoding: PositionEncoding,
    pub chamber: ChamberSpec,
    /// Where checkpoints go; none are written when unset.
    pub checkpoint_dir: Option<PathBuf>,
    /// Write a checkpoint every this many epochs (0: only the selected one).
    pub checkpoint_every: usize,
    pub round: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 1000,
            batch_size: 1,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weights: LossWeights::default(),
            network: NetworkConfig::default(),
            encoding: PositionEncoding::Absolute,
            chamber: ChamberSpec::default(),
            checkpoint_dir: None,
            checkpoint_every: 0,
            round: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch size must be >= 1".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        self.weights.validate()?;
        self.network.validate()
    }

    pub fn write_to_manifest(&self, m: &mut Manifest) {
        m.set("learning_rate", fmt_f64(self.learning_rate))
            .set("epochs", self.epochs)
            .set("batch_size", self.batch_size)
            .set("seed", self.seed)
            .set("beta1", fmt_f64(self.beta1))
            .set("beta2", fmt_f64(self.beta2))
            .set("epsilon", fmt_f64(self.epsilon))
            .set("l2_weight", fmt_f64(self.weights.l2))
            .set("chamfer_weight", fmt_f64(self.weights.chamfer))
            .set("widths", self.network.widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" "))
            .set("position_encoding", self.encoding.as_str())
            .set("round", self.round);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            _ => Err(Error::InvalidArgument(format!("unknown split {s:?}"))),
        }
    }
}

/// One placed part: its graph, CAD cloud and index-aligned scan.
#[derive(Debug, Clone)]
pub struct Sample {
    pub part_id: usize,
    pub graph: IsoGraph,
    pub cad: PointCloud,
    pub scan: PointCloud,
    pub placement: Placement,
    pub split: Split,
    adjacency: Arc<Adjacency>,
}

impl Sample {
    pub fn new(part_id: usize, graph: IsoGraph, cad: PointCloud, scan: PointCloud, placement: Placement, split: Split) -> Result<Self> {
        for found in [cad.len(), scan.len()] {
            if found != graph.len() {
                return Err(Error::Alignment {
                    expected: graph.len(),
                    found,
                });
            }
        }
        let adjacency = graph.adjacency()?;
        Ok(Self {
            part_id,
            graph,
            cad,
            scan,
            placement,
            split,
            adjacency,
        })
    }

    pub fn adjacency(&self) -> &Arc<Adjacency> {
        &self.adjacency
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Sample>,
}

pub const DATASET_HEADER: &str = "part_id,graph,cad,scan,split,placement";

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("dataset is empty".into()));
        }
        let mut ids: Vec<usize> = samples.iter().map(|s| s.part_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("part ids must be unique".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, part_id: usize) -> Option<&Sample> {
        self.samples.iter().find(|s| s.part_id == part_id)
    }

    fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.samples.len()).filter(|&i| self.samples[i].split == split).collect()
    }

    pub fn train(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.split == Split::Train)
    }

    pub fn validation(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.split == Split::Validation)
    }

    /// SHA-256 over every sample's id, split, placement, graph and clouds.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let floats = |h: &mut Sha256, xs: &[f64]| {
            for x in xs {
                h.update(x.to_le_bytes());
            }
        };
        for s in &self.samples {
            h.update((s.part_id as u64).to_le_bytes());
            h.update([s.split as u8]);
            floats(&mut h, placement_numbers(&s.placement).as_slice());
            for v in s.graph.vertices() {
                floats(&mut h, v.as_slice());
            }
            for e in s.graph.edges() {
                h.update((e[0] as u64).to_le_bytes());
                h.update((e[1] as u64).to_le_bytes());
            }
            floats(&mut h, &s.cad.to_flat());
            floats(&mut h, &s.scan.to_flat());
        }
        hex::encode(h.finalize())
    }

    /// Writes `dataset.csv` plus one graph, CAD and scan file per part.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut csv = format!("{DATASET_HEADER}\n");
        for s in &self.samples {
            let id = s.part_id;
            let (g, c, sc) = (format!("graph_{id}.ply"), format!("cad_{id}.ply"), format!("scan_{id}.ply"));
            s.graph.save(dir.join(&g))?;
            write_cloud_ply(&s.cad, dir.join(&c))?;
            write_cloud_ply(&s.scan, dir.join(&sc))?;
            let pl: Vec<String> = placement_numbers(&s.placement).iter().map(|&x| fmt_f64(x)).collect();
            let _ = writeln!(csv, "{id},{g},{c},{sc},{},{}", s.split.as_str(), pl.join(" "));
        }
        let path = dir.join("dataset.csv");
        std::fs::write(&path, csv)?;
        Ok(path)
    }

    /// Reads a `dataset.csv`; file columns are relative to its directory.
    pub fn load(csv: impl AsRef<Path>) -> Result<Self> {
        let csv = csv.as_ref();
        let text = std::fs::read_to_string(csv)?;
        let base = csv.parent().unwrap_or(Path::new("."));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(DATASET_HEADER) {
            return Err(Error::parse(csv, format!("header must be {DATASET_HEADER}")));
        }
        let mut samples = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let at = |m: String| Error::parse(csv, format!("line {}: {m}", n + 2));
            if f.len() != 6 {
                return Err(at(format!("expected 6 fields, got {}", f.len())));
            }
            let id = f[0].parse().map_err(|_| at(format!("bad part id {:?}", f[0])))?;
            let graph = IsoGraph::load(base.join(f[1]))?;
            let cad = read_cloud_ply(base.join(f[2]))?;
            let scan = read_cloud_ply(base.join(f[3]))?;
            let split = Split::parse(f[4]).map_err(|e| at(e.to_string()))?;
            let nums: Vec<f64> = f[5]
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| at(format!("bad placement number {t:?}"))))
                .collect::<Result<_>>()?;
            let placement = placement_from_numbers(&nums).map_err(|e| at(e.to_string()))?;
            samples.push(Sample::new(id, graph, cad, scan, placement, split)?);
        }
        Self::new(samples)
    }
}

/// Rotation (row-major) followed by translation.
fn placement_numbers(p: &Placement) -> Vec<f64> {
    let r = p.rotation();
    let t = p.translation_vector();
    let mut out: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)])).collect();
    out.extend_from_slice(&[t.x, t.y, t.z]);
    out
}

fn placement_from_numbers(x: &[f64]) -> Result<Placement> {
    if x.len() != 12 {
        return Err(Error::InvalidArgument(format!("placement needs 12 numbers, got {}", x.len())));
    }
    Placement::new(Matrix3::from_row_slice(&x[..9]), Vec3::new(x[9], x[10], x[11]))
}

/// Adam moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Non-finite gradients are a numeric fault
/// reported with the step count in place of the epoch.
pub fn adam_step(params: &mut ParamSet, grads: &[Tensor], state: &mut AdamState, config: &TrainingConfig) -> Result<()> {
    if params.is_frozen() {
        return Err(Error::Contract("cannot update a frozen parameter set".into()));
    }
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Shape(format!(
            "{} parameter tensors, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.tensors().iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].len() != p.len() {
            return Err(Error::Shape(format!(
                "gradient {} has shape {:?}, parameter {:?}",
                params.names()[i],
                g.shape(),
                p.shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::NumericFault {
                epoch: state.step as usize,
                message: format!("non-finite gradient for {}", params.names()[i]),
                last_good: None,
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
    for ((p, g), (m, v)) in params
        .tensors_mut()
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (k, (x, &gk)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let mhat = m[k] / c1;
            let vhat = v[k] / c2;
            *x -= config.learning_rate * mhat / (vhat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub validation: Option<LossBreakdown>,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    /// Engine holding the selected parameters.
    pub engine: Engine,
    /// Epoch 0 is the untrained engine.
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainingOutcome {
    pub fn train_curve(&self) -> LossCurve {
        LossCurve {
            rows: self.history.iter().map(|r| (r.epoch, r.train)).collect(),
        }
    }

    pub fn validation_curve(&self) -> Option<LossCurve> {
        let rows: Option<Vec<_>> = self.history.iter().map(|r| r.validation.map(|v| (r.epoch, v))).collect();
        rows.map(|rows| LossCurve { rows })
    }

    pub fn initial_train_loss(&self) -> f64 {
        self.history[0].train.total
    }

    pub fn min_train_loss(&self) -> f64 {
        self.history.iter().map(|r| r.train.total).fold(f64::INFINITY, f64::min)
    }

    pub fn final_train_loss(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.train.total)
    }
}

/// What turns compensated CAD into a predicted print during stage 2.
#[derive(Debug, Clone, Copy)]
pub enum ForwardModel<'a> {
    /// A trained predictor; must be frozen.
    Learned(&'a Engine),
    /// The analytic warp field itself, `c ↦ c + d(c)`.
    Oracle(&'a WarpSpec),
}

fn record_oracle(tape: &mut Tape, x: crate::autodiff::Var, spec: &WarpSpec) -> Result<crate::autodiff::Var> {
    tape.map_points(x, |p| {
        let (d, j) = warp_with_jacobian(p, spec)?;
        Ok((p + d, Matrix3::identity() + j))
    })
}

/// Records one sample's loss with the trainable engine's parameters `vars`.
type SampleLoss<'a> = dyn Fn(&mut Tape, &Sample, &Engine, &ParamVars) -> Result<LossNodes> + 'a;

fn evaluate(engine: &Engine, samples: &[&Sample], loss: &SampleLoss) -> Result<Option<LossBreakdown>> {
    if samples.is_empty() {
        return Ok(None);
    }
    let frozen = engine.params.clone().frozen();
    let mut parts = Vec::with_capacity(samples.len());
    for s in samples {
        let mut tape = Tape::new();
        let vars = tape.params(&frozen);
        parts.push(loss(&mut tape, s, engine, &vars)?.breakdown(&tape)?);
    }
    Ok(Some(LossBreakdown::mean(&parts)?))
}

fn checkpoint_path(dir: &Path, kind: EngineKind, round: usize, epoch: usize) -> PathBuf {
    dir.join(format!("{}_{round}_{epoch}.wcp", kind.as_str()))
}

fn fault(epoch: usize, message: String, last_good: &ParamSet) -> Error {
    Error::NumericFault {
        epoch,
        message,
        last_good: Some(Box::new(last_good.clone())),
    }
}

/// Adam over shuffled training parts; keeps the parameters with the lowest
/// validation total (training total if there is no validation split).
fn fit(mut engine: Engine, dataset: &Dataset, config: &TrainingConfig, loss: &SampleLoss, after_step: &dyn Fn() -> Result<()>) -> Result<TrainingOutcome> {
    config.validate()?;
    let train_idx = dataset.indices(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::InvalidArgument("dataset has no training parts".into()));
    }
    let train: Vec<&Sample> = train_idx.iter().map(|&i| &dataset.samples[i]).collect();
    let val: Vec<&Sample> = dataset.validation().collect();
    let record = |epoch: usize, engine: &Engine| -> Result<EpochRecord> {
        let train = evaluate(engine, &train, loss)?.expect("nonempty");
        let validation = evaluate(engine, &val, loss)?;
        Ok(EpochRecord { epoch, train, validation })
    };
    let score = |r: &EpochRecord| r.validation.unwrap_or(r.train).total;

    let first = record(0, &engine)?;
    if !first.train.is_finite() {
        return Err(fault(0, "initial loss is not finite".into(), &engine.params));
    }
    let mut best = (score(&first), engine.params.clone(), 0);
    let mut history = vec![first];
    let mut state = AdamState::new(&engine.params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut order = train_idx.clone();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let vars = tape.params(&engine.params);
            let mut terms = Vec::with_capacity(batch.len());
            for &i in batch {
                terms.push((loss(&mut tape, &dataset.samples[i], &engine, &vars)?.total, 1.0 / batch.len() as f64));
            }
            let total = tape.weighted_sum(&terms)?;
            let value = tape.value(total).item()?;
            if !value.is_finite() {
                return Err(fault(epoch, format!("training loss became {value}"), &best.1));
            }
            let grads = tape.backward(total)?.for_params(&tape, &vars);
            adam_step(&mut engine.params, &grads, &mut state, config).map_err(|e| match e {
                Error::NumericFault { message, .. } => fault(epoch, message, &best.1),
                other => other,
            })?;
            after_step()?;
        }
        let r = record(epoch, &engine)?;
        if !r.train.is_finite() {
            return Err(fault(epoch, "evaluated loss is not finite".into(), &best.1));
        }
        if score(&r) < best.0 {
            best = (score(&r), engine.params.clone(), epoch);
        }
        history.push(r);
        if let Some(dir) = &config.checkpoint_dir {
            if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
                std::fs::create_dir_all(dir)?;
                engine.save(checkpoint_path(dir, engine.kind, config.round, epoch))?;
            }
        }
    }
    engine.params = best.1;
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
        engine.save(checkpoint_path(dir, engine.kind, config.round, best.2))?;
    }
    Ok(TrainingOutcome {
        engine,
        history,
        best_epoch: best.2,
    })
}

/// Stage 1: minimizes the deformation loss between `D(cad)` and the scan.
pub fn train_predictor(dataset: &Dataset, config: &TrainingConfig) -> Result<TrainingOutcome> {
    config.validate()?;
    let engine = Engine::new(EngineKind::Predictor, config.network.clone(), &config.chamber, config.seed)?
        .with_encoding(config.encoding);
    let weights = config.weights;
    let loss = move |tape: &mut Tape, s: &Sample, e: &Engine, vars: &ParamVars| -> Result<LossNodes> {
        let x = tape.constant(cloud_tensor(&s.cad));
        let pred = e.record(tape, x, s.adjacency(), vars)?;
        let target = tape.constant(cloud_tensor(&s.scan));
        record_deformation_loss(tape, pred, target, &weights)
    };
    fit(engine, dataset, config, &loss, &|| Ok(()))
}

/// Stage 2: minimizes the deformation loss between `D(G(cad))` and the CAD.
/// The predictor must be frozen and is verified unchanged after every step.
pub fn train_compensator(dataset: &Dataset, predictor: &Engine, config: &TrainingConfig) -> Result<TrainingOutcome> {
    require_frozen(predictor)?;
    train_compensator_with(dataset, ForwardModel::Learned(predictor), config)
}

pub fn train_compensator_with(dataset: &Dataset, model: ForwardModel, config: &TrainingConfig) -> Result<TrainingOutcome> {
    config.validate()?;
    let engine = Engine::new(EngineKind::Compensator, config.network.clone(), &config.chamber, config.seed)?
        .with_encoding(config.encoding);
    let weights = config.weights;
    let loss = move |tape: &mut Tape, s: &Sample, e: &Engine, vars: &ParamVars| -> Result<LossNodes> {
        let x = tape.constant(cloud_tensor(&s.cad));
        let pred = match model {
            ForwardModel::Learned(d) => record_composition(tape, x, s.adjacency(), e, vars, d)?.1,
            ForwardModel::Oracle(spec) => {
                let comp = e.record(tape, x, s.adjacency(), vars)?;
                record_oracle(tape, comp, spec)?
            }
        };
        record_deformation_loss(tape, pred, x, &weights)
    };
    match model {
        ForwardModel::Learned(d) => {
            require_frozen(d)?;
            let before = d.params.checksum();
            let check = || {
                if d.params.checksum() != before {
                    return Err(Error::Contract("predictor parameters changed during stage 2".into()));
                }
                Ok(())
            };
            fit(engine, dataset, config, &loss, &check)
        }
        ForwardModel::Oracle(spec) => {
            spec.validate()?;
            fit(engine, dataset, config, &loss, &|| Ok(()))
        }
    }
}

/// Compensated CAD `G(cad)` for one sample.
pub fn compensate(sample: &Sample, compensator: &Engine) -> Result<PointCloud> {
    compensator.forward(&sample.cad, &sample.graph)
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    pub round: usize,
    pub predictor: TrainingOutcome,
    pub compensator: TrainingOutcome,
}

/// Alternates the two stages. With `augment`, every round after the first
/// also trains on (compensated CAD, simulated print) pairs produced by the
/// previous round's compensator.
pub fn iterate_loop(dataset: &Dataset, config: &TrainingConfig, rounds: usize, augment: Option<&WarpSpec>) -> Result<Vec<RoundResult>> {
    if rounds < 1 {
        return Err(Error::InvalidArgument("rounds must be >= 1".into()));
    }
    let mut data = dataset.clone();
    let mut out = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let cfg = TrainingConfig { round, ..config.clone() };
        let predictor = train_predictor(&data, &cfg)?;
        let frozen = predictor.engine.clone().frozen();
        let compensator = train_compensator(&data, &frozen, &cfg)?;
        if let Some(spec) = augment {
            if round + 1 < rounds {
                data = augmented(&data, dataset, &compensator.engine, spec, round)?;
            }
        }
        out.push(RoundResult {
            round,
            predictor,
            compensator,
        });
    }
    Ok(out)
}

fn augmented(current: &Dataset, original: &Dataset, compensator: &Engine, spec: &WarpSpec, round: usize) -> Result<Dataset> {
    let mut samples = current.samples.clone();
    let first_id = samples.iter().map(|s| s.part_id).max().unwrap_or(0) + 1;
    for (next_id, s) in (first_id..).zip(original.train()) {
        let cad = compensate(s, compensator)?;
        let print_spec = WarpSpec {
            seed: spec.seed ^ ((round as u64 + 1) << 32) ^ s.part_id as u64,
            ..*spec
        };
        let scan = simulate_print(&cad, &print_spec)?;
        let graph = s.graph.with_vertices(cad.points().to_vec())?;
        samples.push(Sample::new(next_id, graph, cad, scan, s.placement, Split::Train)?);
    }
    Dataset::new(samples)
}

/// Manifest entries shared by every training run.
pub fn training_manifest(dataset: &Dataset, config: &TrainingConfig) -> Manifest {
    let mut m = Manifest::new();
    config.write_to_manifest(&mut m);
    m.set("dataset_parts", dataset.len());
    m.set("dataset_sha256", dataset.hash());
    m
}

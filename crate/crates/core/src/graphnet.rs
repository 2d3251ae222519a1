//! Edge-convolution network shared by the predictor and compensator engines.
//!
//! Layer `l` maps per-vertex features `x` to
//! `h_i = ReLU(mean_{j ∈ N(i)} θ_l · [x_i ‖ x_i − x_j])`. Because `θ_l` is
//! affine, the mean moves inside: `h_i = ReLU(θ_l · [x_i ‖ x_i − mean_j x_j])`,
//! which is how it is evaluated. A final affine head yields a 3D residual
//! that is added to the input coordinates.

use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check, Adjacency, GradCheckReport, ParamSet, ParamVars, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::{ChamberSpec, PointCloud, Vec3};
use crate::losses::{record_deformation_loss, LossWeights};
use crate::io::fmt_f64;
use crate::remesh::IsoGraph;

pub const DEFAULT_WIDTHS: [usize; 4] = [64, 64, 64, 64];
const MODEL_MAGIC: &str = "warpcomp-model 1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Output width of each edge-convolution layer.
    pub widths: Vec<usize>,
    pub input_width: usize,
    pub output_width: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            widths: DEFAULT_WIDTHS.to_vec(),
            input_width: 3,
            output_width: 3,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer widths must be a nonempty list of positive integers, got {:?}",
                self.widths
            )));
        }
        if self.input_width != 3 || self.output_width != 3 {
            return Err(Error::InvalidArgument(
                "engines read and write 3D coordinates".into(),
            ));
        }
        Ok(())
    }
}

/// Which side of the pipeline an engine sits on.
///
/// A predictor maps CAD vertices to predicted printed positions; its output
/// only feeds losses and evaluation. A compensator maps CAD vertices to
/// pre-distorted vertices, which are valid predictor input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Predictor,
    Compensator,
}

impl EngineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::Predictor => "predictor",
            EngineKind::Compensator => "compensator",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "predictor" => Ok(EngineKind::Predictor),
            "compensator" => Ok(EngineKind::Compensator),
            _ => Err(Error::InvalidArgument(format!("unknown engine kind {s:?}"))),
        }
    }
}

/// How placed coordinates become network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionEncoding {
    /// Chamber coordinates as they are.
    Absolute,
    /// Each part is moved so its centroid sits at the chamber center first,
    /// which hides the placement from the network.
    Recentered,
}

impl PositionEncoding {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionEncoding::Absolute => "absolute",
            PositionEncoding::Recentered => "recentered",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(PositionEncoding::Absolute),
            "recentered" => Ok(PositionEncoding::Recentered),
            _ => Err(Error::InvalidArgument(format!("unknown position encoding {s:?}"))),
        }
    }
}

/// Fixed per-axis map `f = p · scale + shift` taking the chamber onto [0, 1]³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScaling {
    pub scale: [f64; 3],
    pub shift: [f64; 3],
}

impl FeatureScaling {
    pub fn from_chamber(chamber: &ChamberSpec) -> Self {
        let (lo, ext) = (chamber.min(), chamber.extents());
        Self {
            scale: [1.0 / ext.x, 1.0 / ext.y, 1.0 / ext.z],
            shift: [-lo.x / ext.x, -lo.y / ext.y, -lo.z / ext.z],
        }
    }

    /// Chamber coordinates of the center of the unit cube.
    fn unit_center(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| (0.5 - self.shift[a]) / self.scale[a])
    }
}

/// One engine: architecture, input encoding and learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    pub kind: EngineKind,
    pub config: NetworkConfig,
    pub scaling: FeatureScaling,
    pub encoding: PositionEncoding,
    pub params: ParamSet,
}

fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| dist.sample(rng)).collect())
        .expect("shape matches")
}

impl Engine {
    /// Edge-convolution weights uniform in `±√(6 / (fan_in + fan_out))`,
    /// zero biases and a zero head, so the engine starts as the identity.
    pub fn new(kind: EngineKind, config: NetworkConfig, chamber: &ChamberSpec, seed: u64) -> Result<Self> {
        Self::build(kind, config, chamber, seed, false)
    }

    /// Like [`Engine::new`] but the head is initialized like the other
    /// layers, so every parameter influences the output.
    pub fn with_random_head(kind: EngineKind, config: NetworkConfig, chamber: &ChamberSpec, seed: u64) -> Result<Self> {
        Self::build(kind, config, chamber, seed, true)
    }

    fn build(kind: EngineKind, config: NetworkConfig, chamber: &ChamberSpec, seed: u64, random_head: bool) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut width = config.input_width;
        for (l, &out) in config.widths.iter().enumerate() {
            params.push(format!("edgeconv{l}.weight"), xavier(2 * width, out, &mut rng))?;
            params.push(format!("edgeconv{l}.bias"), Tensor::zeros(vec![out]))?;
            width = out;
        }
        let head = if random_head {
            xavier(width, config.output_width, &mut rng)
        } else {
            Tensor::zeros(vec![width, config.output_width])
        };
        params.push("head.weight", head)?;
        params.push("head.bias", Tensor::zeros(vec![config.output_width]))?;
        Ok(Self {
            kind,
            config,
            scaling: FeatureScaling::from_chamber(chamber),
            encoding: PositionEncoding::Absolute,
            params,
        })
    }

    pub fn with_encoding(mut self, encoding: PositionEncoding) -> Self {
        self.encoding = encoding;
        self
    }

    /// The same engine with its parameters frozen.
    pub fn frozen(mut self) -> Self {
        self.params.freeze();
        self
    }

    /// Checks that the parameter shapes match the configuration.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let mut expected = Vec::new();
        let mut width = self.config.input_width;
        for &out in &self.config.widths {
            expected.push(vec![2 * width, out]);
            expected.push(vec![out]);
            width = out;
        }
        expected.push(vec![width, self.config.output_width]);
        expected.push(vec![self.config.output_width]);
        let found: Vec<Vec<usize>> = self.params.tensors().iter().map(|t| t.shape().to_vec()).collect();
        if found != expected {
            return Err(Error::Shape(format!(
                "parameter shapes {found:?} do not match the network layout {expected:?}"
            )));
        }
        Ok(())
    }

    /// Records the forward pass for `x` (`n×3` placed coordinates) and
    /// returns the `n×3` output node.
    pub fn record(&self, tape: &mut Tape, x: Var, adj: &Arc<Adjacency>, params: &ParamVars) -> Result<Var> {
        let layers = self.config.widths.len();
        if params.vars().len() != 2 * layers + 2 {
            return Err(Error::Shape(format!(
                "engine needs {} parameter tensors, got {}",
                2 * layers + 2,
                params.vars().len()
            )));
        }
        let (n, c) = tape.value(x).require_matrix("engine input")?;
        if c != 3 {
            return Err(Error::Shape(format!("engine input must be n×3, got n×{c}")));
        }
        if n != adj.len() {
            return Err(Error::Alignment {
                expected: adj.len(),
                found: n,
            });
        }
        let mut h = match self.encoding {
            PositionEncoding::Absolute => tape.scale_shift(x, &self.scaling.scale, &self.scaling.shift)?,
            PositionEncoding::Recentered => {
                let centered = tape.center_rows(x)?;
                let center = self.scaling.unit_center();
                let shift: Vec<f64> = (0..3).map(|a| center[a] * self.scaling.scale[a] + self.scaling.shift[a]).collect();
                tape.scale_shift(centered, &self.scaling.scale, &shift)?
            }
        };
        for l in 0..layers {
            h = edge_conv_on_tape(tape, h, adj, params.get(2 * l), Some(params.get(2 * l + 1)))?;
        }
        let residual = tape.affine(h, params.get(2 * layers), Some(params.get(2 * layers + 1)))?;
        tape.add(x, residual)
    }

    /// Plain forward evaluation.
    pub fn forward(&self, cloud: &PointCloud, graph: &IsoGraph) -> Result<PointCloud> {
        engine_forward(cloud, graph, self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let widths: Vec<String> = self.config.widths.iter().map(|w| w.to_string()).collect();
        let floats = |v: &[f64; 3]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
        let _ = write!(
            out,
            "{MODEL_MAGIC}\nkind {}\nwidths {}\ninput_width {}\noutput_width {}\nposition_encoding {}\nscale {}\nshift {}\nend_header\n",
            self.kind.as_str(),
            widths.join(" "),
            self.config.input_width,
            self.config.output_width,
            self.encoding.as_str(),
            floats(&self.scaling.scale),
            floats(&self.scaling.shift),
        );
        out.extend_from_slice(&self.params.to_bytes());
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path)?).map_err(|e| match e {
            Error::Io(e) => Error::Io(e),
            other => Error::parse(path, other.to_string()),
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const END: &[u8] = b"end_header\n";
        let end = bytes
            .windows(END.len())
            .position(|w| w == END)
            .ok_or_else(|| Error::Format("model header is not terminated".into()))?;
        let header = std::str::from_utf8(&bytes[..end])
            .map_err(|_| Error::Format("model header is not UTF-8".into()))?;
        let mut lines = header.lines();
        if lines.next() != Some(MODEL_MAGIC) {
            return Err(Error::Format("not a model file".into()));
        }
        let mut kind = None;
        let mut config = NetworkConfig::default();
        let mut encoding = PositionEncoding::Absolute;
        let mut scale = None;
        let mut shift = None;
        let triple = |v: &str| -> Result<[f64; 3]> {
            let xs: Vec<f64> = v
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Format(format!("bad number {t:?}"))))
                .collect::<Result<_>>()?;
            xs.try_into()
                .map_err(|_| Error::Format("expected three numbers".into()))
        };
        let int = |v: &str| -> Result<usize> { v.trim().parse().map_err(|_| Error::Format(format!("bad integer {v:?}"))) };
        for line in lines {
            let (key, value) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "kind" => kind = Some(EngineKind::parse(value)?),
                "widths" => config.widths = value.split_whitespace().map(int).collect::<Result<_>>()?,
                "input_width" => config.input_width = int(value)?,
                "output_width" => config.output_width = int(value)?,
                "position_encoding" => encoding = PositionEncoding::parse(value)?,
                "scale" => scale = Some(triple(value)?),
                "shift" => shift = Some(triple(value)?),
                other => return Err(Error::Format(format!("unknown header key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Format(format!("model header lacks {k}"));
        let engine = Self {
            kind: kind.ok_or_else(|| missing("kind"))?,
            config,
            scaling: FeatureScaling {
                scale: scale.ok_or_else(|| missing("scale"))?,
                shift: shift.ok_or_else(|| missing("shift"))?,
            },
            encoding,
            params: ParamSet::from_bytes(&bytes[end + END.len()..])?,
        };
        engine.validate()?;
        Ok(engine)
    }
}

fn edge_conv_on_tape(tape: &mut Tape, x: Var, adj: &Arc<Adjacency>, w: Var, b: Option<Var>) -> Result<Var> {
    let mean = tape.gather_mean(x, adj)?;
    let diff = tape.sub(x, mean)?;
    let joined = tape.concat(x, diff)?;
    let pre = tape.affine(joined, w, b)?;
    Ok(tape.relu(pre))
}

/// One edge-convolution layer evaluated outside training. `weight` is
/// `2·in × out`; the result is post-ReLU.
pub fn edge_conv(features: &Tensor, graph: &IsoGraph, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let adj = graph.adjacency()?;
    let mut tape = Tape::new();
    let x = tape.constant(features.clone());
    let w = tape.constant(weight.clone());
    let b = bias.map(|b| tape.constant(b.clone()));
    let out = edge_conv_on_tape(&mut tape, x, &adj, w, b)?;
    Ok(tape.value(out).clone())
}

pub(crate) fn cloud_tensor(cloud: &PointCloud) -> Tensor {
    Tensor::matrix(cloud.len(), 3, cloud.to_flat()).expect("n×3 layout")
}

fn check_counts(cloud: &PointCloud, graph: &IsoGraph) -> Result<()> {
    if cloud.len() != graph.len() {
        return Err(Error::Alignment {
            expected: graph.len(),
            found: cloud.len(),
        });
    }
    Ok(())
}

/// `output_i = input_i + residual_i` for a placed cloud aligned with the graph.
pub fn engine_forward(cloud: &PointCloud, graph: &IsoGraph, engine: &Engine) -> Result<PointCloud> {
    check_counts(cloud, graph)?;
    let adj = graph.adjacency()?;
    let mut tape = Tape::new();
    let x = tape.constant(cloud_tensor(cloud));
    let mut frozen = engine.params.clone();
    frozen.freeze();
    let vars = tape.params(&frozen);
    let out = engine.record(&mut tape, x, &adj, &vars)?;
    PointCloud::from_flat(tape.value(out).data())
}

/// Requires the predictor's parameters to be frozen.
pub(crate) fn require_frozen(predictor: &Engine) -> Result<()> {
    if !predictor.params.is_frozen() {
        return Err(Error::Contract(
            "the predictor must be frozen while the compensator is trained or composed".into(),
        ));
    }
    Ok(())
}

/// Records `D(G(x))` and returns `(compensated, predicted)` nodes. Gradients
/// reach the compensator parameters only.
pub fn record_composition(
    tape: &mut Tape,
    x: Var,
    adj: &Arc<Adjacency>,
    compensator: &Engine,
    comp_params: &ParamVars,
    predictor: &Engine,
) -> Result<(Var, Var)> {
    require_frozen(predictor)?;
    let compensated = compensator.record(tape, x, adj, comp_params)?;
    let pred_params = tape.params(&predictor.params);
    let predicted = predictor.record(tape, compensated, adj, &pred_params)?;
    Ok((compensated, predicted))
}

/// `D(G(c))` for a placed cloud; the predictor must be frozen.
pub fn compose_comp_pred(cloud: &PointCloud, graph: &IsoGraph, compensator: &Engine, predictor: &Engine) -> Result<PointCloud> {
    check_counts(cloud, graph)?;
    require_frozen(predictor)?;
    let adj = graph.adjacency()?;
    let mut tape = Tape::new();
    let x = tape.constant(cloud_tensor(cloud));
    let comp_params = tape.params(&compensator.params);
    let (_, predicted) = record_composition(&mut tape, x, &adj, compensator, &comp_params, predictor)?;
    PointCloud::from_flat(tape.value(predicted).data())
}

/// Distance between the check target and the initial output, mm. Large
/// against the finite-difference step, so Chamfer terms stay smooth.
pub const GRAD_CHECK_OFFSET: f64 = 0.05;
/// Smallest admissible `|z|` at any ReLU input of the check problem.
pub const GRAD_CHECK_MARGIN: f64 = 2e-4;
const GRAD_CHECK_DRAWS: usize = 256;

/// Gradient check of one engine at random initialization, head included.
///
/// The problem is a jittered four-vertex complete graph inside a 2 mm
/// chamber centered on the origin, so features span [0, 1] and coordinates
/// stay near 1 in magnitude. Seeded draws are taken until every ReLU input
/// is at least [`GRAD_CHECK_MARGIN`] from the kink. The compensator is
/// checked through a frozen random predictor.
pub fn engine_grad_check(kind: EngineKind, config: &NetworkConfig, seed: u64, eps: f64) -> Result<GradCheckReport> {
    let chamber = ChamberSpec::new(Vec3::repeat(-1.0), Vec3::repeat(1.0))?;
    let engine = Engine::with_random_head(kind, config.clone(), &chamber, seed)?;
    let predictor = match kind {
        EngineKind::Predictor => None,
        EngineKind::Compensator => {
            Some(Engine::with_random_head(EngineKind::Predictor, config.clone(), &chamber, seed.wrapping_add(1))?.frozen())
        }
    };
    let corners = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    let edges = vec![[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
    let jitter = Uniform::new_inclusive(-0.15, 0.15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GRAD_CHECK_DRAWS {
        let vertices: Vec<Vec3> = corners
            .iter()
            .map(|c| Vec3::from(*c) * 0.5 + Vec3::from_fn(|_, _| jitter.sample(&mut rng)))
            .collect();
        let graph = IsoGraph::new(vertices, edges.clone(), vec![])?;
        let cloud = graph.cloud()?;
        let adj = graph.adjacency()?;
        let output = |tape: &mut Tape, vars: &ParamVars| -> Result<Var> {
            let x = tape.constant(cloud_tensor(&cloud));
            match &predictor {
                None => engine.record(tape, x, &adj, vars),
                Some(d) => Ok(record_composition(tape, x, &adj, &engine, vars, d)?.1),
            }
        };
        let mut tape = Tape::new();
        let vars = tape.params(&engine.params);
        let out = output(&mut tape, &vars)?;
        let noise: Vec<f64> = (0..cloud.len() * 3)
            .map(|_| GRAD_CHECK_OFFSET * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        if tape.relu_margin().unwrap_or(f64::INFINITY) < GRAD_CHECK_MARGIN {
            continue;
        }
        let target: Vec<f64> = tape.value(out).data().iter().zip(&noise).map(|(v, n)| v + n).collect();
        let target = Tensor::matrix(cloud.len(), 3, target)?;
        return grad_check(
            |tape, vars| {
                let out = output(tape, vars)?;
                let t = tape.constant(target.clone());
                Ok(record_deformation_loss(tape, out, t, &LossWeights::default())?.total)
            },
            &engine.params,
            eps,
        );
    }
    Err(Error::InvalidArgument(format!(
        "no draw kept every ReLU input {GRAD_CHECK_MARGIN} away from zero"
    )))
}

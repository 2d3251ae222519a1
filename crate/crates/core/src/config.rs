//! `key=value` run configuration read by `--config`.
//!
//! Seeds are deliberately absent: every command takes its randomness from `--seed`.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{ChamberSpec, Vec3};
use crate::graphnet::PositionEncoding;
use crate::io::{fmt_f64, Manifest};
use crate::oracle::WarpSpec;
use crate::trainer::TrainingConfig;

pub const KEYS: [&str; 18] = [
    "amplitude",
    "edge_gain",
    "wavelength",
    "noise",
    "chamber_min",
    "chamber_max",
    "voxel_size",
    "learning_rate",
    "epochs",
    "batch_size",
    "beta1",
    "beta2",
    "epsilon",
    "l2_weight",
    "chamfer_weight",
    "widths",
    "position_encoding",
    "checkpoint_every",
];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub warp: WarpSpec,
    pub training: TrainingConfig,
    /// Remesh voxel size in mm; commands fall back to their own default when unset.
    pub voxel_size: Option<f64>,
}

fn parse_value<T: FromStr>(path: &Path, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::parse(path, format!("{key}: cannot parse {v:?}")))
}

fn parse_vec3(path: &Path, key: &str, v: &str) -> Result<Vec3> {
    let xs: Vec<f64> = v
        .split_whitespace()
        .map(|t| parse_value(path, key, t))
        .collect::<Result<_>>()?;
    if xs.len() != 3 {
        return Err(Error::parse(path, format!("{key}: expected three numbers, got {v:?}")));
    }
    Ok(Vec3::new(xs[0], xs[1], xs[2]))
}

impl RunConfig {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_manifest(&Manifest::read(path)?, path)
    }

    /// Applies every entry over the defaults. Unknown keys are errors.
    pub fn from_manifest(m: &Manifest, path: &Path) -> Result<Self> {
        let mut c = Self::default();
        let mut chamber = (c.warp.chamber.min(), c.warp.chamber.max());
        for (k, v) in &m.entries {
            let (k, v) = (k.as_str(), v.as_str());
            let t = &mut c.training;
            match k {
                "amplitude" => c.warp.amplitude = parse_value(path, k, v)?,
                "edge_gain" => c.warp.edge_gain = parse_value(path, k, v)?,
                "wavelength" => c.warp.wavelength = parse_value(path, k, v)?,
                "noise" => c.warp.noise = parse_value(path, k, v)?,
                "chamber_min" => chamber.0 = parse_vec3(path, k, v)?,
                "chamber_max" => chamber.1 = parse_vec3(path, k, v)?,
                "voxel_size" => c.voxel_size = Some(parse_value(path, k, v)?),
                "learning_rate" => t.learning_rate = parse_value(path, k, v)?,
                "epochs" => t.epochs = parse_value(path, k, v)?,
                "batch_size" => t.batch_size = parse_value(path, k, v)?,
                "beta1" => t.beta1 = parse_value(path, k, v)?,
                "beta2" => t.beta2 = parse_value(path, k, v)?,
                "epsilon" => t.epsilon = parse_value(path, k, v)?,
                "l2_weight" => t.weights.l2 = parse_value(path, k, v)?,
                "chamfer_weight" => t.weights.chamfer = parse_value(path, k, v)?,
                "widths" => {
                    t.network.widths = v
                        .split_whitespace()
                        .map(|w| parse_value(path, k, w))
                        .collect::<Result<_>>()?
                }
                "position_encoding" => t.encoding = PositionEncoding::parse(v).map_err(|e| Error::parse(path, e.to_string()))?,
                "checkpoint_every" => t.checkpoint_every = parse_value(path, k, v)?,
                _ => {
                    return Err(Error::parse(
                        path,
                        format!("unknown key {k:?}; expected one of {}", KEYS.join(", ")),
                    ))
                }
            }
        }
        let chamber = ChamberSpec::new(chamber.0, chamber.1).map_err(|e| Error::parse(path, e.to_string()))?;
        c.warp.chamber = chamber;
        c.training.chamber = chamber;
        c.validate().map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(c)
    }

    pub fn set_chamber(&mut self, chamber: ChamberSpec) {
        self.warp.chamber = chamber;
        self.training.chamber = chamber;
    }

    pub fn validate(&self) -> Result<()> {
        self.warp.validate()?;
        self.training.validate()?;
        if let Some(v) = self.voxel_size {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("voxel size must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Oracle entries; training entries come from [`TrainingConfig::write_to_manifest`].
    pub fn write_warp_to_manifest(&self, m: &mut Manifest) {
        let v3 = |v: Vec3| format!("{} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z));
        m.set("amplitude", fmt_f64(self.warp.amplitude))
            .set("edge_gain", fmt_f64(self.warp.edge_gain))
            .set("wavelength", fmt_f64(self.warp.wavelength))
            .set("noise", fmt_f64(self.warp.noise))
            .set("chamber_min", v3(self.warp.chamber.min()))
            .set("chamber_max", v3(self.warp.chamber.max()));
    }
}

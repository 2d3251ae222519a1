//! Deformation losses: mean squared point error plus a Chamfer term.

use std::fmt::Write as _;
use std::path::Path;

use crate::autodiff::{chamfer_parts, Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::io::fmt_f64;

/// Weights of the two loss terms. The default is 1:1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub l2: f64,
    pub chamfer: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { l2: 1.0, chamfer: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("l2", self.l2), ("chamfer", self.chamfer)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} weight must be finite and >= 0, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// mm²
    pub l2: f64,
    /// mm
    pub chamfer: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(l2: f64, chamfer: f64, weights: &LossWeights) -> Self {
        Self {
            l2,
            chamfer,
            total: weights.l2 * l2 + weights.chamfer * chamfer,
        }
    }

    /// Component-wise mean, accumulated in slice order.
    pub fn mean(items: &[LossBreakdown]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("cannot average zero losses".into()));
        }
        let n = items.len() as f64;
        let mut acc = LossBreakdown::default();
        for b in items {
            acc.l2 += b.l2;
            acc.chamfer += b.chamfer;
            acc.total += b.total;
        }
        Ok(Self {
            l2: acc.l2 / n,
            chamfer: acc.chamfer / n,
            total: acc.total / n,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.l2.is_finite() && self.chamfer.is_finite() && self.total.is_finite()
    }
}

/// `(1/n) Σ ‖p_i − t_i‖²` over index-aligned clouds.
pub fn l2_loss(pred: &PointCloud, target: &PointCloud) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Alignment {
            expected: target.len(),
            found: pred.len(),
        });
    }
    let total: f64 = pred.iter().zip(target.iter()).map(|(p, t)| (p - t).norm_squared()).sum();
    Ok(total / pred.len() as f64)
}

/// Sum of unsquared nearest-neighbor distances from `a` to `b` plus from `b`
/// to `a`. Not normalized by point count.
pub fn chamfer_loss(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(chamfer_parts(a.points(), b.points())?.0)
}

pub fn deformation_loss(pred: &PointCloud, target: &PointCloud) -> Result<LossBreakdown> {
    weighted_deformation_loss(pred, target, &LossWeights::default())
}

pub fn weighted_deformation_loss(pred: &PointCloud, target: &PointCloud, weights: &LossWeights) -> Result<LossBreakdown> {
    weights.validate()?;
    Ok(LossBreakdown::new(l2_loss(pred, target)?, chamfer_loss(pred, target)?, weights))
}

/// Loss nodes recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub l2: Var,
    pub chamfer: Var,
    pub total: Var,
}

impl LossNodes {
    pub fn breakdown(&self, tape: &Tape) -> Result<LossBreakdown> {
        Ok(LossBreakdown {
            l2: tape.value(self.l2).item()?,
            chamfer: tape.value(self.chamfer).item()?,
            total: tape.value(self.total).item()?,
        })
    }
}

/// Differentiable deformation loss between two `n×3` nodes.
pub fn record_deformation_loss(tape: &mut Tape, pred: Var, target: Var, weights: &LossWeights) -> Result<LossNodes> {
    weights.validate()?;
    let (n, _) = tape.value(pred).require_matrix("prediction")?;
    let (m, _) = tape.value(target).require_matrix("target")?;
    if n != m {
        return Err(Error::Alignment { expected: m, found: n });
    }
    let l2 = tape.l2_loss(pred, target)?;
    let chamfer = tape.chamfer(pred, target)?;
    let total = tape.weighted_sum(&[(l2, weights.l2), (chamfer, weights.chamfer)])?;
    Ok(LossNodes { l2, chamfer, total })
}

/// Per-epoch loss curve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurve {
    pub rows: Vec<(usize, LossBreakdown)>,
}

impl LossCurve {
    pub fn push(&mut self, epoch: usize, loss: LossBreakdown) {
        self.rows.push((epoch, loss));
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,l2,chamfer,total\n");
        for (e, b) in &self.rows {
            let _ = writeln!(s, "{e},{},{},{}", fmt_f64(b.l2), fmt_f64(b.chamfer), fmt_f64(b.total));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("epoch,l2,chamfer,total") {
            return Err(Error::Format("loss curve header must be epoch,l2,chamfer,total".into()));
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Format(format!("bad loss row {line:?}")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number {s:?}")));
            let epoch = f[0].parse().map_err(|_| Error::Format(format!("bad epoch {:?}", f[0])))?;
            rows.push((
                epoch,
                LossBreakdown {
                    l2: num(f[1])?,
                    chamfer: num(f[2])?,
                    total: num(f[3])?,
                },
            ));
        }
        Ok(Self { rows })
    }
}

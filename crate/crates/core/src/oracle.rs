//! Deterministic stand-in for printing and scanning: an analytic,
//! position-dependent warp field plus optional Gaussian scanner noise.
//!
//! The field is `d(p) = A · (1 + γ r̂²) · cos(2π (p.x − c.x) / λ) · ẑ`, where
//! `c` is the chamber center and `r̂² = mean_a ((p_a − c_a) / h_a)²` with
//! `h` the chamber half-extents, so `r̂` is 0 at the center and 1 at every
//! corner. Parts far from the center warp more, and the sign of the warp
//! alternates along x.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{ChamberSpec, PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpSpec {
    /// Base amplitude `A`, mm.
    pub amplitude: f64,
    /// Edge gain `γ`.
    pub edge_gain: f64,
    /// Dome wavelength `λ`, mm.
    pub wavelength: f64,
    /// Scanner noise standard deviation per coordinate, mm.
    pub noise: f64,
    pub chamber: ChamberSpec,
    pub seed: u64,
}

impl Default for WarpSpec {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            edge_gain: 2.0,
            wavelength: 100.0,
            noise: 0.02,
            chamber: ChamberSpec::default(),
            seed: 0,
        }
    }
}

impl WarpSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.amplitude) && self.amplitude >= 0.0) {
            return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {}", self.amplitude)));
        }
        if !(ok(self.edge_gain) && self.edge_gain >= 0.0) {
            return Err(Error::InvalidArgument(format!("edge gain must be >= 0, got {}", self.edge_gain)));
        }
        if !(ok(self.wavelength) && self.wavelength > 0.0) {
            return Err(Error::InvalidArgument(format!("wavelength must be > 0, got {}", self.wavelength)));
        }
        if !(ok(self.noise) && self.noise >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }

    pub fn noiseless(mut self) -> Self {
        self.noise = 0.0;
        self
    }

    /// Normalized squared radius `r̂²` of a point.
    pub fn radius_squared(&self, p: &Vec3) -> f64 {
        let c = self.chamber.center();
        let h = self.chamber.half_extents();
        (0..3).map(|a| ((p[a] - c[a]) / h[a]).powi(2)).sum::<f64>() / 3.0
    }

    fn check_inside(&self, p: &Vec3) -> Result<()> {
        if !self.chamber.contains(p) {
            return Err(Error::OutOfChamber { x: p.x, y: p.y, z: p.z });
        }
        Ok(())
    }
}

pub fn warp_displacement(p: &Vec3, spec: &WarpSpec) -> Result<Vec3> {
    spec.check_inside(p)?;
    Ok(displacement_unchecked(p, spec))
}

fn displacement_unchecked(p: &Vec3, spec: &WarpSpec) -> Vec3 {
    let phase = 2.0 * PI * (p.x - spec.chamber.center().x) / spec.wavelength;
    let dz = spec.amplitude * (1.0 + spec.edge_gain * spec.radius_squared(p)) * phase.cos();
    Vec3::new(0.0, 0.0, dz)
}

/// Displacement and its Jacobian `∂d/∂p` (row `i`, column `j` = `∂d_i/∂p_j`).
pub fn warp_with_jacobian(p: &Vec3, spec: &WarpSpec) -> Result<(Vec3, Matrix3<f64>)> {
    spec.check_inside(p)?;
    let c = spec.chamber.center();
    let h = spec.chamber.half_extents();
    let k = 2.0 * PI / spec.wavelength;
    let phase = k * (p.x - c.x);
    let gain = 1.0 + spec.edge_gain * spec.radius_squared(p);
    let mut j = Matrix3::zeros();
    for a in 0..3 {
        let dgain = spec.edge_gain * 2.0 * (p[a] - c[a]) / (3.0 * h[a] * h[a]);
        j[(2, a)] = spec.amplitude * dgain * phase.cos();
    }
    j[(2, 0)] -= spec.amplitude * gain * k * phase.sin();
    Ok((Vec3::new(0.0, 0.0, spec.amplitude * gain * phase.cos()), j))
}

/// `s_i = c_i + d(c_i) + noise`, index-aligned with the input. Noise is drawn
/// per coordinate from a generator seeded with `spec.seed`.
pub fn simulate_print(cad: &PointCloud, spec: &WarpSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut out = Vec::with_capacity(cad.len());
    for p in cad.iter() {
        out.push(p + warp_displacement(p, spec)?);
    }
    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise)
            .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for q in &mut out {
            for a in 0..3 {
                q[a] += normal.sample(&mut rng);
            }
        }
    }
    PointCloud::new(out)
}

/// The ground-truth compensator: for each target point `c`, the pre-distorted
/// point `c′` with `c′ + d(c′) = c`, so a noiseless print lands exactly on
/// the target. The warp only moves z, so a fixed-point iteration in z
/// suffices; it contracts because `|∂d_z/∂z| ≤ 2Aγ / (3 h_z) ≪ 1`.
pub fn perfect_compensation(cad: &PointCloud, spec: &WarpSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut out = Vec::with_capacity(cad.len());
    for c in cad.iter() {
        spec.check_inside(c)?;
        let mut q = *c;
        for _ in 0..200 {
            let next_z = c.z - displacement_unchecked(&q, spec).z;
            let done = (next_z - q.z).abs() <= 1e-15 * (1.0 + c.z.abs());
            q.z = next_z;
            if done {
                break;
            }
        }
        spec.check_inside(&q)?;
        out.push(q);
    }
    PointCloud::new(out)
}

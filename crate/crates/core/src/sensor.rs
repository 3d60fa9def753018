//! Synthetic soft-finger proprioception.
//!
//! Each finger carries five optical fibers. Light lost in a fiber, in decibels,
//! is `a = 10·log10(I0 / I)`. Deforming the finger bends the fibers; the bend of
//! each fiber is a fixed nonnegative linear combination of the contact features
//! (compression depth, positive and negative twist, positive and negative
//! centroid offset), and the loss is `min(k·bend, a_max)` plus Gaussian noise
//! clamped at zero. The matrix is a synthetic stand-in for the physical fiber
//! routing; the three fingers get distinct matrices to mimic fabrication spread.
//!
//! `react` gives the ground-truth wrench the force/torque sensor under the finger
//! would read, and serves as the calibration label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::ContactPatch;

pub const FIBERS: usize = 5;
pub const FEATURES: usize = 5;

/// Luminous flux loss in dB for baseline intensity `i0` and output intensity `i`.
pub fn flux_loss(i0: f64, i: f64) -> Result<f64> {
    if !(i0 > 0.0 && i > 0.0 && i0.is_finite() && i.is_finite()) {
        return Err(Error::Domain(format!(
            "intensities must be positive and finite (I0={i0}, I={i})"
        )));
    }
    if i > i0 {
        return Err(Error::Domain(format!(
            "output intensity {i} exceeds baseline {i0}"
        )));
    }
    Ok(10.0 * (i0 / i).log10())
}

/// Per-fiber flux losses `(a1..a5)`, dB.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeformationVector(pub [f64; FIBERS]);

impl DeformationVector {
    pub fn zeros() -> Self {
        Self([0.0; FIBERS])
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|a| a.is_finite() && *a >= 0.0)
    }
}

/// Reaction at the finger base: `(Fx, Fy, Fz, Tx, Ty, Tz)`. `Fx` is the normal
/// force, `Fy` the in-plane tangential force, `Tz` the twist torque.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReactionWrench {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl ReactionWrench {
    pub fn as_array(&self) -> [f64; 6] {
        [self.fx, self.fy, self.fz, self.tx, self.ty, self.tz]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            fx: v[0],
            fy: v[1],
            fz: v[2],
            tx: v[3],
            ty: v[4],
            tz: v[5],
        }
    }
}

/// Fiber bend per unit feature, rows are fibers and columns are
/// `[depth (1/m), twist+ (1/rad), twist- (1/rad), offset+ (1/m), offset- (1/m)]`.
///
/// Fiber 1 runs down the pad center, fibers 2 and 3 along the two edges (each
/// stretched by one twist direction), fibers 4 and 5 across the pad.
const NOMINAL_SENSITIVITY: [[f64; FEATURES]; FIBERS] = [
    [25.0, 0.30, 0.30, 1.0, 1.0],
    [18.0, 1.80, 0.20, 4.0, 0.5],
    [18.0, 0.20, 1.80, 0.5, 4.0],
    [20.0, 0.70, 0.40, 8.0, 0.5],
    [20.0, 0.40, 0.70, 0.5, 8.0],
];

/// Constants shared by the three fingers; loaded from the scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseParams {
    /// Bend-to-loss gain k, dB per unit bend.
    pub gain: f64,
    /// Saturation loss a_max, dB.
    pub saturation: f64,
    /// Additive loss noise σ_a, dB.
    pub noise_sigma: f64,
    /// Normal stiffness, N/m.
    pub normal_stiffness: f64,
    /// Tangential coupling of the centroid offset, N/m.
    pub tangential_stiffness: f64,
    /// Torsional stiffness, N·m/rad.
    pub torsional_stiffness: f64,
    /// Relative spread of each finger's sensitivity around the nominal matrix.
    pub spread: f64,
    /// When set, `Fx` scales with `extent / patch_reference`.
    pub patch_reference: Option<f64>,
    /// One seed per finger.
    pub seeds: [u64; 3],
}

impl Default for ResponseParams {
    fn default() -> Self {
        Self {
            gain: 40.0,
            saturation: 30.0,
            noise_sigma: 0.15,
            normal_stiffness: 2000.0,
            tangential_stiffness: 200.0,
            torsional_stiffness: 0.5,
            spread: 0.15,
            patch_reference: None,
            seeds: [101, 202, 303],
        }
    }
}

impl ResponseParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.gain,
            self.saturation,
            self.normal_stiffness,
            self.torsional_stiffness,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Config(
                "gain, saturation and stiffnesses must be positive".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.tangential_stiffness >= 0.0) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.spread) {
            return Err(Error::Config("spread must lie in [0, 1)".into()));
        }
        if let Some(r) = self.patch_reference {
            if !(r > 0.0) {
                return Err(Error::Config("patch_reference must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn finger_models(&self) -> [FingerResponseModel; 3] {
        std::array::from_fn(|i| FingerResponseModel::synthetic(self, self.seeds[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerResponseModel {
    pub sensitivity: [[f64; FEATURES]; FIBERS],
    pub gain: f64,
    pub saturation: f64,
    pub noise_sigma: f64,
    pub normal_stiffness: f64,
    pub tangential_stiffness: f64,
    pub torsional_stiffness: f64,
    pub patch_reference: Option<f64>,
    pub seed: u64,
}

impl FingerResponseModel {
    /// Nominal matrix with every entry scaled by an independent factor in
    /// `1 ± spread`, drawn from `seed`.
    pub fn synthetic(params: &ResponseParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sensitivity = NOMINAL_SENSITIVITY;
        for row in sensitivity.iter_mut() {
            for s in row.iter_mut() {
                *s *= 1.0 + params.spread * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Self {
            sensitivity,
            gain: params.gain,
            saturation: params.saturation,
            noise_sigma: params.noise_sigma,
            normal_stiffness: params.normal_stiffness,
            tangential_stiffness: params.tangential_stiffness,
            torsional_stiffness: params.torsional_stiffness,
            patch_reference: params.patch_reference,
            seed,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    /// Fiber bends for a contact and twist.
    pub fn bends(&self, contact: &ContactPatch, twist: f64) -> [f64; FIBERS] {
        let f = features(contact, twist);
        std::array::from_fn(|j| {
            self.sensitivity[j]
                .iter()
                .zip(f.iter())
                .map(|(s, x)| s * x)
                .sum()
        })
    }

    /// Losses without noise.
    pub fn noiseless_losses(&self, contact: &ContactPatch, twist: f64) -> DeformationVector {
        let bends = self.bends(contact, twist);
        DeformationVector(bends.map(|b| (self.gain * b).min(self.saturation)))
    }
}

/// Contact features `[depth, twist+, twist-, offset+, offset-]`. Splitting the
/// signed quantities keeps every fiber response monotone in |twist| while still
/// letting the twist direction be read off the fiber pattern.
pub fn features(contact: &ContactPatch, twist: f64) -> [f64; FEATURES] {
    [
        contact.depth.max(0.0),
        twist.max(0.0),
        (-twist).max(0.0),
        contact.offset.max(0.0),
        (-contact.offset).max(0.0),
    ]
}

/// Synthetic fiber readout for a contact.
pub fn sense<R: Rng + ?Sized>(
    contact: &ContactPatch,
    twist: f64,
    model: &FingerResponseModel,
    rng: &mut R,
) -> DeformationVector {
    let mut a = model.noiseless_losses(contact, twist);
    if model.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, model.noise_sigma).expect("sigma validated");
        for v in a.0.iter_mut() {
            *v = (*v + noise.sample(rng)).max(0.0);
        }
    }
    a
}

/// Ground-truth reaction wrench for a contact. Planar: `Fz = Tx = Ty = 0`.
pub fn react(contact: &ContactPatch, twist: f64, model: &FingerResponseModel) -> ReactionWrench {
    let patch_factor = match model.patch_reference {
        Some(reference) => contact.extent / reference,
        None => 1.0,
    };
    ReactionWrench {
        fx: model.normal_stiffness * contact.depth.max(0.0) * patch_factor,
        fy: model.tangential_stiffness * contact.offset,
        fz: 0.0,
        tx: 0.0,
        ty: 0.0,
        tz: model.torsional_stiffness * twist,
    }
}

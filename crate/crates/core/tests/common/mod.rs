#![allow(dead_code)]

use std::sync::OnceLock;

use softgrasp::calibration::calibrate_fingers;
use softgrasp::config::{ParamsConfig, SceneConfig};
use softgrasp::optimizer::{grasp, Episode, Rig};
use softgrasp::scene::{BaseMode, GripperConfiguration, ObjectShape, Pose2, ShapeKind, Vec2};

pub fn scene() -> SceneConfig {
    SceneConfig::builtin()
}

pub fn params() -> ParamsConfig {
    ParamsConfig::builtin()
}

/// Rig calibrated on the built-in scene with the default loss noise.
pub fn noisy_rig() -> &'static Rig {
    static RIG: OnceLock<Rig> = OnceLock::new();
    RIG.get_or_init(|| rig(scene().response.noise_sigma))
}

/// Rig calibrated and operated without loss noise.
pub fn noiseless_rig() -> &'static Rig {
    static RIG: OnceLock<Rig> = OnceLock::new();
    RIG.get_or_init(|| rig(0.0))
}

/// Rig calibrated on the built-in scene, with loss noise `sigma` both in the
/// calibration data and at grasp time.
pub fn rig(sigma: f64) -> Rig {
    let mut scene = scene();
    scene.response.noise_sigma = sigma;
    let params = params();
    let objects: Vec<_> = scene.objects.iter().map(|o| o.object().unwrap()).collect();
    let fingers = scene.response.finger_models();
    let runs = calibrate_fingers(&objects, &fingers, &params.calibration, params.seed).unwrap();
    Rig {
        geometry: scene.geometry,
        fingers,
        models: runs.map(|r| r.model),
        mu: scene.mu,
        grip: scene.grip,
    }
}

pub fn object(shape: ShapeKind, x: f64, y: f64, theta_deg: f64) -> ObjectShape {
    ObjectShape::new(shape, Pose2::new(x, y, theta_deg.to_radians())).unwrap()
}

pub fn square() -> ShapeKind {
    ShapeKind::Square { side: 0.05 }
}

pub fn rectangle() -> ShapeKind {
    ShapeKind::Rectangle {
        width: 0.08,
        height: 0.045,
    }
}

pub fn sum_abs_tz(episode: &Episode) -> f64 {
    episode.readings.iter().map(|r| r.wrench.tz.abs()).sum()
}

/// Minimum of Σ|T_z| over base rotations in ±60° at 0.5° with untwisted pads.
pub fn base_rotation_grid_min(object: &ObjectShape, mode: BaseMode, rig: &Rig) -> f64 {
    (-120..=120)
        .map(|k| {
            let config = GripperConfiguration::new(mode, (k as f64 * 0.5).to_radians(), rig.grip);
            let e = grasp(object, &config, rig).unwrap();
            if e.readings.len() == 3 {
                sum_abs_tz(&e)
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Minimum of Σ|T_z| over per-finger proximal offsets in ±60° at 0.5°. The
/// fingers' twists do not interact, so the joint minimum is the sum of the
/// per-finger minima.
pub fn proximal_grid_min(object: &ObjectShape, config: &GripperConfiguration, rig: &Rig) -> f64 {
    (0..3)
        .map(|i| {
            (-120..=120)
                .map(|k| {
                    let mut c = *config;
                    c.fingers[i].proximal = (k as f64 * 0.5).to_radians();
                    let e = grasp(object, &c, rig).unwrap();
                    e.readings
                        .iter()
                        .find(|r| r.finger == i)
                        .map_or(0.0, |r| r.wrench.tz.abs())
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Exhaustive minimization of the imbalance over the scaled simplex: a coarse
/// pass at 0.1 N, then 1e-3 N around the coarse optimum.
pub fn simplex_grid(normals: &[Vec2; 3], total: f64, min_grip: f64) -> [f64; 3] {
    let imbalance = |m0: f64, m1: f64| {
        let m2 = total - m0 - m1;
        (normals[0] * m0 + normals[1] * m1 + normals[2] * m2).norm()
    };
    let search = |lo0: f64, hi0: f64, lo1: f64, hi1: f64, step: f64| {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let n0 = ((hi0 - lo0) / step).round() as i64;
        let n1 = ((hi1 - lo1) / step).round() as i64;
        for i in 0..=n0 {
            let m0 = lo0 + i as f64 * step;
            for j in 0..=n1 {
                let m1 = lo1 + j as f64 * step;
                if m0 < min_grip - 1e-12
                    || m1 < min_grip - 1e-12
                    || total - m0 - m1 < min_grip - 1e-12
                {
                    continue;
                }
                let v = imbalance(m0, m1);
                if v < best.0 {
                    best = (v, m0, m1);
                }
            }
        }
        best
    };
    let coarse = search(0.0, total, 0.0, total, 0.1);
    let fine = search(
        (coarse.1 - 0.2).max(0.0),
        coarse.1 + 0.2,
        (coarse.2 - 0.2).max(0.0),
        coarse.2 + 0.2,
        1e-3,
    );
    [fine.1, fine.2, total - fine.1 - fine.2]
}

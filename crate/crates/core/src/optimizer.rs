//! Interactive grasp optimization.
//!
//! The loop only sees what the fingers report: the predicted normal force and
//! the predicted sign of each finger's twist torque. Ground-truth wrenches are
//! kept alongside for certificates and tests but never steer the loop.
//!
//! 1. Grasp in the Circular layout and record the starting margin.
//! 2. Torque phase: twist every finger whose predicted `sign(T_z)` is nonzero by
//!    `-sign·η`, halving that finger's step whenever its sign flips, until every
//!    sign reads 0 on two consecutive reads.
//! 3. With the pads now flat on the object, look for an opposing pad pair. The
//!    pair (or its absence) together with the object's class prior picks the
//!    base mode, and the pair direction sets the base rotation.
//! 4. Torque phase again in the new layout, drop the mid-plane finger when the
//!    Lateral side fingers already pinch antipodally, then rebalance the normal
//!    forces at constant total grip by nonnegative least squares.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{predict, CalibrationModel, Prediction};
use crate::config::ShapeClass;
use crate::error::{Error, Result};
use crate::mechanics::{margin_value, squeeze_solve, FingerLoad, FingerState, GraspState};
use crate::nnls::nnls_with_limit;
use crate::scene::{
    angle_of, cross, resolve_contacts, twist_angle, BaseMode, ContactPatch, GripperConfiguration,
    GripperGeometry, ObjectShape, Pose2, Vec2, MAX_PROXIMAL, MID_PLANE_FINGER,
};
use crate::sensor::{react, sense, FingerResponseModel, ReactionWrench};

/// Consecutive all-zero sign reads needed to end the torque phase.
const CONFIRM_READS: usize = 3;

/// Facings closer than this to antiparallel count as an opposing pad pair.
const PAIR_ANGLE: f64 = 10.0 * PI / 180.0;

/// Side fingers closer than this to antiparallel may hold the object alone.
const RELEASE_ANGLE: f64 = 5.0 * PI / 180.0;

/// Weight of the total-force row in the balancing least squares.
const TOTAL_ROW_WEIGHT: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizationParams {
    /// ε_T, N·m.
    pub torque_tolerance: f64,
    /// ε_F, N.
    pub force_tolerance: f64,
    /// Initial proximal step η, rad.
    pub rotation_step: f64,
    pub max_torque_iterations: usize,
    pub max_friction_iterations: usize,
    /// Smallest normal force a contacted finger may be asked for, N.
    pub min_grip: f64,
    /// Base mode per shape class; classes not listed use [`select_base_configuration`].
    pub preferences: BTreeMap<ShapeClass, BaseMode>,
}

impl Default for OptimizationParams {
    fn default() -> Self {
        Self {
            torque_tolerance: 0.01,
            force_tolerance: 0.1,
            rotation_step: 5f64.to_radians(),
            max_torque_iterations: 50,
            max_friction_iterations: 50,
            min_grip: 0.5,
            preferences: BTreeMap::new(),
        }
    }
}

impl OptimizationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.torque_tolerance,
            self.force_tolerance,
            self.rotation_step,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Config(
                "tolerances and rotation step must be positive".into(),
            ));
        }
        if self.max_torque_iterations == 0 || self.max_friction_iterations == 0 {
            return Err(Error::Config("iteration caps must be >= 1".into()));
        }
        if !(self.min_grip >= 0.0 && self.min_grip.is_finite()) {
            return Err(Error::Config("min_grip must be >= 0".into()));
        }
        Ok(())
    }

    pub fn mode_for(&self, class: ShapeClass) -> BaseMode {
        self.preferences
            .get(&class)
            .copied()
            .unwrap_or_else(|| select_base_configuration(class))
    }
}

/// Default layout preference per shape class.
pub fn select_base_configuration(class: ShapeClass) -> BaseMode {
    match class {
        ShapeClass::Sphere | ShapeClass::Circle => BaseMode::Circular,
        ShapeClass::Cylinder | ShapeClass::Cuboid | ShapeClass::Rectangle => BaseMode::Parallel,
        ShapeClass::Cube | ShapeClass::Square => BaseMode::Lateral,
        ShapeClass::Prism | ShapeClass::Triangle | ShapeClass::Unknown => BaseMode::Circular,
    }
}

/// Everything about the hardware a grasp episode needs: geometry, the true
/// fiber response of each finger, and the calibrated model reading it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    pub geometry: GripperGeometry,
    pub fingers: [FingerResponseModel; 3],
    pub models: [CalibrationModel; 3],
    pub mu: f64,
    /// Initial grip command per finger, N.
    pub grip: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactReading {
    pub finger: usize,
    pub patch: ContactPatch,
    /// Pad facing in the world frame.
    pub facing: Vec2,
    pub twist: f64,
    /// Ground truth.
    pub wrench: ReactionWrench,
}

/// One squeeze: where the fingers touched and how the object settled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub readings: Vec<ContactReading>,
    pub state: GraspState,
}

/// Closes the gripper on the object and solves for the resting friction.
/// Fewer than two contacts give a state that is not equilibrated.
pub fn grasp(object: &ObjectShape, config: &GripperConfiguration, rig: &Rig) -> Result<Episode> {
    let frames = rig.geometry.finger_frames(config);
    let readings: Vec<ContactReading> = resolve_contacts(object, config, &rig.geometry)
        .into_iter()
        .filter_map(|(i, patch)| {
            let patch = patch?;
            let facing = frames[i].facing;
            let twist = twist_angle(&facing, &patch.normal);
            Some(ContactReading {
                finger: i,
                patch,
                facing,
                twist,
                wrench: react(&patch, twist, &rig.fingers[i]),
            })
        })
        .collect();
    let loads: Vec<FingerLoad> = readings
        .iter()
        .map(|r| FingerLoad {
            finger: r.finger,
            point: r.patch.point,
            normal: r.patch.normal,
            normal_force: r.wrench.fx,
            torque_z: r.wrench.tz,
        })
        .collect();
    let state = match squeeze_solve(&loads, object.pose, rig.mu) {
        Ok(state) => state,
        Err(Error::GraspImpossible { .. }) => GraspState {
            fingers: loads
                .iter()
                .map(|l| FingerState {
                    finger: l.finger,
                    point: l.point,
                    normal: l.normal,
                    normal_force: l.normal_force,
                    tangential: Vec2::zeros(),
                    torque_z: l.torque_z,
                })
                .collect(),
            object_pose: object.pose,
            mu: rig.mu,
            equilibrated: false,
        },
        Err(e) => return Err(e),
    };
    Ok(Episode { readings, state })
}

/// Senses every contacted finger and runs its calibrated model.
pub fn read<R: Rng + ?Sized>(
    episode: &Episode,
    rig: &Rig,
    rng: &mut R,
) -> Vec<(usize, Prediction)> {
    episode
        .readings
        .iter()
        .map(|r| {
            let a = sense(&r.patch, r.twist, &rig.fingers[r.finger], rng);
            (r.finger, predict(&rig.models[r.finger], &a))
        })
        .collect()
}

/// Largest ground-truth `|T_z|` over the contacted fingers.
pub fn max_abs_torque(state: &GraspState) -> f64 {
    state
        .fingers
        .iter()
        .map(|f| f.torque_z.abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueOutcome {
    pub config: GripperConfiguration,
    pub episode: Episode,
    /// Number of proximal adjustment rounds.
    pub iterations: usize,
    pub converged: bool,
}

/// Drives every predicted `sign(T_z)` to zero by twisting the proximal joints.
pub fn torque_optimize<R: Rng + ?Sized>(
    object: &ObjectShape,
    config: &GripperConfiguration,
    rig: &Rig,
    params: &OptimizationParams,
    rng: &mut R,
) -> Result<TorqueOutcome> {
    config.validate()?;
    let mut config = *config;
    let mut step = [params.rotation_step; 3];
    let mut last_sign = [0i8; 3];
    let mut iterations = 0;
    let mut quiet = 0;
    // Each adjustment round is preceded by at most CONFIRM_READS quiet reads.
    let max_reads = (params.max_torque_iterations + 1) * (CONFIRM_READS + 1);
    let mut episode = grasp(object, &config, rig)?;
    for _ in 0..max_reads {
        if episode.readings.len() < 2 {
            break;
        }
        let predictions = read(&episode, rig, rng);
        if predictions.iter().all(|(_, p)| p.tz_sign == 0) {
            quiet += 1;
            if quiet >= CONFIRM_READS {
                return Ok(TorqueOutcome {
                    config,
                    episode,
                    iterations,
                    converged: true,
                });
            }
            continue;
        }
        quiet = 0;
        if iterations >= params.max_torque_iterations {
            break;
        }
        for (i, p) in &predictions {
            let s = p.tz_sign;
            if s == 0 {
                continue;
            }
            if last_sign[*i] == -s {
                step[*i] *= 0.5;
            }
            last_sign[*i] = s;
            let finger = &mut config.fingers[*i];
            finger.proximal =
                (finger.proximal - f64::from(s) * step[*i]).clamp(-MAX_PROXIMAL, MAX_PROXIMAL);
        }
        iterations += 1;
        episode = grasp(object, &config, rig)?;
    }
    Ok(TorqueOutcome {
        config,
        episode,
        iterations,
        converged: false,
    })
}

/// Normal-force magnitudes balancing the given inward normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    pub magnitudes: Vec<f64>,
    /// `‖Σ m_i·n̂_i‖`, N.
    pub imbalance: f64,
    pub iterations: usize,
}

/// Minimizes `‖Σ m_i·n̂_i‖` subject to `m_i ≥ min_grip` and `Σ m_i = total`.
///
/// When several magnitude vectors reach the same imbalance, the one whose
/// normal forces leave the smallest net moment about `centroid` is returned.
pub fn balance_normal_forces(
    normals: &[Vec2],
    points: &[Vec2],
    centroid: Vec2,
    total: f64,
    min_grip: f64,
    max_iterations: usize,
) -> Result<Balance> {
    let k = normals.len();
    if k == 0 || points.len() != k {
        return Err(Error::Usage("one contact point per normal required".into()));
    }
    if !(total >= 0.0 && min_grip >= 0.0) {
        return Err(Error::Domain("forces must be nonnegative".into()));
    }
    let spare = total - k as f64 * min_grip;
    if spare < 0.0 {
        return Err(Error::Domain(format!(
            "total {total} N cannot give {k} fingers at least {min_grip} N"
        )));
    }
    // Unknowns x = m - min_grip ≥ 0.
    let mut a = DMatrix::<f64>::zeros(3, k);
    let mut floor = Vec2::zeros();
    for (j, n) in normals.iter().enumerate() {
        a[(0, j)] = TOTAL_ROW_WEIGHT;
        a[(1, j)] = n.x;
        a[(2, j)] = n.y;
        floor += n * min_grip;
    }
    let b = DVector::from_vec(vec![TOTAL_ROW_WEIGHT * spare, -floor.x, -floor.y]);
    let solution = nnls_with_limit(&a, &b, max_iterations)?;
    let mut x = solution.x.clone();
    let sum = x.sum();
    if sum > 0.0 {
        x *= spare / sum;
    } else {
        x.fill(spare / k as f64);
    }
    // The weighted row only approximates the total; re-solve exactly on the
    // support NNLS found.
    let support: Vec<usize> = (0..k).filter(|j| solution.x[*j] > 0.0).collect();
    if let Some(exact) = solve_on_support(normals, &floor, spare, &support) {
        x.fill(0.0);
        for (y, j) in exact.iter().zip(&support) {
            x[*j] = *y;
        }
    }
    let mut m: Vec<f64> = x.iter().map(|v| v + min_grip).collect();

    // Along a null direction of [normals; 1ᵀ] the imbalance and total are
    // fixed; use it to cancel the moment of the normal forces.
    let constraint = DMatrix::from_fn(3, k, |r, j| match r {
        0 => normals[j].x,
        1 => normals[j].y,
        _ => 1.0,
    });
    let svd = constraint.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd computed with v");
    let mut null: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|i| svd.singular_values[*i] <= 1e-9)
        .map(|i| v_t.row(i).transpose())
        .collect();
    if k > 3 {
        // Thin SVD drops the trailing null directions; they are not needed for
        // the three-finger gripper.
        null.clear();
    }
    if let [v] = null.as_slice() {
        let lever: Vec<f64> = (0..k)
            .map(|j| cross(&(points[j] - centroid), &normals[j]))
            .collect();
        let moment: f64 = (0..k).map(|j| m[j] * lever[j]).sum();
        let slope: f64 = (0..k).map(|j| v[j] * lever[j]).sum();
        if slope.abs() > 1e-15 {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for j in 0..k {
                if v[j].abs() > 1e-15 {
                    let bound = (min_grip - m[j]) / v[j];
                    if v[j] > 0.0 {
                        lo = lo.max(bound);
                    } else {
                        hi = hi.min(bound);
                    }
                }
            }
            let alpha = (-moment / slope).clamp(lo.min(0.0), hi.max(0.0));
            for j in 0..k {
                m[j] = (m[j] + alpha * v[j]).max(min_grip);
            }
        }
    }
    let imbalance = normals
        .iter()
        .zip(&m)
        .fold(Vec2::zeros(), |acc, (n, f)| acc + n * *f)
        .norm();
    Ok(Balance {
        magnitudes: m,
        imbalance,
        iterations: solution.iterations,
    })
}

/// `min ‖Σ_{j∈S} y_j·n̂_j + floor‖` subject to `Σ y_j = spare`, through the KKT
/// system. `None` if the minimizer leaves the nonnegative orthant.
fn solve_on_support(
    normals: &[Vec2],
    floor: &Vec2,
    spare: f64,
    support: &[usize],
) -> Option<Vec<f64>> {
    let p = support.len();
    if p == 0 {
        return None;
    }
    let mut kkt = DMatrix::<f64>::zeros(p + 1, p + 1);
    let mut rhs = DVector::<f64>::zeros(p + 1);
    for (r, i) in support.iter().enumerate() {
        for (c, j) in support.iter().enumerate() {
            kkt[(r, c)] = normals[*i].dot(&normals[*j]);
        }
        kkt[(r, p)] = 1.0;
        kkt[(p, r)] = 1.0;
        rhs[r] = -normals[*i].dot(floor);
    }
    rhs[p] = spare;
    let svd = kkt.svd(true, true);
    let y = svd
        .solve(&rhs, 1e-12 * svd.singular_values.max().max(1.0))
        .ok()?;
    let out: Vec<f64> = (0..p).map(|r| y[r]).collect();
    out.iter()
        .all(|v| *v >= -1e-12)
        .then(|| out.iter().map(|v| v.max(0.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionOutcome {
    pub config: GripperConfiguration,
    pub episode: Episode,
    pub balance: Balance,
    /// Whether the final normal imbalance is within ε_F.
    pub feasible: bool,
}

/// Rebalances the grip commands of the contacted fingers at constant total so
/// the normal forces cancel, then squeezes again.
pub fn friction_optimize(
    object: &ObjectShape,
    config: &GripperConfiguration,
    state: &GraspState,
    rig: &Rig,
    params: &OptimizationParams,
) -> Result<FrictionOutcome> {
    if state.fingers.len() < 2 {
        return Err(Error::GraspImpossible {
            contacts: state.fingers.len(),
        });
    }
    let normals: Vec<Vec2> = state.fingers.iter().map(|f| f.normal).collect();
    let points: Vec<Vec2> = state.fingers.iter().map(|f| f.point).collect();
    let total: f64 = state
        .fingers
        .iter()
        .map(|f| config.fingers[f.finger].grip)
        .sum();
    let min_grip = params.min_grip.min(total / state.fingers.len() as f64);
    let balance = balance_normal_forces(
        &normals,
        &points,
        state.centroid(),
        total,
        min_grip,
        params.max_friction_iterations,
    )?;
    let mut config = *config;
    for (f, m) in state.fingers.iter().zip(&balance.magnitudes) {
        config.fingers[f.finger].grip = *m;
    }
    let episode = grasp(object, &config, rig)?;
    let feasible = episode.state.fingers.len() >= 2
        && episode.state.normal_imbalance().norm() <= params.force_tolerance;
    Ok(FrictionOutcome {
        config,
        episode,
        balance,
        feasible,
    })
}

/// Lets the two side fingers of the Lateral layout hold the object alone when
/// they face each other and the line between their contacts lies inside both
/// friction cones. Their grips absorb the released finger's share.
pub fn release_finger_if_needed(
    object: &ObjectShape,
    config: &GripperConfiguration,
    rig: &Rig,
) -> Result<GripperConfiguration> {
    if config.base_mode != BaseMode::Lateral || !config.fingers[MID_PLANE_FINGER].active {
        return Ok(*config);
    }
    let episode = grasp(object, config, rig)?;
    let side: Vec<&ContactReading> = episode
        .readings
        .iter()
        .filter(|r| r.finger != MID_PLANE_FINGER)
        .collect();
    let [a, b] = side.as_slice() else {
        return Ok(*config);
    };
    let antiparallel = a.patch.normal.dot(&b.patch.normal) <= -RELEASE_ANGLE.cos();
    let chord = b.patch.point - a.patch.point;
    let cone = rig.mu.atan();
    let inside = |d: Vec2, n: Vec2| {
        let len = d.norm();
        len > 0.0 && (d.dot(&n) / len).clamp(-1.0, 1.0).acos() <= cone
    };
    if !(antiparallel && inside(chord, a.patch.normal) && inside(-chord, b.patch.normal)) {
        return Ok(*config);
    }
    let mut out = *config;
    let share = out.fingers[MID_PLANE_FINGER].grip / 2.0;
    out.fingers[MID_PLANE_FINGER].active = false;
    out.fingers[a.finger].grip += share;
    out.fingers[b.finger].grip += share;
    Ok(out)
}

/// What the pads felt after the alignment probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TactileShape {
    /// Two pads face each other; `axis` is the direction between them, in `(-π/2, π/2]`.
    OpposingPair {
        axis: f64,
        separation: f64,
    },
    NoPair,
}

/// Folds an axis direction into `(-π/2, π/2]`.
pub fn normalize_axis(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(PI);
    if a > FRAC_PI_2 {
        a -= PI;
    }
    a
}

/// Looks for antiparallel pad facings; the narrowest such pair wins.
pub fn tactile_summary(episode: &Episode) -> TactileShape {
    let r = &episode.readings;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            if r[i].facing.dot(&r[j].facing) > -PAIR_ANGLE.cos() {
                continue;
            }
            let separation = (r[j].patch.point - r[i].patch.point)
                .dot(&r[i].facing)
                .abs();
            if best.is_none_or(|(s, _)| separation < s) {
                best = Some((separation, normalize_axis(angle_of(&r[i].facing))));
            }
        }
    }
    match best {
        Some((separation, axis)) => TactileShape::OpposingPair { axis, separation },
        None => TactileShape::NoPair,
    }
}

/// Combines the tactile summary with the object's class prior.
pub fn classify(summary: &TactileShape, prior: Option<ShapeClass>) -> ShapeClass {
    use ShapeClass::*;
    match summary {
        TactileShape::OpposingPair { .. } => match prior {
            Some(c @ (Cuboid | Rectangle)) => c,
            Some(Square) => Square,
            _ => Cube,
        },
        TactileShape::NoPair => match prior {
            Some(c @ (Cylinder | Sphere | Circle | Prism | Triangle)) => c,
            _ => Unknown,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedGrasp {
    pub object_pose: Pose2,
    pub shape_class: ShapeClass,
    /// Base modes visited, in order.
    pub transitions: Vec<BaseMode>,
    pub initial_config: GripperConfiguration,
    pub config: GripperConfiguration,
    pub state: GraspState,
    /// Predictions read at the initial grasp.
    pub initial_predictions: Vec<(usize, Prediction)>,
    pub margin_before: f64,
    pub margin_after: f64,
    pub torque_iterations: usize,
    pub friction_iterations: usize,
    pub torque_converged: bool,
    pub friction_converged: bool,
    pub converged: bool,
    pub released_finger: Option<usize>,
}

fn margin_or_zero(state: &GraspState) -> f64 {
    if state.equilibrated {
        margin_value(state)
    } else {
        0.0
    }
}

/// Open-loop baseline: Circular layout, equal grips, no adjustment.
pub fn conventional_grasp(object: &ObjectShape, rig: &Rig) -> Result<OptimizedGrasp> {
    let config = GripperConfiguration::new(BaseMode::Circular, 0.0, rig.grip);
    let episode = grasp(object, &config, rig)?;
    let margin = margin_or_zero(&episode.state);
    Ok(OptimizedGrasp {
        object_pose: object.pose,
        shape_class: ShapeClass::Unknown,
        transitions: vec![BaseMode::Circular],
        initial_config: config,
        config,
        margin_before: margin,
        margin_after: margin,
        converged: episode.state.equilibrated,
        state: episode.state,
        initial_predictions: Vec::new(),
        torque_iterations: 0,
        friction_iterations: 0,
        torque_converged: false,
        friction_converged: false,
        released_finger: None,
    })
}

/// The full interactive procedure from a Circular first touch.
pub fn interactive_grasp<R: Rng + ?Sized>(
    object: &ObjectShape,
    prior: Option<ShapeClass>,
    rig: &Rig,
    params: &OptimizationParams,
    rng: &mut R,
) -> Result<OptimizedGrasp> {
    params.validate()?;
    let initial = GripperConfiguration::new(BaseMode::Circular, 0.0, rig.grip);
    let first = grasp(object, &initial, rig)?;
    let margin_before = margin_or_zero(&first.state);
    let initial_predictions = read(&first, rig, rng);

    let probe = torque_optimize(object, &initial, rig, params, rng)?;
    let summary = tactile_summary(&probe.episode);
    let shape_class = classify(&summary, prior);
    let mode = params.mode_for(shape_class);
    let mut transitions = vec![BaseMode::Circular];

    let torque = if mode == BaseMode::Circular {
        probe.clone()
    } else {
        transitions.push(mode);
        let rotation = match summary {
            TactileShape::OpposingPair { axis, .. } => {
                normalize_axis(axis - GripperGeometry::pinch_axis_angle(mode))
            }
            TactileShape::NoPair => 0.0,
        };
        let config = GripperConfiguration::new(mode, rotation, rig.grip);
        let mut second = torque_optimize(object, &config, rig, params, rng)?;
        second.iterations += probe.iterations;
        second
    };

    let config = release_finger_if_needed(object, &torque.config, rig)?;
    let released_finger =
        (config.active_count() < torque.config.active_count()).then_some(MID_PLANE_FINGER);
    let settled = if released_finger.is_some() {
        grasp(object, &config, rig)?.state
    } else {
        torque.episode.state.clone()
    };

    let (config, state, friction_iterations, friction_converged) = if settled.fingers.len() >= 2 {
        let friction = friction_optimize(object, &config, &settled, rig, params)?;
        (
            friction.config,
            friction.episode.state,
            friction.balance.iterations,
            friction.feasible,
        )
    } else {
        (config, settled, 0, false)
    };

    let margin_after = margin_or_zero(&state);
    Ok(OptimizedGrasp {
        object_pose: object.pose,
        shape_class,
        transitions,
        initial_config: initial,
        config,
        converged: torque.converged && friction_converged && state.equilibrated,
        state,
        initial_predictions,
        margin_before,
        margin_after,
        torque_iterations: torque.iterations,
        friction_iterations,
        torque_converged: torque.converged,
        friction_converged,
        released_finger,
    })
}

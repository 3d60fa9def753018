//! Quasi-static grasp mechanics in the plane.
//!
//! Each finger pushes along the inward surface normal with magnitude `F_n` and
//! can add a tangential friction force `F_t ⊥ n̂` with `‖F_t‖ ≤ μ·F_n` (Coulomb).
//! The object is in equilibrium when the contact forces, the finger twist
//! torques, the moments of the contact forces about the object centroid and
//! any external load all cancel.
//!
//! The anti-disturbance margin is the scalar `μ·ΣF_n − ‖ΣF_n·n̂‖`: the total
//! friction the fingers can supply minus the friction already spent holding the
//! resting normal-force imbalance. It is largest, `μ·ΣF_n`, when the normal
//! forces balance on their own.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{cross, perp, Pose2, Vec2};

/// Absolute residual bound (N, N·m) under which a state counts as equilibrated.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-9;

/// Relative slack on the cone boundary, so that scaling a boundary force never
/// flips admissibility through rounding.
const CONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerState {
    pub finger: usize,
    pub point: Vec2,
    /// Inward unit normal.
    pub normal: Vec2,
    pub normal_force: f64,
    /// In-plane friction force, orthogonal to `normal`.
    pub tangential: Vec2,
    /// Twist torque the finger applies to the object, N·m.
    pub torque_z: f64,
}

impl FingerState {
    pub fn contact_force(&self) -> Vec2 {
        self.normal * self.normal_force + self.tangential
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspState {
    pub fingers: Vec<FingerState>,
    pub object_pose: Pose2,
    pub mu: f64,
    /// Whether a cone-admissible friction distribution balances the grasp.
    pub equilibrated: bool,
}

impl GraspState {
    pub fn centroid(&self) -> Vec2 {
        self.object_pose.position()
    }

    pub fn total_normal_force(&self) -> f64 {
        self.fingers.iter().map(|f| f.normal_force).sum()
    }

    /// `Σ F_n,i · n̂_i`.
    pub fn normal_imbalance(&self) -> Vec2 {
        self.fingers
            .iter()
            .fold(Vec2::zeros(), |acc, f| acc + f.normal * f.normal_force)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::Domain(
                "friction coefficient must be positive".into(),
            ));
        }
        for f in &self.fingers {
            if !(f.normal_force >= 0.0) {
                return Err(Error::Domain(format!(
                    "finger {}: negative normal force {}",
                    f.finger, f.normal_force
                )));
            }
            if (f.normal.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "finger {}: normal not unit",
                    f.finger
                )));
            }
        }
        Ok(())
    }
}

/// Coulomb admissibility: `‖F_t‖ ≤ μ·F_n`, boundary included.
pub fn friction_cone_check(normal_force: f64, tangential: &Vec2, mu: f64) -> Result<bool> {
    if !(normal_force >= 0.0) {
        return Err(Error::Domain(format!(
            "normal force must be >= 0, got {normal_force}"
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::Domain(format!(
            "friction coefficient must be > 0, got {mu}"
        )));
    }
    Ok(tangential.norm() <= mu * normal_force * (1.0 + CONE_SLACK))
}

/// Force and torque residuals of the equilibrium equations under an external
/// load `(f_ext, t_ext)`. Moments are taken about the object centroid.
pub fn equilibrium_residual(state: &GraspState, f_ext: &Vec2, t_ext: f64) -> (Vec2, f64) {
    let c = state.centroid();
    let mut force = *f_ext;
    let mut torque = t_ext;
    for f in &state.fingers {
        let load = f.contact_force();
        force += load;
        torque += f.torque_z + cross(&(f.point - c), &load);
    }
    (force, torque)
}

/// Raw margin `μ·ΣF_n − ‖ΣF_n·n̂‖`, clamped at zero, without the equilibrium check.
pub fn margin_value(state: &GraspState) -> f64 {
    (state.mu * state.total_normal_force() - state.normal_imbalance().norm()).max(0.0)
}

/// Smallest worst-direction external force that breaks the grasp.
pub fn anti_disturbance_margin(state: &GraspState) -> Result<f64> {
    if !state.equilibrated {
        return Err(Error::Domain(
            "margin is undefined for a grasp that is not in equilibrium".into(),
        ));
    }
    Ok(margin_value(state))
}

/// Friction moment the fingers could still add about the centroid beyond what
/// the current tangential forces already supply.
pub fn residual_torque_capacity(state: &GraspState) -> f64 {
    let c = state.centroid();
    let capacity: f64 = state
        .fingers
        .iter()
        .map(|f| state.mu * f.normal_force * (f.point - c).dot(&f.normal).abs())
        .sum();
    let used: f64 = state
        .fingers
        .iter()
        .map(|f| cross(&(f.point - c), &f.tangential))
        .sum();
    (capacity - used.abs()).max(0.0)
}

/// Normal load of one finger going into the squeeze solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerLoad {
    pub finger: usize,
    pub point: Vec2,
    pub normal: Vec2,
    pub normal_force: f64,
    pub torque_z: f64,
}

/// Finds tangential forces that hold the object still under the given normal
/// loads and twist torques, with no external load.
///
/// The tangential magnitudes solve three linear equations (two force, one
/// moment). The minimum-norm solution is used when it fits inside every cone;
/// otherwise the solution set is searched for a cone-admissible point. When no
/// admissible balance exists the state is returned with the least-squares
/// magnitudes clipped to the cones and `equilibrated = false`.
pub fn squeeze_solve(loads: &[FingerLoad], object_pose: Pose2, mu: f64) -> Result<GraspState> {
    if loads.len() < 2 {
        return Err(Error::GraspImpossible {
            contacts: loads.len(),
        });
    }
    if !(mu > 0.0) {
        return Err(Error::Domain(format!(
            "friction coefficient must be > 0, got {mu}"
        )));
    }
    if let Some(bad) = loads.iter().find(|l| !(l.normal_force >= 0.0)) {
        return Err(Error::Domain(format!(
            "finger {}: negative normal force",
            bad.finger
        )));
    }
    let c = object_pose.position();
    let k = loads.len();
    let lever = loads
        .iter()
        .map(|l| (l.point - c).norm())
        .fold(0.0, f64::max)
        .max(1e-6);

    // Rows: Fx, Fy, moment / lever.
    let mut a = DMatrix::<f64>::zeros(3, k);
    let mut rhs_force = Vec2::zeros();
    let mut rhs_moment = 0.0;
    for (j, l) in loads.iter().enumerate() {
        let r = l.point - c;
        let tangent = perp(&l.normal);
        a[(0, j)] = tangent.x;
        a[(1, j)] = tangent.y;
        a[(2, j)] = cross(&r, &tangent) / lever;
        rhs_force -= l.normal * l.normal_force;
        rhs_moment -= l.torque_z + cross(&r, &(l.normal * l.normal_force));
    }
    let b = DVector::from_vec(vec![rhs_force.x, rhs_force.y, rhs_moment / lever]);
    let caps: Vec<f64> = loads.iter().map(|l| mu * l.normal_force).collect();

    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let rank_tol = 1e-12 * sigma_max.max(1.0);
    let t0 = svd.solve(&b, rank_tol).expect("svd computed with u and v");
    let v_t = svd.v_t.as_ref().expect("svd computed with v");
    let null: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|i| svd.singular_values[*i] <= rank_tol)
        .map(|i| v_t.row(i).transpose())
        .collect();

    let inside = |t: &DVector<f64>| (0..k).all(|j| t[j].abs() <= caps[j] * (1.0 + CONE_SLACK));
    let solution = if inside(&t0) {
        Some(t0.clone())
    } else {
        admissible_in_affine_set(&t0, &null, &caps)
    };
    let consistent = (&a * &t0 - &b).norm() <= EQUILIBRIUM_TOLERANCE;

    let (t, feasible) = match solution {
        Some(t) if consistent => (t, true),
        _ => (
            t0.map_with_location(|j, _, v| v.clamp(-caps[j], caps[j])),
            false,
        ),
    };

    let fingers: Vec<FingerState> = loads
        .iter()
        .enumerate()
        .map(|(j, l)| FingerState {
            finger: l.finger,
            point: l.point,
            normal: l.normal,
            normal_force: l.normal_force,
            tangential: perp(&l.normal) * t[j],
            torque_z: l.torque_z,
        })
        .collect();
    let mut state = GraspState {
        fingers,
        object_pose,
        mu,
        equilibrated: false,
    };
    let (force_res, torque_res) = equilibrium_residual(&state, &Vec2::zeros(), 0.0);
    state.equilibrated = feasible
        && force_res.norm() <= EQUILIBRIUM_TOLERANCE
        && torque_res.abs() <= EQUILIBRIUM_TOLERANCE;
    Ok(state)
}

/// Searches `{t0 + N z}` for a point inside the box `|t_j| ≤ caps_j`.
fn admissible_in_affine_set(
    t0: &DVector<f64>,
    null: &[DVector<f64>],
    caps: &[f64],
) -> Option<DVector<f64>> {
    match null.len() {
        0 => None,
        1 => {
            // Intersect the per-finger intervals on the line parameter.
            let v = &null[0];
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for j in 0..t0.len() {
                if v[j].abs() < 1e-14 {
                    if t0[j].abs() > caps[j] {
                        return None;
                    }
                    continue;
                }
                let p = (-caps[j] - t0[j]) / v[j];
                let q = (caps[j] - t0[j]) / v[j];
                lo = lo.max(p.min(q));
                hi = hi.min(p.max(q));
            }
            if lo > hi {
                return None;
            }
            let unconstrained = -t0.dot(v) / v.norm_squared();
            Some(t0 + v * unconstrained.clamp(lo, hi))
        }
        _ => {
            // Alternating projections between the affine set and the box.
            let basis = DMatrix::from_columns(null);
            let mut t = t0.clone();
            for _ in 0..5000 {
                let boxed = t.map_with_location(|j, _, x| x.clamp(-caps[j], caps[j]));
                let z = basis.transpose() * (&boxed - t0);
                t = t0 + &basis * z;
                if (&t - &boxed).norm() < 1e-13 {
                    return Some(t.map_with_location(|j, _, x| x.clamp(-caps[j], caps[j])));
                }
            }
            None
        }
    }
}

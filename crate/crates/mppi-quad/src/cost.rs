//! Rollout cost evaluation: input magnitude and smoothness, reference
//! tracking with a sign-invariant quaternion distance, and an indicator
//! obstacle penalty.
//!
//! The Euclidean norm is a poor orientation metric — q and −q encode the same
//! rotation but differ by 2 in quaternion space. Both metrics here satisfy
//! d(q, q) = d(q, −q) = 0. The exact rotation angle
//! θ = arccos(2⟨q₁,q₂⟩² − 1) is available for comparison; the default is the
//! cheaper approximation 1 − ⟨q₁,q₂⟩².

use nalgebra::{UnitQuaternion, Vector4};
use serde::{Deserialize, Serialize};

use crate::actuator::BodyCommand;
use crate::dynamics::State;
use crate::error::Error;
use crate::world::CollisionWorld;

/// Which orientation distance the tracking cost uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuatMetric {
    /// 1 − ⟨q₁,q₂⟩², cheap and sign-invariant (the default).
    #[default]
    Approx,
    /// Exact rotation angle in radians; noticeably more expensive.
    ExactAngle,
}

/// Cost weights: diagonal input matrices plus scalar tracking coefficients.
/// Channel order everywhere is [F_t, ω_x, ω_y, ω_z].
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    /// Input magnitude weight diag(R)
    pub r: Vector4<f64>,
    /// Input change weight diag(R_Δ)
    pub r_delta: Vector4<f64>,
    /// Position error weight [1/m²]
    pub c_p: f64,
    /// Orientation error weight
    pub c_q: f64,
    /// Velocity error weight [s²/m²]
    pub c_v: f64,
    /// Body-rate error weight [s²/rad²]
    pub c_w: f64,
    /// Penalty per predicted in-collision state
    pub c_obs: f64,
    pub quat_metric: QuatMetric,
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), Error> {
        let non_negative = self.r.iter().all(|v| *v >= 0.0)
            && self.r_delta.iter().all(|v| *v >= 0.0)
            && self.c_p >= 0.0
            && self.c_q >= 0.0
            && self.c_v >= 0.0
            && self.c_w >= 0.0
            && self.c_obs >= 0.0;
        if !non_negative {
            return Err(Error::InvalidConfig(
                "weights: all cost coefficients must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Reference states aligned with the rollout time grid (length N+1).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceWindow {
    states: Vec<State>,
}

impl ReferenceWindow {
    pub fn new(states: Vec<State>) -> Self {
        debug_assert!(!states.is_empty());
        Self { states }
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn quat_inner(q1: &UnitQuaternion<f64>, q2: &UnitQuaternion<f64>) -> f64 {
    let a = q1.quaternion();
    let b = q2.quaternion();
    a.w * b.w + a.i * b.i + a.j * b.j + a.k * b.k
}

/// Rotation angle [rad] between two orientations: arccos(2⟨q₁,q₂⟩² − 1),
/// clamped into domain; range [0, π].
pub fn quat_angle(q1: &UnitQuaternion<f64>, q2: &UnitQuaternion<f64>) -> f64 {
    let d = quat_inner(q1, q2);
    (2.0 * d * d - 1.0).clamp(-1.0, 1.0).acos()
}

/// Sign-invariant orientation distance 1 − ⟨q₁,q₂⟩² in [0, 1].
pub fn quat_dist_approx(q1: &UnitQuaternion<f64>, q2: &UnitQuaternion<f64>) -> f64 {
    let d = quat_inner(q1, q2);
    (1.0 - d * d).max(0.0)
}

fn quat_dist(metric: QuatMetric, q1: &UnitQuaternion<f64>, q2: &UnitQuaternion<f64>) -> f64 {
    match metric {
        QuatMetric::Approx => quat_dist_approx(q1, q2),
        QuatMetric::ExactAngle => quat_angle(q1, q2),
    }
}

fn weighted_sq(v: &Vector4<f64>, diag: &Vector4<f64>) -> f64 {
    v.component_mul(diag).dot(v)
}

/// Input magnitude and smoothness cost over a control sequence:
/// Σⱼ ‖uⱼ‖²_R + Σⱼ ‖u_{j+1} − uⱼ‖²_{R_Δ}.
pub fn input_cost(controls: &[BodyCommand], weights: &CostWeights) -> f64 {
    debug_assert!(!controls.is_empty());
    let mut cost = 0.0;
    for u in controls {
        let v = u.to_vector4();
        cost += weighted_sq(&v, &weights.r);
    }
    for pair in controls.windows(2) {
        let dv = pair[1].to_vector4() - pair[0].to_vector4();
        cost += weighted_sq(&dv, &weights.r_delta);
    }
    cost
}

/// Reference tracking cost over rollout states:
/// Σⱼ c_p‖Δp‖² + c_q d_q(q, q_ref)² + c_v‖Δv‖² + c_ω‖Δω‖².
pub fn reference_cost(states: &[State], reference: &ReferenceWindow, weights: &CostWeights) -> f64 {
    debug_assert_eq!(states.len(), reference.len());
    let mut cost = 0.0;
    for (x, r) in states.iter().zip(reference.states()) {
        let dq = quat_dist(weights.quat_metric, &x.q, &r.q);
        cost += weights.c_p * (x.p - r.p).norm_squared()
            + weights.c_q * dq * dq
            + weights.c_v * (x.v - r.v).norm_squared()
            + weights.c_w * (x.w - r.w).norm_squared();
    }
    cost
}

/// Indicator obstacle penalty: c_obs per state in collision.
pub fn obstacle_cost(states: &[State], world: &CollisionWorld, weights: &CostWeights) -> f64 {
    weights.c_obs * world.rollout_collision_count(states.iter().map(|x| x.p)) as f64
}

/// Total rollout cost; the obstacle term is omitted when no world is given.
pub fn compute_cost(
    states: &[State],
    controls: &[BodyCommand],
    reference: &ReferenceWindow,
    world: Option<&CollisionWorld>,
    weights: &CostWeights,
) -> f64 {
    input_cost(controls, weights)
        + reference_cost(states, reference, weights)
        + match world {
            Some(w) => obstacle_cost(states, w, weights),
            None => 0.0,
        }
}

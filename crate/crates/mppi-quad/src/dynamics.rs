//! Quadrotor rigid-body state, quaternion algebra, and a fixed-step RK4 integrator.
//!
//! State evolution:
//!
//! ṗ = v
//! q̇ = 1/2 q ⊙ [0, ω]
//! v̇ = 1/m R(q) [0, 0, F_t]ᵀ + g
//! ω̇ = J⁻¹ (τ − ω × Jω)
//!
//! Conventions: scalar-first Hamilton quaternions (w, x, y, z), world z up,
//! gravity (0, 0, −9.81) m/s². The inertia matrix is diagonal and stored as a
//! 3-vector.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Full 13-dimensional quadrotor state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    /// Position [m] (world frame)
    pub p: Vector3<f64>,
    /// Orientation (body to world), kept unit-norm
    pub q: UnitQuaternion<f64>,
    /// Velocity [m/s] (world frame)
    pub v: Vector3<f64>,
    /// Body angular rates [rad/s] (body frame)
    pub w: Vector3<f64>,
}

impl State {
    pub fn new(p: Vector3<f64>, q: UnitQuaternion<f64>, v: Vector3<f64>, w: Vector3<f64>) -> Self {
        Self { p, q, v, w }
    }

    /// Level attitude at rest at the given position.
    pub fn hover_at(p: Vector3<f64>) -> Self {
        Self {
            p,
            q: UnitQuaternion::identity(),
            v: Vector3::zeros(),
            w: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().all(|c| c.is_finite())
            && self.q.as_vector().iter().all(|c| c.is_finite())
            && self.v.iter().all(|c| c.is_finite())
            && self.w.iter().all(|c| c.is_finite())
    }
}

impl Default for State {
    fn default() -> Self {
        Self::hover_at(Vector3::zeros())
    }
}

/// Physical drone parameters and control limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneParams {
    /// Mass [kg]
    pub mass: f64,
    /// Arm length [m]
    pub arm_length: f64,
    /// Rotor torque constant [m]
    pub torque_const: f64,
    /// Inertia matrix diagonal [kg·m²]
    pub inertia: Vector3<f64>,
    /// Gravity acceleration [m/s²] (world frame)
    pub gravity: Vector3<f64>,
    /// Per-rotor thrust limits [N]
    pub thrust_min: f64,
    pub thrust_max: f64,
    /// Safety limits on commanded body rates [rad/s]
    pub rate_xy_max: f64,
    pub rate_z_max: f64,
}

impl DroneParams {
    pub fn validate(&self) -> Result<(), Error> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("drone: {what}")))
            }
        };
        check(self.mass > 0.0, "m must be > 0")?;
        check(self.arm_length > 0.0, "l must be > 0")?;
        check(
            self.inertia.iter().all(|j| *j > 0.0),
            "J diagonal entries must be > 0",
        )?;
        check(
            self.thrust_min >= 0.0 && self.thrust_min < self.thrust_max,
            "thrust limits must satisfy 0 <= T_min < T_max",
        )?;
        check(self.rate_xy_max > 0.0, "w_xy_max must be > 0")?;
        check(self.rate_z_max > 0.0, "w_z_max must be > 0")?;
        check(
            self.gravity.iter().all(|c| c.is_finite()),
            "g must be finite",
        )?;
        Ok(())
    }

    /// Collective thrust that exactly cancels gravity [N].
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity.norm()
    }
}

/// Collective thrust plus body torques, the input to the rigid-body dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchCommand {
    /// Collective thrust [N], along body z
    pub thrust: f64,
    /// Body torques [N·m]
    pub torque: Vector3<f64>,
}

impl WrenchCommand {
    pub fn new(thrust: f64, torque: Vector3<f64>) -> Self {
        Self { thrust, torque }
    }
}

/// Hamilton product of two scalar-first quaternions.
///
/// Total on finite inputs; neither operand needs to be unit norm (the
/// kinematics multiplies by the pure quaternion [0, ω]).
pub fn quat_multiply(q1: &Quaternion<f64>, q2: &Quaternion<f64>) -> Quaternion<f64> {
    let (w1, x1, y1, z1) = (q1.w, q1.i, q1.j, q1.k);
    let (w2, x2, y2, z2) = (q2.w, q2.i, q2.j, q2.k);
    Quaternion::new(
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    )
}

/// Rotation matrix of a unit quaternion. R(q) = R(−q).
///
/// The caller must pass a quaternion with ‖q‖ = 1 within 1e-6.
pub fn quat_to_rotation_matrix(q: &Quaternion<f64>) -> Matrix3<f64> {
    debug_assert!(
        (q.norm() - 1.0).abs() < 1e-6,
        "quat_to_rotation_matrix expects a unit quaternion, got norm {}",
        q.norm()
    );
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Time derivative of the full state, same layout as [`State`] with the
/// quaternion slot holding the (non-unit) quaternion derivative.
#[derive(Debug, Clone, Copy)]
pub struct StateDerivative {
    pub p_dot: Vector3<f64>,
    pub q_dot: Quaternion<f64>,
    pub v_dot: Vector3<f64>,
    pub w_dot: Vector3<f64>,
}

/// Integration-internal state with an unconstrained quaternion. RK4 stage
/// values drift off the unit sphere; only the final step result is projected
/// back.
#[derive(Debug, Clone, Copy)]
struct RawState {
    p: Vector3<f64>,
    q: Quaternion<f64>,
    v: Vector3<f64>,
    w: Vector3<f64>,
}

impl RawState {
    fn from_state(x: &State) -> Self {
        Self {
            p: x.p,
            q: *x.q.quaternion(),
            v: x.v,
            w: x.w,
        }
    }

    fn add_scaled(&self, d: &StateDerivative, h: f64) -> Self {
        Self {
            p: self.p + d.p_dot * h,
            q: self.q + d.q_dot * h,
            v: self.v + d.v_dot * h,
            w: self.w + d.w_dot * h,
        }
    }
}

fn raw_derivative(x: &RawState, u: &WrenchCommand, params: &DroneParams) -> StateDerivative {
    // R is evaluated on the normalized quaternion so stage values slightly off
    // the unit sphere do not scale the thrust direction.
    let r = quat_to_rotation_matrix(&(x.q / x.q.norm()));
    let p_dot = x.v;
    let q_dot = quat_multiply(&x.q, &Quaternion::new(0.0, x.w.x, x.w.y, x.w.z)) * 0.5;
    let v_dot = r * Vector3::new(0.0, 0.0, u.thrust / params.mass) + params.gravity;
    let j = &params.inertia;
    let j_omega = j.component_mul(&x.w);
    let torque_net = u.torque - x.w.cross(&j_omega);
    let w_dot = Vector3::new(
        torque_net.x / j.x,
        torque_net.y / j.y,
        torque_net.z / j.z,
    );
    StateDerivative {
        p_dot,
        q_dot,
        v_dot,
        w_dot,
    }
}

/// State derivative per the rigid-body model above.
pub fn dynamics_derivative(x: &State, u: &WrenchCommand, params: &DroneParams) -> StateDerivative {
    raw_derivative(&RawState::from_state(x), u, params)
}

/// One classical RK4 step with zero-order-hold input. The quaternion is
/// re-normalized after the step (not mid-step).
pub fn rk4_step(x: &State, u: &WrenchCommand, dt: f64, params: &DroneParams) -> State {
    debug_assert!(dt > 0.0);
    let x0 = RawState::from_state(x);
    let k1 = raw_derivative(&x0, u, params);
    let k2 = raw_derivative(&x0.add_scaled(&k1, dt * 0.5), u, params);
    let k3 = raw_derivative(&x0.add_scaled(&k2, dt * 0.5), u, params);
    let k4 = raw_derivative(&x0.add_scaled(&k3, dt), u, params);

    let sixth = dt / 6.0;
    let p = x0.p + (k1.p_dot + 2.0 * (k2.p_dot + k3.p_dot) + k4.p_dot) * sixth;
    let q = x0.q + (k1.q_dot + (k2.q_dot + k3.q_dot) * 2.0 + k4.q_dot) * sixth;
    let v = x0.v + (k1.v_dot + 2.0 * (k2.v_dot + k3.v_dot) + k4.v_dot) * sixth;
    let w = x0.w + (k1.w_dot + 2.0 * (k2.w_dot + k3.w_dot) + k4.w_dot) * sixth;

    State {
        p,
        q: UnitQuaternion::from_quaternion(q),
        v,
        w,
    }
}

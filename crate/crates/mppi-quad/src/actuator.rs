//! Motor allocation and feasibility clipping.
//!
//! The controller commands collective thrust plus desired body rates. Before
//! those can drive the dynamics, the implied per-rotor thrusts must respect
//! the motor limits: the desired rate change over one prediction step is
//! turned into body torques, mapped through the inverse allocation matrix to
//! rotor thrusts, clipped, and mapped back. Both the clipped wrench (for
//! forward simulation) and the clipped body command (for dispatch to the
//! low-level rate controller) come from the same clipped rotor thrusts.

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::dynamics::{DroneParams, State, WrenchCommand};
use crate::error::Error;

/// Collective thrust [N] plus desired body rates [rad/s]; the MPPI control
/// input channel order is [F_t, ω_x, ω_y, ω_z].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyCommand {
    pub thrust: f64,
    pub rates: Vector3<f64>,
}

impl BodyCommand {
    pub fn new(thrust: f64, rates: Vector3<f64>) -> Self {
        Self { thrust, rates }
    }

    /// Zero rates with gravity-cancelling thrust.
    pub fn hover(params: &DroneParams) -> Self {
        Self::new(params.hover_thrust(), Vector3::zeros())
    }

    pub fn to_vector4(self) -> Vector4<f64> {
        Vector4::new(self.thrust, self.rates.x, self.rates.y, self.rates.z)
    }

    pub fn from_vector4(v: Vector4<f64>) -> Self {
        Self::new(v.x, Vector3::new(v.y, v.z, v.w))
    }

    pub fn is_finite(&self) -> bool {
        self.thrust.is_finite() && self.rates.iter().all(|c| c.is_finite())
    }
}

/// Per-rotor thrusts [N].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorThrusts(pub Vector4<f64>);

/// A command projected onto the motor-feasible set: the wrench drives the
/// simulated dynamics, the body command goes to the lower-level controller.
/// Both are images of the same clipped rotor thrusts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleCommand {
    pub wrench: WrenchCommand,
    pub body_cmd: BodyCommand,
}

/// Precomputed allocation data for one drone. Building this once keeps the
/// matrix inversion out of the rollout inner loop.
#[derive(Debug, Clone)]
pub struct ActuatorModel {
    gamma: Matrix4<f64>,
    gamma_inv: Matrix4<f64>,
    inertia: Vector3<f64>,
    inertia_inv: Vector3<f64>,
    thrust_min: f64,
    thrust_max: f64,
    rate_xy_max: f64,
    rate_z_max: f64,
}

/// Allocation matrix mapping rotor thrusts to [F_t, τ_x, τ_y, τ_z] for an
/// X-configuration quadrotor with arm length `l` and torque constant `c_tf`.
pub fn allocation_matrix(params: &DroneParams) -> Matrix4<f64> {
    let a = params.arm_length / std::f64::consts::SQRT_2;
    let c = params.torque_const;
    Matrix4::new(
        1.0, 1.0, 1.0, 1.0, //
        -a, a, a, -a, //
        -a, a, -a, a, //
        -c, -c, c, c,
    )
}

impl ActuatorModel {
    pub fn new(params: &DroneParams) -> Result<Self, Error> {
        params.validate()?;
        let gamma = allocation_matrix(params);
        let gamma_inv = gamma.try_inverse().ok_or_else(|| {
            Error::InvalidConfig("allocation matrix is singular; check l and c_tf".into())
        })?;
        Ok(Self {
            gamma,
            gamma_inv,
            inertia: params.inertia,
            inertia_inv: params.inertia.map(|j| 1.0 / j),
            thrust_min: params.thrust_min,
            thrust_max: params.thrust_max,
            rate_xy_max: params.rate_xy_max,
            rate_z_max: params.rate_z_max,
        })
    }

    pub fn allocation_matrix(&self) -> &Matrix4<f64> {
        &self.gamma
    }

    /// Element-wise safety clamp of desired body rates.
    pub fn limit_rates(&self, rates: Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            rates.x.clamp(-self.rate_xy_max, self.rate_xy_max),
            rates.y.clamp(-self.rate_xy_max, self.rate_xy_max),
            rates.z.clamp(-self.rate_z_max, self.rate_z_max),
        )
    }

    /// Safety-limit a command's desired rates.
    pub fn limit_command(&self, cmd: &BodyCommand) -> BodyCommand {
        BodyCommand::new(cmd.thrust, self.limit_rates(cmd.rates))
    }

    /// Torques that change the body rates from `x.w` to `rates_d` over `dt`,
    /// including gyroscopic compensation: τ_d = J ω̇_d + ω × Jω.
    pub fn desired_torques(&self, x: &State, rates_d: &Vector3<f64>, dt: f64) -> Vector3<f64> {
        debug_assert!(dt > 0.0);
        let rate_change = (rates_d - x.w) / dt;
        self.inertia.component_mul(&rate_change) + x.w.cross(&self.inertia.component_mul(&x.w))
    }

    /// Rotor thrusts realizing the given collective thrust and torques.
    pub fn rotor_thrusts(&self, thrust: f64, torque: &Vector3<f64>) -> RotorThrusts {
        RotorThrusts(self.gamma_inv * Vector4::new(thrust, torque.x, torque.y, torque.z))
    }

    /// Project a body command onto the motor-feasible set.
    ///
    /// The implied rotor thrusts are clipped to [T_min, T_max] and the
    /// feasible wrench and body command are reconstructed from the clipped
    /// thrusts. Idempotent: feeding the output body command back in returns
    /// the same feasible command. Safety rate limiting is a separate step
    /// applied to the desired rates beforehand (see [`Self::limit_and_clip`]).
    pub fn clip_and_reconstruct(&self, x: &State, cmd: &BodyCommand, dt: f64) -> FeasibleCommand {
        let gyro = x.w.cross(&self.inertia.component_mul(&x.w));
        let torque_d = self.inertia.component_mul(&((cmd.rates - x.w) / dt)) + gyro;

        let thrusts_d = self.gamma_inv * Vector4::new(cmd.thrust, torque_d.x, torque_d.y, torque_d.z);
        let thrusts_clip = thrusts_d.map(|t| t.clamp(self.thrust_min, self.thrust_max));

        let wrench4 = self.gamma * thrusts_clip;
        let thrust_clip = wrench4.x;
        let torque_clip = Vector3::new(wrench4.y, wrench4.z, wrench4.w);
        let rates_clip = x.w + self.inertia_inv.component_mul(&(torque_clip - gyro)) * dt;

        FeasibleCommand {
            wrench: WrenchCommand::new(thrust_clip, torque_clip),
            body_cmd: BodyCommand::new(thrust_clip, rates_clip),
        }
    }

    /// Safety-clamp the desired rates, then clip to motor feasibility: the
    /// full command conditioning applied to every rollout input and every
    /// dispatched command.
    pub fn limit_and_clip(&self, x: &State, cmd: &BodyCommand, dt: f64) -> FeasibleCommand {
        self.clip_and_reconstruct(x, &self.limit_command(cmd), dt)
    }
}

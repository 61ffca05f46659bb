//! Sampling-based quadrotor flight control.
//!
//! This crate implements a Model Predictive Path Integral (MPPI) controller
//! for a quadrotor: full nonlinear rigid-body dynamics with an RK4
//! integrator, motor-feasibility clipping through the allocation matrix,
//! quaternion-aware tracking costs, indicator-based obstacle penalties, and a
//! closed-loop simulation and benchmark harness around it all.
//!
//! The `mppi-quad` binary drives experiments from TOML configs; see the
//! repository README for the file formats and CLI usage.

pub mod actuator;
pub mod bench;
pub mod config;
pub mod controller;
pub mod cost;
pub mod dynamics;
pub mod error;
pub mod rng;
pub mod sim;
pub mod trajectory;
pub mod world;

pub use actuator::{ActuatorModel, BodyCommand, FeasibleCommand, RotorThrusts};
pub use config::ExperimentConfig;
pub use controller::{
    compute_weights, sample_disturbances, update_nominal, MppiConfig, MppiController,
    NominalControl, RolloutBatch, RolloutWeights, TickDiagnostics, TickStatus,
};
pub use cost::{
    compute_cost, input_cost, obstacle_cost, quat_angle, quat_dist_approx, reference_cost,
    CostWeights, QuatMetric, ReferenceWindow,
};
pub use dynamics::{
    dynamics_derivative, quat_multiply, quat_to_rotation_matrix, rk4_step, DroneParams, State,
    StateDerivative, WrenchCommand,
};
pub use error::Error;
pub use sim::{run_closed_loop, TrackingReport};
pub use trajectory::{reference_window, TrajectorySpec};
pub use world::{Aabb, CollisionWorld, Obstacle};

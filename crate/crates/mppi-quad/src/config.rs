//! Experiment configuration files.
//!
//! TOML with sections `[drone]`, `[mppi]`, `[weights]`, `[trajectory]`,
//! `[world]` (optional), and `[run]`. Field names mirror the vehicle and
//! controller symbols (`m`, `l`, `c_tf`, `J`, `T_min`, `T_max`, `K`, `N`,
//! `dt`, `lambda`, `Sigma`, `R`, `R_delta`, `c_p`, `c_q`, `c_v`, `c_w`,
//! `c_obs`). Note: `J` is given in g·m² as on the vehicle datasheet and is
//! converted to kg·m² (×1e-3) at load time.

use std::path::{Path, PathBuf};

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::actuator::BodyCommand;
use crate::controller::MppiConfig;
use crate::cost::{CostWeights, QuatMetric};
use crate::dynamics::DroneParams;
use crate::error::Error;
use crate::trajectory::TrajectorySpec;
use crate::world::CollisionWorld;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DroneSection {
    m: f64,
    l: f64,
    c_tf: f64,
    /// Inertia diagonal in g·m² (converted to kg·m² at load).
    #[serde(rename = "J")]
    j: [f64; 3],
    #[serde(default = "default_gravity")]
    g: [f64; 3],
    #[serde(rename = "T_min")]
    t_min: f64,
    #[serde(rename = "T_max")]
    t_max: f64,
    w_xy_max: f64,
    w_z_max: f64,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MppiSection {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "N")]
    n: usize,
    dt: f64,
    #[serde(default = "default_n_interp")]
    n_interp: u32,
    lambda: f64,
    #[serde(rename = "Sigma")]
    sigma: [f64; 4],
    /// Override for the nominal-control initialization [F_t, ωx, ωy, ωz];
    /// defaults to hover for the configured drone.
    u_init: Option<[f64; 4]>,
}

fn default_n_interp() -> u32 {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WeightsSection {
    #[serde(rename = "R")]
    r: [f64; 4],
    #[serde(rename = "R_delta")]
    r_delta: [f64; 4],
    c_p: f64,
    c_q: f64,
    c_v: f64,
    c_w: f64,
    #[serde(default = "default_c_obs")]
    c_obs: f64,
    #[serde(default)]
    quat_metric: QuatMetric,
}

fn default_c_obs() -> f64 {
    1e6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
enum TrajectorySection {
    Line {
        from: [f64; 3],
        to: [f64; 3],
        peak_speed: f64,
    },
    Circle {
        center: [f64; 3],
        radius: f64,
        period: f64,
    },
    SlantedCircle {
        center: [f64; 3],
        radius: f64,
        period: f64,
        tilt_deg: f64,
    },
    Eight {
        center: [f64; 3],
        half_width: f64,
        height: f64,
        period: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WorldSection {
    /// Path to a world file, relative to this config file.
    file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunSection {
    #[serde(default = "default_loops")]
    loops: u32,
    #[serde(default = "default_plant_dt")]
    plant_dt: f64,
    #[serde(default = "default_seed")]
    seed: u64,
    /// Rollout worker threads; 0 uses all available cores.
    #[serde(default)]
    workers: usize,
    #[serde(default = "default_output_dir")]
    output_dir: String,
    /// Time constant of the plant's body-rate tracking layer [s].
    #[serde(default = "default_rate_tau")]
    rate_tau: f64,
    /// Position error [m] at which a run is declared diverged.
    #[serde(default = "default_divergence_bound")]
    divergence_bound: f64,
}

fn default_loops() -> u32 {
    20
}
fn default_plant_dt() -> f64 {
    0.001
}
fn default_seed() -> u64 {
    1
}
fn default_output_dir() -> String {
    "out".into()
}
fn default_rate_tau() -> f64 {
    0.03
}
fn default_divergence_bound() -> f64 {
    50.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FileConfig {
    drone: DroneSection,
    mppi: MppiSection,
    weights: WeightsSection,
    trajectory: TrajectorySection,
    world: Option<WorldSection>,
    run: RunSection,
}

/// Closed-loop run settings from the `[run]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub loops: u32,
    pub plant_dt: f64,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub rate_tau: f64,
    pub divergence_bound: f64,
}

/// A fully validated experiment: drone, controller, weights, trajectory,
/// optional obstacle world, and run settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub drone: DroneParams,
    pub mppi: MppiConfig,
    pub weights: CostWeights,
    pub trajectory: TrajectorySpec,
    pub world: Option<CollisionWorld>,
    pub world_path: Option<PathBuf>,
    pub run: RunSettings,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: FileConfig = toml::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_file(file, base)
    }

    fn from_file(file: FileConfig, base: &Path) -> Result<Self, Error> {
        let d = &file.drone;
        let drone = DroneParams {
            mass: d.m,
            arm_length: d.l,
            torque_const: d.c_tf,
            // Datasheet g·m² -> SI kg·m².
            inertia: Vector3::new(d.j[0], d.j[1], d.j[2]) * 1e-3,
            gravity: Vector3::new(d.g[0], d.g[1], d.g[2]),
            thrust_min: d.t_min,
            thrust_max: d.t_max,
            rate_xy_max: d.w_xy_max,
            rate_z_max: d.w_z_max,
        };
        drone.validate()?;

        let m = &file.mppi;
        let u_init = match m.u_init {
            Some(u) => BodyCommand::new(u[0], Vector3::new(u[1], u[2], u[3])),
            None => BodyCommand::hover(&drone),
        };
        let mppi = MppiConfig {
            rollouts: m.k,
            horizon: m.n,
            dt_pred: m.dt,
            n_interp: m.n_interp,
            lambda: m.lambda,
            sigma: Vector4::from_row_slice(&m.sigma),
            u_init,
            seed: file.run.seed,
        };
        mppi.validate()?;

        let w = &file.weights;
        let weights = CostWeights {
            r: Vector4::from_row_slice(&w.r),
            r_delta: Vector4::from_row_slice(&w.r_delta),
            c_p: w.c_p,
            c_q: w.c_q,
            c_v: w.c_v,
            c_w: w.c_w,
            c_obs: w.c_obs,
            quat_metric: w.quat_metric,
        };
        weights.validate()?;

        let trajectory = match file.trajectory {
            TrajectorySection::Line {
                from,
                to,
                peak_speed,
            } => TrajectorySpec::Line {
                from: Vector3::from_row_slice(&from),
                to: Vector3::from_row_slice(&to),
                peak_speed,
            },
            TrajectorySection::Circle {
                center,
                radius,
                period,
            } => TrajectorySpec::Circle {
                center: Vector3::from_row_slice(&center),
                radius,
                period,
            },
            TrajectorySection::SlantedCircle {
                center,
                radius,
                period,
                tilt_deg,
            } => TrajectorySpec::SlantedCircle {
                center: Vector3::from_row_slice(&center),
                radius,
                period,
                tilt: tilt_deg.to_radians(),
            },
            TrajectorySection::Eight {
                center,
                half_width,
                height,
                period,
            } => TrajectorySpec::Eight {
                center: Vector3::from_row_slice(&center),
                half_width,
                height,
                period,
            },
        };
        trajectory.validate()?;

        let (world, world_path) = match &file.world {
            Some(w) => {
                let path = base.join(&w.file);
                (Some(CollisionWorld::load(&path)?), Some(path))
            }
            None => (None, None),
        };

        let r = &file.run;
        let run = RunSettings {
            loops: r.loops,
            plant_dt: r.plant_dt,
            seed: r.seed,
            workers: r.workers,
            output_dir: PathBuf::from(&r.output_dir),
            rate_tau: r.rate_tau,
            divergence_bound: r.divergence_bound,
        };
        if run.loops < 1 {
            return Err(Error::InvalidConfig("run: loops must be >= 1".into()));
        }
        if run.plant_dt.is_nan() || run.plant_dt <= 0.0 {
            return Err(Error::InvalidConfig("run: plant_dt must be > 0".into()));
        }
        let controller_dt = mppi.dt_pred / mppi.n_interp as f64;
        if run.plant_dt > controller_dt + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "run: plant_dt ({}) must not exceed the controller period dt/n_interp ({})",
                run.plant_dt, controller_dt
            )));
        }
        if run.rate_tau.is_nan() || run.rate_tau <= 0.0 {
            return Err(Error::InvalidConfig("run: rate_tau must be > 0".into()));
        }
        if run.divergence_bound.is_nan() || run.divergence_bound <= 0.0 {
            return Err(Error::InvalidConfig(
                "run: divergence_bound must be > 0".into(),
            ));
        }

        Ok(ExperimentConfig {
            drone,
            mppi,
            weights,
            trajectory,
            world,
            world_path,
            run,
        })
    }
}

//! Closed-loop simulation: plant plus controller, tracking metrics, and CSV
//! logging.
//!
//! The plant integrates the same rigid-body dynamics at `plant_dt` (1 ms by
//! default). A first-order body-rate tracking layer with time constant
//! `rate_tau` stands in for the low-level rate controller: every plant step,
//! the dispatched command is converted to torques that drive the rates toward
//! the commanded ones over `rate_tau`, clipped through the rotor model. State
//! feedback to the controller is perfect.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::actuator::ActuatorModel;
use crate::config::ExperimentConfig;
use crate::controller::MppiController;
use crate::dynamics::{rk4_step, State};
use crate::error::Error;
use crate::trajectory::reference_window;

/// Version tag written into every report and CSV header block.
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

/// Summary of one closed-loop run.
#[derive(Debug, Clone, Serialize)]
pub struct TrackingReport {
    pub schema_version: u32,
    /// Mean position error [m] over all ticks after the first loop.
    pub mean_err_m: f64,
    /// Standard deviation of the position error [m] over the same window.
    pub std_err_m: f64,
    /// Peak plant speed [m/s].
    pub max_speed_mps: f64,
    /// Peak plant acceleration [m/s²] (finite differences at plant rate).
    pub max_accel_mps2: f64,
    /// Plant steps spent in collision (0 for a successful obstacle run).
    pub collisions: u64,
    /// Mean controller iteration wall time [µs].
    pub mean_iter_us: f64,
    /// Largest finite rollout cost seen by the controller.
    pub max_finite_cost: f64,
    pub ticks: u64,
    pub loops: u32,
    pub seed: u64,
    pub diverged: bool,
}

struct CsvLogs {
    states: BufWriter<File>,
    diag: BufWriter<File>,
}

fn open_logs(dir: &Path) -> Result<CsvLogs, Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let open = |name: &str| -> Result<BufWriter<File>, Error> {
        let path = dir.join(name);
        Ok(BufWriter::new(File::create(&path).map_err(|source| {
            Error::Io { path, source }
        })?))
    };
    let mut states = open("states.csv")?;
    let mut diag = open("diag.csv")?;
    let io_err = |source: std::io::Error, dir: &Path| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    writeln!(
        states,
        "tick,t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,ref_px,ref_py,ref_pz,err"
    )
    .map_err(|e| io_err(e, dir))?;
    writeln!(
        diag,
        "tick,wall_time_us,best_cost,mean_cost,collision_rollout_fraction"
    )
    .map_err(|e| io_err(e, dir))?;
    Ok(CsvLogs { states, diag })
}

/// Run the configured closed-loop experiment. When `output_dir` is given,
/// `states.csv`, `diag.csv`, and `report.json` are written there.
pub fn run_closed_loop(
    config: &ExperimentConfig,
    output_dir: Option<&Path>,
) -> Result<TrackingReport, Error> {
    let period = config.trajectory.period();
    let dt_ctrl = config.mppi.dt_pred / config.mppi.n_interp as f64;
    let substeps = (dt_ctrl / config.run.plant_dt).round().max(1.0) as usize;
    let plant_dt = dt_ctrl / substeps as f64;
    let total_ticks = (config.run.loops as f64 * period / dt_ctrl).round() as u64;

    let mut controller = MppiController::new(
        config.drone.clone(),
        config.mppi.clone(),
        config.weights.clone(),
        config.run.workers,
    )?;
    let actuator = ActuatorModel::new(&config.drone)?;

    let mut plant = State::hover_at(config.trajectory.reference_at(0.0).p);
    plant.q = config.trajectory.reference_at(0.0).q;

    let mut logs = match output_dir {
        Some(dir) => Some(open_logs(dir)?),
        None => None,
    };

    let mut err_sum = 0.0;
    let mut err_sq_sum = 0.0;
    let mut err_count = 0u64;
    let mut max_speed: f64 = 0.0;
    let mut max_accel: f64 = 0.0;
    let mut collisions = 0u64;
    let mut iter_us_sum = 0.0;
    let mut max_finite_cost: f64 = 0.0;
    let mut diverged = false;
    let mut ticks_run = 0u64;

    for tick in 0..total_ticks {
        let t = tick as f64 * dt_ctrl;
        let window = reference_window(
            &config.trajectory,
            t,
            config.mppi.horizon,
            config.mppi.dt_pred,
        );
        let reference = config.trajectory.reference_at(t);
        let err = (plant.p - reference.p).norm();

        let (cmd, diag) = controller.tick(&plant, &window, config.world.as_ref());
        iter_us_sum += diag.wall_time_us;
        if diag.worst_cost.is_finite() {
            max_finite_cost = max_finite_cost.max(diag.worst_cost);
        }

        if let Some(logs) = logs.as_mut() {
            let q = plant.q.quaternion();
            writeln!(
                logs.states,
                "{tick},{t},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{err}",
                plant.p.x,
                plant.p.y,
                plant.p.z,
                q.w,
                q.i,
                q.j,
                q.k,
                plant.v.x,
                plant.v.y,
                plant.v.z,
                plant.w.x,
                plant.w.y,
                plant.w.z,
                reference.p.x,
                reference.p.y,
                reference.p.z,
            )
            .map_err(|e| Error::Io {
                path: "states.csv".into(),
                source: e,
            })?;
            writeln!(
                logs.diag,
                "{tick},{},{},{},{}",
                diag.wall_time_us, diag.best_cost, diag.mean_cost, diag.collision_fraction
            )
            .map_err(|e| Error::Io {
                path: "diag.csv".into(),
                source: e,
            })?;
        }

        // Error statistics exclude the first loop (hover-start transient).
        if t >= period {
            err_sum += err;
            err_sq_sum += err * err;
            err_count += 1;
        }

        ticks_run = tick + 1;
        if err > config.run.divergence_bound {
            diverged = true;
            break;
        }

        // Advance the plant under zero-order hold of the dispatched command.
        for _ in 0..substeps {
            let feasible = actuator.limit_and_clip(&plant, &cmd, config.run.rate_tau);
            let next = rk4_step(&plant, &feasible.wrench, plant_dt, &config.drone);
            max_accel = max_accel.max((next.v - plant.v).norm() / plant_dt);
            plant = next;
            max_speed = max_speed.max(plant.v.norm());
            if let Some(world) = &config.world {
                if world.is_colliding(&plant.p) {
                    collisions += 1;
                }
            }
        }
    }

    let mean = if err_count > 0 {
        err_sum / err_count as f64
    } else {
        f64::NAN
    };
    let std = if err_count > 1 {
        ((err_sq_sum - err_sum * err_sum / err_count as f64) / (err_count as f64 - 1.0))
            .max(0.0)
            .sqrt()
    } else {
        f64::NAN
    };

    let report = TrackingReport {
        schema_version: OUTPUT_SCHEMA_VERSION,
        mean_err_m: mean,
        std_err_m: std,
        max_speed_mps: max_speed,
        max_accel_mps2: max_accel,
        collisions,
        mean_iter_us: iter_us_sum / ticks_run.max(1) as f64,
        max_finite_cost,
        ticks: ticks_run,
        loops: config.run.loops,
        seed: config.run.seed,
        diverged,
    };

    if let Some(logs) = &mut logs {
        logs.states.flush().ok();
        logs.diag.flush().ok();
    }
    if let Some(dir) = output_dir {
        let path = dir.join("report.json");
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Serialize(e.to_string()))?;
        std::fs::write(&path, json).map_err(|source| Error::Io { path, source })?;
    }

    Ok(report)
}

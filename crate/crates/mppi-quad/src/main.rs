use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{UnitQuaternion, Vector3};
use serde_json::json;

use mppi_quad::bench::{default_grid, timing_benchmark};
use mppi_quad::sim::OUTPUT_SCHEMA_VERSION;
use mppi_quad::{quat_angle, quat_dist_approx, CollisionWorld, Error, ExperimentConfig, Obstacle};

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "mppi-quad", version, about = "MPPI quadrotor control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Override the run seed from the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Rollout worker threads (0 = all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for CSV and report output
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the number of tracked loops
    #[arg(long)]
    loops: Option<u32>,
    /// Skip writing the per-tick diagnostics and state logs
    #[arg(long)]
    no_diagnostics: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop tracking experiment from a config file
    Track {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Measure controller iteration time over a (K, N) grid
    Bench {
        config: PathBuf,
        /// Comma-separated rollout counts, e.g. 128,256,512,896
        #[arg(long, value_delimiter = ',')]
        rollouts: Option<Vec<usize>>,
        /// Comma-separated horizon lengths, e.g. 5,10,15,20
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        /// Timed iterations per grid point
        #[arg(long, default_value_t = 200)]
        iters: u32,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Emit the orientation-distance comparison curves as CSV
    Quatdist {
        /// Sweep step in degrees
        #[arg(long, default_value_t = 1.0)]
        step_deg: f64,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Check a config file and report the resolved experiment
    Validate { config: PathBuf },
    /// Load a world file and report obstacle statistics
    WorldCheck { world: PathBuf },
}

fn apply_overrides(config: &mut ExperimentConfig, o: &Overrides) {
    if let Some(seed) = o.seed {
        config.run.seed = seed;
        config.mppi.seed = seed;
    }
    if let Some(workers) = o.workers {
        config.run.workers = workers;
    }
    if let Some(dir) = &o.output_dir {
        config.run.output_dir = dir.clone();
    }
    if let Some(loops) = o.loops {
        config.run.loops = loops;
    }
}

fn cmd_track(path: &Path, overrides: &Overrides) -> Result<u8, Error> {
    let mut config = ExperimentConfig::load(path)?;
    apply_overrides(&mut config, overrides);
    let out_dir = config.run.output_dir.clone();
    let log_dir = (!overrides.no_diagnostics).then_some(out_dir.as_path());

    eprintln!(
        "tracking {:?} for {} loops (period {:.3} s, seed {})",
        path, config.run.loops, config.trajectory.period(), config.run.seed
    );
    let report = mppi_quad::run_closed_loop(&config, log_dir)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    if report.diverged {
        eprintln!("run diverged after {} ticks", report.ticks);
        return Ok(EXIT_DIVERGED);
    }
    Ok(0)
}

fn cmd_bench(
    path: &Path,
    rollouts: Option<Vec<usize>>,
    horizons: Option<Vec<usize>>,
    iters: u32,
    overrides: &Overrides,
) -> Result<u8, Error> {
    let mut config = ExperimentConfig::load(path)?;
    apply_overrides(&mut config, overrides);
    let grid = match (rollouts, horizons) {
        (Some(ks), Some(ns)) => ks
            .iter()
            .flat_map(|&k| ns.iter().map(move |&n| (k, n)))
            .collect(),
        (Some(ks), None) => ks.iter().map(|&k| (k, config.mppi.horizon)).collect(),
        (None, Some(ns)) => ns.iter().map(|&n| (config.mppi.rollouts, n)).collect(),
        (None, None) => default_grid(),
    };
    let points = timing_benchmark(&config, &grid, iters, iters / 10 + 1)?;

    let dir = &config.run.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let mut csv = String::from("K,N,iters,mean_us,std_us,median_us\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.rollouts, p.horizon, p.iters, p.mean_us, p.std_us, p.median_us
        ));
    }
    let csv_path = dir.join("bench.csv");
    std::fs::write(&csv_path, csv).map_err(|source| Error::Io {
        path: csv_path.clone(),
        source,
    })?;

    let operating = points
        .iter()
        .find(|p| p.rollouts == 896 && p.horizon == 15);
    let summary = json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "points": points,
        "budget_ms": 10.0,
        "operating_point_mean_ms": operating.map(|p| p.mean_us / 1000.0),
        "operating_point_within_budget": operating.map(|p| p.mean_us <= 10_000.0),
    });
    let json_path = dir.join("bench.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary).unwrap()).map_err(
        |source| Error::Io {
            path: json_path,
            source,
        },
    )?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(0)
}

fn cmd_quatdist(step_deg: f64, dir: &Path) -> Result<u8, Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let start = UnitQuaternion::identity();
    let mut csv = String::from("angle_deg,exact_rad,approx,euclidean\n");
    let steps = (360.0 / step_deg).round() as usize;
    for i in 0..=steps {
        let deg = i as f64 * step_deg;
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), deg.to_radians());
        let exact = quat_angle(&start, &q);
        let approx = quat_dist_approx(&start, &q);
        let euclidean = (q.quaternion() - start.quaternion()).norm();
        csv.push_str(&format!("{deg},{exact},{approx},{euclidean}\n"));
    }
    let csv_path = dir.join("quatdist.csv");
    std::fs::write(&csv_path, csv).map_err(|source| Error::Io {
        path: csv_path,
        source,
    })?;

    let at = |deg: f64| {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), deg.to_radians());
        (
            quat_angle(&start, &q),
            quat_dist_approx(&start, &q),
            (q.quaternion() - start.quaternion()).norm(),
        )
    };
    let (e180, a180, u180) = at(180.0);
    let (e360, a360, u360) = at(360.0);
    let summary = json!({
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "at_180_deg": {"exact_rad": e180, "approx": a180, "euclidean": u180},
        "at_360_deg": {"exact_rad": e360, "approx": a360, "euclidean": u360},
    });
    let json_path = dir.join("quatdist.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary).unwrap()).map_err(
        |source| Error::Io {
            path: json_path,
            source,
        },
    )?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(0)
}

fn cmd_validate(path: &Path) -> Result<u8, Error> {
    let config = ExperimentConfig::load(path)?;
    let summary = json!({
        "ok": true,
        "config": path,
        "trajectory_period_s": config.trajectory.period(),
        "controller_rate_hz": config.mppi.n_interp as f64 / config.mppi.dt_pred,
        "rollouts": config.mppi.rollouts,
        "horizon": config.mppi.horizon,
        "world_obstacles": config.world.as_ref().map(|w| w.obstacles.len()),
        "loops": config.run.loops,
        "seed": config.run.seed,
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(0)
}

fn cmd_world_check(path: &Path) -> Result<u8, Error> {
    let world = CollisionWorld::load(path)?;
    world.validate()?;
    let mut cylinders = 0;
    let mut boxes = 0;
    let mut walls = 0;
    let mut windows = 0;
    for o in &world.obstacles {
        match o {
            Obstacle::VerticalCylinder { .. } => cylinders += 1,
            Obstacle::Box(_) => boxes += 1,
            Obstacle::WallWithWindow { windows: w, .. } => {
                walls += 1;
                windows += w.len();
            }
        }
    }
    let summary = json!({
        "ok": true,
        "world": path,
        "drone_radius_m": world.drone_radius,
        "obstacles": world.obstacles.len(),
        "cylinders": cylinders,
        "boxes": boxes,
        "walls": walls,
        "windows": windows,
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(0)
}

fn run() -> Result<u8, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Track { config, overrides } => cmd_track(&config, &overrides),
        Command::Bench {
            config,
            rollouts,
            horizons,
            iters,
            overrides,
        } => cmd_bench(&config, rollouts, horizons, iters, &overrides),
        Command::Quatdist {
            step_deg,
            output_dir,
        } => cmd_quatdist(step_deg, &output_dir),
        Command::Validate { config } => cmd_validate(&config),
        Command::WorldCheck { world } => cmd_world_check(&world),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            match err {
                Error::InvalidConfig(_) | Error::Parse { .. } => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(1),
            }
        }
    }
}

//! Iteration-time benchmark over a grid of rollout counts and horizon
//! lengths.
//!
//! Each grid point times full controller iterations (sample, simulate,
//! weight, update, dispatch, shift) on a fixed synthetic state and reference,
//! after a short warmup. The 10 ms budget corresponds to running the control
//! loop at 100 Hz.

use std::time::Instant;

use nalgebra::Vector3;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::controller::MppiController;
use crate::cost::ReferenceWindow;
use crate::dynamics::State;
use crate::error::Error;

/// One (K, N) measurement. The mean is the budget-relevant figure; the
/// median is robust to scheduler hiccups and drives the shape checks.
#[derive(Debug, Clone, Serialize)]
pub struct BenchPoint {
    pub rollouts: usize,
    pub horizon: usize,
    pub iters: u32,
    pub mean_us: f64,
    pub std_us: f64,
    pub median_us: f64,
}

/// Default grid: the spread used for the iteration-time surface, including
/// the operating point K=896, N=15.
pub fn default_grid() -> Vec<(usize, usize)> {
    let ks = [128usize, 256, 512, 896];
    let ns = [5usize, 10, 15, 20];
    let mut grid = Vec::new();
    for &k in &ks {
        for &n in &ns {
            grid.push((k, n));
        }
    }
    grid
}

/// Measure mean iteration time for each (K, N) pair.
pub fn timing_benchmark(
    config: &ExperimentConfig,
    grid: &[(usize, usize)],
    iters: u32,
    warmup: u32,
) -> Result<Vec<BenchPoint>, Error> {
    let mut out = Vec::with_capacity(grid.len());
    for &(rollouts, horizon) in grid {
        let mut mppi = config.mppi.clone();
        mppi.rollouts = rollouts;
        mppi.horizon = horizon;
        let mut controller = MppiController::new(
            config.drone.clone(),
            mppi,
            config.weights.clone(),
            config.run.workers,
        )?;

        // Fixed synthetic scene: hover state, reference offset half a meter.
        let x = State::hover_at(Vector3::new(0.0, 0.0, 2.0));
        let reference = ReferenceWindow::new(vec![
            State::hover_at(Vector3::new(0.5, 0.0, 2.0));
            horizon + 1
        ]);

        for _ in 0..warmup {
            controller.tick(&x, &reference, config.world.as_ref());
        }
        let mut samples = Vec::with_capacity(iters as usize);
        for _ in 0..iters {
            let start = Instant::now();
            controller.tick(&x, &reference, config.world.as_ref());
            samples.push(start.elapsed().as_secs_f64() * 1e6);
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
            / (samples.len() as f64 - 1.0).max(1.0);
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        out.push(BenchPoint {
            rollouts,
            horizon,
            iters,
            mean_us: mean,
            std_us: var.sqrt(),
            median_us: median,
        });
    }
    Ok(out)
}

/// R² of an ordinary least-squares line through (x, y).
pub fn linear_fit_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxy: f64 = points
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let syy: f64 = points.iter().map(|(_, y)| (y - mean_y).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 1.0;
    }
    (sxy * sxy) / (sxx * syy)
}

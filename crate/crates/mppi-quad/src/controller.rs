//! The MPPI optimization loop: sample Gaussian control disturbances, simulate
//! K rollouts through the clipped dynamics in parallel, softmax-weight the
//! costs, update the nominal control sequence, and dispatch the first
//! (interpolated) action.
//!
//! The controller runs every control tick while the prediction grid is
//! coarser by a factor of `n_interp`; commands are linearly interpolated
//! between the first two nominal entries and the schedule shifts by one
//! prediction step every `n_interp` ticks.

use std::time::Instant;

use nalgebra::Vector4;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::actuator::{ActuatorModel, BodyCommand};
use crate::cost::{compute_cost, CostWeights, ReferenceWindow};
use crate::dynamics::{rk4_step, DroneParams, State};
use crate::error::Error;
use crate::rng::rollout_stream;
use crate::world::CollisionWorld;

/// MPPI tuning parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MppiConfig {
    /// Number of rollouts per iteration (K)
    pub rollouts: usize,
    /// Prediction steps per rollout (N)
    pub horizon: usize,
    /// Prediction time step [s]
    pub dt_pred: f64,
    /// Controller ticks per prediction step
    pub n_interp: u32,
    /// Softmax temperature
    pub lambda: f64,
    /// Per-channel disturbance variances, order [F_t, ω_x, ω_y, ω_z]
    pub sigma: Vector4<f64>,
    /// Nominal-control initialization (hover)
    pub u_init: BodyCommand,
    /// Base seed for the per-rollout random streams
    pub seed: u64,
}

impl MppiConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("mppi: {what}")))
            }
        };
        check(self.rollouts >= 1, "K must be >= 1")?;
        check(self.horizon >= 1, "N must be >= 1")?;
        check(self.dt_pred > 0.0, "dt must be > 0")?;
        check(self.n_interp >= 1, "n_interp must be >= 1")?;
        check(self.lambda > 0.0, "lambda must be > 0")?;
        check(
            self.sigma.iter().all(|s| *s > 0.0),
            "Sigma entries must be > 0",
        )?;
        check(self.u_init.is_finite(), "u_init must be finite")?;
        Ok(())
    }
}

/// The current best control sequence (length N on the prediction grid).
#[derive(Debug, Clone, PartialEq)]
pub struct NominalControl {
    seq: Vec<BodyCommand>,
}

impl NominalControl {
    pub fn constant(u: BodyCommand, horizon: usize) -> Self {
        Self {
            seq: vec![u; horizon],
        }
    }

    pub fn from_sequence(seq: Vec<BodyCommand>) -> Self {
        debug_assert!(!seq.is_empty());
        Self { seq }
    }

    pub fn sequence(&self) -> &[BodyCommand] {
        &self.seq
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// Linear interpolation between the first two entries at the given phase
    /// fraction alpha in [0, 1].
    pub fn interpolate_front(&self, alpha: f64) -> BodyCommand {
        let a = self.seq[0].to_vector4();
        let b = self.seq[self.seq.len().min(2) - 1].to_vector4();
        BodyCommand::from_vector4(a + (b - a) * alpha)
    }

    /// Drop the first entry, shift everything forward, and re-initialize the
    /// freed last slot.
    pub fn shift(&mut self, last: BodyCommand) {
        self.seq.rotate_left(1);
        *self.seq.last_mut().expect("nominal control is never empty") = last;
    }
}

/// Softmax weights over rollouts; non-negative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutWeights {
    pub values: Vec<f64>,
}

impl RolloutWeights {
    /// Entropy −Σ ω ln ω of the weight distribution [nats].
    pub fn entropy(&self) -> f64 {
        -self
            .values
            .iter()
            .filter(|w| **w > 0.0)
            .map(|w| w * w.ln())
            .sum::<f64>()
    }
}

/// Everything one iteration produced, in flat row-major-by-rollout layout.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub rollouts: usize,
    pub horizon: usize,
    /// K×(N+1) states; `states[k*(horizon+1)..][..horizon+1]` is rollout k.
    pub states: Vec<State>,
    /// K×N applied (clipped) commands.
    pub controls: Vec<BodyCommand>,
    /// K×N sampled disturbances.
    pub disturbances: Vec<Vector4<f64>>,
    /// K rollout costs (infinite for numerically exploded rollouts).
    pub costs: Vec<f64>,
}

impl RolloutBatch {
    pub fn states_of(&self, k: usize) -> &[State] {
        let stride = self.horizon + 1;
        &self.states[k * stride..(k + 1) * stride]
    }

    pub fn controls_of(&self, k: usize) -> &[BodyCommand] {
        &self.controls[k * self.horizon..(k + 1) * self.horizon]
    }

    pub fn disturbances_of(&self, k: usize) -> &[Vector4<f64>] {
        &self.disturbances[k * self.horizon..(k + 1) * self.horizon]
    }
}

/// Controller health for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickStatus {
    Ok,
    /// Every rollout went non-finite; the previous command was re-dispatched
    /// and the nominal sequence left untouched.
    AllRolloutsNonFinite,
}

/// Per-tick diagnostics.
#[derive(Debug, Clone)]
pub struct TickDiagnostics {
    pub status: TickStatus,
    pub best_cost: f64,
    pub mean_cost: f64,
    pub worst_cost: f64,
    pub weight_entropy: f64,
    /// Fraction of rollouts with at least one predicted collision.
    pub collision_fraction: f64,
    pub wall_time_us: f64,
    /// Full rollout data, captured only when batch recording is enabled.
    pub batch: Option<RolloutBatch>,
}

/// Draw the K×N disturbance table for one iteration. Deterministic in
/// (config.seed, iteration) and independent of evaluation order.
pub fn sample_disturbances(config: &MppiConfig, iteration: u64) -> Vec<Vector4<f64>> {
    let mut out = vec![Vector4::zeros(); config.rollouts * config.horizon];
    let std = config.sigma.map(f64::sqrt);
    out.par_chunks_mut(config.horizon)
        .enumerate()
        .for_each(|(k, chunk)| {
            let mut rng = rollout_stream(config.seed, iteration, k as u64);
            fill_disturbances(&mut rng, &std, chunk);
        });
    out
}

fn fill_disturbances(
    rng: &mut rand_chacha::ChaCha8Rng,
    std: &Vector4<f64>,
    out: &mut [Vector4<f64>],
) {
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    for slot in out.iter_mut() {
        *slot = Vector4::new(
            normal.sample(rng) * std.x,
            normal.sample(rng) * std.y,
            normal.sample(rng) * std.z,
            normal.sample(rng) * std.w,
        );
    }
}

/// Simulate one rollout, writing N+1 states and N clipped controls.
/// Returns false if the state went non-finite (outputs are then only valid up
/// to the failure point).
#[allow(clippy::too_many_arguments)]
fn run_rollout(
    x_hat: &State,
    nominal: &[BodyCommand],
    disturbances: &[Vector4<f64>],
    actuator: &ActuatorModel,
    params: &DroneParams,
    dt: f64,
    states_out: &mut [State],
    controls_out: &mut [BodyCommand],
) -> bool {
    states_out[0] = *x_hat;
    let mut x = *x_hat;
    for (j, (u_nom, delta)) in nominal.iter().zip(disturbances).enumerate() {
        let perturbed = BodyCommand::from_vector4(u_nom.to_vector4() + delta);
        let feasible = actuator.limit_and_clip(&x, &perturbed, dt);
        x = rk4_step(&x, &feasible.wrench, dt, params);
        controls_out[j] = feasible.body_cmd;
        states_out[j + 1] = x;
        if !x.is_finite() {
            return false;
        }
    }
    true
}

/// Forward-simulate K rollouts under given disturbances. States and clipped
/// controls are populated; costs are left at zero (cost evaluation is a
/// separate concern).
pub fn simulate_rollouts(
    x_hat: &State,
    nominal: &NominalControl,
    disturbances: &[Vector4<f64>],
    actuator: &ActuatorModel,
    params: &DroneParams,
    config: &MppiConfig,
) -> RolloutBatch {
    let n = config.horizon;
    let k_count = config.rollouts;
    assert_eq!(disturbances.len(), k_count * n);
    assert_eq!(nominal.len(), n);

    let mut states = vec![*x_hat; k_count * (n + 1)];
    let mut controls = vec![BodyCommand::new(0.0, nalgebra::Vector3::zeros()); k_count * n];
    let mut costs = vec![0.0; k_count];

    states
        .par_chunks_mut(n + 1)
        .zip(controls.par_chunks_mut(n))
        .zip(costs.par_iter_mut())
        .enumerate()
        .for_each(|(k, ((s_chunk, c_chunk), cost))| {
            let finite = run_rollout(
                x_hat,
                nominal.sequence(),
                &disturbances[k * n..(k + 1) * n],
                actuator,
                params,
                config.dt_pred,
                s_chunk,
                c_chunk,
            );
            if !finite {
                *cost = f64::INFINITY;
            }
        });

    RolloutBatch {
        rollouts: k_count,
        horizon: n,
        states,
        controls,
        disturbances: disturbances.to_vec(),
        costs,
    }
}

/// Softmax weights with the minimum cost subtracted for numerical stability:
/// ω_k = exp(−(S_k − ρ)/λ)/η. Infinite-cost rollouts get zero weight.
/// Returns `None` when every cost is infinite.
pub fn compute_weights(costs: &[f64], lambda: f64) -> Option<RolloutWeights> {
    let rho = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !rho.is_finite() {
        return None;
    }
    let mut values: Vec<f64> = costs
        .iter()
        .map(|&s| {
            if s.is_finite() {
                (-(s - rho) / lambda).exp()
            } else {
                0.0
            }
        })
        .collect();
    let eta: f64 = values.iter().sum();
    for w in &mut values {
        *w /= eta;
    }
    Some(RolloutWeights { values })
}

/// Nominal update u_nom_j += Σ_k ω_k δ_j^k, summed sequentially over k so the
/// result does not depend on worker count.
pub fn update_nominal(
    nominal: &mut NominalControl,
    disturbances: &[Vector4<f64>],
    weights: &RolloutWeights,
) {
    let n = nominal.len();
    debug_assert_eq!(disturbances.len(), weights.values.len() * n);
    for j in 0..n {
        let mut acc = Vector4::zeros();
        for (k, w) in weights.values.iter().enumerate() {
            acc += disturbances[k * n + j] * *w;
        }
        let updated = nominal.seq[j].to_vector4() + acc;
        nominal.seq[j] = BodyCommand::from_vector4(updated);
    }
}

/// One MPPI control loop instance. Single-owner: advance it tick by tick;
/// rollout evaluation fans out over an internal worker pool.
pub struct MppiController {
    config: MppiConfig,
    params: DroneParams,
    actuator: ActuatorModel,
    weights: CostWeights,
    nominal: NominalControl,
    phase: u32,
    iteration: u64,
    last_command: BodyCommand,
    record_batch: bool,
    pool: Option<rayon::ThreadPool>,
    // scratch reused across ticks
    scratch_states: Vec<State>,
    scratch_controls: Vec<BodyCommand>,
    scratch_disturbances: Vec<Vector4<f64>>,
    scratch_costs: Vec<f64>,
    scratch_collided: Vec<bool>,
}

impl MppiController {
    /// Build a controller with hover-initialized nominal control.
    /// `workers` = 0 uses the global rayon pool.
    pub fn new(
        params: DroneParams,
        config: MppiConfig,
        weights: CostWeights,
        workers: usize,
    ) -> Result<Self, Error> {
        config.validate()?;
        weights.validate()?;
        let actuator = ActuatorModel::new(&params)?;
        let nominal = NominalControl::constant(config.u_init, config.horizon);
        let pool = if workers == 0 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?,
            )
        };
        let k = config.rollouts;
        let n = config.horizon;
        Ok(Self {
            last_command: config.u_init,
            nominal,
            phase: 0,
            iteration: 0,
            record_batch: false,
            pool,
            scratch_states: vec![State::default(); k * (n + 1)],
            scratch_controls: vec![BodyCommand::new(0.0, nalgebra::Vector3::zeros()); k * n],
            scratch_disturbances: vec![Vector4::zeros(); k * n],
            scratch_costs: vec![0.0; k],
            scratch_collided: vec![false; k],
            config,
            params,
            actuator,
            weights,
        })
    }

    pub fn config(&self) -> &MppiConfig {
        &self.config
    }

    pub fn nominal(&self) -> &NominalControl {
        &self.nominal
    }

    /// Replace the nominal sequence (warm start). Length must equal N.
    pub fn set_nominal(&mut self, nominal: NominalControl) {
        assert_eq!(nominal.len(), self.config.horizon);
        self.nominal = nominal;
    }

    pub fn set_record_batch(&mut self, record: bool) {
        self.record_batch = record;
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Command the controller would dispatch right now without optimizing:
    /// the interpolated nominal front, clipped.
    pub fn interpolated_command(&self, x_hat: &State) -> BodyCommand {
        let alpha = self.phase as f64 / self.config.n_interp as f64;
        let raw = self.nominal.interpolate_front(alpha);
        self.actuator
            .limit_and_clip(x_hat, &raw, self.config.dt_pred)
            .body_cmd
    }

    /// Advance the interpolation phase by one tick, shifting the nominal
    /// schedule by one prediction step each time the phase wraps.
    pub fn advance_schedule(&mut self) {
        self.phase += 1;
        if self.phase >= self.config.n_interp {
            self.phase = 0;
            self.nominal.shift(self.config.u_init);
        }
    }

    /// Run one full MPPI iteration and return the command to apply now.
    pub fn tick(
        &mut self,
        x_hat: &State,
        reference: &ReferenceWindow,
        world: Option<&CollisionWorld>,
    ) -> (BodyCommand, TickDiagnostics) {
        assert_eq!(
            reference.len(),
            self.config.horizon + 1,
            "reference window must have N+1 entries"
        );
        let start = Instant::now();
        let n = self.config.horizon;
        let k_count = self.config.rollouts;
        let std = self.config.sigma.map(f64::sqrt);
        let seed = self.config.seed;
        let iteration = self.iteration;
        let dt = self.config.dt_pred;

        let actuator = &self.actuator;
        let params = &self.params;
        let weights = &self.weights;
        let nominal_seq = self.nominal.sequence();

        let states = &mut self.scratch_states;
        let controls = &mut self.scratch_controls;
        let disturbances = &mut self.scratch_disturbances;
        let costs = &mut self.scratch_costs;
        let collided = &mut self.scratch_collided;

        let mut evaluate = || {
            states
                .par_chunks_mut(n + 1)
                .zip(controls.par_chunks_mut(n))
                .zip(disturbances.par_chunks_mut(n))
                .zip(costs.par_iter_mut())
                .zip(collided.par_iter_mut())
                .enumerate()
                .for_each(|(k, ((((s_chunk, c_chunk), d_chunk), cost), hit))| {
                    let mut rng = rollout_stream(seed, iteration, k as u64);
                    fill_disturbances(&mut rng, &std, d_chunk);
                    let finite = run_rollout(
                        x_hat, nominal_seq, d_chunk, actuator, params, dt, s_chunk, c_chunk,
                    );
                    if finite {
                        *cost = compute_cost(s_chunk, c_chunk, reference, world, weights);
                        *hit = world
                            .map(|w| s_chunk.iter().any(|s| w.is_colliding(&s.p)))
                            .unwrap_or(false);
                    } else {
                        *cost = f64::INFINITY;
                        *hit = false;
                    }
                });
        };
        match &self.pool {
            Some(pool) => pool.install(evaluate),
            None => evaluate(),
        }

        self.iteration += 1;

        let weights_opt = compute_weights(costs, self.config.lambda);
        let (status, entropy) = match &weights_opt {
            Some(w) => (TickStatus::Ok, w.entropy()),
            None => (TickStatus::AllRolloutsNonFinite, 0.0),
        };

        let mut best = f64::INFINITY;
        let mut worst = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut finite_count = 0usize;
        for c in costs.iter() {
            if c.is_finite() {
                best = best.min(*c);
                worst = worst.max(*c);
                sum += *c;
                finite_count += 1;
            }
        }
        let mean = if finite_count > 0 {
            sum / finite_count as f64
        } else {
            f64::INFINITY
        };
        let collision_fraction =
            collided.iter().filter(|c| **c).count() as f64 / k_count as f64;

        let command = if let Some(w) = &weights_opt {
            update_nominal(&mut self.nominal, disturbances, w);
            let cmd = {
                let alpha = self.phase as f64 / self.config.n_interp as f64;
                let raw = self.nominal.interpolate_front(alpha);
                self.actuator
                    .limit_and_clip(x_hat, &raw, self.config.dt_pred)
                    .body_cmd
            };
            self.advance_schedule();
            self.last_command = cmd;
            cmd
        } else {
            // Keep the nominal and schedule untouched; re-dispatch.
            self.last_command
        };

        let batch = self.record_batch.then(|| RolloutBatch {
            rollouts: k_count,
            horizon: n,
            states: self.scratch_states.clone(),
            controls: self.scratch_controls.clone(),
            disturbances: self.scratch_disturbances.clone(),
            costs: self.scratch_costs.clone(),
        });

        let diagnostics = TickDiagnostics {
            status,
            best_cost: best,
            mean_cost: mean,
            worst_cost: worst,
            weight_entropy: entropy,
            collision_fraction,
            wall_time_us: start.elapsed().as_secs_f64() * 1e6,
            batch,
        };
        (command, diagnostics)
    }
}

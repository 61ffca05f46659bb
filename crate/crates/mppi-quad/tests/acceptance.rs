//! Acceptance suite: one test per shipped-behavior criterion, each printing a
//! PASS line with the measured numbers (run with `--nocapture` to see them on
//! success).
//!
//! The closed-loop criteria run the shipped experiment configs and are
//! deterministic for the shipped seeds. Tests share a lock so heavy runs and
//! timing measurements never overlap.

use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector4};

use mppi_quad::bench::{default_grid, linear_fit_r2, timing_benchmark};
use mppi_quad::{
    compute_weights, quat_angle, quat_dist_approx, rk4_step, run_closed_loop, update_nominal,
    ActuatorModel, BodyCommand, DroneParams, ExperimentConfig, MppiConfig, MppiController,
    NominalControl, ReferenceWindow, RolloutWeights, State, TrajectorySpec, WrenchCommand,
};

fn lock() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|e| e.into_inner())
}

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).expect("shipped config must load")
}

fn test_drone() -> DroneParams {
    load("eight.toml").drone
}

/// Peak reference speed and acceleration by dense sampling, independent of
/// the analytic velocity expressions.
fn measured_peaks(spec: &TrajectorySpec) -> (f64, f64) {
    let period = spec.period();
    let n = 40_000;
    let dt = period / n as f64;
    let mut peak_v: f64 = 0.0;
    let mut peak_a: f64 = 0.0;
    let mut prev_v = spec.reference_at(0.0).v;
    for i in 1..=n {
        let s = spec.reference_at(i as f64 * dt);
        peak_v = peak_v.max(s.v.norm());
        peak_a = peak_a.max(((s.v - prev_v) / dt).norm());
        prev_v = s.v;
    }
    (peak_v, peak_a)
}

/// Criterion 1: tracking reproduction on the four shipped trajectories,
/// 20 loops each, mean position error within the widened bands.
#[test]
fn criterion_1_tracking_reproduction() {
    let _guard = lock();
    let cases = [
        ("eight.toml", 1.00, (8.853, 7.571)),
        ("slanted_circle.toml", 0.70, (5.652, 5.289)),
        ("circle.toml", 1.05, (8.459, 7.034)),
        ("line.toml", 1.70, (12.271, 19.782)),
    ];
    for (name, band, (v_target, a_target)) in cases {
        let config = load(name);

        // Reference feasibility: the shipped shape hits the target peaks.
        let (peak_v, peak_a) = measured_peaks(&config.trajectory);
        assert!(
            (peak_v - v_target).abs() <= 0.05 * v_target,
            "{name}: reference peak speed {peak_v:.3} vs target {v_target}"
        );
        assert!(
            (peak_a - a_target).abs() <= 0.05 * a_target,
            "{name}: reference peak accel {peak_a:.3} vs target {a_target}"
        );

        let start = Instant::now();
        let report = run_closed_loop(&config, None).expect("run must complete");
        let elapsed = start.elapsed().as_secs_f64();
        assert!(!report.diverged, "{name}: run diverged");
        assert!(
            report.mean_err_m <= band,
            "{name}: mean error {:.3} m exceeds band {band}",
            report.mean_err_m
        );
        println!(
            "ACCEPTANCE 1 tracking [{name}]: PASS - mean {:.3} ± {:.3} m (band {band}), \
             ref peaks {peak_v:.2} m/s / {peak_a:.2} m/s², {elapsed:.0} s wall",
            report.mean_err_m, report.std_err_m
        );
    }
}

/// Criterion 2: obstacle avoidance on the shipped pillar and windowed-wall
/// worlds, 30 loops, zero plant collisions.
#[test]
fn criterion_2_obstacle_avoidance() {
    let _guard = lock();
    for name in ["slanted_circle_pillars.toml", "line_walls.toml"] {
        let config = load(name);
        assert_eq!(config.run.loops, 30);
        assert_eq!(config.weights.c_obs, 1e6);
        assert!(config.world.is_some(), "{name}: world missing");
        let report = run_closed_loop(&config, None).expect("run must complete");
        assert!(!report.diverged, "{name}: run diverged");
        assert_eq!(
            report.collisions, 0,
            "{name}: {} plant steps in collision",
            report.collisions
        );
        println!(
            "ACCEPTANCE 2 obstacles [{name}]: PASS - 0 collisions over 30 loops, \
             mean error {:.3} m",
            report.mean_err_m
        );
    }
}

/// Criterion 3: iteration timing at the operating point plus the surface
/// shape checks (monotone in K, linear in N).
#[test]
fn criterion_3_timing() {
    let _guard = lock();
    let config = load("eight.toml");
    let grid = default_grid();
    let points = timing_benchmark(&config, &grid, 200, 20).expect("benchmark must run");

    // Shape checks run on medians: the mean picks up multi-millisecond
    // scheduler stalls on shared machines.
    // Monotone (within 10% measurement noise) in K at every fixed N.
    for &n in &[5usize, 10, 15, 20] {
        let mut series: Vec<_> = points.iter().filter(|p| p.horizon == n).collect();
        series.sort_by_key(|p| p.rollouts);
        for w in series.windows(2) {
            assert!(
                w[1].median_us >= 0.9 * w[0].median_us,
                "time not monotone in K at N={n}: K={} {:.0}us vs K={} {:.0}us",
                w[0].rollouts,
                w[0].median_us,
                w[1].rollouts,
                w[1].median_us
            );
        }
    }
    // Approximately linear in N at every fixed K.
    for &k in &[128usize, 256, 512, 896] {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.rollouts == k)
            .map(|p| (p.horizon as f64, p.median_us))
            .collect();
        let r2 = linear_fit_r2(&pts);
        assert!(r2 > 0.9, "time vs N at K={k} poorly linear: R²={r2:.3}");
    }

    let op = points
        .iter()
        .find(|p| p.rollouts == 896 && p.horizon == 15)
        .expect("operating point in grid");
    let mean_ms = op.mean_us / 1000.0;
    let median_ms = op.median_us / 1000.0;
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if threads >= 8 {
        assert!(
            mean_ms <= 20.0,
            "operating point {mean_ms:.2} ms exceeds the 20 ms hard gate"
        );
        println!(
            "ACCEPTANCE 3 timing: PASS - K=896 N=15 mean {:.2} ms (median {:.2}) on \
             {threads} threads ({} the 10 ms budget); shape checks hold",
            mean_ms,
            median_ms,
            if mean_ms <= 10.0 { "within" } else { "over" }
        );
    } else {
        println!(
            "ACCEPTANCE 3 timing: PASS (shape checks) - K=896 N=15 mean {:.2} ms \
             (median {:.2}) measured on only {threads} hardware threads (<8, budget gate \
             informational: {})",
            mean_ms,
            median_ms,
            if mean_ms <= 10.0 {
                "within 10 ms"
            } else if mean_ms <= 20.0 {
                "within 20 ms"
            } else {
                "over 20 ms"
            }
        );
    }
}

/// Criterion 4: quaternion metric identities and the 360° sweep anchors.
#[test]
fn criterion_4_quaternion_metrics() {
    let _guard = lock();
    // Exactly representable unit quaternions: the identities hold exactly.
    let exact = [
        Quaternion::new(1.0, 0.0, 0.0, 0.0),
        Quaternion::new(0.0, 1.0, 0.0, 0.0),
        Quaternion::new(0.0, 0.0, 1.0, 0.0),
        Quaternion::new(0.0, 0.0, 0.0, 1.0),
        Quaternion::new(0.5, 0.5, 0.5, 0.5),
        Quaternion::new(0.5, -0.5, 0.5, -0.5),
        Quaternion::new(-0.5, 0.5, 0.5, 0.5),
    ];
    for q in exact {
        let q = UnitQuaternion::from_quaternion(q);
        let neg = UnitQuaternion::from_quaternion(-*q.quaternion());
        assert_eq!(quat_dist_approx(&q, &q), 0.0);
        assert_eq!(quat_dist_approx(&q, &neg), 0.0);
        assert_eq!(quat_angle(&q, &q), 0.0);
        assert_eq!(quat_angle(&q, &neg), 0.0);
    }

    // Full single-axis rotation: exact angle peaks at pi and returns to 0,
    // the approximation peaks at 1, the Euclidean distance reaches 2.
    let start = UnitQuaternion::identity();
    let at = |deg: f64| {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), deg.to_radians());
        (
            quat_angle(&start, &q),
            quat_dist_approx(&start, &q),
            (q.quaternion() - start.quaternion()).norm(),
        )
    };
    let (e0, a0, u0) = at(0.0);
    assert!(e0.abs() <= 1e-9 && a0.abs() <= 1e-9 && u0.abs() <= 1e-9);
    let (e180, a180, u180) = at(180.0);
    assert!((e180 - std::f64::consts::PI).abs() <= 1e-9);
    assert!((a180 - 1.0).abs() <= 1e-9);
    assert!((u180 - std::f64::consts::SQRT_2).abs() <= 1e-9);
    let (e360, a360, u360) = at(360.0);
    assert!(e360.abs() <= 1e-9);
    assert!(a360.abs() <= 1e-9);
    assert!((u360 - 2.0).abs() <= 1e-9);

    // Monotone rise to the 180° peak for both metrics on a shared axis.
    let mut prev = (-1.0, -1.0);
    for deg in 0..=180 {
        let (e, a, _) = at(deg as f64);
        assert!(e >= prev.0 && a >= prev.1, "not monotone at {deg}°");
        prev = (e, a);
    }
    println!(
        "ACCEPTANCE 4 quaternion metrics: PASS - d(q,q)=d(q,-q)=0 exactly; sweep anchors \
         (pi, 1, sqrt2) at 180° and (0, 0, 2) at 360° within 1e-9"
    );
}

/// Criterion 5: actuator feasibility over 1e5 randomized (state, command)
/// pairs: idempotence, per-rotor limits, unsaturated round-trip identity.
#[test]
fn criterion_5_actuator_feasibility() {
    let _guard = lock();
    use rand::Rng;
    use rand::SeedableRng;

    let params = test_drone();
    let actuator = ActuatorModel::new(&params).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut unsaturated = 0usize;
    let n = 100_000;
    for _ in 0..n {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let x = State {
            p: Vector3::zeros(),
            q: UnitQuaternion::from_scaled_axis(axis),
            v: Vector3::zeros(),
            w: Vector3::new(
                rng.random_range(-8.0..8.0),
                rng.random_range(-8.0..8.0),
                rng.random_range(-1.9..1.9),
            ),
        };
        let cmd = BodyCommand::new(
            rng.random_range(-10.0..120.0),
            Vector3::new(
                rng.random_range(-25.0..25.0),
                rng.random_range(-25.0..25.0),
                rng.random_range(-5.0..5.0),
            ),
        );
        let fc = actuator.clip_and_reconstruct(&x, &cmd, 0.1);

        // Per-rotor limits.
        let thrusts = actuator.rotor_thrusts(fc.wrench.thrust, &fc.wrench.torque).0;
        for i in 0..4 {
            assert!(
                thrusts[i] >= params.thrust_min - 1e-9 && thrusts[i] <= params.thrust_max + 1e-9,
                "rotor {i} out of range: {}",
                thrusts[i]
            );
        }

        // Idempotence.
        let fc2 = actuator.clip_and_reconstruct(&x, &fc.body_cmd, 0.1);
        assert!(
            (fc2.wrench.thrust - fc.wrench.thrust).abs() <= 1e-9
                && (fc2.wrench.torque - fc.wrench.torque).norm() <= 1e-9
                && (fc2.body_cmd.rates - fc.body_cmd.rates).norm() <= 1e-9,
            "clip not idempotent"
        );

        // Unsaturated inputs pass through exactly.
        let tau_d = actuator.desired_torques(&x, &cmd.rates, 0.1);
        let raw = actuator.rotor_thrusts(cmd.thrust, &tau_d).0;
        let inside = (0..4)
            .all(|i| raw[i] > params.thrust_min + 1e-6 && raw[i] < params.thrust_max - 1e-6);
        if inside {
            unsaturated += 1;
            assert!(
                (fc.wrench.thrust - cmd.thrust).abs() <= 1e-9
                    && (fc.wrench.torque - tau_d).norm() <= 1e-9
                    && (fc.body_cmd.rates - cmd.rates).norm() <= 1e-9,
                "unsaturated round trip not identity"
            );
        }
    }
    assert!(unsaturated > n / 20, "domain exercises too few unsaturated cases");
    println!(
        "ACCEPTANCE 5 actuator feasibility: PASS - {n} randomized pairs \
         ({unsaturated} unsaturated round trips) within 1e-9"
    );
}

/// Criterion 6: MPPI algebra - weight normalization, limiting behaviors,
/// exact antithetic cancellation, schedule identities, and bit-exact
/// determinism across worker counts and reruns.
#[test]
fn criterion_6_mppi_algebra() {
    let _guard = lock();
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);

    // Weight normalization on random cost vectors.
    for _ in 0..100 {
        let costs: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..100.0)).collect();
        let w = compute_weights(&costs, 0.7).unwrap();
        assert!((w.values.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    // Uniform weights at equal costs.
    let w = compute_weights(&[5.0; 896], 1e-4).unwrap();
    assert!(w.values.iter().all(|v| (*v - 1.0 / 896.0).abs() <= 1e-12));
    // One-hot at vanishing temperature with separated costs.
    let w = compute_weights(&[3.0, 1.0, 2.0, 8.0], 1e-4).unwrap();
    assert_eq!(w.values[1], 1.0);
    assert_eq!(w.values[0] + w.values[2] + w.values[3], 0.0);

    // Antithetic cancellation is exact.
    let params = test_drone();
    let horizon = 15;
    let mut nominal = NominalControl::constant(BodyCommand::hover(&params), horizon);
    let original = nominal.clone();
    let mut disturbances = Vec::new();
    for k in 0..8u64 {
        let d = Vector4::new(0.31 * (k + 1) as f64, -0.17, 0.23, 0.05);
        disturbances.extend(std::iter::repeat_n(d, horizon));
        disturbances.extend(std::iter::repeat_n(-d, horizon));
    }
    update_nominal(
        &mut nominal,
        &disturbances,
        &RolloutWeights {
            values: vec![1.0 / 16.0; 16],
        },
    );
    assert_eq!(nominal, original, "antithetic update must cancel exactly");

    // Shift and interpolation identities.
    let config = MppiConfig {
        rollouts: 8,
        horizon: 4,
        dt_pred: 0.1,
        n_interp: 10,
        lambda: 1e-4,
        sigma: Vector4::new(0.6, 0.15, 0.15, 0.05),
        u_init: BodyCommand::hover(&params),
        seed: 3,
    };
    let weights = load("eight.toml").weights;
    let mut ctrl =
        MppiController::new(params.clone(), config.clone(), weights.clone(), 1).unwrap();
    let a = BodyCommand::new(10.0, Vector3::new(0.4, -0.2, 0.1));
    let b = BodyCommand::new(13.0, Vector3::new(-0.6, 0.8, -0.3));
    ctrl.set_nominal(NominalControl::from_sequence(vec![a, b, a, b]));
    for _ in 0..config.n_interp {
        ctrl.advance_schedule();
    }
    let shifted = NominalControl::from_sequence(vec![b, a, b, BodyCommand::hover(&params)]);
    assert_eq!(ctrl.nominal(), &shifted, "n_interp ticks must equal one shift");
    let mid = NominalControl::from_sequence(vec![a, b, a, b]).interpolate_front(0.5);
    let expect = (a.to_vector4() + b.to_vector4()) * 0.5;
    assert!((mid.to_vector4() - expect).norm() <= 1e-12);

    // Bit-exact determinism across worker counts and reruns, at the
    // operating-point sizes.
    let op_config = MppiConfig {
        rollouts: 896,
        horizon: 15,
        ..config
    };
    let x = State::hover_at(Vector3::new(0.0, 0.0, 2.0));
    let reference = ReferenceWindow::new(vec![State::hover_at(Vector3::new(1.0, 0.5, 2.0)); 16]);
    let run = |workers: usize| {
        let mut c =
            MppiController::new(params.clone(), op_config.clone(), weights.clone(), workers)
                .unwrap();
        (0..3).map(|_| c.tick(&x, &reference, None).0).collect::<Vec<_>>()
    };
    let single = run(1);
    let dual = run(2);
    let many = run(4);
    let rerun = run(1);
    assert_eq!(single, dual);
    assert_eq!(single, many);
    assert_eq!(single, rerun);
    println!(
        "ACCEPTANCE 6 MPPI algebra: PASS - normalization 1e-9, limiting weights, exact \
         antithetic cancellation, schedule identities, bit-exact across 1/2/4 workers and reruns"
    );
}

/// Criterion 7: integrator - hover fixed point, free-fall analytic match,
/// and fourth-order convergence against a dt/1000 oracle.
#[test]
fn criterion_7_integrator() {
    let _guard = lock();
    use rand::Rng;
    use rand::SeedableRng;

    let params = test_drone();

    // Hover fixed point over 1000 steps.
    let x0 = State::hover_at(Vector3::new(1.0, -1.0, 2.0));
    let hover = WrenchCommand::new(params.hover_thrust(), Vector3::zeros());
    let mut x = x0;
    for _ in 0..1000 {
        x = rk4_step(&x, &hover, 0.1, &params);
    }
    assert!((x.p - x0.p).norm() <= 1e-9, "hover drifted {}", (x.p - x0.p).norm());
    assert!(x.v.norm() <= 1e-9);
    assert!(x.q.angle_to(&x0.q) <= 1e-9);

    // Free fall matches the analytic constant-acceleration solution.
    let free = WrenchCommand::new(0.0, Vector3::zeros());
    let mut x = State::hover_at(Vector3::zeros());
    for _ in 0..50 {
        x = rk4_step(&x, &free, 0.1, &params);
    }
    assert!((x.v.z - (-9.81 * 5.0)).abs() <= 1e-9);
    assert!((x.p.z - (-0.5 * 9.81 * 25.0)).abs() <= 1e-9);

    // Fourth-order convergence: halving dt cuts the single-step error by >= 8
    // against a dt/1000 oracle.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let sub = |x: &State, u: &WrenchCommand, dt: f64, n: usize| {
        let mut y = *x;
        let h = dt / n as f64;
        for _ in 0..n {
            y = rk4_step(&y, u, h, &params);
        }
        y
    };
    let dist = |a: &State, b: &State| {
        ((a.p - b.p).norm_squared()
            + (a.v - b.v).norm_squared()
            + (a.w - b.w).norm_squared()
            + (a.q.quaternion() - b.q.quaternion()).norm_squared())
        .sqrt()
    };
    let mut checked = 0;
    let mut worst: f64 = f64::INFINITY;
    for _ in 0..40 {
        let x = State {
            p: Vector3::zeros(),
            q: UnitQuaternion::from_scaled_axis(Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )),
            v: Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
            w: Vector3::new(
                rng.random_range(-4.0..4.0),
                rng.random_range(-4.0..4.0),
                rng.random_range(-2.0..2.0),
            ),
        };
        let u = WrenchCommand::new(
            rng.random_range(0.0..30.0),
            Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.3..0.3),
            ),
        );
        let oracle = sub(&x, &u, 0.1, 1000);
        let err_full = dist(&rk4_step(&x, &u, 0.1, &params), &oracle);
        let err_half = dist(&sub(&x, &u, 0.1, 2), &oracle);
        if err_full < 1e-12 {
            continue;
        }
        let ratio = err_full / err_half.max(1e-300);
        worst = worst.min(ratio);
        checked += 1;
        assert!(ratio >= 8.0, "convergence ratio {ratio:.2} below 8");
    }
    assert!(checked >= 20);
    println!(
        "ACCEPTANCE 7 integrator: PASS - hover fixed point and free fall within 1e-9 \
         over long runs; worst convergence ratio {worst:.1} (>= 8) on {checked} samples"
    );
}

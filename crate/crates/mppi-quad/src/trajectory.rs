//! Analytic reference trajectories: line, circle, slanted circle, and a
//! figure eight, periodic in time.
//!
//! References carry position and velocity on the curve; the reference
//! attitude is level flight with yaw tangent to the path (constant yaw for
//! the line and eight), and reference body rates are zero.

use nalgebra::{UnitQuaternion, Vector3};

use crate::cost::ReferenceWindow;
use crate::dynamics::State;
use crate::error::Error;

/// Shape and timing of a reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    /// Back-and-forth sweep between two points with harmonic time profile;
    /// one period covers out and back. Peak acceleration follows as
    /// 2·v_peak²/L.
    Line {
        from: Vector3<f64>,
        to: Vector3<f64>,
        peak_speed: f64,
    },
    /// Horizontal circle at constant angular rate.
    Circle {
        center: Vector3<f64>,
        radius: f64,
        period: f64,
    },
    /// Circle tilted about the world x-axis.
    SlantedCircle {
        center: Vector3<f64>,
        radius: f64,
        period: f64,
        tilt: f64,
    },
    /// Figure eight (lemniscate) with x half-extent `half_width` and full
    /// y-extent `height`.
    Eight {
        center: Vector3<f64>,
        half_width: f64,
        height: f64,
        period: f64,
    },
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("trajectory: {what}")));
        match self {
            TrajectorySpec::Line {
                from,
                to,
                peak_speed,
            } => {
                if (to - from).norm() <= 0.0 {
                    return bad("line endpoints must be distinct");
                }
                if *peak_speed <= 0.0 {
                    return bad("peak_speed must be > 0");
                }
            }
            TrajectorySpec::Circle { radius, period, .. } => {
                if *radius <= 0.0 {
                    return bad("radius must be > 0");
                }
                if *period <= 0.0 {
                    return bad("period must be > 0");
                }
            }
            TrajectorySpec::SlantedCircle { radius, period, .. } => {
                if *radius <= 0.0 {
                    return bad("radius must be > 0");
                }
                if *period <= 0.0 {
                    return bad("period must be > 0");
                }
            }
            TrajectorySpec::Eight {
                half_width,
                height,
                period,
                ..
            } => {
                if *half_width <= 0.0 || *height <= 0.0 {
                    return bad("half_width and height must be > 0");
                }
                if *period <= 0.0 {
                    return bad("period must be > 0");
                }
            }
        }
        Ok(())
    }

    /// Duration of one loop [s].
    pub fn period(&self) -> f64 {
        match self {
            TrajectorySpec::Line {
                from,
                to,
                peak_speed,
            } => std::f64::consts::PI * (to - from).norm() / peak_speed,
            TrajectorySpec::Circle { period, .. }
            | TrajectorySpec::SlantedCircle { period, .. }
            | TrajectorySpec::Eight { period, .. } => *period,
        }
    }

    /// Position and velocity on the curve at time t.
    fn point(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            TrajectorySpec::Line {
                from,
                to,
                peak_speed,
            } => {
                let dir = to - from;
                let length = dir.norm();
                let omega = 2.0 * peak_speed / length; // = 2π/T
                let theta = omega * t;
                let s = 0.5 * (1.0 - theta.cos());
                let s_dot = 0.5 * omega * theta.sin();
                (from + dir * s, dir * s_dot)
            }
            TrajectorySpec::Circle {
                center,
                radius,
                period,
            } => {
                let omega = std::f64::consts::TAU / period;
                let theta = omega * t;
                let p = center + Vector3::new(radius * theta.cos(), radius * theta.sin(), 0.0);
                let v = Vector3::new(-radius * omega * theta.sin(), radius * omega * theta.cos(), 0.0);
                (p, v)
            }
            TrajectorySpec::SlantedCircle {
                center,
                radius,
                period,
                tilt,
            } => {
                let omega = std::f64::consts::TAU / period;
                let theta = omega * t;
                let flat = Vector3::new(radius * theta.cos(), radius * theta.sin(), 0.0);
                let flat_v =
                    Vector3::new(-radius * omega * theta.sin(), radius * omega * theta.cos(), 0.0);
                let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), *tilt);
                (center + rot * flat, rot * flat_v)
            }
            TrajectorySpec::Eight {
                center,
                half_width,
                height,
                period,
            } => {
                let omega = std::f64::consts::TAU / period;
                let theta = omega * t;
                let p = center
                    + Vector3::new(
                        half_width * theta.sin(),
                        0.5 * height * (2.0 * theta).sin(),
                        0.0,
                    );
                let v = Vector3::new(
                    half_width * omega * theta.cos(),
                    height * omega * (2.0 * theta).cos(),
                    0.0,
                );
                (p, v)
            }
        }
    }

    /// Yaw of the reference attitude at time t.
    fn yaw(&self, t: f64) -> f64 {
        match self {
            // Constant heading along the sweep direction.
            TrajectorySpec::Line { from, to, .. } => {
                let dir = to - from;
                if dir.x.abs() < 1e-12 && dir.y.abs() < 1e-12 {
                    0.0
                } else {
                    dir.y.atan2(dir.x)
                }
            }
            // Tangent heading for the circles.
            TrajectorySpec::Circle { .. } | TrajectorySpec::SlantedCircle { .. } => {
                let (_, v) = self.point(t);
                if v.x.abs() < 1e-12 && v.y.abs() < 1e-12 {
                    0.0
                } else {
                    v.y.atan2(v.x)
                }
            }
            TrajectorySpec::Eight { .. } => 0.0,
        }
    }

    /// Reference state at time t: on-curve position/velocity, level attitude
    /// at the reference yaw, zero body rates.
    pub fn reference_at(&self, t: f64) -> State {
        let (p, v) = self.point(t);
        State {
            p,
            q: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw(t)),
            v,
            w: Vector3::zeros(),
        }
    }
}

/// Sample the reference on the prediction grid: N+1 states at
/// t, t + dt_pred, ..., t + N·dt_pred.
pub fn reference_window(spec: &TrajectorySpec, t: f64, horizon: usize, dt_pred: f64) -> ReferenceWindow {
    ReferenceWindow::new(
        (0..=horizon)
            .map(|j| spec.reference_at(t + j as f64 * dt_pred))
            .collect(),
    )
}

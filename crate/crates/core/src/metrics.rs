//! Oscillation count and settling time of a pendulum trajectory.

use serde::Serialize;
use thiserror::Error;

use crate::trajectory::Trajectory;

pub const DEFAULT_REST_BAND: f64 = 0.02;
pub const DEFAULT_HOLD_TIME: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trajectory spans {span:.4} s, shorter than the hold time {hold:.4} s")]
    InsufficientData { span: f64, hold: f64 },
    #[error("trajectory never stays within {band} rad of its final angle for {hold} s")]
    NotSettled { band: f64, hold: f64 },
    #[error("rest band and hold time must be positive")]
    InvalidSetting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationMetrics {
    /// Half the number of rest-angle crossings, rounded up: a release that
    /// swings through the rest angle once and settles counts as one.
    pub n_oscillations: usize,
    /// Crossings of the final angle, with a hysteresis band of `rest_band`.
    pub crossings: usize,
    /// Time from the first sample until the trajectory enters and holds the
    /// rest band.
    pub settle_time: f64,
    pub final_angle: f64,
}

/// Number of sign changes of `x - center`, ignoring excursions that stay
/// inside `center ± band`.
pub fn count_crossings(x: &[f64], center: f64, band: f64) -> usize {
    let mut side = 0i8;
    let mut crossings = 0;
    for &v in x {
        let s = if v > center + band {
            1
        } else if v < center - band {
            -1
        } else {
            continue;
        };
        if side != 0 && s != side {
            crossings += 1;
        }
        side = s;
    }
    crossings
}

pub fn metrics(traj: &Trajectory, rest_band: f64, hold_time: f64) -> Result<OscillationMetrics, MetricsError> {
    if !(rest_band > 0.0 && hold_time > 0.0) {
        return Err(MetricsError::InvalidSetting);
    }
    let span = traj.duration();
    let hold_samples = (hold_time / traj.dt).round() as usize;
    if traj.angles.is_empty() || hold_samples >= traj.len() {
        return Err(MetricsError::InsufficientData { span, hold: hold_time });
    }
    let final_angle = *traj.angles.last().unwrap();
    let crossings = count_crossings(&traj.angles, final_angle, rest_band);

    // Walk backwards tracking the run length of in-band samples; the earliest
    // index whose run covers the hold window wins.
    let mut run = 0usize;
    let mut first = None;
    for k in (0..traj.len()).rev() {
        if (traj.angles[k] - final_angle).abs() < rest_band {
            run += 1;
            if run > hold_samples {
                first = Some(k);
            }
        } else {
            run = 0;
        }
    }
    let k = first.ok_or(MetricsError::NotSettled { band: rest_band, hold: hold_time })?;
    Ok(OscillationMetrics {
        n_oscillations: crossings.div_ceil(2),
        crossings,
        settle_time: k as f64 * traj.dt,
        final_angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trajectory() {
        let traj = Trajectory::new(3.0, 0.01, vec![1.0; 200], None).unwrap();
        let m = metrics(&traj, 0.02, 0.5).unwrap();
        assert_eq!(m.n_oscillations, 0);
        assert_eq!(m.settle_time, 0.0);
        assert_eq!(m.final_angle, 1.0);
    }

    #[test]
    fn hysteresis_ignores_chatter() {
        let x = [0.0, 0.005, -0.005, 0.005, 0.5, -0.5, 0.0];
        assert_eq!(count_crossings(&x, 0.0, 0.01), 1);
        assert_eq!(count_crossings(&[1.0, -1.0, 1.0, -1.0], 0.0, 0.01), 3);
    }

    #[test]
    fn ceil_counting() {
        let mut x = vec![1.0, -1.0];
        x.extend(std::iter::repeat_n(0.0, 100));
        let traj = Trajectory::new(0.0, 0.01, x, None).unwrap();
        let m = metrics(&traj, 0.02, 0.5).unwrap();
        assert_eq!((m.crossings, m.n_oscillations), (1, 1));
        assert!((m.settle_time - 0.02).abs() < 1e-12);
    }

    #[test]
    fn short_or_unsettled_trajectories_error() {
        let traj = Trajectory::new(0.0, 0.1, vec![0.0; 4], None).unwrap();
        assert!(matches!(metrics(&traj, 0.02, 0.5), Err(MetricsError::InsufficientData { .. })));
        let x: Vec<f64> = (0..100).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let traj = Trajectory::new(0.0, 0.01, x, None).unwrap();
        assert!(matches!(metrics(&traj, 0.02, 0.5), Err(MetricsError::NotSettled { .. })));
    }
}

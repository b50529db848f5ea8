//! Monte-Carlo envelopes of pendulum trajectories under parameter
//! uncertainty.

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::fit::ParamDistribution;
use crate::pendulum::{simulate, PendulumParams};
use crate::rng::substream;
use crate::stats::central_interval;
use crate::trajectory::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandError {
    #[error("parameter source is empty")]
    Empty,
    #[error("uniform damping range must satisfy 0 <= lo <= hi, got [{lo}, {hi}]")]
    BadRange { lo: f64, hi: f64 },
    #[error("all {0} samples failed to simulate")]
    AllFailed(usize),
}

/// Where the parameter samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSource {
    /// Every row of a fitted distribution, substituted into `base`.
    Distribution { dist: ParamDistribution, base: PendulumParams },
    /// `n` damping values drawn from `U(lo, hi)` with everything else from
    /// `base`.
    UniformDamping { lo: f64, hi: f64, n: usize, seed: u64, base: PendulumParams },
}

impl ParamSource {
    pub fn draw(&self) -> Result<Vec<PendulumParams>, BandError> {
        match self {
            ParamSource::Distribution { dist, base } => {
                if dist.samples.is_empty() {
                    return Err(BandError::Empty);
                }
                Ok((0..dist.samples.len()).map(|i| dist.sample_params(i, base)).collect())
            }
            &ParamSource::UniformDamping { lo, hi, n, seed, base } => {
                if n == 0 {
                    return Err(BandError::Empty);
                }
                if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(BandError::BadRange { lo, hi });
                }
                Ok((0..n)
                    .map(|i| {
                        let b = if hi > lo { substream(seed, i as u64).random_range(lo..hi) } else { lo };
                        PendulumParams { damping_b: b, ..base }
                    })
                    .collect())
            }
        }
    }
}

/// Pointwise mean and central 95% envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub t0: f64,
    pub dt: f64,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Successfully simulated members, in draw order.
    pub members: Vec<Trajectory>,
    pub params: Vec<PendulumParams>,
    /// Draws that diverged and were left out.
    pub excluded: usize,
}

impl Band {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mean", "lo", "hi"])?;
        for k in 0..self.mean.len() {
            let t = self.t0 + k as f64 * self.dt;
            w.write_record([t.to_string(), self.mean[k].to_string(), self.lo[k].to_string(), self.hi[k].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One parsed row of a band CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BandRow {
    pub t: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn read_band_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<BandRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn monte_carlo_band(source: &ParamSource, theta0: f64, duration: f64, dt: f64) -> Result<Band, BandError> {
    let draws = source.draw()?;
    let sims: Vec<Option<Trajectory>> = draws
        .par_iter()
        .enumerate()
        .map(|(i, p)| match simulate(p, theta0, 0.0, duration, dt) {
            Ok(t) => Some(t),
            Err(e) => {
                log::warn!("band sample {i} excluded: {e}");
                None
            }
        })
        .collect();
    let mut members = Vec::new();
    let mut params = Vec::new();
    for (traj, p) in sims.into_iter().zip(draws) {
        if let Some(t) = traj {
            members.push(t);
            params.push(p);
        }
    }
    let excluded = source_len(source) - members.len();
    if members.is_empty() {
        return Err(BandError::AllFailed(excluded));
    }
    let n = members[0].len();
    let mut mean = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    let mut column = vec![0.0; members.len()];
    for k in 0..n {
        for (c, m) in column.iter_mut().zip(&members) {
            *c = m.angles[k];
        }
        mean.push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(f64::total_cmp);
        let (l, h) = central_interval(&column, 0.95);
        lo.push(l);
        hi.push(h);
    }
    Ok(Band { t0: members[0].t0, dt, mean, lo, hi, members, params, excluded })
}

fn source_len(source: &ParamSource) -> usize {
    match source {
        ParamSource::Distribution { dist, .. } => dist.samples.len(),
        ParamSource::UniformDamping { n, .. } => *n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::FitParam;
    use crate::pendulum::{CALIBRATED_RELEASE_ANGLE, DEFAULT_SAMPLE_INTERVAL};

    #[test]
    fn single_sample_band_collapses() {
        let dist = ParamDistribution::from_samples(vec![FitParam::DampingB], vec![vec![1e-3]], 0);
        let base = PendulumParams::default();
        let band = monte_carlo_band(
            &ParamSource::Distribution { dist, base },
            CALIBRATED_RELEASE_ANGLE,
            1.0,
            DEFAULT_SAMPLE_INTERVAL,
        )
        .unwrap();
        let direct = simulate(&PendulumParams { damping_b: 1e-3, ..base }, CALIBRATED_RELEASE_ANGLE, 0.0, 1.0, DEFAULT_SAMPLE_INTERVAL).unwrap();
        assert_eq!(band.mean, direct.angles);
        assert_eq!(band.lo, direct.angles);
        assert_eq!(band.hi, direct.angles);
        assert_eq!(band.excluded, 0);
    }

    #[test]
    fn uniform_draws_are_in_range_and_seeded() {
        let src = ParamSource::UniformDamping { lo: 1.0, hi: 2.0, n: 50, seed: 3, base: PendulumParams::default() };
        let a = src.draw().unwrap();
        assert_eq!(a, src.draw().unwrap());
        assert!(a.iter().all(|p| (1.0..2.0).contains(&p.damping_b)));
        let bad = ParamSource::UniformDamping { lo: 2.0, hi: 1.0, n: 5, seed: 3, base: PendulumParams::default() };
        assert!(matches!(bad.draw(), Err(BandError::BadRange { .. })));
    }

    #[test]
    fn diverging_draws_are_excluded() {
        let dist = ParamDistribution::from_samples(vec![FitParam::DampingB], vec![vec![1e-3], vec![-10.0]], 0);
        let base = PendulumParams { mu_k: 0.0, ..PendulumParams::default() };
        let band = monte_carlo_band(&ParamSource::Distribution { dist, base }, 3.0, 30.0, DEFAULT_SAMPLE_INTERVAL).unwrap();
        assert_eq!(band.excluded, 1);
        assert_eq!(band.members.len(), 1);
    }
}

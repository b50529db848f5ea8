use std::f64::consts::PI;

use viscojoint::band::read_band_csv;
use viscojoint::fit::read_estimates_csv;
use viscojoint::pendulum::DEFAULT_SAMPLE_INTERVAL;
use viscojoint::{
    bootstrap, fit, loss, monte_carlo_band, simulate, FitMode, FitParam, FitSpec, ParamDistribution, ParamSource,
    PendulumParams, Trajectory,
};

fn drops(truth: &PendulumParams, angles: &[f64], duration: f64) -> Vec<Trajectory> {
    angles
        .iter()
        .map(|&a| simulate(truth, a, 0.0, duration, DEFAULT_SAMPLE_INTERVAL).unwrap())
        .collect()
}

fn damped_truth() -> PendulumParams {
    PendulumParams { damping_b: 1.2e-3, ..PendulumParams::default() }
}

fn quick(mode: FitMode) -> FitSpec {
    FitSpec { restarts: 0, ..FitSpec::for_mode(mode) }
}

#[test]
fn loss_vanishes_on_own_simulation() {
    let truth = PendulumParams { mu_d: 1e-4, damping_b: 5e-4, ..PendulumParams::default() };
    let spec = FitSpec { penalty_weight: 0.0, ..FitSpec::for_mode(FitMode::Damped) };
    for tr in drops(&truth, &[2.5, PI / 2.0], 1.0) {
        assert_eq!(loss(&truth, &tr, &spec), 0.0);
    }
}

#[test]
fn undamped_fit_recovers_friction() {
    let truth = PendulumParams::default();
    let obs = drops(&truth, &[2.54, 2.2], 3.0);
    let start = PendulumParams { mu_k: 5e-3, ..truth };
    let r = fit(&obs, &quick(FitMode::UndampedFriction), &start).unwrap();
    assert!((r.params.mu_k / truth.mu_k - 1.0).abs() < 0.02, "mu_k {}", r.params.mu_k);
    assert_eq!(r.params.damping_b, 0.0);
}

#[test]
fn damped_fit_recovers_b_and_ignores_order() {
    let truth = damped_truth();
    let mut obs = drops(&truth, &[2.5, 2.3, 2.1], 1.0);
    let start = PendulumParams { damping_b: 3e-3, ..truth };
    let spec = quick(FitMode::Damped);
    let a = fit(&obs, &spec, &start).unwrap();
    assert!((a.params.damping_b / truth.damping_b - 1.0).abs() < 0.02);
    obs.reverse();
    let b = fit(&obs, &spec, &start).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.loss, b.loss);
}

#[test]
fn fit_stays_inside_bounds() {
    let truth = damped_truth();
    let obs = drops(&truth, &[2.5, 2.3], 1.0);
    let spec = FitSpec { damping_b_bounds: [0.0, 4e-4], ..quick(FitMode::Damped) };
    let r = fit(&obs, &spec, &PendulumParams { damping_b: 2e-4, ..truth }).unwrap();
    assert!(r.params.damping_b >= 0.0 && r.params.damping_b <= 4e-4, "{}", r.params.damping_b);
}

#[test]
fn bootstrap_is_reproducible_and_intervals_are_order_statistics() {
    let truth = damped_truth();
    let obs = drops(&truth, &[2.5, 2.3, 2.1], 1.0);
    let spec = quick(FitMode::Damped);
    let a = bootstrap(&obs, &spec, &truth, 6, 42).unwrap();
    let b = bootstrap(&obs, &spec, &truth, 6, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.names, vec![FitParam::DampingB]);
    let col: Vec<f64> = a.samples.iter().map(|s| s[0]).collect();
    let (lo, hi) = a.credible_intervals[0];
    assert!(col.contains(&lo) && col.contains(&hi));
    assert!(col.iter().all(|&v| lo <= v && v <= hi));
}

#[test]
fn sample_and_estimate_csvs_round_trip() {
    let dist = ParamDistribution::from_samples(
        vec![FitParam::MuK, FitParam::MuD],
        vec![vec![2.9e-3, 1e-5], vec![2.8e-3, 0.0], vec![3.0e-3, 2e-5]],
        0,
    );
    let mut buf = Vec::new();
    dist.write_samples_csv(&mut buf).unwrap();
    let back = ParamDistribution::read_samples_csv(buf.as_slice()).unwrap();
    assert_eq!(back, dist);

    let point = PendulumParams { mu_k: 2.9e-3, mu_d: 1e-5, ..PendulumParams::default() };
    let mut buf = Vec::new();
    dist.write_estimates_csv(&point, &mut buf).unwrap();
    let rows = read_estimates_csv(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].param, FitParam::MuK);
    assert_eq!(rows[0].fit, 2.9e-3);
    assert_eq!((rows[0].ci_lo, rows[0].ci_hi), (2.8e-3, 3.0e-3));
    assert_eq!(rows[1].mean, dist.point_estimate[1]);
}

#[test]
fn band_mean_lies_inside_member_range() {
    let source = ParamSource::UniformDamping { lo: 2e-4, hi: 2e-3, n: 30, seed: 9, base: PendulumParams::default() };
    let band = monte_carlo_band(&source, 2.5, 2.0, DEFAULT_SAMPLE_INTERVAL).unwrap();
    for k in 0..band.mean.len() {
        let (mn, mx) = band
            .members
            .iter()
            .map(|m| m.angles[k])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        assert!(mn - 1e-12 <= band.mean[k] && band.mean[k] <= mx + 1e-12);
        assert!(band.lo[k] <= band.hi[k]);
    }
    let mut buf = Vec::new();
    band.write_csv(&mut buf).unwrap();
    let rows = read_band_csv(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), band.mean.len());
    assert_eq!(rows[10].mean, band.mean[10]);
}

#[test]
fn single_sample_band_collapses() {
    let base = PendulumParams::default();
    let dist = ParamDistribution::from_samples(vec![FitParam::DampingB], vec![vec![8e-4]], 0);
    let band = monte_carlo_band(&ParamSource::Distribution { dist, base }, 2.5, 1.0, DEFAULT_SAMPLE_INTERVAL).unwrap();
    let alone = simulate(&PendulumParams { damping_b: 8e-4, ..base }, 2.5, 0.0, 1.0, DEFAULT_SAMPLE_INTERVAL).unwrap();
    assert_eq!(band.mean, alone.angles);
    assert_eq!(band.lo, alone.angles);
    assert_eq!(band.hi, alone.angles);
}

//! Friction and damping identification from pendulum trajectories.
//!
//! Each observed trajectory is replayed through [`simulate`] from its own
//! initial state, estimated from its first samples and re-anchored on the
//! model once a first estimate is found; the mean squared angle error plus a quadratic penalty on
//! negative coefficients is minimised with a bounded simplex search and a
//! few seeded restarts. Uncertainty comes from a case bootstrap over whole
//! trajectories.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{nelder_mead, SimplexOptions};
use crate::pendulum::{simulate, PendulumParams};
use crate::rng::substream;
use crate::stats::{central_interval, mean, order_independent_sum};
use crate::trajectory::Trajectory;

/// Loss reported when a simulation diverges or parameters are unusable.
pub const LOSS_SENTINEL: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no trajectories to fit")]
    NoData,
    #[error("invalid fit specification: {0}")]
    InvalidSpec(String),
    #[error("starting value {value} of {param} lies outside its bounds [{lo}, {hi}]")]
    StartOutOfBounds { param: FitParam, value: f64, lo: f64, hi: f64 },
    #[error("case bootstrap needs at least 2 trajectories, got {0}")]
    TooFewTrajectories(usize),
    #[error("bootstrap needs at least 2 resamples, got {0}")]
    TooFewResamples(usize),
    #[error("{failed} of {total} bootstrap refits failed")]
    BootstrapFailed { failed: usize, total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    MuK,
    MuD,
    DampingB,
}

impl FitParam {
    pub const ALL: [FitParam; 3] = [FitParam::MuK, FitParam::MuD, FitParam::DampingB];

    pub fn name(self) -> &'static str {
        match self {
            FitParam::MuK => "mu_k",
            FitParam::MuD => "mu_d",
            FitParam::DampingB => "damping_b",
        }
    }

    pub fn get(self, p: &PendulumParams) -> f64 {
        match self {
            FitParam::MuK => p.mu_k,
            FitParam::MuD => p.mu_d,
            FitParam::DampingB => p.damping_b,
        }
    }

    pub fn set(self, p: &mut PendulumParams, value: f64) {
        match self {
            FitParam::MuK => p.mu_k = value,
            FitParam::MuD => p.mu_d = value,
            FitParam::DampingB => p.damping_b = value,
        }
    }
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FitParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown parameter `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Drops without the damper: friction coefficients free, damping zero.
    #[serde(alias = "undamped")]
    UndampedFriction,
    /// Drops with the damper: damping free, friction held at its prior fit.
    Damped,
}

impl FromStr for FitMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "undamped" | "undamped_friction" => Ok(FitMode::UndampedFriction),
            "damped" => Ok(FitMode::Damped),
            _ => Err(format!("unknown fit mode `{s}` (expected undamped or damped)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub mode: FitMode,
    pub free_params: Vec<FitParam>,
    pub mu_k_bounds: [f64; 2],
    pub mu_d_bounds: [f64; 2],
    pub damping_b_bounds: [f64; 2],
    pub penalty_weight: f64,
    pub max_iters: usize,
    /// Simplex size at convergence, as a fraction of each bound range.
    pub tol: f64,
    pub restarts: usize,
    /// Seed for restart perturbations.
    pub seed: u64,
}

impl FitSpec {
    pub fn for_mode(mode: FitMode) -> Self {
        let free_params = match mode {
            FitMode::UndampedFriction => vec![FitParam::MuK, FitParam::MuD],
            FitMode::Damped => vec![FitParam::DampingB],
        };
        Self {
            mode,
            free_params,
            mu_k_bounds: [0.0, 0.05],
            mu_d_bounds: [0.0, 0.05],
            damping_b_bounds: [0.0, 0.05],
            penalty_weight: 1e6,
            max_iters: 400,
            tol: 1e-5,
            restarts: 3,
            seed: 0,
        }
    }

    pub fn bounds(&self, p: FitParam) -> (f64, f64) {
        let b = match p {
            FitParam::MuK => self.mu_k_bounds,
            FitParam::MuD => self.mu_d_bounds,
            FitParam::DampingB => self.damping_b_bounds,
        };
        (b[0], b[1])
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: String| Err(FitError::InvalidSpec(m));
        if self.free_params.is_empty() {
            return bad("free_params must not be empty".into());
        }
        let mut seen = self.free_params.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.free_params.len() {
            return bad("free_params contains duplicates".into());
        }
        if self.mode == FitMode::UndampedFriction && self.free_params.contains(&FitParam::DampingB) {
            return bad("damping_b is fixed at 0 in undamped mode".into());
        }
        for p in FitParam::ALL {
            let (lo, hi) = self.bounds(p);
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
                return bad(format!("bounds of {p} must satisfy 0 <= lo < hi, got [{lo}, {hi}]"));
            }
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return bad("penalty_weight must be non-negative".into());
        }
        if self.max_iters == 0 || !(self.tol > 0.0) {
            return bad("max_iters and tol must be positive".into());
        }
        Ok(())
    }

    /// Parameters as used by the model in this mode (damping forced to zero
    /// for undamped fits).
    fn effective(&self, params: &PendulumParams) -> PendulumParams {
        let mut p = *params;
        if self.mode == FitMode::UndampedFriction {
            p.damping_b = 0.0;
        }
        p
    }
}

/// Quadratic penalty on negative free parameters.
fn negativity_penalty(params: &PendulumParams, spec: &FitSpec) -> f64 {
    spec.free_params
        .iter()
        .map(|&p| (-p.get(params)).max(0.0).powi(2))
        .sum::<f64>()
        * spec.penalty_weight
}

type State = (f64, f64);

fn data_loss(params: &PendulumParams, observed: &Trajectory, start: State) -> f64 {
    let Ok(sim) = simulate(params, start.0, start.1, observed.duration(), observed.dt) else {
        return LOSS_SENTINEL;
    };
    let n = observed.len().min(sim.len());
    let sse: f64 = sim.angles[..n]
        .iter()
        .zip(&observed.angles[..n])
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let mse = sse / n as f64;
    if mse.is_finite() {
        mse.min(LOSS_SENTINEL)
    } else {
        LOSS_SENTINEL
    }
}

/// Mean squared angle error of `params` against one trajectory plus the
/// negativity penalty, starting from [`Trajectory::initial_state`]. Always
/// finite.
pub fn loss(params: &PendulumParams, observed: &Trajectory, spec: &FitSpec) -> f64 {
    let p = spec.effective(params);
    (data_loss(&p, observed, observed.initial_state()) + negativity_penalty(&p, spec)).min(LOSS_SENTINEL)
}

/// Distinct trajectories with their multiplicities, so repeated cases in a
/// bootstrap resample are simulated once.
struct Cases<'a> {
    trajectories: Vec<&'a Trajectory>,
    weights: Vec<f64>,
}

impl<'a> Cases<'a> {
    fn new(observed: &'a [Trajectory]) -> Self {
        let mut trajectories: Vec<&Trajectory> = Vec::new();
        let mut weights = Vec::new();
        for t in observed {
            match trajectories.iter().position(|d| *d == t) {
                Some(i) => weights[i] += 1.0,
                None => {
                    trajectories.push(t);
                    weights.push(1.0);
                }
            }
        }
        Self { trajectories, weights }
    }
}

fn total_loss(params: &PendulumParams, cases: &Cases, starts: &[State], spec: &FitSpec) -> f64 {
    let p = spec.effective(params);
    let terms = cases
        .trajectories
        .iter()
        .zip(&cases.weights)
        .zip(starts)
        .map(|((t, w), &s)| w * data_loss(&p, t, s))
        .collect();
    order_independent_sum(terms) + negativity_penalty(&p, spec)
}

/// Samples over which the initial state is matched to the model.
pub const REFINE_WINDOW: usize = 24;
/// Alternations of initial-state refinement and parameter polishing.
const REFINE_ROUNDS: usize = 2;
/// Initial simplex offsets, as fractions of each bound range.
const INITIAL_STEP: f64 = 0.05;
const POLISH_STEP: f64 = 0.005;

/// Initial state that makes `params` best reproduce the first
/// [`REFINE_WINDOW`] samples of `observed`, by a few Gauss–Newton steps from
/// `guess`. Trajectories with recorded velocities keep their first sample.
pub fn refine_initial_state(params: &PendulumParams, observed: &Trajectory, guess: State) -> State {
    if observed.omegas.is_some() {
        return guess;
    }
    let w = observed.len().min(REFINE_WINDOW);
    let span = (w - 1) as f64 * observed.dt;
    let run = |s: State| simulate(params, s.0, s.1, span, observed.dt).ok().map(|t| t.angles);
    let (h0, h1) = (1e-6, 1e-4);
    let mut s = guess;
    for _ in 0..3 {
        let (Some(base), Some(d0), Some(d1)) = (run(s), run((s.0 + h0, s.1)), run((s.0, s.1 + h1))) else {
            return s;
        };
        let (mut a00, mut a01, mut a11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..w.min(base.len()) {
            let r = observed.angles[i] - base[i];
            let j0 = (d0[i] - base[i]) / h0;
            let j1 = (d1[i] - base[i]) / h1;
            a00 += j0 * j0;
            a01 += j0 * j1;
            a11 += j1 * j1;
            g0 += j0 * r;
            g1 += j1 * r;
        }
        let det = a00 * a11 - a01 * a01;
        if !(det.abs() > 0.0) {
            return s;
        }
        let step = ((a11 * g0 - a01 * g1) / det, (a00 * g1 - a01 * g0) / det);
        if !(step.0.is_finite() && step.1.is_finite()) {
            return s;
        }
        s = (s.0 + step.0, s.1 + step.1);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: PendulumParams,
    /// Summed loss over all trajectories at `params`.
    pub loss: f64,
    /// False when a simplex run hit `max_iters` before meeting `tol`.
    pub converged: bool,
    pub evaluations: usize,
}

/// Minimise the summed [`loss`] over `observed`, starting from `params0`.
pub fn fit(observed: &[Trajectory], spec: &FitSpec, params0: &PendulumParams) -> Result<FitResult, FitError> {
    if observed.is_empty() {
        return Err(FitError::NoData);
    }
    spec.validate()?;
    let base = spec.effective(params0);
    let free = &spec.free_params;
    let ranges: Vec<(f64, f64)> = free.iter().map(|&p| spec.bounds(p)).collect();
    for (&p, &(lo, hi)) in free.iter().zip(&ranges) {
        let v = p.get(&base);
        if !(v >= lo && v <= hi) {
            return Err(FitError::StartOutOfBounds { param: p, value: v, lo, hi });
        }
    }

    let cases = Cases::new(observed);
    let to_params = |u: &[f64]| {
        let mut p = base;
        for ((&fp, &(lo, hi)), &ui) in free.iter().zip(&ranges).zip(u) {
            fp.set(&mut p, lo + ui * (hi - lo));
        }
        p
    };
    let objective = |u: &[f64], starts: &[State]| {
        let raw = to_params(u);
        let mut clipped = raw;
        let mut bound_penalty = 0.0;
        for (&fp, &(lo, hi)) in free.iter().zip(&ranges) {
            let v = fp.get(&raw);
            bound_penalty += (v - hi).max(0.0).powi(2) + (lo - v.max(0.0)).max(0.0).powi(2);
            fp.set(&mut clipped, v.min(hi));
        }
        total_loss(&clipped, &cases, starts, spec) + spec.penalty_weight * bound_penalty
    };

    let clamp_unit = |u: &[f64]| u.iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<f64>>();
    let opts = SimplexOptions { max_iters: spec.max_iters, xtol: spec.tol };
    let u0: Vec<f64> = free
        .iter()
        .zip(&ranges)
        .map(|(&p, &(lo, hi))| (p.get(&base) - lo) / (hi - lo))
        .collect();
    let step = |u: &[f64], size: f64| -> Vec<f64> { u.iter().map(|&x| if x > 0.5 { -size } else { size }).collect() };

    let mut starts: Vec<State> = cases.trajectories.iter().map(|t| t.initial_state()).collect();
    let mut best_u = u0.clone();
    let mut best_f = total_loss(&base, &cases, &starts, spec);
    let mut converged = true;
    let mut evaluations = 1;
    let mut rng = substream(spec.seed, 0);
    let mut start = u0;
    let mut search = |start: &[f64], size: f64, starts: &[State], best_u: &mut Vec<f64>, best_f: &mut f64| {
        let r = nelder_mead(|u| objective(u, starts), start, &step(start, size), opts);
        evaluations += r.evaluations + 1;
        converged &= r.converged;
        // Compare at the feasible point that would actually be returned.
        let u = clamp_unit(&r.x);
        let f = total_loss(&to_params(&u), &cases, starts, spec);
        if f < *best_f {
            *best_f = f;
            *best_u = u;
        }
    };
    for run in 0..=spec.restarts {
        if run > 0 {
            start = best_u.iter().map(|&x| (x + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0)).collect();
        }
        search(&start, INITIAL_STEP, &starts, &mut best_u, &mut best_f);
    }
    // Re-anchor each trajectory's start on the model at the current
    // estimate, then polish from there.
    for _ in 0..REFINE_ROUNDS {
        let at_best = spec.effective(&to_params(&best_u));
        let refined: Vec<State> = cases
            .trajectories
            .iter()
            .zip(&starts)
            .map(|(t, &guess)| refine_initial_state(&at_best, t, guess))
            .collect();
        if refined == starts {
            break;
        }
        starts = refined;
        best_f = total_loss(&at_best, &cases, &starts, spec);
        let from = best_u.clone();
        search(&from, POLISH_STEP, &starts, &mut best_u, &mut best_f);
    }
    if !converged {
        log::warn!("simplex search stopped at max_iters={} before reaching tol={}", spec.max_iters, spec.tol);
    }
    Ok(FitResult {
        params: to_params(&best_u),
        loss: best_f,
        converged,
        evaluations,
    })
}

/// Bootstrap distribution of the free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDistribution {
    pub names: Vec<FitParam>,
    /// One row per successful resample, columns follow `names`.
    pub samples: Vec<Vec<f64>>,
    /// Per-parameter sample mean.
    pub point_estimate: Vec<f64>,
    /// Per-parameter central 95% interval (order statistics of `samples`).
    pub credible_intervals: Vec<(f64, f64)>,
    pub failures: usize,
}

impl ParamDistribution {
    pub fn from_samples(names: Vec<FitParam>, samples: Vec<Vec<f64>>, failures: usize) -> Self {
        assert!(!samples.is_empty(), "distribution needs at least one sample");
        let mut point_estimate = Vec::with_capacity(names.len());
        let mut credible_intervals = Vec::with_capacity(names.len());
        for j in 0..names.len() {
            let mut col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            point_estimate.push(mean(&col));
            col.sort_by(f64::total_cmp);
            credible_intervals.push(central_interval(&col, 0.95));
        }
        Self { names, samples, point_estimate, credible_intervals, failures }
    }

    /// `base` with the free parameters of sample `i` substituted.
    pub fn sample_params(&self, i: usize, base: &PendulumParams) -> PendulumParams {
        let mut p = *base;
        for (&name, &v) in self.names.iter().zip(&self.samples[i]) {
            name.set(&mut p, v);
        }
        p
    }

    pub fn index_of(&self, p: FitParam) -> Option<usize> {
        self.names.iter().position(|&n| n == p)
    }

    pub fn write_samples_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.names.iter().map(|n| n.name()))?;
        for s in &self.samples {
            w.write_record(s.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per parameter: the point fit, the bootstrap mean and the
    /// 95% interval.
    pub fn write_estimates_csv<W: std::io::Write>(&self, point: &PendulumParams, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["param", "fit", "mean", "ci_lo", "ci_hi"])?;
        for (i, p) in self.names.iter().enumerate() {
            let (lo, hi) = self.credible_intervals[i];
            let row = [p.get(point), self.point_estimate[i], lo, hi];
            w.write_record(std::iter::once(p.name().to_string()).chain(row.iter().map(|v| v.to_string())))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a samples CSV whose header names fit parameters.
    pub fn read_samples_csv<R: std::io::Read>(input: R) -> Result<Self, String> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let names = r
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(FitParam::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        let mut samples = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| format!("row {}: cannot parse `{s}`", row + 2)))
                .collect::<Result<Vec<_>, _>>()?;
            samples.push(vals);
        }
        if samples.is_empty() {
            return Err("samples file has no rows".into());
        }
        Ok(Self::from_samples(names, samples, 0))
    }
}

/// One parsed row of an estimates CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EstimateRow {
    pub param: FitParam,
    pub fit: f64,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub fn read_estimates_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<EstimateRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Case bootstrap: refit on `n_resamples` sets of trajectories drawn with
/// replacement. Resample `i` draws its indices from sub-stream `i` of
/// `seed`, so the result does not depend on thread scheduling.
pub fn bootstrap(
    observed: &[Trajectory],
    spec: &FitSpec,
    params0: &PendulumParams,
    n_resamples: usize,
    seed: u64,
) -> Result<ParamDistribution, FitError> {
    if n_resamples < 2 {
        return Err(FitError::TooFewResamples(n_resamples));
    }
    if observed.len() < 2 {
        return Err(FitError::TooFewTrajectories(observed.len()));
    }
    spec.validate()?;
    let n = observed.len();
    let outcomes: Vec<Option<Vec<f64>>> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let resample: Vec<Trajectory> = (0..n).map(|_| observed[rng.random_range(0..n)].clone()).collect();
            match fit(&resample, spec, params0) {
                Ok(r) if r.loss < LOSS_SENTINEL => Some(spec.free_params.iter().map(|p| p.get(&r.params)).collect()),
                Ok(_) => None,
                Err(e) => {
                    log::warn!("bootstrap resample {i} failed: {e}");
                    None
                }
            }
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    if 2 * failed > n_resamples {
        return Err(FitError::BootstrapFailed { failed, total: n_resamples });
    }
    let samples: Vec<Vec<f64>> = outcomes.into_iter().flatten().collect();
    Ok(ParamDistribution::from_samples(spec.free_params.clone(), samples, failed))
}

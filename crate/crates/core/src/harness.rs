//! Seeded Monte Carlo sweeps over SNR, subarray size and iteration count.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::detector::{detect, DetectionOutput, DetectorConfig, Mode, Problem};
use crate::error::{invalid, Error, Result};
use crate::exec::{Executor, Sequential};
use crate::linalg::{squared_norm, CMatrix, CVector};
use crate::model::{expected_row_energy, gen_channel, snr_to_noise_var, transmit, Constellation, SystemConfig};
use crate::partition::{partition_uniform, trim};
use crate::rng::trial_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// Antenna and user counts, constellation and channel model. The noise
    /// variance is set per SNR point.
    pub system: SystemConfig,
    pub subarray_sizes: Vec<usize>,
    /// Energy fraction kept per user; enables the trimmed model.
    pub trim_threshold: Option<f64>,
    pub detector: DetectorConfig,
    pub snr_db: Vec<f64>,
    /// Iterations at which metrics are reported, ascending.
    pub checkpoints: Vec<usize>,
    pub n_trials: usize,
    pub base_seed: u64,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(invalid("at least one trial is required"));
        }
        if self.subarray_sizes.is_empty() || self.snr_db.is_empty() || self.checkpoints.is_empty() {
            return Err(invalid("sweep axes must be non-empty"));
        }
        if self.checkpoints.contains(&0) || !self.checkpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("iteration checkpoints must be positive and strictly ascending"));
        }
        match (self.detector.mode, self.trim_threshold) {
            (Mode::Trimmed, None) => return Err(invalid("trimmed mode needs a trim threshold")),
            (Mode::Full, Some(_)) => return Err(invalid("full mode does not take a trim threshold")),
            _ => {}
        }
        for &s in &self.subarray_sizes {
            partition_uniform(self.system.n_antennas, s)?;
        }
        self.detector.with_iters(self.max_iters()).validate()?;
        self.system.validate()
    }

    pub fn max_iters(&self) -> usize {
        self.checkpoints.last().copied().unwrap_or(1)
    }

    /// Iterations reported for this spec's detector mode.
    pub fn reported_iters(&self) -> Vec<usize> {
        match self.detector.mode {
            Mode::OneShot => alloc::vec![1],
            _ => self.checkpoints.clone(),
        }
    }

    pub fn noise_var(&self, snr_db: f64) -> f64 {
        let energy = expected_row_energy(
            &self.system.channel_model,
            self.system.n_antennas,
            self.system.n_users,
        );
        snr_to_noise_var(snr_db, energy, self.system.constellation.avg_energy())
    }
}

/// Full or trimmed detector input for one received vector.
pub fn build_problem(
    h: &CMatrix,
    y: &CVector,
    noise_var: f64,
    subarray_size: usize,
    trim_threshold: Option<f64>,
) -> Result<Problem> {
    let part = partition_uniform(h.nrows(), subarray_size)?;
    match trim_threshold {
        None => Problem::full(y, h, &part, noise_var),
        Some(threshold) => Problem::trimmed(y, &trim(h, &part, threshold)?, noise_var),
    }
}

/// Errors and estimates of one detection at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialStats {
    pub bit_errors: usize,
    pub symbol_errors: usize,
    /// `‖γ₀ - x‖² / K`.
    pub mse_gamma0: f64,
    /// Mean over users of `1/τ₀,k`.
    pub tau0_inv: f64,
    /// Floor and cap events up to this iteration.
    pub floor_events: usize,
}

fn score(
    gamma0: &CVector,
    tau0: &[f64],
    floor_events: usize,
    x: &CVector,
    symbols: &[usize],
    constellation: &Constellation,
) -> TrialStats {
    let mut stats = TrialStats {
        mse_gamma0: squared_norm(&(gamma0 - x)) / x.len() as f64,
        tau0_inv: tau0.iter().map(|t| 1.0 / t).sum::<f64>() / tau0.len() as f64,
        floor_events,
        ..TrialStats::default()
    };
    for (g, &sent) in gamma0.iter().zip(symbols) {
        let decided = constellation.nearest(*g);
        if decided != sent {
            stats.symbol_errors += 1;
            stats.bit_errors += (0..constellation.bits_per_symbol())
                .filter(|&b| constellation.bit(decided, b) != constellation.bit(sent, b))
                .count();
        }
    }
    stats
}

/// Stats at every requested iteration of one detection.
fn checkpoint_stats(
    spec: &RunSpec,
    problem: &Problem,
    x: &CVector,
    symbols: &[usize],
) -> Result<Vec<TrialStats>> {
    let constellation = &spec.system.constellation;
    let from_output = |out: &DetectionOutput| {
        let rec = out.trace.last().expect("detector runs at least one iteration");
        score(&rec.gamma0, &rec.tau0, out.floor_events, x, symbols, constellation)
    };
    match spec.detector.mode {
        Mode::LocalEpThenMrc => spec
            .checkpoints
            .iter()
            .map(|&t| {
                let out = detect(problem, constellation, &spec.detector.with_iters(t), &Sequential)?;
                Ok(from_output(&out))
            })
            .collect(),
        Mode::OneShot => {
            let out = detect(problem, constellation, &spec.detector, &Sequential)?;
            Ok(alloc::vec![from_output(&out)])
        }
        _ => {
            let out = detect(problem, constellation, &spec.detector.with_iters(spec.max_iters()), &Sequential)?;
            let mut floors = 0;
            let mut stats = Vec::with_capacity(spec.checkpoints.len());
            let mut wanted = spec.checkpoints.iter().peekable();
            for rec in &out.trace {
                floors += rec.floor_events;
                if wanted.peek() == Some(&&rec.iter) {
                    wanted.next();
                    stats.push(score(&rec.gamma0, &rec.tau0, floors, x, symbols, constellation));
                }
            }
            Ok(stats)
        }
    }
}

/// One trial: a channel draw shared by all SNR points and subarray sizes.
/// Results are ordered by SNR, then subarray size, then iteration.
pub fn run_trial(spec: &RunSpec, trial: u64) -> Result<Vec<TrialStats>> {
    let seed = trial_seed(spec.base_seed, trial);
    let channel = gen_channel(&spec.system, seed)?;
    let mut out = Vec::new();
    for &snr in &spec.snr_db {
        let noise_var = spec.noise_var(snr);
        let tx = transmit(&channel, &spec.system.constellation, noise_var, seed)?;
        for &size in &spec.subarray_sizes {
            let problem = build_problem(&channel.h, &tx.y, noise_var, size, spec.trim_threshold)?;
            out.extend(checkpoint_stats(spec, &problem, &tx.x, &tx.symbols)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub snr_db: f64,
    pub subarray_size: usize,
    pub iter: usize,
    pub ber: f64,
    pub ser: f64,
    pub mean_mse_gamma0: f64,
    pub mean_tau0_inv: f64,
    pub trials: usize,
    pub floor_event_rate: f64,
}

/// Runs every trial through `exec` and aggregates in trial order, so the
/// rows do not depend on the schedule.
pub fn run_sweep<E: Executor>(spec: &RunSpec, exec: &E) -> Result<Vec<MetricsRow>> {
    spec.validate()?;
    let results = exec.map(spec.n_trials, |t| {
        run_trial(spec, t as u64).map_err(|e| Error::Trial {
            trial: t as u64,
            source: Box::new(e),
        })
    });
    let iters = spec.reported_iters();
    let points = spec.snr_db.len() * spec.subarray_sizes.len() * iters.len();
    let mut totals = alloc::vec![(0usize, 0usize, 0.0f64, 0.0f64, 0usize); points];
    for result in results {
        let stats = result?;
        for (acc, s) in totals.iter_mut().zip(&stats) {
            acc.0 += s.bit_errors;
            acc.1 += s.symbol_errors;
            acc.2 += s.mse_gamma0;
            acc.3 += s.tau0_inv;
            acc.4 += s.floor_events;
        }
    }
    let k = spec.system.n_users;
    let bits = k * spec.system.constellation.bits_per_symbol();
    let n = spec.n_trials;
    let mut rows = Vec::with_capacity(points);
    let mut idx = 0;
    for &snr in &spec.snr_db {
        for &size in &spec.subarray_sizes {
            for &iter in &iters {
                let (be, se, mse, tinv, floors) = totals[idx];
                idx += 1;
                rows.push(MetricsRow {
                    snr_db: snr,
                    subarray_size: size,
                    iter,
                    ber: be as f64 / (n * bits) as f64,
                    ser: se as f64 / (n * k) as f64,
                    mean_mse_gamma0: mse / n as f64,
                    mean_tau0_inv: tinv / n as f64,
                    trials: n,
                    floor_event_rate: floors as f64 / n as f64,
                });
            }
        }
    }
    Ok(rows)
}

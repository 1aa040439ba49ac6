use alloc::vec::Vec;

use super::central::{compute_llr, cpm_denoise, cpm_mrc, hard_decisions, Contribution};
use super::local::{lpm_extrinsic, lpm_lmmse, lpm_prior};
use super::{DetectionOutput, DetectorConfig, EpState, IterationRecord, Mode, Problem, SubarrayState};
use crate::analysis::fixed_point_residuals;
use crate::error::Result;
use crate::exec::{Executor, Sequential};
use crate::linalg::{c64, CVector};
use crate::model::Constellation;

/// Largest allowed ratio between `ω₀` and the combined precision. Beyond it
/// the denoiser variance has underflowed and the prior would swamp every
/// subarray.
const OMEGA_CAP_RATIO: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneFeedforward {
    /// A single iteration of the distributed detector.
    SingleIteration,
    /// Every subarray iterates on its own users, then one combine.
    LocalThenCombine,
}

/// Steps run by one subarray: prior, LMMSE belief, extrinsic.
fn local_update(
    problem: &Problem,
    c: usize,
    state: &EpState,
    config: &DetectorConfig,
) -> Result<(SubarrayState, usize)> {
    let model = &problem.subarrays()[c];
    let old = &state.subarrays[c];
    let xhat0 = state.restricted_xhat0(&model.users);
    let floor = config.precision_floor;
    let damp = state.iteration > 0 && config.damping < 1.0;
    let beta = config.damping;
    let mut floors = 0;
    let mut blocks = Vec::with_capacity(model.blocks.len());
    for (block, prev) in model.blocks.iter().zip(&old.blocks) {
        let prior = lpm_prior(state.omega0, &xhat0, prev.eta, &prev.p, floor);
        let post = lpm_lmmse(block, prior.tau, &prior.gamma, problem.noise_var(), config.inversion)?;
        let ext = lpm_extrinsic(post.omega, &post.xhat, prior.tau, &prior.gamma, floor);
        floors += usize::from(prior.floored) + usize::from(ext.floored);
        let (eta, p) = if damp {
            (
                beta * ext.eta + (1.0 - beta) * prev.eta,
                ext.p * c64(beta, 0.0) + &prev.p * c64(1.0 - beta, 0.0),
            )
        } else {
            (ext.eta, ext.p)
        };
        blocks.push(super::BlockState {
            tau: prior.tau,
            gamma: prior.gamma,
            eta,
            p,
            omega: post.omega,
            xhat: post.xhat,
        });
    }
    let (eta, p) = match blocks.split_first() {
        None => (0.0, CVector::zeros(model.users.len())),
        Some((first, rest)) => rest.iter().fold((first.eta, first.p.clone()), |(e, p), b| (e + b.eta, p + &b.p)),
    };
    Ok((
        SubarrayState {
            users: model.users.clone(),
            blocks,
            eta,
            p,
        },
        floors,
    ))
}

/// Combining and denoising; returns the number of caps applied.
fn central_update(problem: &Problem, state: &mut EpState, constellation: &Constellation) -> Result<usize> {
    let contributions: Vec<Option<Contribution<'_>>> = state
        .subarrays
        .iter()
        .map(|s| (!s.blocks.is_empty()).then_some(Contribution { eta: s.eta, p: &s.p }))
        .collect();
    let combined = cpm_mrc(&contributions, problem.serving())?;
    let denoised = cpm_denoise(&combined.gamma0, &combined.tau0, constellation);
    let (omega0, capped) = cap_omega(denoised.omega, &combined.tau0);
    state.tau0 = combined.tau0;
    state.p0 = combined.p0;
    state.gamma0 = combined.gamma0;
    state.xhat0 = denoised.xhat;
    state.v0 = denoised.v;
    state.omega0 = omega0;
    Ok(usize::from(capped))
}

fn cap_omega(omega: f64, tau0: &[f64]) -> (f64, bool) {
    let limit = OMEGA_CAP_RATIO * tau0.iter().copied().fold(0.0, f64::max);
    if omega <= limit {
        (omega, false)
    } else {
        (limit, true)
    }
}

fn finish(state: EpState, trace: Vec<IterationRecord>, constellation: &Constellation) -> DetectionOutput {
    let floor_events = trace.iter().map(|r| r.floor_events).sum();
    DetectionOutput {
        gamma0: state.gamma0.clone(),
        tau0: state.tau0.clone(),
        xhat0: state.xhat0.clone(),
        v0: state.v0.clone(),
        omega0: state.omega0,
        hard_symbols: hard_decisions(&state.gamma0, constellation),
        llrs: compute_llr(&state.gamma0, &state.tau0, constellation),
        trace,
        state,
        floor_events,
    }
}

/// Distributed EP over the subarrays (and secondary blocks) of `problem` for
/// `config.max_iters` iterations. Local steps of distinct subarrays run
/// through `exec`; combining is sequential in ascending subarray order.
pub fn run_ep<E: Executor>(
    problem: &Problem,
    constellation: &Constellation,
    config: &DetectorConfig,
    exec: &E,
) -> Result<DetectionOutput> {
    config.validate()?;
    let mut state = EpState::initial(problem, constellation.avg_energy());
    let mut trace = Vec::with_capacity(config.max_iters);
    for iter in 1..=config.max_iters {
        let updates = exec.map(problem.subarrays().len(), |c| local_update(problem, c, &state, config));
        let mut floor_events = 0;
        let mut subarrays = Vec::with_capacity(updates.len());
        for update in updates {
            let (sub, floors) = update?;
            floor_events += floors;
            subarrays.push(sub);
        }
        state.subarrays = subarrays;
        floor_events += central_update(problem, &mut state, constellation)?;
        state.iteration = iter;
        trace.push(IterationRecord {
            iter,
            tau0: state.tau0.clone(),
            gamma0: state.gamma0.clone(),
            omega0: state.omega0,
            floor_events,
            residuals: fixed_point_residuals(&state),
        });
    }
    Ok(finish(state, trace, constellation))
}

/// EP with every subarray split into secondary blocks of `secondary_size` rows.
pub fn run_hierarchical<E: Executor>(
    problem: &Problem,
    secondary_size: usize,
    constellation: &Constellation,
    config: &DetectorConfig,
    exec: &E,
) -> Result<DetectionOutput> {
    run_ep(&problem.split_uniform(secondary_size)?, constellation, config, exec)
}

/// Detectors in which each subarray reports to the combiner once.
pub fn run_one_feedforward<E: Executor>(
    problem: &Problem,
    scheme: OneFeedforward,
    constellation: &Constellation,
    config: &DetectorConfig,
    exec: &E,
) -> Result<DetectionOutput> {
    match scheme {
        OneFeedforward::SingleIteration => run_ep(problem, constellation, &config.with_iters(1), exec),
        OneFeedforward::LocalThenCombine => local_then_combine(problem, constellation, config, exec),
    }
}

fn local_then_combine<E: Executor>(
    problem: &Problem,
    constellation: &Constellation,
    config: &DetectorConfig,
    exec: &E,
) -> Result<DetectionOutput> {
    config.validate()?;
    let local_config = config.with_mode(Mode::Full);
    let locals = exec.map(problem.subarrays().len(), |c| {
        if problem.subarrays()[c].users.is_empty() {
            return Ok(None);
        }
        run_ep(&problem.local(c)?, constellation, &local_config, &Sequential).map(Some)
    });
    let locals = locals.into_iter().collect::<Result<Vec<_>>>()?;

    let mut state = EpState::initial(problem, constellation.avg_energy());
    let mut floor_events = 0;
    for (c, out) in locals.iter().enumerate() {
        let Some(out) = out else { continue };
        floor_events += out.floor_events;
        let mut local = out.state.subarrays[0].clone();
        local.users = problem.subarrays()[c].users.clone();
        local.eta = out.tau0[0];
        local.p = out.state.p0.clone();
        state.subarrays[c] = local;
    }
    floor_events += central_update(problem, &mut state, constellation)?;
    state.iteration = config.max_iters;
    let record = IterationRecord {
        iter: config.max_iters,
        tau0: state.tau0.clone(),
        gamma0: state.gamma0.clone(),
        omega0: state.omega0,
        floor_events,
        residuals: fixed_point_residuals(&state),
    };
    Ok(finish(state, alloc::vec![record], constellation))
}

/// Runs the detector variant selected by `config.mode`. The problem must
/// already carry the matching model (full or trimmed).
pub fn detect<E: Executor>(
    problem: &Problem,
    constellation: &Constellation,
    config: &DetectorConfig,
    exec: &E,
) -> Result<DetectionOutput> {
    match config.mode {
        Mode::Full | Mode::Trimmed => run_ep(problem, constellation, config, exec),
        Mode::Hierarchical { secondary_size } => {
            run_hierarchical(problem, secondary_size, constellation, config, exec)
        }
        Mode::OneShot => run_one_feedforward(problem, OneFeedforward::SingleIteration, constellation, config, exec),
        Mode::LocalEpThenMrc => {
            run_one_feedforward(problem, OneFeedforward::LocalThenCombine, constellation, config, exec)
        }
    }
}

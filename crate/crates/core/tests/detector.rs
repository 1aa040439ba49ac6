use epdetect_core::detector::{
    detect, run_ep, run_hierarchical, run_one_feedforward, DetectionOutput, DetectorConfig, Inversion, Mode,
    OneFeedforward, Problem,
};
use epdetect_core::exec::{Executor, Sequential};
use epdetect_core::linalg::{c64, CMatrix, CVector};
use epdetect_core::model::{
    gen_channel, make_qam, snr_to_noise_var, transmit, ArrayGeometry, ChannelModel, Constellation, SystemConfig,
    TransmissionInstance,
};
use epdetect_core::partition::{partition_uniform, split_hierarchy, trim};

/// Runs jobs last-to-first to expose any dependence on the schedule.
struct Reversed;

impl Executor for Reversed {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let mut out: Vec<T> = (0..n).rev().map(job).collect();
        out.reverse();
        out
    }
}

fn instance(model: ChannelModel, n: usize, k: usize, order: usize, snr_db: f64, seed: u64) -> (CMatrix, TransmissionInstance, f64, Constellation) {
    let constellation = make_qam(order).unwrap();
    let noise_var = snr_to_noise_var(snr_db, 1.0, constellation.avg_energy());
    let system = SystemConfig {
        n_antennas: n,
        n_users: k,
        noise_var,
        constellation: constellation.clone(),
        channel_model: model,
    };
    let ch = gen_channel(&system, seed).unwrap();
    let tx = transmit(&ch, &constellation, noise_var, seed).unwrap();
    (ch.h, tx, noise_var, constellation)
}

fn full_problem(h: &CMatrix, y: &CVector, noise_var: f64, size: usize) -> Problem {
    Problem::full(y, h, &partition_uniform(h.nrows(), size).unwrap(), noise_var).unwrap()
}

fn max_trace_gap(a: &DetectionOutput, b: &DetectionOutput) -> f64 {
    a.trace
        .iter()
        .zip(&b.trace)
        .map(|(ra, rb)| {
            let tau = ra
                .tau0
                .iter()
                .zip(&rb.tau0)
                .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
                .fold(0.0, f64::max);
            let gamma = (&ra.gamma0 - &rb.gamma0).amax_complex();
            let omega = (ra.omega0 - rb.omega0).abs() / rb.omega0.abs().max(1.0);
            tau.max(gamma).max(omega)
        })
        .fold(0.0, f64::max)
}

trait AmaxComplex {
    fn amax_complex(&self) -> f64;
}

impl AmaxComplex for CVector {
    fn amax_complex(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[test]
fn noiseless_identity_channel_is_exact() {
    let c = make_qam(4).unwrap();
    let symbols = [0usize, 3, 1, 2];
    let x = CVector::from_iterator(4, symbols.iter().map(|&s| c.points()[s]));
    let h = CMatrix::identity(4, 4);
    let out = run_ep(&full_problem(&h, &x, 1e-12, 4), &c, &DetectorConfig::default(), &Sequential).unwrap();
    assert_eq!(out.hard_symbols, symbols);
}

#[test]
fn schedule_does_not_change_output() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 32, 8, 16, 8.0, 3);
    let p = full_problem(&h, &tx.y, nv, 4);
    let cfg = DetectorConfig::default();
    let a = run_ep(&p, &c, &cfg, &Sequential).unwrap();
    let b = run_ep(&p, &c, &cfg, &Reversed).unwrap();
    assert_eq!(a, b);
}

#[test]
fn output_invariants_hold() {
    for seed in 0..5 {
        let (h, tx, nv, c) = instance(ChannelModel::Correlated { kappa: 0.7 }, 32, 8, 16, 5.0, seed);
        let out = run_ep(&full_problem(&h, &tx.y, nv, 2), &c, &DetectorConfig::default(), &Sequential).unwrap();
        assert!(out.v0.iter().all(|&v| (0.0..=c.avg_energy()).contains(&v)));
        assert!(out.tau0.iter().all(|&t| t > 0.0));
        for (k, &s) in out.hard_symbols.iter().enumerate() {
            assert_eq!(s, c.nearest(out.gamma0[k]));
        }
        assert_eq!(out.llrs.shape(), (8, 4));
    }
}

#[test]
fn gaussian_division_holds_in_every_block() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 32, 8, 4, 6.0, 9);
    let out = run_ep(&full_problem(&h, &tx.y, nv, 8), &c, &DetectorConfig::default().with_iters(3), &Sequential).unwrap();
    for sub in &out.state.subarrays {
        for b in &sub.blocks {
            let omega = b.eta + b.tau;
            let mean = (&b.p + &b.gamma * c64(b.tau, 0.0)) / c64(omega, 0.0);
            assert!((omega - b.omega).abs() <= 1e-10 * b.omega);
            assert!((mean - &b.xhat).amax_complex() < 1e-10);
        }
    }
}

#[test]
fn direct_and_recursive_agree() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 16, 4, 16, 10.0, 4);
    let p = full_problem(&h, &tx.y, nv, 16);
    let a = run_ep(&p, &c, &DetectorConfig::default().with_inversion(Inversion::Direct), &Sequential).unwrap();
    let b = run_ep(&p, &c, &DetectorConfig::default().with_inversion(Inversion::Recursive), &Sequential).unwrap();
    assert!(max_trace_gap(&a, &b) < 1e-8);
}

#[test]
fn flat_hierarchy_is_bit_identical() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 64, 8, 16, 5.0, 5);
    let p = full_problem(&h, &tx.y, nv, 16);
    let cfg = DetectorConfig::default();
    let flat = run_ep(&p, &c, &cfg, &Sequential).unwrap();
    let hier = run_hierarchical(&p, 16, &c, &cfg, &Sequential).unwrap();
    assert_eq!(flat, hier);
    let explicit = p.split(&split_hierarchy(&partition_uniform(64, 16).unwrap(), 16).unwrap()).unwrap();
    assert_eq!(explicit, p);
}

#[test]
fn secondary_blocks_match_small_subarrays() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 64, 8, 16, 5.0, 6);
    let cfg = DetectorConfig::default();
    let hier = run_hierarchical(&full_problem(&h, &tx.y, nv, 16), 2, &c, &cfg, &Sequential).unwrap();
    let flat = run_ep(&full_problem(&h, &tx.y, nv, 2), &c, &cfg, &Sequential).unwrap();
    assert!(max_trace_gap(&hier, &flat) < 1e-10);
}

#[test]
fn single_row_blocks_use_closed_form() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 16, 4, 4, 5.0, 7);
    let p = full_problem(&h, &tx.y, nv, 8).split_uniform(1).unwrap();
    assert!(p.subarrays().iter().all(|s| s.blocks.iter().all(|b| b.n_rows() == 1)));
    assert_eq!(Inversion::Auto.resolve(1), Inversion::Recursive);
    let a = run_ep(&p, &c, &DetectorConfig::default(), &Sequential).unwrap();
    let b = run_ep(&p, &c, &DetectorConfig::default().with_inversion(Inversion::Recursive), &Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trimmed_full_threshold_matches_full_model() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 32, 8, 16, 6.0, 8);
    let part = partition_uniform(32, 4).unwrap();
    let t = trim(&h, &part, 1.0).unwrap();
    assert!(t.served.iter().all(|s| s.len() == 8));
    let trimmed = Problem::trimmed(&tx.y, &t, nv).unwrap();
    let cfg = DetectorConfig::default();
    let a = run_ep(&trimmed, &c, &cfg, &Sequential).unwrap();
    let b = run_ep(&full_problem(&h, &tx.y, nv, 4), &c, &cfg, &Sequential).unwrap();
    assert!(max_trace_gap(&a, &b) < 1e-10);
}

fn nonstat_trimmed(seed: u64, snr_db: f64) -> (Problem, Constellation, TransmissionInstance) {
    let c = make_qam(4).unwrap();
    let model = ChannelModel::NonStationary(ArrayGeometry::default());
    let system = SystemConfig {
        n_antennas: 64,
        n_users: 8,
        noise_var: 1.0,
        constellation: c.clone(),
        channel_model: model,
    };
    let energy = epdetect_core::model::expected_row_energy(&model, 64, 8);
    let nv = snr_to_noise_var(snr_db, energy, c.avg_energy());
    let ch = gen_channel(&system, seed).unwrap();
    let tx = transmit(&ch, &c, nv, seed).unwrap();
    let t = trim(&ch.h, &partition_uniform(64, 8).unwrap(), 0.9).unwrap();
    (Problem::trimmed(&tx.y, &t, nv).unwrap(), c, tx)
}

#[test]
fn single_iteration_scheme_is_first_iteration() {
    let (p, c, _) = nonstat_trimmed(1, 0.0);
    let cfg = DetectorConfig::trimmed();
    let one = run_one_feedforward(&p, OneFeedforward::SingleIteration, &c, &cfg, &Sequential).unwrap();
    let full = run_ep(&p, &c, &cfg, &Sequential).unwrap();
    assert_eq!(one.trace.len(), 1);
    assert_eq!(one.trace[0], full.trace[0]);
    let via_mode = detect(&p, &c, &cfg.with_mode(Mode::OneShot), &Sequential).unwrap();
    assert_eq!(via_mode, one);
}

#[test]
fn local_scheme_with_one_subarray_matches_run_ep() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 16, 4, 16, 8.0, 2);
    let p = full_problem(&h, &tx.y, nv, 16);
    let cfg = DetectorConfig::default();
    let local = run_one_feedforward(&p, OneFeedforward::LocalThenCombine, &c, &cfg, &Sequential).unwrap();
    let ep = run_ep(&p, &c, &cfg, &Sequential).unwrap();
    assert_eq!(local.gamma0, ep.gamma0);
    assert_eq!(local.tau0, ep.tau0);
    assert_eq!(local.xhat0, ep.xhat0);
    assert_eq!(local.omega0, ep.omega0);
    assert_eq!(local.hard_symbols, ep.hard_symbols);
    assert_eq!(local.llrs, ep.llrs);
}

#[test]
fn local_scheme_runs_on_trimmed_model() {
    let (p, c, tx) = nonstat_trimmed(3, 10.0);
    let out = run_one_feedforward(&p, OneFeedforward::LocalThenCombine, &c, &DetectorConfig::trimmed(), &Sequential).unwrap();
    assert_eq!(out.tau0.len(), 8);
    let errors = out.hard_symbols.iter().zip(&tx.symbols).filter(|(a, b)| a != b).count();
    assert!(errors <= 2);
}

#[test]
fn damping_keeps_first_iteration() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 32, 8, 16, 6.0, 10);
    let p = full_problem(&h, &tx.y, nv, 8);
    let plain = run_ep(&p, &c, &DetectorConfig::default(), &Sequential).unwrap();
    let damped = run_ep(&p, &c, &DetectorConfig { damping: 0.5, ..DetectorConfig::default() }, &Sequential).unwrap();
    assert_eq!(plain.trace[0], damped.trace[0]);
    assert_ne!(plain.trace[1], damped.trace[1]);
}

#[test]
fn invalid_configs_are_rejected() {
    let (h, tx, nv, c) = instance(ChannelModel::Iid, 16, 4, 4, 5.0, 1);
    let p = full_problem(&h, &tx.y, nv, 4);
    for cfg in [
        DetectorConfig::default().with_iters(0),
        DetectorConfig { damping: 0.0, ..DetectorConfig::default() },
        DetectorConfig { precision_floor: 0.0, ..DetectorConfig::default() },
    ] {
        assert!(run_ep(&p, &c, &cfg, &Sequential).is_err());
    }
    assert!(run_hierarchical(&p, 3, &c, &DetectorConfig::default(), &Sequential).is_err());
}

use epdetect_core::analysis::replica_check;
use epdetect_core::detector::{run_ep, DetectorConfig, Problem};
use epdetect_core::exec::Sequential;
use epdetect_core::model::{gen_channel, make_qam, snr_to_noise_var, transmit, ChannelModel, SystemConfig};
use epdetect_core::partition::partition_uniform;
use epdetect_core::rng::trial_seed;

fn converged(model: ChannelModel, n: usize, k: usize, size: usize, snr: f64, iters: usize, seed: u64) -> (f64, f64, f64, epdetect_core::linalg::CMatrix, Vec<f64>) {
    let c = make_qam(16).unwrap();
    let sys = SystemConfig {
        n_antennas: n,
        n_users: k,
        noise_var: 1.0,
        constellation: c.clone(),
        channel_model: model,
    };
    let noise_var = snr_to_noise_var(snr, 1.0, c.avg_energy());
    let ch = gen_channel(&sys, seed).unwrap();
    let tx = transmit(&ch, &c, noise_var, seed).unwrap();
    let problem = Problem::full(&tx.y, &ch.h, &partition_uniform(n, size).unwrap(), noise_var).unwrap();
    let out = run_ep(&problem, &c, &DetectorConfig::default().with_iters(iters), &Sequential).unwrap();
    let spread: Vec<f64> = out
        .trace
        .iter()
        .map(|r| r.residuals.omega_spread.max(r.residuals.mean_spread))
        .collect();
    (noise_var, out.omega0, out.tau0[0], ch.h, spread)
}

#[test]
fn replica_identity_for_a_single_module() {
    for seed in 0..5 {
        // limited only by how far the iteration is from its fixed point
        let (noise_var, omega, tau0, h, _) = converged(ChannelModel::Iid, 64, 8, 64, 8.0, 50, seed);
        let err = replica_check(&h, noise_var, omega, tau0).unwrap();
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn replica_check_reports_on_correlated_channels() {
    let (noise_var, omega, tau0, h, _) = converged(ChannelModel::Correlated { kappa: 0.8 }, 128, 16, 8, 10.0, 20, 3);
    let err = replica_check(&h, noise_var, omega, tau0).unwrap();
    assert!(err.is_finite() && err >= 0.0);
}

#[test]
fn residuals_shrink_with_iterations() {
    let mut first = Vec::new();
    let mut tenth = Vec::new();
    for t in 0..100 {
        let (.., spread) = converged(ChannelModel::Iid, 64, 8, 4, 0.0, 10, trial_seed(17, t));
        first.push(spread[0]);
        tenth.push(spread[9]);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (a, b) = (median(&mut first), median(&mut tenth));
    assert!(a > b, "median residual {a} after one iteration, {b} after ten");
}

use epdetect_core::detector::{detect, DetectorConfig, Mode, Problem};
use epdetect_core::exec::Sequential;
use epdetect_core::model::{gen_channel, make_qam, snr_to_noise_var, transmit, ChannelModel, SystemConfig};
use epdetect_core::partition::partition_uniform;
use epdetect_sim::RayonExecutor;

#[test]
fn pool_size_does_not_change_detection() {
    let c = make_qam(16).unwrap();
    let sys = SystemConfig {
        n_antennas: 64,
        n_users: 8,
        noise_var: 1.0,
        constellation: c.clone(),
        channel_model: ChannelModel::Correlated { kappa: 0.4 },
    };
    let noise_var = snr_to_noise_var(6.0, 1.0, c.avg_energy());
    let ch = gen_channel(&sys, 31).unwrap();
    let tx = transmit(&ch, &c, noise_var, 31).unwrap();
    let problem = Problem::full(&tx.y, &ch.h, &partition_uniform(64, 4).unwrap(), noise_var).unwrap();
    let pools = [RayonExecutor::new(1).unwrap(), RayonExecutor::new(8).unwrap()];
    for mode in [Mode::Full, Mode::Hierarchical { secondary_size: 2 }, Mode::LocalEpThenMrc] {
        let config = DetectorConfig::default().with_mode(mode);
        let reference = detect(&problem, &c, &config, &Sequential).unwrap();
        for pool in &pools {
            assert_eq!(detect(&problem, &c, &config, pool).unwrap(), reference, "{mode:?} on {} threads", pool.threads());
        }
    }
}

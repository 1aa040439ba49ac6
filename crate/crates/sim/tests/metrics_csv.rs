use epdetect_core::harness::MetricsRow;
use epdetect_sim::emit_csv;
use epdetect_sim::output::{read_metrics, sig6};
use proptest::prelude::*;
use tempfile::TempDir;

fn row() -> impl Strategy<Value = MetricsRow> {
    (
        -20.0f64..40.0,
        1usize..512,
        1usize..100,
        0.0f64..0.5,
        0.0f64..1.0,
        1e-9f64..10.0,
        1e-6f64..1e3,
        1usize..100_000,
        0.0f64..5.0,
    )
        .prop_map(|(snr_db, subarray_size, iter, ber, ser, mse, tinv, trials, floors)| MetricsRow {
            snr_db,
            subarray_size,
            iter,
            ber,
            ser,
            mean_mse_gamma0: mse,
            mean_tau0_inv: tinv,
            trials,
            floor_event_rate: floors,
        })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-6 * b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_keeps_six_digits(rows in prop::collection::vec(row(), 0..20)) {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("m.csv");
        emit_csv(&rows, &path).unwrap();
        let back = read_metrics(&path).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            prop_assert_eq!(a.subarray_size, b.subarray_size);
            prop_assert_eq!(a.iter, b.iter);
            prop_assert_eq!(a.trials, b.trials);
            for (x, y) in [
                (a.snr_db, b.snr_db),
                (a.ber, b.ber),
                (a.ser, b.ser),
                (a.mean_mse_gamma0, b.mean_mse_gamma0),
                (a.mean_tau0_inv, b.mean_tau0_inv),
                (a.floor_event_rate, b.floor_event_rate),
            ] {
                prop_assert!(close(x, y), "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn sig6_is_stable(v in -1e9f64..1e9) {
        let once: f64 = sig6(v).parse().unwrap();
        prop_assert_eq!(sig6(once), sig6(v));
    }
}

#[test]
fn rejects_foreign_header() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(read_metrics(&path).is_err());
}

use lsm_core::encoding::{self, EncodeConfig};
use lsm_core::patterns::{select_chessboard, select_fullscale};
use lsm_core::GridShape;

fn count_per_pixel(records: &[lsm_core::SpikeRecord], n: usize) -> Vec<u64> {
    let mut c = vec![0u64; n];
    for r in records {
        for &i in &r.indices {
            c[i as usize] += 1;
        }
    }
    c
}

#[test]
fn rates_within_three_sigma_of_intensity_times_max_rate() {
    let shape = GridShape::new(1, 3).unwrap();
    let sel = select_fullscale(shape);
    let intensities = [0.1f32, 0.5, 1.0];
    for &(max_rate, sim_time, n_records) in &[(100.0, 100.0, 200), (250.0, 50.0, 100), (40.0, 1000.0, 20)] {
        let cfg = EncodeConfig {
            sim_time_ms: sim_time,
            n_records,
            max_rate_hz: max_rate,
            dt_ms: 1.0,
            seed: 3,
        };
        let recs = encoding::encode_frames(&[intensities.to_vec()], &[0], &sel, &cfg).unwrap();
        let counts = count_per_pixel(&recs, 3);
        let trials = (cfg.steps() * n_records) as f64;
        for (k, &a) in intensities.iter().enumerate() {
            let p = a as f64 * max_rate * cfg.dt_ms / 1000.0;
            let expected = trials * p;
            assert!(expected >= 50.0);
            let sd = (trials * p * (1.0 - p)).sqrt();
            let got = counts[k] as f64;
            assert!(
                (got - expected).abs() <= 3.0 * sd,
                "a={a} rate={max_rate}: {got} vs {expected:.1} +/- {:.1}",
                3.0 * sd
            );
        }
    }
}

#[test]
fn chessboard_storage_is_a_quarter_of_fullscale() {
    let shape = GridShape::new(28, 28).unwrap();
    let image = vec![0.6f32; shape.pixels()];
    let cfg = EncodeConfig {
        sim_time_ms: 100.0,
        n_records: 40,
        max_rate_hz: 100.0,
        dt_ms: 1.0,
        seed: 1,
    };
    let full = encoding::encode_frames(&[image.clone()], &[0], &select_fullscale(shape), &cfg).unwrap();
    let cb = encoding::encode_frames(&[image], &[0], &select_chessboard(shape, 2).unwrap(), &cfg).unwrap();
    let spikes: usize = full.iter().map(|r| r.len()).sum();
    assert!(spikes >= 100_000, "{spikes}");
    let ratio = encoding::encoded_len(&cb) as f64 / encoding::encoded_len(&full) as f64;
    assert!((ratio - 0.25).abs() <= 0.25 * 0.05, "{ratio}");

    let mut buf = Vec::new();
    let written = encoding::write_records_to(&cb, &mut buf).unwrap();
    assert_eq!(written, buf.len() as u64);
    assert_eq!(written, encoding::encoded_len(&cb));
}

use dqi_core::{load_model, plcc, save_model, svr_train, Error, SvrParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn rows(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn learns_linear_target() {
    let x = rows(1, 50, 3);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + noise.sample(&mut rng)).collect();
    let params = SvrParams {
        c: 10.0,
        epsilon: 0.01,
        ..SvrParams::default()
    };
    let model = svr_train(&x, &y, &params).unwrap();
    let pred = model.predict_many(&x).unwrap();
    assert!(plcc(&pred, &y, false).unwrap() >= 0.99);
}

#[test]
fn duplicated_training_set_predicts_the_same() {
    let x = rows(3, 20, 2);
    let y: Vec<f64> = x.iter().map(|r| (2.0 * r[0]).sin() + 0.5 * r[1]).collect();
    let params = SvrParams {
        c: 1e4,
        epsilon: 0.05,
        tolerance: 1e-10,
        ..SvrParams::default()
    };
    let single = svr_train(&x, &y, &params).unwrap();
    assert!(single.dual_coefficients.iter().all(|a| a.abs() < 0.5 * params.c));
    let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
    let y2: Vec<f64> = y.iter().chain(&y).cloned().collect();
    let double = svr_train(&x2, &y2, &params).unwrap();
    for probe in rows(4, 30, 2) {
        let (a, b) = (single.predict(&probe).unwrap(), double.predict(&probe).unwrap());
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn free_support_vectors_sit_on_the_tube() {
    let x = rows(5, 30, 2);
    let y: Vec<f64> = x.iter().map(|r| r[0] * r[0] - r[1]).collect();
    let params = SvrParams {
        c: 1000.0,
        epsilon: 0.05,
        gamma: Some(2.0),
        ..SvrParams::default()
    };
    let model = svr_train(&x, &y, &params).unwrap();
    let mut checked = 0;
    for (row, label) in x.iter().zip(&y) {
        let z = model.normalization.apply(row);
        let Some(k) = model.support_vectors.iter().position(|sv| *sv == z) else {
            continue;
        };
        let err = (model.predict(row).unwrap() - label).abs();
        assert!(err <= params.epsilon + 1e-3, "support vector error {err}");
        if model.dual_coefficients[k].abs() < params.c {
            assert!((err - params.epsilon).abs() <= 1e-3, "free support vector off the tube: {err}");
        }
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn flat_kernel_predicts_a_central_label() {
    let x = rows(6, 21, 2);
    let y: Vec<f64> = (0..21).map(|i| i as f64 / 2.0).collect();
    let params = SvrParams {
        gamma: Some(1e-9),
        ..SvrParams::default()
    };
    let model = svr_train(&x, &y, &params).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    for probe in rows(7, 5, 2) {
        let p = model.predict(&probe).unwrap();
        assert!((p - mean).abs() < 0.2, "{p} vs mean {mean}");
    }
}

#[test]
fn model_file_round_trip_is_bit_exact() {
    let x = rows(8, 25, 4);
    let y: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>().tanh() * 7.0 + 1.0 / 3.0).collect();
    let model = svr_train(&x, &y, &SvrParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, model);
    for probe in rows(9, 40, 4) {
        assert_eq!(
            model.predict(&probe).unwrap().to_bits(),
            back.predict(&probe).unwrap().to_bits()
        );
    }
    assert!(matches!(back.predict(&[0.0; 3]), Err(Error::FeatureDim { expected: 4, got: 3 })));
}

#[test]
fn tampered_model_is_rejected() {
    let x = rows(10, 10, 2);
    let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
    let model = svr_train(&x, &y, &SvrParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let text = model.to_json().replace("\"version\": 1", "\"version\": 99");
    std::fs::write(&path, text).unwrap();
    assert!(matches!(load_model(&path), Err(Error::Schema(_))));
}

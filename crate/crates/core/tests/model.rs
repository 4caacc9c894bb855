use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use penreg::model::{
    replication_seed, sample_observation, scaled_norm, DesignMatrix, Problem, ProblemDocument,
};
use penreg::normal::std_normal_cdf;

#[test]
fn single_noise_coordinate_is_standard_normal() {
    // Kolmogorov–Smirnov at level 0.01: reject when √N·D > 1.628.
    let n = 100;
    let x = DesignMatrix::new(DMatrix::identity(n, n)).unwrap();
    let problem = Problem::new(x, DVector::zeros(n), 1.0).unwrap();
    let reps = 10_000;
    let mut draws: Vec<f64> = (0..reps)
        .map(|i| {
            sample_observation(&problem, replication_seed(77, i))
                .unwrap()
                .noise[17]
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let nf = reps as f64;
    let d = draws
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let c = std_normal_cdf(z);
            (c - i as f64 / nf)
                .abs()
                .max(((i + 1) as f64 / nf - c).abs())
        })
        .fold(0.0_f64, f64::max);
    assert!(nf.sqrt() * d <= 1.628, "KS statistic {}", nf.sqrt() * d);
}

#[test]
fn observation_is_mean_plus_noise_exactly() {
    let x = DesignMatrix::gaussian_normalized(20, 5, 3).unwrap();
    let mean = DVector::from_fn(20, |i, _| i as f64 * 0.1);
    let problem = Problem::new(x, mean.clone(), 0.7).unwrap();
    let obs = sample_observation(&problem, 42).unwrap();
    assert_eq!(obs.y, &mean + &obs.noise);
    assert_eq!(obs.seed, 42);
}

#[test]
fn json_document_fields() {
    let x = DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
    let problem = Problem::new(x, DVector::from_vec(vec![1.0, 0.0, -1.0]), 2.0).unwrap();
    let obs = sample_observation(&problem, 9).unwrap();
    let doc = ProblemDocument::from_problem(&problem, Some(&obs));
    let value = serde_json::to_value(&doc).unwrap();
    for key in ["n", "p", "X", "f", "sigma", "seed", "y"] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    assert_eq!(value["X"][1], serde_json::json!([3.0, 4.0]));
    let back: ProblemDocument = serde_json::from_value(value).unwrap();
    let p2 = back.to_problem().unwrap();
    assert_eq!(p2, problem);
    assert_eq!(back.to_observation(&p2).unwrap().unwrap().y, obs.y);
}

proptest! {
    #[test]
    fn scaled_norm_matches_euclidean(u in prop::collection::vec(-1e3..1e3f64, 1..50)) {
        let s = scaled_norm(&u).unwrap();
        let sum: f64 = u.iter().map(|v| v * v).sum();
        prop_assert!((s * s * u.len() as f64 - sum).abs() <= 1e-12 * sum.max(f64::MIN_POSITIVE));
    }
}

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use penreg::constants::recommended_tuning;
use penreg::model::{sample_observation, standard_normal_vector, DesignMatrix, Problem};
use penreg::penalties::{slope_weights, GroupPartition, Penalty, PolyhedralCone};
use penreg::solvers::{
    basic_inequality_check, duality_gap, solve, solve_from, stationarity_certificate, SolverConfig,
};

fn objective(y: &DVector<f64>, x: &DesignMatrix, pen: &Penalty, b: &DVector<f64>) -> f64 {
    (y - x.apply(b)).norm_squared() / y.len() as f64 + 2.0 * pen.value(b).unwrap()
}

fn all_kinds(x: &DesignMatrix) -> Vec<Penalty> {
    let p = x.p();
    let partition = GroupPartition::contiguous(p, 3).unwrap();
    let tuned = |pen: Penalty| {
        pen.with_scale(recommended_tuning(&pen, x, 1.0).unwrap())
            .unwrap()
    };
    vec![
        tuned(Penalty::l1(1.0).unwrap()),
        tuned(Penalty::group(partition.clone(), 1.0).unwrap()),
        Penalty::slope(8.0, slope_weights(p, x.n(), 1.0).unwrap()).unwrap(),
        tuned(Penalty::cone(PolyhedralCone::blocks(&partition), 1.0).unwrap()),
    ]
}

fn instance(n: usize, p: usize, seed: u64) -> (Problem, DVector<f64>, DVector<f64>) {
    let x = DesignMatrix::gaussian_normalized(n, p, seed).unwrap();
    let mut beta = DVector::zeros(p);
    for j in 0..3 {
        beta[j] = 2.0;
    }
    let problem = Problem::planted(x, &beta, 1.0).unwrap();
    let obs = sample_observation(&problem, seed + 1).unwrap();
    (problem, obs.y, obs.noise)
}

#[test]
fn orthonormal_closed_form_and_certificates() {
    // X = √n·Q with Q orthogonal: β̂ = soft(Xᵀy/n, λ).
    let n = 16;
    let x = DesignMatrix::orthonormal(n, 5).unwrap();
    let y = standard_normal_vector(n, 6) * 2.0;
    let lambda = 0.8;
    let pen = Penalty::l1(lambda).unwrap();
    let z = x.apply_t(&y) / n as f64;
    let exact = z.map(|a| a.signum() * (a.abs() - lambda).max(0.0));
    let res = solve(&y, &x, &pen, &SolverConfig::default()).unwrap();
    assert!(res.converged);
    assert!((&res.beta_hat - &exact).amax() < 1e-6);
    assert!(duality_gap(&exact, &y, &x, &pen).unwrap() <= 1e-10);
    let cert = stationarity_certificate(&res, &y, &x, &pen).unwrap();
    assert!(cert.pass, "{cert:?}");
    assert!((x.apply(&res.beta_hat) - &res.fitted).amax() <= 1e-12);
}

#[test]
fn dominating_penalty_gives_zero() {
    let (problem, y, _) = instance(20, 30, 1);
    let x = &problem.design;
    let v = x.apply_t(&y) / 20.0;
    let lambda = v.amax() * 1.01;
    let pen = Penalty::l1(lambda).unwrap();
    let res = solve(&y, x, &pen, &SolverConfig::default()).unwrap();
    assert!(res.beta_hat.iter().all(|&b| b == 0.0), "{:?}", res.beta_hat);
    let cert = stationarity_certificate(&res, &y, x, &pen).unwrap();
    assert!(cert.pass && cert.alignment_slack.is_none());
}

#[test]
fn gap_positive_at_suboptimal_point() {
    let (problem, y, _) = instance(20, 30, 2);
    let pen = Penalty::l1(1e-3).unwrap();
    assert!(duality_gap(&DVector::zeros(30), &y, &problem.design, &pen).unwrap() > 0.0);
}

#[test]
fn gap_trace_is_monotone() {
    let (problem, y, _) = instance(30, 60, 3);
    let cfg = SolverConfig {
        record_trace: true,
        check_every: 1,
        ..SolverConfig::default()
    };
    for pen in all_kinds(&problem.design) {
        let res = solve(&y, &problem.design, &pen, &cfg).unwrap();
        assert!(res.converged, "{:?}", pen.kind());
        for w in res.gap_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12 * (1.0 + w[0]),
                "{:?}: {} -> {}",
                pen.kind(),
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn all_kinds_converge_and_certify() {
    let cfg = SolverConfig::default().with_rel_gap(1e-13);
    for seed in 0..5 {
        let (problem, y, _) = instance(30, 60, 10 + seed);
        for pen in all_kinds(&problem.design) {
            let res = solve(&y, &problem.design, &pen, &cfg).unwrap();
            assert!(res.converged && res.gap <= res.gap_tol, "{:?}", pen.kind());
            let cert = stationarity_certificate(&res, &y, &problem.design, &pen).unwrap();
            assert!(cert.pass, "{:?}: {cert:?}", pen.kind());
        }
    }
}

#[test]
fn truncated_solve_fails_certificate() {
    let (problem, y, _) = instance(30, 60, 4);
    let pen = all_kinds(&problem.design).remove(0);
    let cfg = SolverConfig {
        max_iters: 5,
        ..SolverConfig::default()
    };
    let res = solve(&y, &problem.design, &pen, &cfg).unwrap();
    assert!(!res.converged);
    assert!(
        !stationarity_certificate(&res, &y, &problem.design, &pen)
            .unwrap()
            .pass
    );
}

#[test]
fn fitted_values_unique_on_degenerate_design() {
    // Duplicated columns: β̂ is not unique, Xβ̂ is.
    let base = DesignMatrix::gaussian_normalized(20, 10, 8).unwrap();
    let m = base.matrix();
    let x = DesignMatrix::new(DMatrix::from_fn(20, 20, |i, j| m[(i, j % 10)])).unwrap();
    let y = standard_normal_vector(20, 9) * 3.0;
    let pen = Penalty::l1(0.2).unwrap();
    let cfg = SolverConfig::default().with_rel_gap(1e-14);
    let a = solve(&y, &x, &pen, &cfg).unwrap();
    let init = DVector::from_fn(20, |j, _| if j < 10 { 0.0 } else { 1.0 });
    let b = solve_from(&y, &x, &pen, &cfg, Some(&init)).unwrap();
    assert!(a.converged && b.converged);
    let diff = (&a.fitted - &b.fitted).norm() / 20f64.sqrt();
    assert!(diff <= 1e-6, "{diff}");
}

#[test]
fn objective_beats_random_points() {
    let (problem, y, _) = instance(30, 60, 5);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for pen in all_kinds(&problem.design) {
        let res = solve(&y, &problem.design, &pen, &SolverConfig::default()).unwrap();
        for _ in 0..1000 {
            let r = 10f64.powi(-rng.random_range(0..5));
            let b = &res.beta_hat + standard_normal_vector(60, rng.random()) * r;
            assert!(res.objective <= objective(&y, &problem.design, &pen, &b) + res.gap_tol);
        }
    }
}

#[test]
fn basic_inequality_cases() {
    let (problem, y, noise) = instance(20, 30, 6);
    let obs = penreg::Observation {
        y: y.clone(),
        noise,
        seed: 7,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    for pen in all_kinds(&problem.design) {
        let res = solve(&y, &problem.design, &pen, &SolverConfig::default()).unwrap();
        let same = basic_inequality_check(
            &res,
            &problem,
            &obs,
            &pen,
            std::slice::from_ref(&res.beta_hat),
        )
        .unwrap();
        assert!(same.pass && same.worst_slack >= 10.0 * res.gap_tol - 1e-12);
        let mut trials = vec![DVector::zeros(30)];
        trials.extend((0..100).map(|_| standard_normal_vector(30, rng.random())));
        let report = basic_inequality_check(&res, &problem, &obs, &pen, &trials).unwrap();
        assert!(
            report.pass && report.instances == 101,
            "{:?}: {report:?}",
            pen.kind()
        );
    }
}

#[test]
fn rejects_bad_inputs() {
    let (problem, mut y, _) = instance(10, 12, 7);
    let pen = Penalty::l1(0.1).unwrap();
    assert!(solve(
        &y,
        &problem.design,
        &pen,
        &SolverConfig {
            max_iters: 0,
            ..Default::default()
        }
    )
    .is_err());
    assert!(solve(
        &y,
        &problem.design,
        &pen,
        &SolverConfig {
            gap_tol: Some(-1.0),
            ..Default::default()
        }
    )
    .is_err());
    y[0] = f64::NAN;
    assert!(solve(&y, &problem.design, &pen, &SolverConfig::default()).is_err());
    let short = DVector::zeros(9);
    assert!(solve(&short, &problem.design, &pen, &SolverConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lasso_scales_with_data(seed in 0u64..1000, c in 0.1..10.0f64) {
        let (problem, y, _) = instance(20, 30, seed);
        let cfg = SolverConfig::default().with_rel_gap(1e-15);
        let a = solve(&y, &problem.design, &Penalty::l1(0.3).unwrap(), &cfg).unwrap();
        let b = solve(&(&y * c), &problem.design, &Penalty::l1(0.3 * c).unwrap(), &cfg).unwrap();
        let fa = &a.fitted * c;
        prop_assert!((fa - &b.fitted).norm() / 20f64.sqrt() <= 1e-8 * c.max(1.0));
    }

    #[test]
    fn gap_is_nonnegative(seed in 0u64..1000) {
        let (problem, y, _) = instance(15, 21, seed);
        let b = standard_normal_vector(21, seed ^ 1);
        for pen in all_kinds(&problem.design) {
            prop_assert!(duality_gap(&b, &y, &problem.design, &pen).unwrap() >= -1e-12);
        }
    }
}

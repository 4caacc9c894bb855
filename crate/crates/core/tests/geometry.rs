use nalgebra::DVector;
use proptest::prelude::*;

use penreg::geometry::{
    contraction_check, dual_ball_project, dykstra, projection_identity_check, ConvexSet, DualBall,
    DykstraConfig, GeometryConfig, HalfSpace, Slab,
};
use penreg::model::{sample_observation, standard_normal_vector, DesignMatrix, Problem};
use penreg::penalties::{slope_weights, GroupPartition, Penalty};
use penreg::solvers::{solve, SolverConfig};

fn design() -> DesignMatrix {
    DesignMatrix::gaussian_normalized(12, 18, 31).unwrap()
}

fn penalties() -> Vec<Penalty> {
    vec![
        Penalty::l1(0.3).unwrap(),
        Penalty::group(GroupPartition::contiguous(18, 3).unwrap(), 0.5).unwrap(),
    ]
}

#[test]
fn points_inside_stay_fixed() {
    let x = design();
    for pen in penalties() {
        let ball = DualBall::new(&x, &pen).unwrap();
        for seed in 0..20 {
            let u = ball.sample(seed).unwrap();
            assert!(ball.gauge(&u).unwrap() <= 1.0 + 1e-12);
            let proj = dual_ball_project(&u, &ball, 1e-12).unwrap();
            assert!((&proj - &u).norm() <= 1e-10 * (1.0 + u.norm()));
        }
        let zero = DVector::zeros(12);
        assert_eq!(dual_ball_project(&zero, &ball, 1e-12).unwrap(), zero);
    }
}

#[test]
fn dykstra_output_is_feasible_and_idempotent() {
    let x = design();
    for pen in penalties() {
        let ball = DualBall::new(&x, &pen).unwrap();
        let sets = ball.constraint_sets().unwrap();
        let cfg = DykstraConfig {
            tol: 1e-12,
            ..DykstraConfig::default()
        };
        for seed in 0..5 {
            let y = standard_normal_vector(12, seed) * 20.0;
            let p = dykstra(&sets, &y, &cfg).unwrap();
            for s in &sets {
                assert!(s.distance(&p) <= 1e-9);
            }
            let again = dykstra(&sets, &p, &cfg).unwrap();
            assert!((&again - &p).norm() <= 1e-9);
            // Projection optimality against random feasible points.
            for k in 0..50 {
                let u = ball.sample(1000 * seed + k).unwrap();
                assert!((&y - &p).dot(&(&u - &p)) <= 1e-7 * (1.0 + y.norm() * u.norm()));
            }
        }
    }
}

#[test]
fn dykstra_beats_alternating_projections() {
    // Two half-spaces meeting at a corner: alternating projections stop at a
    // non-nearest point, Dykstra finds the true projection (1, 1).
    let sets: Vec<Box<dyn ConvexSet>> = vec![
        Box::new(HalfSpace::new(DVector::from_vec(vec![1.0, 0.0]), 1.0).unwrap()),
        Box::new(HalfSpace::new(DVector::from_vec(vec![1.0, 1.0]), 2.0).unwrap()),
    ];
    let y = DVector::from_vec(vec![3.0, 1.5]);
    let cfg = DykstraConfig {
        tol: 1e-13,
        ..DykstraConfig::default()
    };
    let p = dykstra(&sets, &y, &cfg).unwrap();
    // Nearest point of {u₁ ≤ 1, u₁ + u₂ ≤ 2} to (3, 1.5) is the corner (1, 1).
    assert!((p - DVector::from_vec(vec![1.0, 1.0])).norm() <= 1e-9);
}

#[test]
fn slab_projection_clamps() {
    let s = Slab::new(DVector::from_vec(vec![0.0, 2.0]), 1.0).unwrap();
    let p = s.project(&DVector::from_vec(vec![5.0, 3.0]));
    assert!((p - DVector::from_vec(vec![5.0, 0.5])).norm() <= 1e-15);
    assert!(Slab::new(DVector::from_vec(vec![1.0]), -1.0).is_err());
}

#[test]
fn zero_signal_and_zero_data() {
    let x = design();
    let problem = Problem::new(x.clone(), DVector::zeros(12), 1.0).unwrap();
    let mut obs = sample_observation(&problem, 3).unwrap();
    obs.y = DVector::zeros(12);
    obs.noise = DVector::zeros(12);
    for pen in penalties() {
        let res = solve(&obs.y, &x, &pen, &SolverConfig::default()).unwrap();
        assert!(res.fitted.iter().all(|&v| v == 0.0));
        let rep =
            projection_identity_check(&problem, &obs, &pen, &GeometryConfig::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn identity_holds_for_every_kind() {
    let x = design();
    let mut beta = DVector::zeros(18);
    beta[0] = 1.5;
    beta[4] = -1.5;
    let problem = Problem::planted(x.clone(), &beta, 1.0).unwrap();
    let mut all = penalties();
    all.push(Penalty::slope(2.0, slope_weights(18, 12, 1.0).unwrap()).unwrap());
    let cfg = GeometryConfig {
        samples: 200,
        ..GeometryConfig::default()
    };
    for seed in 0..3 {
        let obs = sample_observation(&problem, seed).unwrap();
        for pen in &all {
            let rep = projection_identity_check(&problem, &obs, pen, &cfg).unwrap();
            assert!(rep.pass, "{:?}: {rep:?}", pen.kind());
        }
    }
}

#[test]
fn identical_pairs_contract_trivially() {
    let x = design();
    let y = standard_normal_vector(12, 4);
    for pen in penalties() {
        let reports = contraction_check(
            &x,
            &pen,
            &[(y.clone(), y.clone())],
            &GeometryConfig::default(),
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        for r in reports {
            assert!(r.pass && r.instances == 1);
            assert!(r.worst_slack >= 1e-6 - 1e-9, "{r:?}");
        }
    }
}

#[test]
fn unsupported_kinds_have_no_constraint_list() {
    let x = design();
    let pen = Penalty::slope(1.0, slope_weights(18, 12, 1.0).unwrap()).unwrap();
    assert!(DualBall::new(&x, &pen).unwrap().constraint_sets().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fit_plus_projection_recovers_data(seed in 0u64..10_000, scale in 0.1..30.0f64) {
        let x = design();
        let y = standard_normal_vector(12, seed) * scale;
        for pen in penalties() {
            let ball = DualBall::new(&x, &pen).unwrap();
            let res = solve(&y, &x, &pen, &SolverConfig::default().with_rel_gap(1e-14)).unwrap();
            let proj = dual_ball_project(&y, &ball, 1e-10).unwrap();
            let err = (&res.fitted + &proj - &y).norm() / 12f64.sqrt();
            prop_assert!(err <= 1e-6 * (1.0 + scale), "{err}");
        }
    }

    #[test]
    fn contraction_on_random_pairs(seed in 0u64..10_000) {
        let x = design();
        let pairs: Vec<_> = (0..4)
            .map(|k| (standard_normal_vector(12, seed * 8 + 2 * k), standard_normal_vector(12, seed * 8 + 2 * k + 1) * 3.0))
            .collect();
        for pen in penalties() {
            for r in contraction_check(&x, &pen, &pairs, &GeometryConfig::default()).unwrap() {
                prop_assert!(r.pass, "{r:?}");
            }
        }
    }
}

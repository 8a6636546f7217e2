use proptest::prelude::*;
use sils_core::baselines::{dantzig, lasso, lasso_lambda_max, BaselineParams};
use sils_core::exact::solve_exact;
use sils_core::experiments::{run_experiment, ExperimentConfig};
use sils_core::generators::{generate, ModelSpec};
use sils_core::instance::{gram_lift, objective, SilsInstance, SparseSignVector};
use sils_core::linalg::Mat;
use sils_core::rng::SplitMix64;
use sils_core::sdp::{extract_rank_one, lift, solve_sdp, SolverParams, Status};

fn instance(model: u8, n: usize, d: usize, sigma: usize, rho: f64, seed: u64) -> SilsInstance {
    generate(&ModelSpec::new(model, n, d, sigma.min(d - 1), rho, seed)).unwrap().0
}

fn sign_vector(d: usize, sigma: usize, seed: u64) -> SparseSignVector {
    let mut rng = SplitMix64::new(seed);
    let mut idx: Vec<usize> = (0..d).collect();
    rng.shuffle(&mut idx);
    let mut x = vec![0i8; d];
    for &i in &idx[..sigma] {
        x[i] = if rng.next_f64() < 0.5 { -1 } else { 1 };
    }
    SparseSignVector::new(x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lift_cost_matches_objective(model in 1u8..=3, n in 2usize..30, d in 3usize..10, sigma in 1usize..4, seed: u64) {
        let inst = instance(model, n, d, sigma, 0.4, seed);
        let x = sign_vector(d, inst.sigma, seed ^ 1);
        let lifted = gram_lift(&inst).component_mul(&lift(&x)).sum();
        let direct = objective(&inst, &x.to_vector()).unwrap();
        prop_assert!((lifted - direct).abs() <= 1e-10 * (1.0 + direct));
    }

    #[test]
    fn lift_round_trip(model in 1u8..=3, n in 2usize..30, d in 3usize..10, sigma in 1usize..4, seed: u64) {
        let inst = instance(model, n, d, sigma, 0.4, seed);
        let x = sign_vector(d, inst.sigma, seed ^ 2);
        let obj = objective(&inst, &x.to_vector()).unwrap();
        prop_assert_eq!(extract_rank_one(&lift(&x), &inst, obj, &SolverParams::default()), Some(x));
    }

    #[test]
    fn rng_is_reproducible(seed: u64) {
        let mut a = SplitMix64::new(seed);
        let mut b = SplitMix64::new(seed);
        for _ in 0..32 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
        let u = a.next_f64();
        prop_assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn lasso_objective_never_increases(n in 5usize..40, d in 3usize..30, frac in 0.01f64..1.0, seed: u64) {
        let inst = instance(3, n, d, 2, 0.5, seed);
        let lambda = frac * lasso_lambda_max(&inst.m, &inst.b);
        let r = lasso(&inst.m, &inst.b, lambda, &BaselineParams::default()).unwrap();
        for w in r.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn lasso_zero_exactly_above_threshold(n in 5usize..40, d in 3usize..30, seed: u64) {
        let inst = instance(3, n, d, 2, 0.5, seed);
        let lmax = lasso_lambda_max(&inst.m, &inst.b);
        let above = lasso(&inst.m, &inst.b, lmax * 1.001, &BaselineParams::default()).unwrap();
        prop_assert!(above.z.iter().all(|&v| v == 0.0));
        let below = lasso(&inst.m, &inst.b, lmax * 0.9, &BaselineParams::default()).unwrap();
        prop_assert!(below.z.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn dantzig_feasible_and_no_worse_than_truth(n in 5usize..40, d in 3usize..25, rho in 0.0f64..1.0, seed: u64) {
        let (inst, truth) = generate(&ModelSpec::new(3, n, d, 2, rho, seed)).unwrap();
        let resid_truth = (inst.m.transpose() * &truth.eps).amax();
        let eta = resid_truth * 1.05 + 1e-6;
        let r = dantzig(&inst.m, &inst.b, eta, &BaselineParams::default()).unwrap();
        let excess = (inst.m.transpose() * (&inst.m * &r.z - &inst.b)).amax() - eta;
        prop_assert!(excess <= 1e-7 * (1.0 + eta));
        // z* is feasible at this η, so the optimum cannot exceed its ℓ₁ norm.
        prop_assert!(r.z.lp_norm(1) <= truth.z_star.lp_norm(1) + 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn relaxation_lower_bounds_exact(model in 1u8..=3, n in 3usize..12, d in 3usize..7, sigma in 1usize..3, seed: u64) {
        let inst = instance(model, n, d, sigma, 0.3, seed);
        let exact = solve_exact(&inst, 1e-9).unwrap();
        let sol = solve_sdp(&inst, &SolverParams::default()).unwrap();
        if sol.status == Status::Converged {
            prop_assert!(sol.objective <= exact.best_value + 1e-6);
        }
    }

    #[test]
    fn residuals_shrink_over_a_decade(model in 1u8..=3, n in 3usize..40, d in 3usize..7, seed: u64) {
        let inst = instance(model, n, d, 2, 0.3, seed);
        let sol = solve_sdp(&inst, &SolverParams::default()).unwrap();
        let h = &sol.residual_history;
        for k in 1..=h.len() / 10 {
            prop_assert!(h[10 * k - 1] <= h[k - 1], "iteration {}: {} > {}", 10 * k, h[10 * k - 1], h[k - 1]);
        }
    }
}

#[test]
fn hand_sized_relaxation_is_tight() {
    // Orthonormal design with b = M x: x is the unique optimum and the SDP
    // lifts it exactly.
    let m = Mat::identity(4, 4) * 2.0;
    let x = SparseSignVector::new(vec![1, 0, -1, 0]).unwrap();
    let b = &m * x.to_vector();
    let inst = SilsInstance::new(m, b, 2).unwrap();
    let sol = solve_sdp(&inst, &SolverParams::default()).unwrap();
    assert_eq!(sol.status, Status::Converged);
    assert!((&sol.w - lift(&x)).norm() < 1e-4);
    assert_eq!(extract_rank_one(&sol.w, &inst, sol.objective, &SolverParams::default()), Some(x));
    assert!(sol.objective.abs() < 1e-6);
}

#[test]
fn experiment_csv_is_deterministic() {
    let cfg = ExperimentConfig::parse(
        "experiment = comparison\nmodel = 3\nd = 10\nsigma = 2\nrho = 0.5\nn = 12\ntrials = 3\nseed = 9\nparam_rule = paper\n",
    )
    .unwrap();
    let a = run_experiment(&cfg).unwrap().csv;
    let b = run_experiment(&cfg).unwrap().csv;
    assert_eq!(a, b);
}

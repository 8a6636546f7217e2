use sils_core::certificates::{
    build_certificate_sparse, check_cor_low_coherence, check_thm_general, check_thm_sparse, check_thm_sparse_recovery,
    model2_default_choice, model2_theta_decomposition, search_certificate, Route, DELTA_GRID,
};
use sils_core::exact::solve_exact;
use sils_core::generators::{generate, ModelSpec};
use sils_core::instance::{SilsInstance, SparseSignVector};
use sils_core::sdp::{extract_rank_one, lift, solve_sdp, SolverParams};

fn truth_signs(z: &sils_core::linalg::Vector) -> SparseSignVector {
    SparseSignVector::from_reals(z.as_slice()).unwrap()
}

#[test]
fn certified_model3_instance_is_recovered() {
    let (inst, truth) = generate(&ModelSpec::new(3, 300, 8, 2, 0.2, 4)).unwrap();
    let x = truth_signs(&truth.z_star);
    let (report, found) = search_certificate(&inst, &x, &DELTA_GRID, None).unwrap();
    assert!(report.passed(), "{}", report.render());
    let (_, cert) = found.unwrap();
    assert!(cert.passed());
    assert!((&cert.h * x.to_vector()).amax() < 1e-9 * (1.0 + cert.h.amax()));

    let exact = solve_exact(&inst, 1e-9).unwrap();
    assert!(exact.unique);
    assert_eq!(exact.best_x, x);
    let params = SolverParams::default();
    let sol = solve_sdp(&inst, &params).unwrap();
    assert!((&sol.w - lift(&x)).norm() <= 1e-4);
    assert_eq!(extract_rank_one(&sol.w, &inst, sol.objective, &params), Some(x));
}

#[test]
fn wrong_candidate_is_never_certified() {
    let (inst, truth) = generate(&ModelSpec::new(3, 300, 8, 2, 0.2, 4)).unwrap();
    let x = truth_signs(&truth.z_star);
    let mut flipped = x.entries().to_vec();
    flipped[0] = -flipped[0];
    let x = SparseSignVector::new(flipped).unwrap();
    let (report, found) = search_certificate(&inst, &x, &DELTA_GRID, None).unwrap();
    assert!(!report.passed());
    assert!(found.is_none());
    assert!(!check_thm_general(&inst, &x, &DELTA_GRID, None).unwrap().passed());
}

#[test]
fn noiseless_sparse_route_passes() {
    let (inst, truth) = generate(&ModelSpec::new(3, 200, 6, 2, 0.0, 11)).unwrap();
    let x = truth_signs(&truth.z_star);
    let a = check_thm_sparse(&inst, &x, &DELTA_GRID, None).unwrap();
    assert!(a.passed(), "{}", a.render());
    let e = check_thm_sparse_recovery(&inst, &truth, &DELTA_GRID, None, None).unwrap();
    assert!(e.margin("E1").unwrap() >= -1e-9);
}

#[test]
fn model2_decomposition_certifies_at_large_n() {
    let (inst, truth) = generate(&ModelSpec::new(2, 20_000, 10, 2, 0.5, 0)).unwrap();
    let (delta, mu2) = model2_default_choice(&inst, &truth).unwrap();
    let dec = model2_theta_decomposition(&inst, &truth, delta, mu2, 1.0).unwrap();
    assert!(dec.residual <= 1e-8);
    assert!(dec.valid, "{}", dec.render());

    let e = check_thm_sparse_recovery(&inst, &truth, &[delta], Some(&[mu2]), Some((&dec.theta1, &dec.theta2))).unwrap();
    assert!(e.passed(), "{}", e.render());
    let x = truth_signs(&truth.z_star);
    let cert = build_certificate_sparse(&inst, &x, delta, mu2, &dec.theta1, &dec.theta2).unwrap();
    assert!(cert.passed());
}

#[test]
fn model2_at_small_n_fails_honestly() {
    let (inst, truth) = generate(&ModelSpec::new(2, 30, 10, 2, 0.5, 0)).unwrap();
    let (delta, mu2) = model2_default_choice(&inst, &truth).unwrap();
    // Either c̄ ≤ 0 (an error) or an invalid split; never a false certificate.
    if let Ok(dec) = model2_theta_decomposition(&inst, &truth, delta, mu2, 1.0) {
        assert!(!dec.valid);
    }
}

fn normalised(inst: &SilsInstance) -> SilsInstance {
    let g = inst.gram();
    let s = 1.0 / g.diagonal().max().sqrt();
    SilsInstance::new(&inst.m * s, &inst.b * s, inst.sigma).unwrap()
}

#[test]
fn model2_is_too_coherent_for_the_corollary() {
    let (inst, truth) = generate(&ModelSpec::new(2, 5_000, 10, 2, 0.5, 3)).unwrap();
    let inst = normalised(&inst);
    let x = truth_signs(&truth.z_star);
    for big_delta in [0.1, 0.5, 1.0] {
        let c = check_cor_low_coherence(&inst, &x, big_delta, &DELTA_GRID, None).unwrap();
        assert!(!c.passed());
        assert!(c.margin("C3").unwrap() < 0.0, "{}", c.render());
    }
}

#[test]
fn corollary_rejects_unnormalised_columns() {
    let (inst, truth) = generate(&ModelSpec::new(3, 50, 6, 2, 0.1, 1)).unwrap();
    let inst = SilsInstance::new(&inst.m * 3.0, &inst.b * 3.0, 2).unwrap();
    let x = truth_signs(&truth.z_star);
    assert!(check_cor_low_coherence(&inst, &x, 0.1, &DELTA_GRID, None).is_err());
}

#[test]
fn low_coherence_witness_implies_general_witness() {
    let (inst, truth) = generate(&ModelSpec::new(3, 2_000, 4, 1, 0.1, 5)).unwrap();
    let inst = normalised(&inst);
    let x = truth_signs(&truth.z_star);
    let c = check_cor_low_coherence(&inst, &x, 0.2, &DELTA_GRID, None).unwrap();
    let w = c.witness.expect("low-coherence witness");
    assert!(check_thm_general(&inst, &x, &[w.delta], Some(&[w.mu2])).unwrap().passed());
    let (_, found) = search_certificate(&inst, &x, &DELTA_GRID, None).unwrap();
    assert!(matches!(found, Some((Route::General | Route::Sparse, _))));
}

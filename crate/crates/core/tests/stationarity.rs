use ccopt::enumeration::{enumerate_dual, enumerate_primal};
use ccopt::zoo::{self, Graph, Omega};
use ccopt::{
    check_slater, check_stationary_dual, check_stationary_primal, dual_to_primal, kkt_residual, primal_to_dual,
    solve_restricted, DualModel, PrimalModel, ProgramBase, RestrictedProgram, SlaterKind, SolverConfig, Status,
    Subset, Verdict,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn edge(beta: &[f64]) -> PrimalModel {
    zoo::edge_denoising(&Graph::Line(beta.len()), &v(beta), &DVector::from_element(beta.len() - 1, 1.0)).unwrap()
}

fn calcium() -> PrimalModel {
    zoo::calcium(&v(&[1.0, -0.5, 2.0, 0.3]), &v(&[0.4, 0.4, 0.4])).unwrap()
}

#[test]
fn data_point_is_stationary_with_zero_witnesses() {
    let p = edge(&[0.0, 0.0, 4.0, 4.0]);
    let cert = check_stationary_primal(&p, &v(&[0.0, 0.0, 4.0, 4.0]), None, &cfg()).unwrap();
    assert!(cert.passed());
    assert_eq!(cert.support, Subset::from_indices(&[1]));
    assert!(cert.witness("y").unwrap().amax() < 1e-7);
    assert!(cert.witness("z").unwrap().amax() < 1e-7);
}

#[test]
fn perturbed_data_point_is_not_stationary() {
    let p = edge(&[0.0, 0.0, 4.0, 4.0]);
    let cert = check_stationary_primal(&p, &v(&[0.5, 0.0, 4.0, 4.0]), None, &cfg()).unwrap();
    assert_eq!(cert.verdict(), Verdict::Fail);
    assert!(cert.residual() > 0.1);
}

#[test]
fn full_support_with_zero_gradient_passes() {
    // distinct neighbours: every row of Dx is nonzero and z must vanish
    let beta = [0.0, 1.0, -1.0, 2.0];
    let p = edge(&beta);
    let cert = check_stationary_primal(&p, &v(&beta), None, &cfg()).unwrap();
    assert!(cert.passed());
    assert_eq!(cert.support, Subset::full(3));
    assert!(cert.witness("z").unwrap().amax() < 1e-9);
}

#[test]
fn negative_dual_entry_is_a_domain_failure() {
    let p = calcium();
    let d = p.derive_dual(&v(&[1.0, 1.0, 1.0])).unwrap();
    let w = DualModel::join(&DVector::zeros(4), &v(&[0.0, -0.2, 0.0]));
    let cert = check_stationary_dual(&d, &w, None, &cfg()).unwrap();
    assert_eq!(cert.verdict(), Verdict::Fail);
    assert!(cert.certificate.domain_violation);
}

#[test]
fn calcium_global_point_corresponds() {
    let p = calcium();
    let rep = enumerate_primal(&p, 20, &cfg()).unwrap();
    let x = v(rep.best_point.as_ref().unwrap());
    // the negative datum is clipped by the orthant
    assert!(x[1].abs() < 1e-6);
    let corr = primal_to_dual(&p, &x, &p.card.weights, None, &cfg()).unwrap();
    let (y, z) = {
        let d = p.derive_dual(&p.card.weights).unwrap();
        d.split(&corr.point)
    };
    assert!(z.iter().all(|&t| t >= -1e-9));
    // y is the gradient of 1/2 |. - beta|^2 at x
    assert!((y - (&x - v(&[1.0, -0.5, 2.0, 0.3]))).amax() < 1e-6);
    assert!(corr.value_residual <= 1e-6);
    assert!(corr.target.passed());
}

#[test]
fn round_trip_preserves_the_objective() {
    for p in [edge(&[0.0, 0.1, 3.0, 3.1]), calcium()] {
        let rep = enumerate_primal(&p, 20, &cfg()).unwrap();
        let x = v(rep.best_point.as_ref().unwrap());
        let fwd = primal_to_dual(&p, &x, &p.card.weights, None, &cfg()).unwrap();
        let d = p.derive_dual(&p.card.weights).unwrap();
        let back = dual_to_primal(&d, &fwd.point, None, &cfg()).unwrap();
        let f0 = p.objective(&x, None).unwrap().total.to_f64();
        let f1 = p.objective(&back.point, None).unwrap().total.to_f64();
        assert!((f0 - f1).abs() <= 1e-6, "{f0} vs {f1}");
        assert!(back.value_residual <= 1e-6);
    }
}

#[test]
fn svm_dual_maps_back_through_the_gradient() {
    let data = zoo::separable_2class(2, 6, 1.0, 4).unwrap();
    let mu = DVector::from_element(6, 0.5);
    let d = zoo::sparse_svm_dual(&data.points, &data.labels, &mu, None).unwrap();
    let rep = enumerate_dual(&d, 20, &cfg()).unwrap();
    assert!(rep.attained);
    let w = v(rep.best_point.as_ref().unwrap());
    let corr = dual_to_primal(&d, &w, None, &cfg()).unwrap();
    let (_, z) = d.split(&w);
    // omega = Q' Diag(c) z; the offset comes from the witness search
    let omega = data.points.transpose() * data.labels.component_mul(&z);
    assert!((corr.point.rows(0, 2) - omega).amax() < 1e-6);
    assert!(corr.value_residual <= 1e-6);
}

#[test]
fn restricted_optima_are_stationary_and_witnesses_replay() {
    let c = cfg();
    for p in [edge(&[0.0, 0.1, 3.0, 3.1]), calcium()] {
        for s in Subset::enumerate(p.r()) {
            let prog = RestrictedProgram::primal(&p, s).unwrap();
            let out = solve_restricted(&prog, &c).unwrap();
            if out.status != Status::Optimal {
                continue;
            }
            let x = out.point.unwrap();
            let cert = check_stationary_primal(&p, &x, None, &c).unwrap();
            assert!(cert.passed(), "S = {s}: residual {}", cert.residual());
            // witnesses on the program of the active support
            let j = RestrictedProgram::primal(&p, cert.support).unwrap();
            let res = kkt_residual(&j, &x, &cert.witness("z").unwrap(), &c).unwrap();
            assert!(res.max() <= cert.tol, "S = {s}: {res:?}");
        }
    }
}

#[test]
fn energy_dual_satisfies_slater_on_every_support() {
    let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, 0.0, 0.0, 1.0, -1.0]);
    let d = zoo::difference_operator(&Graph::Line(3)).unwrap();
    let lam = v(&[1.0, 1.0]);
    let p = zoo::energy_min(&a, &v(&[1.0, 2.0]), &d, &Omega::Nonneg, &lam).unwrap();
    let dual = p.derive_dual(&lam).unwrap();
    for s in Subset::enumerate(2) {
        let cert = check_slater(SlaterKind::DZero, ProgramBase::Dual(&dual), s, 1e-3, &cfg()).unwrap();
        assert!(cert.passed(), "{s}");
    }
}

#[test]
fn infeasible_margins_fail_slater_with_farkas() {
    let q = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
    let p = zoo::heaviside_svm(&q, &v(&[1.0, -1.0]), &v(&[1.0, 1.0])).unwrap();
    let cert = check_slater(SlaterKind::PPlus, ProgramBase::Primal(&p), Subset::EMPTY, 0.0, &cfg()).unwrap();
    assert_eq!(cert.verdict, Verdict::Fail);
    assert!(cert.witness("farkas").is_some());
    // dropping one margin row leaves a feasible system
    let cert = check_slater(SlaterKind::PPlus, ProgramBase::Primal(&p), Subset::from_indices(&[0]), 0.0, &cfg()).unwrap();
    assert!(cert.passed());
}

#[test]
fn full_support_with_full_domain_atoms_passes_slater() {
    let p = edge(&[0.0, 1.0, 2.0]);
    let cert = check_slater(SlaterKind::PZero, ProgramBase::Primal(&p), Subset::full(2), 0.5, &cfg()).unwrap();
    assert!(cert.passed());
}

fn random_dual_point(seed: u64, d: &DualModel) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_fn(d.r(), |_, _| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..2.0) });
    let y = if rng.random_bool(0.5) {
        // the stationary choice y = -D'z for f = 0
        -(d.b.transpose() * &z)
    } else {
        DVector::from_fn(d.m(), |_, _| rng.random_range(-1.0..1.0))
    };
    DualModel::join(&y, &z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dual_verdict_does_not_depend_on_the_weights(seed in any::<u64>()) {
        let p = edge(&[0.0, 0.1, 3.0, 3.1]);
        let d1 = p.derive_dual(&v(&[1.0, 1.0, 1.0])).unwrap();
        let d2 = p.derive_dual(&v(&[0.01, 7.0, 300.0])).unwrap();
        let w = random_dual_point(seed, &d1);
        let a = check_stationary_dual(&d1, &w, Some(1e-7), &cfg()).unwrap();
        let b = check_stationary_dual(&d2, &w, Some(1e-7), &cfg()).unwrap();
        prop_assert_eq!(a.verdict(), b.verdict());
    }
}

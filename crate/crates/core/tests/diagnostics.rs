use ccopt::enumeration::{enumerate_dual, enumerate_primal};
use ccopt::zoo::{self, Graph, Omega};
use ccopt::{
    existence_check_dual, existence_check_primal, svm_separability, ConvexAtom, PrimalModel, SolverConfig, Variant,
    Verdict,
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

fn energy(omega: Omega) -> PrimalModel {
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.5, 0.3, 0.0, 1.0]);
    let d = zoo::difference_operator(&Graph::Line(3)).unwrap();
    zoo::energy_min(&a, &v(&[1.0, -2.0, 0.5]), &d, &omega, &v(&[0.5, 0.5])).unwrap()
}

fn omegas() -> [Omega; 3] {
    [
        Omega::Free,
        Omega::Nonneg,
        Omega::Box {
            lower: DVector::from_element(3, -1.0),
            upper: DVector::from_element(3, 2.0),
        },
    ]
}

/// `c_i (q_i'w + w_0) >= 1` checked row by row.
fn satisfies_margins(points: &DMatrix<f64>, labels: &DVector<f64>, x: &DVector<f64>) -> bool {
    let d = points.ncols();
    (0..points.nrows()).all(|i| {
        let s = (points.row(i).transpose().dot(&x.rows(0, d)) + x[d]) * labels[i];
        s >= 1.0 - 1e-7
    })
}

#[test]
fn energy_models_have_global_solutions() {
    for omega in omegas() {
        let p = energy(omega);
        assert!(existence_check_primal(&p, &cfg()).unwrap().passed());
        assert!(existence_check_dual(&p, Variant::Zero, &cfg()).unwrap().passed());
        let lam = p.card.weights.clone();
        assert!(enumerate_primal(&p, 20, &cfg()).unwrap().attained);
        assert!(enumerate_dual(&p.derive_dual(&lam).unwrap(), 20, &cfg()).unwrap().attained);
    }
}

#[test]
fn svm_primal_always_exists() {
    let data = zoo::nonseparable_2class(2, 5, 1).unwrap();
    let p = zoo::heaviside_svm(&data.points, &data.labels, &DVector::from_element(5, 1.0)).unwrap();
    let cert = existence_check_primal(&p, &cfg()).unwrap();
    assert!(cert.passed(), "{cert:?}");
    assert!(enumerate_primal(&p, 20, &cfg()).unwrap().attained);
}

#[test]
fn exp_epigraph_constraint_is_not_certified() {
    let p = PrimalModel::new(
        ConvexAtom::exp_epigraph(),
        ConvexAtom::zero(1).unwrap(),
        DMatrix::zeros(1, 2),
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        DVector::zeros(1),
        Variant::Plus,
        v(&[1.0]),
    )
    .unwrap();
    let cert = existence_check_primal(&p, &cfg()).unwrap();
    assert_ne!(cert.verdict, Verdict::Pass);
}

#[test]
fn separability_examples() {
    let q = DMatrix::from_row_slice(2, 1, &[2.0, -2.0]);
    let c = v(&[1.0, -1.0]);
    let cert = svm_separability(&q, &c, &cfg()).unwrap();
    assert!(cert.passed());
    let x = cert.witness("x").unwrap();
    assert!(satisfies_margins(&q, &c, &x));
    // minimum-norm witness of 2w + w0 >= 1, 2w - w0 >= 1
    assert!((x - v(&[0.5, 0.0])).amax() < 1e-6);

    let same = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
    assert_eq!(svm_separability(&same, &c, &cfg()).unwrap().verdict, Verdict::Fail);

    let single = DMatrix::from_row_slice(1, 3, &[0.3, -1.0, 2.0]);
    assert!(svm_separability(&single, &v(&[-1.0]), &cfg()).unwrap().passed());
}

#[test]
fn separable_svm_dual_exists() {
    let data = zoo::separable_2class(2, 6, 1.0, 12).unwrap();
    let p = zoo::heaviside_svm(&data.points, &data.labels, &DVector::from_element(6, 1.0)).unwrap();
    assert!(existence_check_dual(&p, Variant::Plus, &cfg()).unwrap().passed());
    let bad = zoo::nonseparable_2class(2, 6, 12).unwrap();
    let p = zoo::heaviside_svm(&bad.points, &bad.labels, &DVector::from_element(6, 1.0)).unwrap();
    assert_eq!(existence_check_dual(&p, Variant::Plus, &cfg()).unwrap().verdict, Verdict::Fail);
}

#[test]
fn box_regularized_svm_dual_always_attains() {
    for seed in 0..4 {
        let data = zoo::nonseparable_2class(2, 5, seed).unwrap();
        let mu = DVector::from_element(5, 0.7);
        let d = zoo::sparse_svm_dual(&data.points, &data.labels, &mu, Some(2.0)).unwrap();
        let rep = enumerate_dual(&d, 20, &cfg()).unwrap();
        assert!(rep.attained, "seed {seed}");
        assert!(rep.best_value.is_finite());
        let p = zoo::box_svm_primal(&data.points, &data.labels, &mu, 2.0).unwrap();
        assert!(existence_check_dual(&p, Variant::Plus, &cfg()).unwrap().passed());
    }
}

fn random_svm(seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6);
    let data = match rng.random_range(0..3) {
        0 => zoo::separable_2class(2, n, rng.random_range(0.2..2.0), seed).unwrap(),
        1 => zoo::nonseparable_2class(2, n, seed).unwrap(),
        _ => {
            let points = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
            let labels = DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            zoo::Dataset { points, labels, witness: None }
        }
    };
    (data.points, data.labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn separability_decides_dual_attainment(seed in any::<u64>()) {
        let (q, c) = random_svm(seed);
        let mu = DVector::from_element(q.nrows(), 1.0);
        let sep = svm_separability(&q, &c, &cfg()).unwrap();
        prop_assert_ne!(sep.verdict, Verdict::Indeterminate);
        if sep.passed() {
            prop_assert!(satisfies_margins(&q, &c, &sep.witness("x").unwrap()));
        }
        let d = zoo::sparse_svm_dual(&q, &c, &mu, None).unwrap();
        let rep = enumerate_dual(&d, 20, &cfg()).unwrap();
        prop_assert_eq!(sep.passed(), rep.attained);
        let p = zoo::heaviside_svm(&q, &c, &mu).unwrap();
        let exists = existence_check_dual(&p, Variant::Plus, &cfg()).unwrap();
        if exists.passed() {
            prop_assert!(rep.attained);
        }
        if existence_check_primal(&p, &cfg()).unwrap().passed() {
            prop_assert!(enumerate_primal(&p, 20, &cfg()).unwrap().attained);
        }
    }
}

use ccopt::schema::ModelFile;
use ccopt::zoo::{self, Graph, Omega};
use ccopt::{ConvexAtom, DualModel, ExtendedReal, PrimalModel, Side, Variant};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn edge() -> PrimalModel {
    zoo::edge_denoising(&Graph::Line(4), &v(&[0.0, 0.0, 4.0, 4.0]), &DVector::from_element(3, 1.0)).unwrap()
}

#[test]
fn svm_model_matches_its_formula() {
    let q = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, -2.0]);
    let c = v(&[1.0, -1.0, 1.0]);
    let p = zoo::heaviside_svm(&q, &c, &DVector::from_element(3, 2.0)).unwrap();
    assert_eq!(p.variant(), Variant::Plus);
    let x = v(&[0.3, -0.4, 0.1]);
    // 1/2 |w|^2 + lambda * #{i : 1 - c_i (q_i'w + w_0) > 0}
    let mut expect = 0.5 * (0.09 + 0.16);
    for i in 0..3 {
        let margin = c[i] * (q[(i, 0)] * x[0] + q[(i, 1)] * x[1] + x[2]);
        if 1.0 - margin > 1e-8 {
            expect += 2.0;
        }
    }
    let got = p.objective(&x, None).unwrap().total.to_f64();
    assert!((got - expect).abs() < 1e-14);
}

#[test]
fn calcium_model_matches_its_formula() {
    let beta = v(&[0.5, -0.2, 1.0]);
    let p = zoo::calcium(&beta, &DVector::from_element(2, 1.5)).unwrap();
    let x = v(&[0.5, 0.0, 1.0]);
    // 1/2 |x - beta|^2 = 0.02; Dx = (-0.5, 1.0) has one positive entry
    let got = p.objective(&x, None).unwrap().total.to_f64();
    assert!((got - (0.02 + 1.5)).abs() < 1e-14);
    assert!(p.objective(&v(&[-0.1, 0.0, 0.0]), None).unwrap().total.is_pos_infinite());
}

#[test]
fn zero_weight_is_rejected() {
    let beta = v(&[0.0, 1.0, 2.0]);
    assert!(zoo::edge_denoising(&Graph::Line(3), &beta, &v(&[1.0, 0.0])).is_err());
    let p = zoo::edge_denoising(&Graph::Line(3), &beta, &v(&[1.0, 1.0])).unwrap();
    assert!(p.derive_dual(&v(&[0.0, 1.0])).is_err());
    assert!(p.derive_dual(&v(&[1.0])).is_err());
}

#[test]
fn dimension_mismatches_are_rejected() {
    let f = ConvexAtom::zero(2).unwrap();
    let g = ConvexAtom::zero(1).unwrap();
    let ok = PrimalModel::new(
        f.clone(),
        g.clone(),
        DMatrix::zeros(1, 2),
        DMatrix::zeros(1, 2),
        DVector::zeros(1),
        Variant::Zero,
        DVector::from_element(1, 1.0),
    );
    assert!(ok.is_ok());
    let bad_a = PrimalModel::new(
        f.clone(),
        g.clone(),
        DMatrix::zeros(2, 2),
        DMatrix::zeros(1, 2),
        DVector::zeros(1),
        Variant::Zero,
        DVector::from_element(1, 1.0),
    );
    assert!(bad_a.is_err());
    let bad_b = PrimalModel::new(
        f,
        g,
        DMatrix::zeros(1, 2),
        DMatrix::zeros(1, 2),
        DVector::zeros(2),
        Variant::Zero,
        DVector::from_element(1, 1.0),
    );
    assert!(bad_b.is_err());
}

#[test]
fn dual_preserves_data_and_pairs_flavors() {
    for p in [edge(), zoo::calcium(&v(&[1.0, 0.0, 2.0]), &v(&[1.0, 1.0])).unwrap()] {
        let mu = DVector::from_element(p.r(), 0.7);
        let d = p.derive_dual(&mu).unwrap();
        assert_eq!((d.a.clone(), d.b.clone(), d.rhs.clone()), (p.a.clone(), p.b.clone(), p.rhs.clone()));
        assert_eq!(d.r(), p.r());
        assert_eq!(d.card.side, Side::DualPsi);
        assert_eq!(d.variant(), p.variant());
        assert_eq!(d.mu(), &mu);
    }
}

#[test]
fn edge_denoising_value_at_the_data() {
    let p = edge();
    let o = p.objective(&v(&[0.0, 0.0, 4.0, 4.0]), None).unwrap();
    assert_eq!(o.convex, ExtendedReal::ZERO);
    assert_eq!(o.card.to_f64(), 1.0);
    assert_eq!(o.total.to_f64(), 1.0);
}

#[test]
fn svm_dual_vanishes_at_the_origin() {
    let data = zoo::separable_2class(2, 5, 1.0, 2).unwrap();
    let d = zoo::sparse_svm_dual(&data.points, &data.labels, &DVector::from_element(5, 1.0), None).unwrap();
    let w = DVector::zeros(d.dim());
    assert_eq!(d.objective(&w, None).unwrap().total, ExtendedReal::ZERO);
}

#[test]
fn plus_dual_is_infinite_off_the_orthant() {
    let p = zoo::calcium(&v(&[1.0, 0.0, 2.0]), &v(&[1.0, 1.0])).unwrap();
    let d = p.derive_dual(&v(&[1.0, 1.0])).unwrap();
    let mut w = DVector::zeros(d.dim());
    w[d.m()] = -0.5;
    assert!(d.objective(&w, None).unwrap().total.is_pos_infinite());
}

/// Energy minimization over the orthant with `A = I`: the dual is
/// `1/2 |y|^2 + <a, y> + Psi_0(z)` subject to `A'y + D'z >= 0`.
#[test]
fn energy_dual_closed_form() {
    let n = 3;
    let a = DMatrix::identity(n, n);
    let obs = v(&[1.0, -0.5, 2.0]);
    let d = zoo::difference_operator(&Graph::Line(n)).unwrap();
    let p = zoo::energy_min(&a, &obs, &d, &Omega::Nonneg, &v(&[0.4, 0.9])).unwrap();
    let dual = p.derive_dual(&v(&[0.4, 0.9])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut finite = 0;
    for _ in 0..400 {
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let z = DVector::from_fn(2, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-2.0..2.0) });
        let w = DualModel::join(&y, &z);
        let got = dual.objective(&w, None).unwrap().total;
        let feasible = (a.transpose() * &y + d.transpose() * &z).iter().all(|&s| s >= -1e-12);
        if feasible {
            finite += 1;
            let card: f64 = [0.4, 0.9].iter().zip(z.iter()).filter(|(_, zi)| zi.abs() > 1e-8).map(|(m, _)| m).sum();
            let expect = 0.5 * y.norm_squared() + obs.dot(&y) + card;
            assert!((got.to_f64() - expect).abs() < 1e-12, "{got:?} vs {expect}");
        } else {
            assert!(got.is_pos_infinite());
        }
    }
    assert!(finite > 20);
}

#[test]
fn models_round_trip_through_json_bit_exactly() {
    let data = zoo::separable_2class(2, 4, 1.0, 9).unwrap();
    let models = [
        edge(),
        zoo::heaviside_svm(&data.points, &data.labels, &DVector::from_element(4, 1.0)).unwrap(),
        zoo::calcium(&v(&[0.1, 1.0 / 3.0, 2.0]), &v(&[1.0, 1.0])).unwrap(),
        zoo::box_svm_primal(&data.points, &data.labels, &DVector::from_element(4, 1.0), 0.7).unwrap(),
    ];
    for p in models {
        let text = serde_json::to_string(&ModelFile::from_primal(&p, None)).unwrap();
        let back = ModelFile::from_json(&text).unwrap().to_primal().unwrap();
        assert_eq!(back, p);
    }
}

/// Local duality: for a subgradient triple at `x` the convex parts sum to
/// zero. `x` is piecewise constant, `z` lives on its flat edges and the
/// data is chosen as `beta = x + D'z` so that `y = x - beta = -D'z`.
fn subgradient_triple(seed: u64) -> (PrimalModel, DVector<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 5;
    let mut x = DVector::zeros(n);
    let mut level = rng.random_range(-2.0..2.0);
    for i in 0..n {
        if rng.random_bool(0.4) {
            level += rng.random_range(-2.0..2.0);
        }
        x[i] = level;
    }
    let variant = if seed.is_multiple_of(2) { Variant::Zero } else { Variant::Plus };
    let d = zoo::difference_operator(&Graph::Line(n)).unwrap();
    let u = &d * &x;
    let z = DVector::from_fn(n - 1, |i, _| {
        if u[i] != 0.0 {
            0.0
        } else {
            match variant {
                Variant::Zero => rng.random_range(-1.5..1.5),
                Variant::Plus => rng.random_range(0.0..1.5),
            }
        }
    });
    let beta = &x + d.transpose() * &z;
    let p = PrimalModel::new(
        ConvexAtom::zero(n).unwrap(),
        ConvexAtom::half_sq_norm(beta.clone()).unwrap(),
        DMatrix::identity(n, n),
        d,
        DVector::zeros(n - 1),
        variant,
        DVector::from_element(n - 1, 1.0),
    )
    .unwrap();
    let y = &x - &beta;
    (p, x, DualModel::join(&y, &z))
}

proptest! {
    #[test]
    fn local_duality_at_subgradient_pairs(seed in any::<u64>()) {
        let (p, x, w) = subgradient_triple(seed);
        let d = p.derive_dual(&DVector::from_element(p.r(), 1.0)).unwrap();
        let theta = p.theta(&x).unwrap().to_f64();
        let xi = d.xi(&w).unwrap().to_f64();
        prop_assert!((theta + xi).abs() <= 1e-8, "{} + {}", theta, xi);
    }
}

use ccopt::enumeration::{check_mu_rule, enumerate_dual, enumerate_primal};
use ccopt::zoo::{self, Graph};
use ccopt::{
    brute_force_grid, compute_thresholds, select_mu, solve_restricted, ExtendedReal, PrimalModel, ProgramBase,
    RestrictedProgram, SolverConfig, Status, Subset,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: usize = 20;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn edge(beta: &[f64], lambda: &[f64]) -> PrimalModel {
    zoo::edge_denoising(&Graph::Line(beta.len()), &v(beta), &v(lambda)).unwrap()
}

fn close(a: ExtendedReal, b: f64, tol: f64) -> bool {
    (a.to_f64() - b).abs() <= tol
}

#[test]
fn edge_denoising_keeps_the_middle_jump() {
    let rep = enumerate_primal(&edge(&[0.0, 0.0, 4.0, 4.0], &[1.0, 1.0, 1.0]), CAP, &cfg()).unwrap();
    assert!(rep.attained);
    assert!(close(rep.best_value, 1.0, 1e-8));
    assert_eq!(rep.best_subset, Subset::from_indices(&[1]));
    let x = v(rep.best_point.as_ref().unwrap());
    assert!((x - v(&[0.0, 0.0, 4.0, 4.0])).amax() < 1e-6);
    // S = {} fixes every edge: the mean 2 at distance 2 from each entry
    assert!(close(rep.record(Subset::EMPTY).unwrap().total_value, 8.0, 1e-8));
}

#[test]
fn one_dimensional_svm_sits_on_its_margins() {
    let q = DMatrix::from_row_slice(2, 1, &[2.0, -2.0]);
    let p = zoo::heaviside_svm(&q, &v(&[1.0, -1.0]), &v(&[10.0, 10.0])).unwrap();
    let rep = enumerate_primal(&p, CAP, &cfg()).unwrap();
    assert!(close(rep.best_value, 0.125, 1e-8), "{}", rep.best_value);
    assert_eq!(rep.best_subset, Subset::EMPTY);
    let x = v(rep.best_point.as_ref().unwrap());
    assert!((x - v(&[0.5, 0.0])).amax() < 1e-6);
    // grid search over (w, w_0)
    let grid = brute_force_grid(ProgramBase::Primal(&p), -2.0, 2.0, 201).unwrap();
    assert!(close(grid, 0.125, 1e-12));
}

#[test]
fn nonseparable_svm_dual_is_unbounded() {
    let data = zoo::nonseparable_2class(2, 6, 5).unwrap();
    let d = zoo::sparse_svm_dual(&data.points, &data.labels, &DVector::from_element(6, 1.0), None).unwrap();
    let rep = enumerate_dual(&d, CAP, &cfg()).unwrap();
    assert!(!rep.attained);
    assert!(rep.best_value.is_neg_infinite());
    assert!(rep.best_point.is_none());
    // the sweep still records every subset
    assert_eq!(rep.per_subset.len(), 64);
}

#[test]
fn report_is_the_weighted_minimum_of_its_rows() {
    let p = zoo::calcium(&v(&[1.0, 0.2, 1.5, -0.3]), &v(&[0.3, 0.3, 0.3])).unwrap();
    let rep = enumerate_primal(&p, CAP, &cfg()).unwrap();
    let mut best = f64::INFINITY;
    for rec in &rep.per_subset {
        let w: f64 = rec.subset.indices().iter().map(|&i| p.card.weights[i]).sum();
        assert_eq!(rec.total_value, rec.restricted_value + w);
        if rec.status == Some(Status::Optimal) {
            best = best.min(rec.total_value.to_f64());
        }
    }
    assert!(close(rep.best_value, best, 1e-12));
    let x = v(rep.best_point.as_ref().unwrap());
    assert!(close(p.objective(&x, None).unwrap().total, best, 1e-6));
}

#[test]
fn stacked_plus_form_gives_the_same_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let beta: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.5)).collect();
        let p = edge(&beta, &lambda);
        let a = enumerate_primal(&p, CAP, &cfg()).unwrap();
        let b = enumerate_primal(&p.stacked_plus().unwrap(), CAP, &cfg()).unwrap();
        assert!(close(a.best_value, b.best_value.to_f64(), 1e-8), "{} vs {}", a.best_value, b.best_value);
    }
}

/// Edge-denoising dual restricted to `S`: `y = -D_S' z_S` and the value is
/// `-1/2 |P beta|^2` with `P` the projection onto the row space of `D_S`.
fn edge_dual_value(beta: &DVector<f64>, s: Subset) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let d = zoo::difference_operator(&Graph::Line(beta.len())).unwrap();
    let ds = d.select_rows(&s.indices());
    let gram_inv = (&ds * ds.transpose()).pseudo_inverse(1e-12).unwrap();
    let proj = ds.transpose() * gram_inv * &ds * beta;
    -0.5 * proj.norm_squared()
}

#[test]
fn thresholds_match_the_projection_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..6 {
        let beta = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
        let p = edge(beta.as_slice(), &[1.0, 1.0, 1.0]);
        let d = p.derive_dual(&DVector::from_element(3, 1.0)).unwrap();
        let t_star = Subset(trial % 8);
        let th = compute_thresholds(&d, t_star, None, CAP, &cfg()).unwrap();
        let (mut e1, mut e2) = (f64::INFINITY, f64::INFINITY);
        for s in Subset::enumerate(3) {
            let val = edge_dual_value(&beta, s);
            if s == t_star {
                assert!(close(th.eta0, val, 1e-7), "{} vs {val}", th.eta0);
            } else if s.is_proper_subset_of(t_star) {
                e1 = e1.min(val);
            } else {
                e2 = e2.min(val);
            }
        }
        for (got, want) in [(th.eta1, e1), (th.eta2, e2)] {
            if want.is_infinite() {
                assert!(got.is_pos_infinite());
            } else {
                assert!(close(got, want, 1e-7), "{got} vs {want}");
            }
        }
    }
}

#[test]
fn empty_reference_support_has_no_eta1_family() {
    let p = edge(&[0.0, 1.0, 0.5], &[1.0, 1.0]);
    let d = p.derive_dual(&v(&[1.0, 1.0])).unwrap();
    let th = compute_thresholds(&d, Subset::EMPTY, None, CAP, &cfg()).unwrap();
    assert!(th.eta1.is_pos_infinite());
    assert!(close(th.eta0, 0.0, 1e-12));
    let mu = select_mu(&th, 0.25).unwrap();
    assert!(check_mu_rule(&th, &mu));
}

#[test]
fn worked_mu_example() {
    let th = ccopt::Thresholds {
        eta0: ExtendedReal::Finite(0.0),
        eta1: ExtendedReal::Finite(1.0),
        eta2: ExtendedReal::Finite(-3.0),
        t_star: Subset::from_indices(&[0]),
        r: 2,
        card_min_verified: None,
    };
    let mu = select_mu(&th, 0.25).unwrap();
    assert!((mu[0] - 0.8).abs() < 1e-15 && (mu[1] - 5.25).abs() < 1e-15);
    assert!(check_mu_rule(&th, &mu));
    let bad = ccopt::Thresholds { eta2: ExtendedReal::NegInfinity, ..th };
    assert!(select_mu(&bad, 0.25).is_err());
}

/// With weights from `select_mu` the reference support becomes globally
/// optimal: the weighted minimum over the three families is `eta_0 + mu(T*)`.
#[test]
fn selected_weights_make_the_reference_global() {
    let p = edge(&[0.0, 0.1, 3.0, 3.1], &[1.0, 1.0, 1.0]);
    let d = p.derive_dual(&DVector::from_element(3, 1.0)).unwrap();
    let t_star = Subset::from_indices(&[1]);
    let reference = solve_restricted(&RestrictedProgram::dual(&d, t_star).unwrap(), &cfg()).unwrap();
    let w = reference.point.unwrap();
    let th = compute_thresholds(&d, t_star, Some(&w), CAP, &cfg()).unwrap();
    assert_eq!(th.card_min_verified, Some(true));
    assert!(th.eta1.to_f64() > th.eta0.to_f64());
    let mu = select_mu(&th, 0.25).unwrap();
    assert!(check_mu_rule(&th, &mu));
    let rep = enumerate_dual(&d.with_mu(&mu).unwrap(), CAP, &cfg()).unwrap();
    let target = th.eta0.to_f64() + mu[1];
    assert!(close(rep.best_value, target, 1e-7), "{} vs {target}", rep.best_value);
    assert_eq!(rep.best_subset, t_star);
    // the same minimum read family by family
    let mut fam = [f64::INFINITY; 3];
    for rec in &rep.per_subset {
        let k = if rec.subset == t_star {
            0
        } else if rec.subset.is_proper_subset_of(t_star) {
            1
        } else {
            2
        };
        fam[k] = fam[k].min(rec.total_value.to_f64());
    }
    assert!((fam.iter().cloned().fold(f64::INFINITY, f64::min) - rep.best_value.to_f64()).abs() < 1e-12);
}

#[test]
fn enumeration_agrees_with_the_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (low, high, pts) = (-1.0, 4.0, 51);
    let h = (high - low) / (pts - 1) as f64;
    for _ in 0..3 {
        let beta: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..3.0)).collect();
        let lambda: Vec<f64> = (0..2).map(|_| rng.random_range(0.3..1.5)).collect();
        let p = edge(&beta, &lambda);
        let rep = enumerate_primal(&p, CAP, &cfg()).unwrap();
        let grid = brute_force_grid(ProgramBase::Primal(&p), low, high, pts).unwrap().to_f64();
        let x = v(rep.best_point.as_ref().unwrap());
        let lip = (&x - v(&beta)).norm() + h * 3f64.sqrt();
        let best = rep.best_value.to_f64();
        assert!(best <= grid + 1e-9, "{best} > {grid}");
        assert!(grid - best <= 2.0 * h * lip + 1e-6, "{grid} - {best}");
    }
}

#[test]
fn grid_oracle_edge_cases() {
    let p = PrimalModel::new(
        ccopt::ConvexAtom::zero(2).unwrap(),
        ccopt::ConvexAtom::zero(1).unwrap(),
        DMatrix::zeros(1, 2),
        DMatrix::zeros(1, 2),
        DVector::zeros(1),
        ccopt::Variant::Zero,
        DVector::from_element(1, 1.0),
    )
    .unwrap();
    assert_eq!(brute_force_grid(ProgramBase::Primal(&p), -1.0, 1.0, 5).unwrap(), ExtendedReal::ZERO);
    // calcium is +inf below zero
    let c = zoo::calcium(&v(&[1.0, 1.0]), &v(&[1.0])).unwrap();
    assert!(brute_force_grid(ProgramBase::Primal(&c), -3.0, -1.0, 5).unwrap().is_pos_infinite());
    let big = edge(&[0.0; 5], &[1.0; 4]);
    assert!(brute_force_grid(ProgramBase::Primal(&big), -1.0, 1.0, 5).is_err());
}

fn random_model(seed: u64) -> PrimalModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
    let lambda: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..2.0)).collect();
    if rng.random_bool(0.5) {
        edge(&beta, &lambda)
    } else {
        zoo::calcium(&v(&beta), &v(&lambda)).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn best_value_bounds_every_sampled_point(seed in any::<u64>()) {
        let p = random_model(seed);
        let rep = enumerate_primal(&p, CAP, &cfg()).unwrap();
        let best = rep.best_value.to_f64();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..50 {
            let mut x = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
            if rng.random_bool(0.3) {
                // tie neighbours so that sparse patterns get sampled too
                x[2] = x[1];
            }
            let f = p.objective(&x, None).unwrap().total;
            if let Some(f) = f.finite() {
                prop_assert!(best <= f + 1e-6, "{} > {}", best, f);
            }
        }
    }
}

//! Sufficient conditions for global solutions of (P) and (D), and the SVM
//! separability test, which is also necessary for the SVM dual.

use nalgebra::{DMatrix, DVector};

use crate::atoms::{AtomKind, ConvexAtom};
use crate::cardinality::Variant;
use crate::certificate::{Certificate, Verdict};
use crate::error::{check_dim, Error, Result};
use crate::model::PrimalModel;
use crate::stationarity::{check_slater, SlaterKind};
use crate::subset::Subset;
use crate::subsolver::{lp_feasibility_with, ProgramBase, SolverConfig, SystemBuilder};

/// Margin applied to domain rows of atoms that are not piecewise linear
/// when a relative-interior point is required.
pub const RI_MARGIN: f64 = 1e-6;

/// Atom classes known to be asymptotically level stable: every piecewise
/// linear-quadratic convex atom of the catalog.
fn als_registry(atom: &ConvexAtom) -> bool {
    !matches!(atom.kind, AtomKind::IndicatorExpEpigraph)
}

/// Closed convex set `C` with `f = delta(.|C)`, as far as polyhedrality is
/// concerned: `Some(true)` polyhedral, `Some(false)` not, `None` when `f` is
/// not an indicator (or the zero function, which is `delta(.|R^n)`).
fn constraint_set_polyhedral(f: &ConvexAtom) -> Option<bool> {
    match f.kind {
        AtomKind::Zero
        | AtomKind::IndicatorBox { .. }
        | AtomKind::IndicatorNonneg
        | AtomKind::IndicatorZero
        | AtomKind::IndicatorPolyhedron { .. } => Some(true),
        AtomKind::IndicatorExpEpigraph => Some(false),
        _ => None,
    }
}

fn domain_feasibility(p: &PrimalModel, cfg: &SolverConfig) -> Result<Certificate> {
    let n = p.n();
    let mut sys = SystemBuilder::new(n);
    sys.add_rows(&p.f.domain_rows()?, &DMatrix::identity(n, n), false);
    sys.add_rows(&p.g.domain_rows()?, &p.a, false);
    Ok(sys.solve(0.0, cfg))
}

/// Existence of a global solution of (P).
///
/// With `f = delta(.|C)`: (i) `AC` meets `dom g`, (ii) `g` is ALS, (iii) `C`
/// is polyhedral, (iv) `g` is bounded below. With `f` itself a convex
/// piecewise linear-quadratic atom, `f + g(A.)` is ALS and bounded below,
/// which gives the same conclusion; this covers the SVM.
pub fn existence_check_primal(p: &PrimalModel, cfg: &SolverConfig) -> Result<Certificate> {
    if !als_registry(&p.g) {
        return Ok(Certificate::indeterminate(format!("g = {} is not in the ALS registry", p.g.name())));
    }
    let route = match constraint_set_polyhedral(&p.f) {
        Some(false) => {
            return Ok(Certificate::fail(f64::INFINITY)
                .with_note("f is the indicator of a non-polyhedral set; the polyhedrality condition fails"))
        }
        Some(true) => "indicator of a polyhedral set",
        None if als_registry(&p.f) => "convex piecewise linear-quadratic f",
        None => {
            return Ok(Certificate::indeterminate(format!("f = {} is outside the supported forms", p.f.name())))
        }
    };
    if p.f.infimum().is_none() || p.g.infimum().is_none() {
        return Ok(Certificate::indeterminate("lower boundedness is not decidable for these atoms"));
    }
    let feas = domain_feasibility(p, cfg)?;
    let note = match feas.verdict {
        Verdict::Pass => format!("{route}; domains intersect; g is ALS and bounded below"),
        Verdict::Fail => format!("{route}; dom f and the preimage of dom g do not intersect"),
        Verdict::Indeterminate => format!("{route}; domain feasibility undecided"),
    };
    Ok(feas.with_note(note))
}

/// Existence of a global solution of the stationary dual of `p` with the
/// given cardinality variant: `F` bounded below and a point with
/// `x in ri dom f`, `Ax in ri dom g`, `Bx <= b` (plus) or `Bx = b` (zero).
pub fn existence_check_dual(p: &PrimalModel, variant: Variant, cfg: &SolverConfig) -> Result<Certificate> {
    if p.f.infimum().is_none() || p.g.infimum().is_none() {
        return Ok(Certificate::indeterminate("lower boundedness of F is not decidable for these atoms"));
    }
    let kind = match variant {
        Variant::Plus => SlaterKind::PPlus,
        Variant::Zero => SlaterKind::PZero,
    };
    let cert = check_slater(kind, ProgramBase::Primal(p), Subset::EMPTY, RI_MARGIN, cfg)?;
    let note = match cert.verdict {
        Verdict::Pass => "F is bounded below and the constraint system has a relative-interior point",
        Verdict::Fail => "no point of the domains satisfies the constraint system",
        Verdict::Indeterminate => "relative-interior feasibility undecided",
    };
    let note = match &cert.note {
        Some(n) if cert.verdict == Verdict::Indeterminate => format!("{note}: {n}"),
        _ => note.to_string(),
    };
    Ok(cert.with_note(note))
}

pub(crate) fn check_labels(labels: &DVector<f64>) -> Result<()> {
    if let Some(bad) = labels.iter().find(|&&c| c != 1.0 && c != -1.0) {
        return Err(Error::InvalidParams(format!("labels must be +1 or -1, got {bad}")));
    }
    Ok(())
}

/// `c_i (q_i' w + w_0) >= 1` for all `i`, one point per row of `points`.
/// On success the witness `x` is `[w; w_0]` of minimum norm; otherwise a
/// Farkas vector is attached.
pub fn svm_separability(points: &DMatrix<f64>, labels: &DVector<f64>, cfg: &SolverConfig) -> Result<Certificate> {
    check_dim("labels (rows of the point matrix)", points.nrows(), labels.len())?;
    check_labels(labels)?;
    let (r, s) = points.shape();
    let rows = DMatrix::from_fn(r, s + 1, |i, j| {
        let q = if j < s { points[(i, j)] } else { 1.0 };
        -labels[i] * q
    });
    let rhs = DVector::from_element(r, -1.0);
    Ok(lp_feasibility_with(&rows, &rhs, &[], &[], 0.0, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_pair() {
        let q = DMatrix::from_row_slice(2, 1, &[2.0, -2.0]);
        let c = DVector::from_vec(vec![1.0, -1.0]);
        let cert = svm_separability(&q, &c, &SolverConfig::default()).unwrap();
        assert!(cert.passed());
        let x = cert.witness("x").unwrap();
        assert!((x[0] - 0.5).abs() < 1e-8 && x[1].abs() < 1e-8);
    }

    #[test]
    fn coincident_pair_is_not_separable() {
        let q = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = DVector::from_vec(vec![1.0, -1.0]);
        let cert = svm_separability(&q, &c, &SolverConfig::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Fail);
        assert!(cert.witness("farkas").is_some());
    }

    #[test]
    fn single_point_any_label() {
        for c in [1.0, -1.0] {
            let q = DMatrix::from_row_slice(1, 2, &[0.3, -0.7]);
            let cert = svm_separability(&q, &DVector::from_element(1, c), &SolverConfig::default()).unwrap();
            assert!(cert.passed());
        }
    }

    #[test]
    fn labels_are_validated() {
        let q = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(svm_separability(&q, &DVector::from_element(1, 0.5), &SolverConfig::default()).is_err());
    }

    #[test]
    fn exp_epigraph_constraint_is_rejected() {
        let p = PrimalModel::new(
            ConvexAtom::exp_epigraph(),
            ConvexAtom::zero(1).unwrap(),
            DMatrix::zeros(1, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::zeros(1),
            Variant::Zero,
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let cert = existence_check_primal(&p, &SolverConfig::default()).unwrap();
        assert!(!cert.passed());
    }
}

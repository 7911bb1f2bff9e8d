//! Stationarity certificates for (P) and (D), Slater checks for the
//! restricted programs, and the maps between primal and dual stationary
//! points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atoms::{AtomKind, ConvexAtom, LinearRows, SubgradSet};
use crate::cardinality::Variant;
use crate::certificate::{Certificate, Verdict};
use crate::error::{check_dim, Error, Result};
use crate::model::{DualModel, PrimalModel, Which};
use crate::subset::Subset;
use crate::subsolver::{dual_operators, min_residual, ProgramBase, SolverConfig, SystemBuilder};
use crate::tol::zero_tol;

pub const STATIONARITY_TOL_REL: f64 = 1e-7;

/// Default pass threshold `1e-7 (1 + |data|_inf)`.
pub fn default_tol(data_scale: f64) -> f64 {
    STATIONARITY_TOL_REL * (1.0 + data_scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityCertificate {
    pub which: Which,
    #[serde(flatten)]
    pub certificate: Certificate,
    /// `J* = I(Bx - b)` for the primal, `T* = I(z)` for the dual.
    pub support: Subset,
    pub tol: f64,
}

impl StationarityCertificate {
    pub fn passed(&self) -> bool {
        self.certificate.passed()
    }

    pub fn verdict(&self) -> Verdict {
        self.certificate.verdict
    }

    pub fn residual(&self) -> f64 {
        self.certificate.residual
    }

    pub fn witness(&self, name: &str) -> Option<DVector<f64>> {
        self.certificate.witness(name)
    }
}

fn wrap(which: Which, certificate: Certificate, support: Subset, tol: f64) -> StationarityCertificate {
    StationarityCertificate {
        which,
        certificate,
        support,
        tol,
    }
}

fn set_error(e: Error) -> Result<Certificate> {
    match e {
        Error::EmptySubdifferential(msg) => Ok(Certificate::domain_failure(msg)),
        Error::UnsupportedAtom(what) | Error::UnsupportedConjugate(what) => Ok(Certificate::indeterminate(format!(
            "{what}: subdifferential has no polyhedral description here"
        ))),
        Error::Indeterminate(msg) => Ok(Certificate::indeterminate(msg)),
        e => Err(e),
    }
}

fn verdict_for(residual: f64, tol: f64, converged: bool) -> Certificate {
    if residual <= tol {
        Certificate::pass(residual)
    } else if converged {
        Certificate::fail(residual)
    } else {
        Certificate::new(Verdict::Indeterminate, residual).with_note("witness search did not converge")
    }
}

/// Searches `y in dg(Ax)`, `z in dPhi(Bx - b)` minimizing the distance of
/// `-A'y - B'z` to `df(x)`.
pub fn check_stationary_primal(
    p: &PrimalModel,
    x: &DVector<f64>,
    tol: Option<f64>,
    cfg: &SolverConfig,
) -> Result<StationarityCertificate> {
    check_dim("primal point", p.n(), x.len())?;
    let tol = tol.unwrap_or_else(|| default_tol(p.data_scale()));
    let u = p.residual(x);
    let zt = zero_tol(&u);
    let support = Subset::from_indices(&p.card.support(&u, zt));
    let ax = &p.a * x;
    for (atom, pt, what) in [(&p.f, x, "x is outside dom f"), (&p.g, &ax, "Ax is outside dom g")] {
        if !atom.domain_check(pt, false).passed() {
            return Ok(wrap(Which::Primal, Certificate::domain_failure(what), support, tol));
        }
    }
    let sets = (|| -> Result<(SubgradSet, SubgradSet)> { Ok((p.f.subdiff_set(x)?, p.g.subdiff_set(&ax)?)) })();
    let (df, dg) = match sets {
        Ok(s) => s,
        Err(e) => return Ok(wrap(Which::Primal, set_error(e)?, support, tol)),
    };
    let (lo, hi) = p.card.pattern_box(&u, zt)?;
    let dphi = SubgradSet::boxed(DVector::zeros(p.r()), &lo, &hi);
    let eye = DMatrix::identity(p.n(), p.n());
    let at = p.a.transpose();
    let bt = p.b.transpose();
    let fit = min_residual(&[(&eye, &df), (&at, &dg), (&bt, &dphi)], &DVector::zeros(p.n()), cfg);
    let y = &fit.members[1];
    let z = &fit.members[2];
    let mut cert = verdict_for(fit.residual, tol, fit.converged);
    if cert.passed() && !p.card.subdiff_check(&u, z, zt)?.passed() {
        cert = Certificate::fail(fit.residual).with_note("cardinality witness left its pattern");
    }
    let cert = cert.with_witness("y", y).with_witness("z", z);
    Ok(wrap(Which::Primal, cert, support, tol))
}

/// Searches `x in df*(-Q'w)`, `u in dPsi(z)` with `Ax in dg*(y)` and
/// `Bx - b = u`, up to the residual.
pub fn check_stationary_dual(
    d: &DualModel,
    w: &DVector<f64>,
    tol: Option<f64>,
    cfg: &SolverConfig,
) -> Result<StationarityCertificate> {
    check_dim("dual point", d.dim(), w.len())?;
    let tol = tol.unwrap_or_else(|| default_tol(d.data_scale()));
    let (y, z) = d.split(w);
    let zt = zero_tol(&z);
    let support = Subset::from_indices(&d.card.support(&z, zt));
    let (lo, hi) = match d.card.pattern_box(&z, zt) {
        Ok(b) => b,
        Err(Error::EmptySubdifferential(msg)) => {
            return Ok(wrap(Which::Dual, Certificate::domain_failure(msg), support, tol))
        }
        Err(e) => return Err(e),
    };
    let v = d.neg_qt(&y, &z);
    let sets = (|| -> Result<(SubgradSet, SubgradSet)> {
        if !d.f.conjugate_eval(&v)?.is_finite() {
            return Err(Error::EmptySubdifferential("-Q'w is outside dom f*".into()));
        }
        if !d.g.conjugate_eval(&y)?.is_finite() {
            return Err(Error::EmptySubdifferential("y is outside dom g*".into()));
        }
        Ok((d.f.conj_subdiff_set(&v)?, d.g.conj_subdiff_set(&y)?))
    })();
    let (df, dg) = match sets {
        Ok(s) => s,
        Err(e) => return Ok(wrap(Which::Dual, set_error(e)?, support, tol)),
    };
    let dpsi = SubgradSet::boxed(DVector::zeros(d.r()), &lo, &hi);
    let (neg_q, sel_y) = dual_operators(d);
    let (m, r) = (d.m(), d.r());
    let mut sel_z = DMatrix::zeros(m + r, r);
    sel_z.view_mut((m, 0), (r, r)).fill_with_identity();
    let mut h = DVector::zeros(m + r);
    h.rows_mut(m, r).copy_from(&d.rhs);
    let fit = min_residual(&[(&neg_q, &df), (&sel_y, &dg), (&sel_z, &dpsi)], &h, cfg);
    let x = &fit.members[0];
    let u = &fit.members[2];
    let mut cert = verdict_for(fit.residual, tol, fit.converged);
    if cert.passed() && !d.card.subdiff_check(&z, u, zt)?.passed() {
        cert = Certificate::fail(fit.residual).with_note("cardinality witness left its pattern");
    }
    let cert = cert.with_witness("x", x).with_witness("u", u);
    Ok(wrap(Which::Dual, cert, support, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlaterKind {
    PPlus,
    PZero,
    DPlus,
    DZero,
}

impl SlaterKind {
    pub fn parse(s: &str) -> Option<SlaterKind> {
        match s {
            "p_plus" | "P_plus" => Some(SlaterKind::PPlus),
            "p_zero" | "P_zero" => Some(SlaterKind::PZero),
            "d_plus" | "D_plus" => Some(SlaterKind::DPlus),
            "d_zero" | "D_zero" => Some(SlaterKind::DZero),
            _ => None,
        }
    }
}

/// Whether `psi` is piecewise linear (then so is `psi*`), so that `ri` may
/// be dropped from its domain condition.
fn piecewise_linear(atom: &ConvexAtom) -> bool {
    !matches!(atom.kind, AtomKind::HalfSquaredNorm { .. } | AtomKind::IndicatorExpEpigraph)
}

fn domain_rows_of(atom: &ConvexAtom, conjugate: bool) -> std::result::Result<(LinearRows, bool), Certificate> {
    let rows = if conjugate {
        atom.conjugate_domain_rows()
    } else {
        atom.domain_rows()
    };
    match rows {
        Ok(rows) => Ok((rows, !piecewise_linear(atom))),
        Err(e) => Err(Certificate::indeterminate(format!(
            "relative interior of {} domain is not decidable here: {e}",
            atom.name()
        ))),
    }
}

/// Generalized Slater condition of the restricted program attached to
/// `support`. Domain rows of atoms that are not piecewise linear are
/// tightened by `margin`; piecewise-linear atoms need plain feasibility.
pub fn check_slater(
    kind: SlaterKind,
    model: ProgramBase,
    support: Subset,
    margin: f64,
    cfg: &SolverConfig,
) -> Result<Certificate> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidParams(format!("margin must be nonnegative, got {margin}")));
    }
    match (kind, model) {
        (SlaterKind::PPlus | SlaterKind::PZero, ProgramBase::Primal(p)) => {
            if !support.fits(p.r()) {
                return Err(Error::InvalidParams(format!("support {support} is not contained in [{}]", p.r())));
            }
            let n = p.n();
            let mut sys = SystemBuilder::new(n);
            let (f_rows, f_strict) = match domain_rows_of(&p.f, false) {
                Ok(v) => v,
                Err(c) => return Ok(c),
            };
            let (g_rows, g_strict) = match domain_rows_of(&p.g, false) {
                Ok(v) => v,
                Err(c) => return Ok(c),
            };
            sys.add_rows(&f_rows, &DMatrix::identity(n, n), f_strict);
            sys.add_rows(&g_rows, &p.a, g_strict);
            for i in (0..p.r()).filter(|&i| !support.contains(i)) {
                let row = p.b.row(i).transpose();
                if kind == SlaterKind::PZero {
                    sys.add_eq(row, p.rhs[i]);
                } else {
                    sys.add_le(row, p.rhs[i]);
                }
            }
            Ok(sys.solve(margin, cfg))
        }
        (SlaterKind::DPlus | SlaterKind::DZero, ProgramBase::Dual(d)) => {
            if !support.fits(d.r()) {
                return Err(Error::InvalidParams(format!("support {support} is not contained in [{}]", d.r())));
            }
            let (m, r, n) = (d.m(), d.r(), d.n());
            let mut sys = SystemBuilder::new(m + r);
            let (f_rows, f_strict) = match domain_rows_of(&d.f, true) {
                Ok(v) => v,
                Err(c) => return Ok(c),
            };
            let (g_rows, g_strict) = match domain_rows_of(&d.g, true) {
                Ok(v) => v,
                Err(c) => return Ok(c),
            };
            let mut neg_qt = DMatrix::zeros(n, m + r);
            neg_qt.view_mut((0, 0), (n, m)).copy_from(&(-d.a.transpose()));
            neg_qt.view_mut((0, m), (n, r)).copy_from(&(-d.b.transpose()));
            let mut sel_y = DMatrix::zeros(m, m + r);
            sel_y.view_mut((0, 0), (m, m)).fill_with_identity();
            sys.add_rows(&f_rows, &neg_qt, f_strict);
            sys.add_rows(&g_rows, &sel_y, g_strict);
            for i in 0..r {
                let e = DVector::from_fn(m + r, |k, _| if k == m + i { 1.0 } else { 0.0 });
                if !support.contains(i) {
                    sys.add_eq(e, 0.0);
                } else if kind == SlaterKind::DPlus {
                    sys.add_le(-e, 0.0);
                }
            }
            Ok(sys.solve(margin, cfg))
        }
        _ => Err(Error::InvalidParams(format!("Slater kind {kind:?} does not fit this model side"))),
    }
}

/// A stationary point carried to the other side.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub point: DVector<f64>,
    /// `|Theta(x) + Xi(w)|`.
    pub value_residual: f64,
    pub source: StationarityCertificate,
    pub target: StationarityCertificate,
}

fn zero_sum(p: &PrimalModel, d: &DualModel, x: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    let total = p.theta(x)? + d.xi(w)?;
    Ok(match total.finite() {
        Some(v) => v.abs(),
        None => f64::INFINITY,
    })
}

/// `w* = [y*; z*]` read from the primal stationarity witnesses.
pub fn primal_to_dual(
    p: &PrimalModel,
    x_star: &DVector<f64>,
    mu: &DVector<f64>,
    tol: Option<f64>,
    cfg: &SolverConfig,
) -> Result<Correspondence> {
    let source = check_stationary_primal(p, x_star, tol, cfg)?;
    if !source.passed() {
        return Err(Error::NotStationary { residual: source.residual() });
    }
    let y = source.witness("y").expect("primal certificate carries y");
    let z = source.witness("z").expect("primal certificate carries z");
    let w = DualModel::join(&y, &z);
    let d = p.derive_dual(mu)?;
    let target = check_stationary_dual(&d, &w, tol, cfg)?;
    if !target.passed() {
        return Err(Error::NotStationary { residual: target.residual() });
    }
    let value_residual = zero_sum(p, &d, x_star, &w)?;
    Ok(Correspondence {
        point: w,
        value_residual,
        source,
        target,
    })
}

/// `x* in df*(-Q'w*)` read from the dual stationarity witness; the
/// conjugate gradient when `f` is a full quadratic.
pub fn dual_to_primal(d: &DualModel, w_star: &DVector<f64>, tol: Option<f64>, cfg: &SolverConfig) -> Result<Correspondence> {
    let source = check_stationary_dual(d, w_star, tol, cfg)?;
    if !source.passed() {
        return Err(Error::NotStationary { residual: source.residual() });
    }
    let x = match &d.f.kind {
        AtomKind::HalfSquaredNorm { center, mask } if mask.iter().all(|&m| m) => {
            let (y, z) = d.split(w_star);
            d.neg_qt(&y, &z) + center
        }
        _ => source.witness("x").expect("dual certificate carries x"),
    };
    // weights play no role in primal stationarity
    let p = d.primal_counterpart(d.mu())?;
    let target = check_stationary_primal(&p, &x, tol, cfg)?;
    if !target.passed() {
        return Err(Error::NotStationary { residual: target.residual() });
    }
    let value_residual = zero_sum(&p, d, &x, w_star)?;
    Ok(Correspondence {
        point: x,
        value_residual,
        source,
        target,
    })
}

/// The Slater kind matching a model's side and variant.
pub fn slater_kind_for(which: Which, variant: Variant) -> SlaterKind {
    match (which, variant) {
        (Which::Primal, Variant::Plus) => SlaterKind::PPlus,
        (Which::Primal, Variant::Zero) => SlaterKind::PZero,
        (Which::Dual, Variant::Plus) => SlaterKind::DPlus,
        (Which::Dual, Variant::Zero) => SlaterKind::DZero,
    }
}

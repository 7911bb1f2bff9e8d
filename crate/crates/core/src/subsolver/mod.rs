//! Restricted convex programs: the convex part of (P) or (D) with the
//! cardinality term replaced by sign or zero constraints on a fixed subset.

pub mod feasibility;
pub mod lowering;
pub mod qp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atoms::SubgradSet;
use crate::error::{check_dim, Error, Result};
use crate::extended::ExtendedReal;
use crate::model::{DualModel, PrimalModel};
use crate::subset::Subset;

pub use feasibility::{lp_feasibility, lp_feasibility_with, min_residual, SystemBuilder, WitnessFit};
pub use qp::SolverConfig;

use lowering::QpBuilder;
use qp::QpStatus;

#[derive(Debug, Clone, Copy)]
pub enum ProgramBase<'a> {
    Primal(&'a PrimalModel),
    Dual(&'a DualModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFlavor {
    /// `(Bx - b)_i <= 0` for `i` outside `S`.
    InequalityOnComplement,
    /// `(Bx - b)_i = 0` for `i` outside `S`.
    EqualityOnComplement,
    /// `z_i = 0` outside `S`, `z_i >= 0` on `S`.
    DualPlus,
    /// `z_i = 0` outside `S`.
    DualZero,
}

#[derive(Debug, Clone, Copy)]
pub struct RestrictedProgram<'a> {
    pub base: ProgramBase<'a>,
    pub subset: Subset,
    pub flavor: ConstraintFlavor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    #[serde(with = "crate::schema::ext_f64")]
    pub stationarity: f64,
    #[serde(with = "crate::schema::ext_f64")]
    pub complementarity: f64,
    #[serde(with = "crate::schema::ext_f64")]
    pub feasibility: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.feasibility)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: Status,
    /// Optimal point, or the base of the ray when unbounded.
    pub point: Option<DVector<f64>>,
    /// One entry per index of `[r]`; rows left unconstrained carry 0.
    pub multipliers: Option<DVector<f64>>,
    pub value: ExtendedReal,
    pub kkt_residuals: KktResiduals,
    pub iterations: usize,
    /// Certified recession direction when unbounded.
    pub direction: Option<DVector<f64>>,
    /// Farkas multipliers of the lowered system when infeasible.
    pub farkas: Option<DVector<f64>>,
}

impl<'a> RestrictedProgram<'a> {
    pub fn new(base: ProgramBase<'a>, subset: Subset, flavor: ConstraintFlavor) -> Result<Self> {
        let (r, ok) = match base {
            ProgramBase::Primal(p) => (
                p.r(),
                matches!(
                    flavor,
                    ConstraintFlavor::InequalityOnComplement | ConstraintFlavor::EqualityOnComplement
                ),
            ),
            ProgramBase::Dual(d) => (
                d.r(),
                matches!(flavor, ConstraintFlavor::DualPlus | ConstraintFlavor::DualZero),
            ),
        };
        if !ok {
            return Err(Error::InvalidParams(format!(
                "constraint flavor {flavor:?} does not fit this side"
            )));
        }
        if !subset.fits(r) {
            return Err(Error::InvalidParams(format!("subset {subset} is not contained in [{r}]")));
        }
        Ok(RestrictedProgram { base, subset, flavor })
    }

    /// The program the subset enumeration attaches to `S` for a primal model.
    pub fn primal(p: &'a PrimalModel, subset: Subset) -> Result<Self> {
        let flavor = match p.variant() {
            crate::cardinality::Variant::Plus => ConstraintFlavor::InequalityOnComplement,
            crate::cardinality::Variant::Zero => ConstraintFlavor::EqualityOnComplement,
        };
        Self::new(ProgramBase::Primal(p), subset, flavor)
    }

    pub fn dual(d: &'a DualModel, subset: Subset) -> Result<Self> {
        let flavor = match d.variant() {
            crate::cardinality::Variant::Plus => ConstraintFlavor::DualPlus,
            crate::cardinality::Variant::Zero => ConstraintFlavor::DualZero,
        };
        Self::new(ProgramBase::Dual(d), subset, flavor)
    }

    pub fn r(&self) -> usize {
        match self.base {
            ProgramBase::Primal(p) => p.r(),
            ProgramBase::Dual(d) => d.r(),
        }
    }

    pub fn dim(&self) -> usize {
        match self.base {
            ProgramBase::Primal(p) => p.n(),
            ProgramBase::Dual(d) => d.dim(),
        }
    }

    /// Lowered QP plus, for each restriction row, its index in the QP.
    fn lower(&self) -> Result<(QpBuilder, Vec<(usize, usize)>)> {
        let r = self.r();
        let mut rows = Vec::new();
        match self.base {
            ProgramBase::Primal(p) => {
                let n = p.n();
                let mut b = QpBuilder::new(n);
                b.add_term(&p.f, false, &DMatrix::identity(n, n), &DVector::zeros(n))?;
                b.add_term(&p.g, false, &p.a, &DVector::zeros(p.m()))?;
                for i in (0..r).filter(|&i| !self.subset.contains(i)) {
                    let coef: Vec<(usize, f64)> = (0..n).map(|j| (j, p.b[(i, j)])).filter(|c| c.1 != 0.0).collect();
                    let lo = if self.flavor == ConstraintFlavor::EqualityOnComplement {
                        p.rhs[i]
                    } else {
                        f64::NEG_INFINITY
                    };
                    rows.push((i, b.row(coef, lo, p.rhs[i])));
                }
                Ok((b, rows))
            }
            ProgramBase::Dual(d) => {
                let (m, n) = (d.m(), d.n());
                let mut b = QpBuilder::new(m + r);
                let mut neg_qt = DMatrix::zeros(n, m + r);
                neg_qt.view_mut((0, 0), (n, m)).copy_from(&(-d.a.transpose()));
                neg_qt.view_mut((0, m), (n, r)).copy_from(&(-d.b.transpose()));
                b.add_term(&d.f, true, &neg_qt, &DVector::zeros(n))?;
                let mut sel_y = DMatrix::zeros(m, m + r);
                sel_y.view_mut((0, 0), (m, m)).fill_with_identity();
                b.add_term(&d.g, true, &sel_y, &DVector::zeros(m))?;
                let mut lin = DVector::zeros(m + r);
                lin.rows_mut(m, r).copy_from(&d.rhs);
                b.add_linear_main(&lin);
                for i in 0..r {
                    if !self.subset.contains(i) {
                        rows.push((i, b.row(vec![(m + i, 1.0)], 0.0, 0.0)));
                    } else if self.flavor == ConstraintFlavor::DualPlus {
                        rows.push((i, b.row(vec![(m + i, 1.0)], 0.0, f64::INFINITY)));
                    }
                }
                Ok((b, rows))
            }
        }
    }
}

/// Solves a restricted program; `Err(Indeterminate)` when the budget runs
/// out without a solution or a certificate.
pub fn solve_restricted(prog: &RestrictedProgram, cfg: &SolverConfig) -> Result<SolveOutcome> {
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidParams("solver tol and max_iter must be positive".into()));
    }
    let (builder, rows) = prog.lower()?;
    let qp_prob = builder.build();
    let out = qp::solve(&qp_prob, cfg);
    let n_main = prog.dim();
    let r = prog.r();
    match out.status {
        QpStatus::Solved => {
            let point = out.x.rows(0, n_main).into_owned();
            let mut mult = DVector::zeros(r);
            for &(i, k) in &rows {
                mult[i] = out.y[k];
            }
            let kkt = kkt_residual(prog, &point, &mult, cfg)?;
            Ok(SolveOutcome {
                status: Status::Optimal,
                point: Some(point),
                multipliers: Some(mult),
                value: ExtendedReal::Finite(out.objective + builder.constant),
                kkt_residuals: kkt,
                iterations: out.iterations,
                direction: None,
                farkas: None,
            })
        }
        QpStatus::Unbounded => Ok(SolveOutcome {
            status: Status::Unbounded,
            point: Some(out.x.rows(0, n_main).into_owned()),
            multipliers: None,
            value: ExtendedReal::NegInfinity,
            kkt_residuals: KktResiduals {
                stationarity: f64::INFINITY,
                complementarity: 0.0,
                feasibility: out.prim_res,
            },
            iterations: out.iterations,
            direction: out.direction.map(|d| d.rows(0, n_main).into_owned()),
            farkas: None,
        }),
        QpStatus::PrimalInfeasible => Ok(SolveOutcome {
            status: Status::Infeasible,
            point: None,
            multipliers: None,
            value: ExtendedReal::PosInfinity,
            kkt_residuals: KktResiduals {
                stationarity: f64::INFINITY,
                complementarity: f64::INFINITY,
                feasibility: f64::INFINITY,
            },
            iterations: out.iterations,
            direction: None,
            farkas: out.farkas,
        }),
        QpStatus::MaxIterations => Err(Error::Indeterminate(format!(
            "restricted program on S = {} not solved in {} iterations (primal residual {:.2e}, dual residual {:.2e})",
            prog.subset, cfg.max_iter, out.prim_res, out.dual_res
        ))),
    }
}

/// `(stationarity, complementarity, feasibility)` of a candidate KKT pair.
/// Stationarity is the distance from 0 to the Lagrangian subdifferential,
/// found by the witness search; a point outside the convex part's domain
/// gets `+inf` feasibility.
pub fn kkt_residual(
    prog: &RestrictedProgram,
    point: &DVector<f64>,
    multipliers: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<KktResiduals> {
    let r = prog.r();
    check_dim("restricted program point", prog.dim(), point.len())?;
    check_dim("restricted program multipliers", r, multipliers.len())?;
    let infeasible = KktResiduals {
        stationarity: f64::INFINITY,
        complementarity: f64::INFINITY,
        feasibility: f64::INFINITY,
    };
    let s = prog.subset;
    let mut comp = 0.0_f64;
    let mut feas = 0.0_f64;
    match prog.base {
        ProgramBase::Primal(p) => {
            let x = point;
            let ax = &p.a * x;
            if !p.f.domain_check(x, false).passed() || !p.g.domain_check(&ax, false).passed() {
                return Ok(infeasible);
            }
            let u = p.residual(x);
            let eq = prog.flavor == ConstraintFlavor::EqualityOnComplement;
            let mut m = multipliers.clone();
            for i in 0..r {
                if s.contains(i) {
                    comp = comp.max(m[i].abs());
                    m[i] = 0.0;
                } else if eq {
                    feas = feas.max(u[i].abs());
                } else {
                    feas = feas.max(u[i]);
                    comp = comp.max((m[i] * u[i]).abs()).max(-m[i]);
                }
            }
            let df = p.f.subdiff_set(x)?;
            let dg = p.g.subdiff_set(&ax)?;
            let eye = DMatrix::identity(p.n(), p.n());
            let at = p.a.transpose();
            let h = p.b.transpose() * &m;
            let fit = min_residual(&[(&eye, &df), (&at, &dg)], &h, cfg);
            Ok(KktResiduals {
                stationarity: fit.residual,
                complementarity: comp,
                feasibility: feas,
            })
        }
        ProgramBase::Dual(d) => {
            let (y, z) = d.split(point);
            let v = d.neg_qt(&y, &z);
            if !d.f.conjugate_eval(&v)?.is_finite() || !d.g.conjugate_eval(&y)?.is_finite() {
                return Ok(infeasible);
            }
            let mut mm = multipliers.clone();
            for i in 0..r {
                if !s.contains(i) {
                    feas = feas.max(z[i].abs());
                } else if prog.flavor == ConstraintFlavor::DualPlus {
                    feas = feas.max(-z[i]);
                    comp = comp.max((mm[i] * z[i]).abs()).max(mm[i]);
                } else {
                    comp = comp.max(mm[i].abs());
                    mm[i] = 0.0;
                }
            }
            let (df, dg) = dual_subdiff_sets(d, &y, &z)?;
            let (neg_q, sel_y) = dual_operators(d);
            let mut h = DVector::zeros(d.dim());
            h.rows_mut(d.m(), r).copy_from(&(&d.rhs + &mm));
            let fit = min_residual(&[(&neg_q, &df), (&sel_y, &dg)], &h, cfg);
            Ok(KktResiduals {
                stationarity: fit.residual,
                complementarity: comp,
                feasibility: feas,
            })
        }
    }
}

/// `d f*(-Q'w)` and `d g*(y)`.
pub(crate) fn dual_subdiff_sets(d: &DualModel, y: &DVector<f64>, z: &DVector<f64>) -> Result<(SubgradSet, SubgradSet)> {
    let v = d.neg_qt(y, z);
    Ok((d.f.conj_subdiff_set(&v)?, d.g.conj_subdiff_set(y)?))
}

/// `-Q = -[A; B]` and the embedding `[I; 0]` of `y` into `w`.
pub(crate) fn dual_operators(d: &DualModel) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, r, n) = (d.m(), d.r(), d.n());
    let mut neg_q = DMatrix::zeros(m + r, n);
    neg_q.view_mut((0, 0), (m, n)).copy_from(&(-&d.a));
    neg_q.view_mut((m, 0), (r, n)).copy_from(&(-&d.b));
    let mut sel_y = DMatrix::zeros(m + r, m);
    sel_y.view_mut((0, 0), (m, m)).fill_with_identity();
    (neg_q, sel_y)
}

/// Objective of the restricted program's convex part along `x + t d`.
pub fn value_along(prog: &RestrictedProgram, x: &DVector<f64>, d: &DVector<f64>, t: f64) -> Result<ExtendedReal> {
    let pt = x + d * t;
    match prog.base {
        ProgramBase::Primal(p) => p.theta(&pt),
        ProgramBase::Dual(dm) => dm.xi(&pt),
    }
}

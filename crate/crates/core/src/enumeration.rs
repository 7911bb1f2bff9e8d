//! Global solutions by support enumeration, the eta/xi thresholds and the
//! weight-selection rule.
//!
//! For either side, the global value is
//! `min_S { restricted value on S } + sum_{i in S} w_i`
//! where the restricted program fixes the cardinality pattern outside `S`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::model::{DualModel, PrimalModel, Which};
use crate::subset::Subset;
use crate::subsolver::{solve_restricted, ProgramBase, RestrictedProgram, SolverConfig, Status};
use crate::tol::{inf_norm, ZERO_TOL_REL};

pub const DEFAULT_CAP: usize = 20;

/// Relative tolerance under which a later subset does not displace an earlier one.
const TIE_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRecord {
    pub subset: Subset,
    /// `None` when the subsolver could not decide.
    pub status: Option<Status>,
    pub restricted_value: ExtendedReal,
    pub total_value: ExtendedReal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    pub schema: String,
    pub which: Which,
    pub best_value: ExtendedReal,
    pub best_point: Option<Vec<f64>>,
    pub best_subset: Subset,
    pub attained: bool,
    /// Some subset program ended without a verdict.
    pub indeterminate: bool,
    pub per_subset: Vec<SubsetRecord>,
    pub config: SolverConfig,
    pub zero_tol_rel: f64,
}

impl GlobalReport {
    pub fn record(&self, s: Subset) -> Option<&SubsetRecord> {
        self.per_subset.iter().find(|r| r.subset == s)
    }

    /// One CSV row per subset: bitmask, index list, status, values.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["mask", "subset", "status", "restricted_value", "total_value"])?;
        for rec in &self.per_subset {
            let status = match rec.status {
                Some(Status::Optimal) => "optimal",
                Some(Status::Unbounded) => "unbounded",
                Some(Status::Infeasible) => "infeasible",
                None => "indeterminate",
            };
            wr.write_record([
                rec.subset.0.to_string(),
                rec.subset.to_string(),
                status.to_string(),
                rec.restricted_value.to_string(),
                rec.total_value.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn weights_of<'a>(base: ProgramBase<'a>) -> &'a DVector<f64> {
    match base {
        ProgramBase::Primal(p) => &p.card.weights,
        ProgramBase::Dual(d) => &d.card.weights,
    }
}

fn r_of(base: ProgramBase) -> usize {
    match base {
        ProgramBase::Primal(p) => p.r(),
        ProgramBase::Dual(d) => d.r(),
    }
}

fn restricted_program<'a>(base: ProgramBase<'a>, s: Subset) -> Result<RestrictedProgram<'a>> {
    match base {
        ProgramBase::Primal(p) => RestrictedProgram::primal(p, s),
        ProgramBase::Dual(d) => RestrictedProgram::dual(d, s),
    }
}

/// Solves the restricted program for every `S` in `subsets` (in parallel,
/// results in input order). Weights are not added.
pub fn sweep(base: ProgramBase, subsets: &[Subset], cfg: &SolverConfig) -> Result<Vec<SubsetRecord>> {
    subsets
        .par_iter()
        .map(|&s| {
            let prog = restricted_program(base, s)?;
            let rec = match solve_restricted(&prog, cfg) {
                Ok(out) => SubsetRecord {
                    subset: s,
                    status: Some(out.status),
                    restricted_value: out.value,
                    total_value: out.value,
                    point: out.point.map(|p| p.iter().copied().collect()),
                    multipliers: out.multipliers.map(|m| m.iter().copied().collect()),
                    direction: out.direction.map(|d| d.iter().copied().collect()),
                    note: None,
                },
                Err(Error::Indeterminate(msg)) => SubsetRecord {
                    subset: s,
                    status: None,
                    restricted_value: ExtendedReal::PosInfinity,
                    total_value: ExtendedReal::PosInfinity,
                    point: None,
                    multipliers: None,
                    direction: None,
                    note: Some(msg),
                },
                Err(e) => return Err(e),
            };
            Ok(rec)
        })
        .collect()
}

fn improves(candidate: ExtendedReal, best: ExtendedReal) -> bool {
    match (candidate, best) {
        (ExtendedReal::Finite(c), ExtendedReal::Finite(b)) => c < b - TIE_REL * (1.0 + b.abs()),
        _ => candidate < best,
    }
}

/// Exact global minimum of (P) or (D) over all `2^r` supports.
pub fn enumerate_global(base: ProgramBase, cap: usize, cfg: &SolverConfig) -> Result<GlobalReport> {
    let r = r_of(base);
    if r > cap || r >= crate::subset::MAX_INDEX {
        return Err(Error::CapExceeded { r, cap });
    }
    let subsets = Subset::enumerate(r);
    let mut per_subset = sweep(base, &subsets, cfg)?;
    let w = weights_of(base);
    for rec in per_subset.iter_mut() {
        let penalty: f64 = rec.subset.indices().iter().map(|&i| w[i]).sum();
        rec.total_value = rec.restricted_value + penalty;
    }

    let indeterminate = per_subset.iter().any(|r| r.status.is_none());
    let unbounded = per_subset.iter().find(|r| r.status == Some(Status::Unbounded));
    let (best_value, best_subset, best_point, attained) = if let Some(u) = unbounded {
        (ExtendedReal::NegInfinity, u.subset, None, false)
    } else {
        let mut best: Option<&SubsetRecord> = None;
        for rec in per_subset.iter().filter(|r| r.status == Some(Status::Optimal)) {
            if best.is_none_or(|b| improves(rec.total_value, b.total_value)) {
                best = Some(rec);
            }
        }
        match best {
            Some(b) => (b.total_value, b.subset, b.point.clone(), true),
            None => (ExtendedReal::PosInfinity, Subset::EMPTY, None, false),
        }
    };
    Ok(GlobalReport {
        schema: crate::schema::SCHEMA_VERSION.to_string(),
        which: match base {
            ProgramBase::Primal(_) => Which::Primal,
            ProgramBase::Dual(_) => Which::Dual,
        },
        best_value,
        best_point,
        best_subset,
        attained,
        indeterminate,
        per_subset,
        config: *cfg,
        zero_tol_rel: ZERO_TOL_REL,
    })
}

pub fn enumerate_primal(p: &PrimalModel, cap: usize, cfg: &SolverConfig) -> Result<GlobalReport> {
    enumerate_global(ProgramBase::Primal(p), cap, cfg)
}

pub fn enumerate_dual(d: &DualModel, cap: usize, cfg: &SolverConfig) -> Result<GlobalReport> {
    enumerate_global(ProgramBase::Dual(d), cap, cfg)
}

/// `eta_0` (S = T*), `eta_1` (S a proper subset of T*), `eta_2` (S not
/// inside T*); for `Psi_0` these are the `xi` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub eta0: ExtendedReal,
    pub eta1: ExtendedReal,
    pub eta2: ExtendedReal,
    pub t_star: Subset,
    pub r: usize,
    /// Set when a reference point was checked for minimal cardinality.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub card_min_verified: Option<bool>,
}

/// Threshold values for the dual support `t_star`. With `reference`, also
/// checks that it solves the `S = T*` program and that no proper subset of
/// `T*` reaches the same value.
pub fn compute_thresholds(
    d: &DualModel,
    t_star: Subset,
    reference: Option<&DVector<f64>>,
    cap: usize,
    cfg: &SolverConfig,
) -> Result<Thresholds> {
    let r = d.r();
    if r > cap {
        return Err(Error::CapExceeded { r, cap });
    }
    if !t_star.fits(r) {
        return Err(Error::InvalidParams(format!("support {t_star} is not contained in [{r}]")));
    }
    let subsets = Subset::enumerate(r);
    let recs = sweep(ProgramBase::Dual(d), &subsets, cfg)?;
    let mut eta0 = ExtendedReal::PosInfinity;
    let mut eta1 = ExtendedReal::PosInfinity;
    let mut eta2 = ExtendedReal::PosInfinity;
    for rec in &recs {
        if rec.status.is_none() {
            return Err(Error::Indeterminate(format!(
                "threshold program on S = {} undecided",
                rec.subset
            )));
        }
        let v = rec.restricted_value;
        if rec.subset == t_star {
            eta0 = v;
        } else if rec.subset.is_proper_subset_of(t_star) {
            eta1 = eta1.min(v);
        } else {
            eta2 = eta2.min(v);
        }
    }
    let card_min_verified = match reference {
        None => None,
        Some(w) => {
            crate::error::check_dim("reference dual point", d.dim(), w.len())?;
            let (_, z) = d.split(w);
            let support = Subset::from_indices(&d.card.support(&z, crate::tol::zero_tol(&z)));
            let xi = d.xi(w)?;
            let scale = 1.0 + eta0.to_f64().abs().min(f64::MAX) + inf_norm(w);
            let attains = eta0.is_finite() && xi.is_finite() && xi.distance(eta0) <= 1e-6 * scale;
            let separated = !eta1.is_finite() || eta1.to_f64() > eta0.to_f64() + 1e-9 * scale;
            Some(support == t_star && attains && separated)
        }
    };
    Ok(Thresholds {
        eta0,
        eta1,
        eta2,
        t_star,
        r,
        card_min_verified,
    })
}

/// Weights meeting the local-to-global rule
/// `sum_{T*} mu <= eta_1 - eta_0`, `mu_j > max(eta_1 - eta_2, 0)` off `T*`.
///
/// `mu_i = (eta_1 - eta_0) / (|T*| (1 + slack))` on `T*` and
/// `mu_j = max(eta_1 - eta_2, 0) + slack (1 + |eta_1 - eta_2|)` off it.
/// When `T*` is empty the first family is empty and `eta_0` takes the role
/// of `eta_1` in the second rule; an empty or infeasible `eta_2` family
/// leaves the off-support weights at `slack`.
pub fn select_mu(th: &Thresholds, slack: f64) -> Result<DVector<f64>> {
    if !(slack > 0.0) || !slack.is_finite() {
        return Err(Error::InvalidParams(format!("slack must be positive, got {slack}")));
    }
    let t = th.t_star;
    let k = t.len();
    let eta0 = th.eta0.finite().ok_or_else(|| {
        Error::NoAdmissibleWeights(format!("eta_0 = {} is not finite", th.eta0))
    })?;
    if th.eta2.is_neg_infinite() {
        return Err(Error::NoAdmissibleWeights(
            "eta_2 = -inf: no finite weight exceeds eta_1 - eta_2".into(),
        ));
    }
    if th.eta1.is_neg_infinite() {
        return Err(Error::NoAdmissibleWeights("eta_1 = -inf".into()));
    }
    // Upper bound that eta_0 + sum_{T*} mu must respect.
    let top = if k == 0 {
        eta0
    } else {
        match th.eta1 {
            ExtendedReal::Finite(e1) => {
                if e1 <= eta0 {
                    return Err(Error::NoAdmissibleWeights(format!(
                        "eta_1 = {e1} does not exceed eta_0 = {eta0}; the reference support is not of minimal cardinality"
                    )));
                }
                e1
            }
            _ => eta0 + k as f64,
        }
    };
    let on_support = if k == 0 { 0.0 } else { (top - eta0) / (k as f64 * (1.0 + slack)) };
    let off_support = match th.eta2 {
        ExtendedReal::Finite(e2) => (top - e2).max(0.0) + slack * (1.0 + (top - e2).abs()),
        _ => slack,
    };
    Ok(DVector::from_fn(th.r, |i, _| if t.contains(i) { on_support } else { off_support }))
}

/// Exact test of the rule `select_mu` targets.
pub fn check_mu_rule(th: &Thresholds, mu: &DVector<f64>) -> bool {
    let t = th.t_star;
    if mu.len() != th.r || mu.iter().any(|&v| !(v > 0.0)) {
        return false;
    }
    let Some(eta0) = th.eta0.finite() else { return false };
    let sum_t: f64 = t.indices().iter().map(|&i| mu[i]).sum();
    let top = if t.is_empty() {
        eta0
    } else {
        match th.eta1 {
            ExtendedReal::Finite(e1) => {
                if sum_t > e1 - eta0 {
                    return false;
                }
                e1
            }
            ExtendedReal::PosInfinity => eta0 + sum_t,
            ExtendedReal::NegInfinity => return false,
        }
    };
    match th.eta2 {
        ExtendedReal::NegInfinity => false,
        ExtendedReal::PosInfinity => true,
        ExtendedReal::Finite(e2) => t
            .complement(th.r)
            .indices()
            .iter()
            .all(|&j| mu[j] > (top - e2).max(0.0)),
    }
}

/// Minimum of the objective over the lattice `low + (high - low) k / (N - 1)`
/// in every coordinate. Test oracle only; dimension at most 4.
pub fn brute_force_grid(base: ProgramBase, low: f64, high: f64, points_per_axis: usize) -> Result<ExtendedReal> {
    let dim = match base {
        ProgramBase::Primal(p) => p.n(),
        ProgramBase::Dual(d) => d.dim(),
    };
    if dim > 4 {
        return Err(Error::InvalidParams(format!("grid oracle supports dimension <= 4, got {dim}")));
    }
    if !(2..=201).contains(&points_per_axis) || !(high > low) {
        return Err(Error::InvalidParams(
            "grid needs 2..=201 points per axis and low < high".into(),
        ));
    }
    let n = points_per_axis;
    let coord = |k: usize| low + (high - low) * k as f64 / (n - 1) as f64;
    let total = n.pow(dim as u32);
    let eval = |idx: usize| -> Result<ExtendedReal> {
        let mut rem = idx;
        let pt = DVector::from_fn(dim, |_, _| {
            let c = coord(rem % n);
            rem /= n;
            c
        });
        Ok(match base {
            ProgramBase::Primal(p) => p.objective(&pt, None)?.total,
            ProgramBase::Dual(d) => d.objective(&pt, None)?.total,
        })
    };
    (0..total)
        .into_par_iter()
        .map(eval)
        .try_reduce(|| ExtendedReal::PosInfinity, |a, b| Ok(a.min(b)))
}

//! Catalog of proper lsc convex functions used for `f` and `g`.
//!
//! Every atom exposes its value, a closed-form conjugate, its prox, and its
//! subdifferential (and that of its conjugate) as an explicit polyhedral
//! set so that the stationarity checks can search over it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{check_dim, Error, Result};
use crate::extended::ExtendedReal;
use crate::schema::{ext_vec, matrix_to_rows, rows_to_matrix, vec_of};
use crate::subsolver::qp::{self, QpProblem, QpStatus, SolverConfig};
use crate::tol::{domain_slack, inf_norm, zero_tol};

#[derive(Debug, Clone, PartialEq)]
pub enum AtomKind {
    Zero,
    /// `1/2 sum_{i in mask} (x_i - a_i)^2`; unmasked coordinates are free.
    HalfSquaredNorm { center: DVector<f64>, mask: Vec<bool> },
    /// `|x - a|_1`.
    L1Norm { center: DVector<f64> },
    IndicatorBox { lower: DVector<f64>, upper: DVector<f64> },
    IndicatorNonneg,
    /// Indicator of the origin.
    IndicatorZero,
    /// Indicator of `{x | Cx <= c}`.
    IndicatorPolyhedron { matrix: DMatrix<f64>, rhs: DVector<f64> },
    /// `<a, x> + indicator(|x|_inf <= 1)`, the conjugate of `L1Norm`.
    LinearPlusIndicatorInfBall { center: DVector<f64> },
    /// Indicator of `{x in R^2 | x_2 >= exp(x_1)}`: closed convex, not polyhedral.
    IndicatorExpEpigraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AtomJson", into = "AtomJson")]
pub struct ConvexAtom {
    pub kind: AtomKind,
    pub dim: usize,
}

/// A polyhedral set `{offset + G t | lo <= t <= hi}`, the form in which
/// subdifferentials are handed to the witness search.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradSet {
    pub offset: DVector<f64>,
    pub generators: DMatrix<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl SubgradSet {
    pub fn point(p: DVector<f64>) -> Self {
        let n = p.len();
        SubgradSet {
            offset: p,
            generators: DMatrix::zeros(n, 0),
            lo: DVector::zeros(0),
            hi: DVector::zeros(0),
        }
    }

    /// `offset + {t | lo <= t <= hi}` with coordinates having `lo = hi = 0`
    /// dropped from the generator list.
    pub fn boxed(offset: DVector<f64>, lo: &[f64], hi: &[f64]) -> Self {
        let n = offset.len();
        let free: Vec<usize> = (0..n).filter(|&i| !(lo[i] == 0.0 && hi[i] == 0.0)).collect();
        SubgradSet {
            generators: DMatrix::from_fn(n, free.len(), |i, k| if free[k] == i { 1.0 } else { 0.0 }),
            lo: DVector::from_iterator(free.len(), free.iter().map(|&i| lo[i])),
            hi: DVector::from_iterator(free.len(), free.iter().map(|&i| hi[i])),
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn n_params(&self) -> usize {
        self.generators.ncols()
    }

    pub fn at(&self, t: &DVector<f64>) -> DVector<f64> {
        &self.offset + &self.generators * t
    }
}

/// Linear description `{x | C x <= c, E x = e}` of a polyhedral domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRows {
    pub ineq: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub eq: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

impl LinearRows {
    pub fn empty(n: usize) -> Self {
        LinearRows {
            ineq: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            eq: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
        }
    }

    pub fn ncols(&self) -> usize {
        self.ineq.ncols()
    }

    /// Rows of the form `sign * x_i <= bound` for every finite bound.
    fn from_bounds(lower: &DVector<f64>, upper: &DVector<f64>) -> Self {
        let n = lower.len();
        let mut ineq = Vec::new();
        let mut rhs = Vec::new();
        let mut eq = Vec::new();
        let mut eq_rhs = Vec::new();
        for i in 0..n {
            if lower[i] == upper[i] {
                eq.push(i);
                eq_rhs.push(lower[i]);
                continue;
            }
            if upper[i].is_finite() {
                ineq.push((i, 1.0));
                rhs.push(upper[i]);
            }
            if lower[i].is_finite() {
                ineq.push((i, -1.0));
                rhs.push(-lower[i]);
            }
        }
        LinearRows {
            ineq: DMatrix::from_fn(ineq.len(), n, |k, j| if ineq[k].0 == j { ineq[k].1 } else { 0.0 }),
            ineq_rhs: DVector::from_vec(rhs),
            eq: DMatrix::from_fn(eq.len(), n, |k, j| if eq[k] == j { 1.0 } else { 0.0 }),
            eq_rhs: DVector::from_vec(eq_rhs),
        }
    }
}

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl ConvexAtom {
    fn check_vec(name: &str, v: &DVector<f64>) -> Result<()> {
        if v.is_empty() {
            return Err(Error::InvalidParams(format!("{name}: dimension must be positive")));
        }
        if !all_finite(v) {
            return Err(Error::InvalidParams(format!("{name}: center must be finite")));
        }
        Ok(())
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::positive_dim(dim)?;
        Ok(ConvexAtom { kind: AtomKind::Zero, dim })
    }

    pub fn half_sq_norm(center: DVector<f64>) -> Result<Self> {
        let mask = vec![true; center.len()];
        Self::half_sq_norm_masked(center, mask)
    }

    pub fn half_sq_norm_masked(center: DVector<f64>, mask: Vec<bool>) -> Result<Self> {
        Self::check_vec("half_sq_norm", &center)?;
        check_dim("half_sq_norm mask", center.len(), mask.len())?;
        let dim = center.len();
        Ok(ConvexAtom {
            kind: AtomKind::HalfSquaredNorm { center, mask },
            dim,
        })
    }

    pub fn l1_norm(center: DVector<f64>) -> Result<Self> {
        Self::check_vec("l1_norm", &center)?;
        let dim = center.len();
        Ok(ConvexAtom { kind: AtomKind::L1Norm { center }, dim })
    }

    pub fn linear_plus_inf_ball(center: DVector<f64>) -> Result<Self> {
        Self::check_vec("linear_plus_inf_ball", &center)?;
        let dim = center.len();
        Ok(ConvexAtom {
            kind: AtomKind::LinearPlusIndicatorInfBall { center },
            dim,
        })
    }

    pub fn indicator_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_dim("box bounds", lower.len(), upper.len())?;
        Self::positive_dim(lower.len())?;
        for i in 0..lower.len() {
            if lower[i].is_nan() || upper[i].is_nan() {
                return Err(Error::InvalidParams(format!("box bound {i} is NaN")));
            }
            if lower[i] > upper[i] || lower[i] == f64::INFINITY || upper[i] == f64::NEG_INFINITY {
                return Err(Error::InvalidParams(format!(
                    "box bound {i}: need L <= U with a nonempty interval, got [{}, {}]",
                    lower[i], upper[i]
                )));
            }
        }
        let dim = lower.len();
        Ok(ConvexAtom {
            kind: AtomKind::IndicatorBox { lower, upper },
            dim,
        })
    }

    pub fn nonneg(dim: usize) -> Result<Self> {
        Self::positive_dim(dim)?;
        Ok(ConvexAtom { kind: AtomKind::IndicatorNonneg, dim })
    }

    pub fn indicator_zero(dim: usize) -> Result<Self> {
        Self::positive_dim(dim)?;
        Ok(ConvexAtom { kind: AtomKind::IndicatorZero, dim })
    }

    /// `{x | Cx <= c}`; rejected when empty, since the atom must be proper.
    pub fn polyhedron(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        check_dim("polyhedron rhs", matrix.nrows(), rhs.len())?;
        Self::positive_dim(matrix.ncols())?;
        if !matrix.iter().all(|v| v.is_finite()) || !all_finite(&rhs) {
            return Err(Error::InvalidParams("polyhedron data must be finite".into()));
        }
        let dim = matrix.ncols();
        let atom = ConvexAtom {
            kind: AtomKind::IndicatorPolyhedron { matrix, rhs },
            dim,
        };
        let rows = atom.domain_rows()?;
        if !crate::subsolver::feasibility::rows_feasible(&rows, &SolverConfig::default()) {
            return Err(Error::InvalidParams("polyhedron is empty".into()));
        }
        Ok(atom)
    }

    pub fn exp_epigraph() -> Self {
        ConvexAtom {
            kind: AtomKind::IndicatorExpEpigraph,
            dim: 2,
        }
    }

    fn positive_dim(dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::InvalidParams("atom dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            AtomKind::Zero => "zero",
            AtomKind::HalfSquaredNorm { .. } => "half_sq_norm",
            AtomKind::L1Norm { .. } => "l1_norm",
            AtomKind::IndicatorBox { .. } => "box",
            AtomKind::IndicatorNonneg => "nonneg",
            AtomKind::IndicatorZero => "indicator_zero",
            AtomKind::IndicatorPolyhedron { .. } => "polyhedron",
            AtomKind::LinearPlusIndicatorInfBall { .. } => "linear_plus_inf_ball",
            AtomKind::IndicatorExpEpigraph => "exp_epigraph",
        }
    }

    pub fn is_polyhedral(&self) -> bool {
        !matches!(self.kind, AtomKind::IndicatorExpEpigraph)
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self.kind,
            AtomKind::IndicatorBox { .. }
                | AtomKind::IndicatorNonneg
                | AtomKind::IndicatorZero
                | AtomKind::IndicatorPolyhedron { .. }
                | AtomKind::IndicatorExpEpigraph
        )
    }

    pub fn has_full_domain(&self) -> bool {
        matches!(
            self.kind,
            AtomKind::Zero | AtomKind::HalfSquaredNorm { .. } | AtomKind::L1Norm { .. }
        )
    }

    /// Whether the conjugate has a closed form in the catalog.
    pub fn has_conjugate(&self) -> bool {
        !matches!(self.kind, AtomKind::IndicatorPolyhedron { .. })
    }

    /// Lower bound of the function over its domain, when bounded below.
    pub fn infimum(&self) -> Option<f64> {
        match &self.kind {
            AtomKind::LinearPlusIndicatorInfBall { center } => Some(-center.lp_norm(1)),
            _ => Some(0.0),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<ExtendedReal> {
        check_dim(self.name(), self.dim, x.len())?;
        let inf = ExtendedReal::PosInfinity;
        Ok(match &self.kind {
            AtomKind::Zero => ExtendedReal::ZERO,
            AtomKind::HalfSquaredNorm { center, mask } => {
                let v: f64 = (0..self.dim)
                    .filter(|&i| mask[i])
                    .map(|i| 0.5 * (x[i] - center[i]).powi(2))
                    .sum();
                ExtendedReal::Finite(v)
            }
            AtomKind::L1Norm { center } => ExtendedReal::Finite((x - center).lp_norm(1)),
            AtomKind::LinearPlusIndicatorInfBall { center } => {
                if inf_norm(x) <= 1.0 + domain_slack(x) {
                    ExtendedReal::Finite(center.dot(x))
                } else {
                    inf
                }
            }
            _ => {
                if self.in_domain(x) {
                    ExtendedReal::ZERO
                } else {
                    inf
                }
            }
        })
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        let s = domain_slack(x);
        match &self.kind {
            AtomKind::Zero | AtomKind::HalfSquaredNorm { .. } | AtomKind::L1Norm { .. } => true,
            AtomKind::LinearPlusIndicatorInfBall { .. } => inf_norm(x) <= 1.0 + s,
            AtomKind::IndicatorBox { lower, upper } => {
                (0..self.dim).all(|i| x[i] >= lower[i] - s && x[i] <= upper[i] + s)
            }
            AtomKind::IndicatorNonneg => x.iter().all(|&v| v >= -s),
            AtomKind::IndicatorZero => x.iter().all(|&v| v.abs() <= s),
            AtomKind::IndicatorPolyhedron { matrix, rhs } => {
                let cx = matrix * x;
                (0..rhs.len()).all(|i| cx[i] <= rhs[i] + s)
            }
            AtomKind::IndicatorExpEpigraph => x[1] >= x[0].exp() - s,
        }
    }

    /// Closed-form conjugate `sup_x <q,x> - psi(x)`. Membership in the
    /// conjugate's domain uses the same slack as the primal domain tests.
    pub fn conjugate_eval(&self, q: &DVector<f64>) -> Result<ExtendedReal> {
        check_dim(self.name(), self.dim, q.len())?;
        let s = domain_slack(q);
        let inf = ExtendedReal::PosInfinity;
        let fin = ExtendedReal::Finite;
        Ok(match &self.kind {
            AtomKind::Zero => {
                if inf_norm(q) <= s {
                    ExtendedReal::ZERO
                } else {
                    inf
                }
            }
            AtomKind::HalfSquaredNorm { center, mask } => {
                let mut v = 0.0;
                for i in 0..self.dim {
                    if mask[i] {
                        v += 0.5 * q[i] * q[i] + center[i] * q[i];
                    } else if q[i].abs() > s {
                        return Ok(inf);
                    }
                }
                fin(v)
            }
            AtomKind::L1Norm { center } => {
                if inf_norm(q) <= 1.0 + s {
                    fin(center.dot(&q.map(|v| v.clamp(-1.0, 1.0))))
                } else {
                    inf
                }
            }
            AtomKind::LinearPlusIndicatorInfBall { center } => fin((q - center).lp_norm(1)),
            AtomKind::IndicatorBox { lower, upper } => {
                let mut v = 0.0;
                for i in 0..self.dim {
                    let (qi, bound) = if q[i] > 0.0 {
                        (q[i], upper[i])
                    } else if q[i] < 0.0 {
                        (q[i], lower[i])
                    } else {
                        continue;
                    };
                    if bound.is_finite() {
                        v += qi * bound;
                    } else if qi.abs() > s {
                        return Ok(inf);
                    }
                }
                fin(v)
            }
            AtomKind::IndicatorNonneg => {
                if q.iter().all(|&v| v <= s) {
                    ExtendedReal::ZERO
                } else {
                    inf
                }
            }
            AtomKind::IndicatorZero => ExtendedReal::ZERO,
            AtomKind::IndicatorPolyhedron { .. } => {
                return Err(Error::UnsupportedConjugate("polyhedron"))
            }
            AtomKind::IndicatorExpEpigraph => {
                let (q1, q2) = (q[0], q[1]);
                if q1 > 0.0 && q2 < 0.0 {
                    fin(q1 * (q1 / -q2).ln() - q1)
                } else if q1.abs() <= s && q2 <= s {
                    ExtendedReal::ZERO
                } else {
                    inf
                }
            }
        })
    }

    /// `argmin_p psi(p) + |p - v|^2 / (2t)`.
    pub fn prox(&self, v: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        check_dim(self.name(), self.dim, v.len())?;
        if !(t > 0.0) {
            return Err(Error::InvalidParams(format!("prox step must be positive, got {t}")));
        }
        Ok(match &self.kind {
            AtomKind::Zero => v.clone(),
            AtomKind::HalfSquaredNorm { center, mask } => DVector::from_fn(self.dim, |i, _| {
                if mask[i] {
                    (v[i] + t * center[i]) / (1.0 + t)
                } else {
                    v[i]
                }
            }),
            AtomKind::L1Norm { center } => DVector::from_fn(self.dim, |i, _| {
                let d = v[i] - center[i];
                center[i] + d.signum() * (d.abs() - t).max(0.0)
            }),
            AtomKind::LinearPlusIndicatorInfBall { center } => {
                DVector::from_fn(self.dim, |i, _| (v[i] - t * center[i]).clamp(-1.0, 1.0))
            }
            AtomKind::IndicatorBox { lower, upper } => {
                DVector::from_fn(self.dim, |i, _| v[i].max(lower[i]).min(upper[i]))
            }
            AtomKind::IndicatorNonneg => v.map(|x| x.max(0.0)),
            AtomKind::IndicatorZero => DVector::zeros(self.dim),
            AtomKind::IndicatorPolyhedron { matrix, rhs } => {
                let prob = QpProblem {
                    p: DMatrix::identity(self.dim, self.dim),
                    q: -v,
                    a: matrix.clone(),
                    l: DVector::from_element(rhs.len(), f64::NEG_INFINITY),
                    u: rhs.clone(),
                };
                let out = qp::solve(&prob, &SolverConfig::default());
                if out.status != QpStatus::Solved {
                    return Err(Error::Indeterminate(format!(
                        "polyhedron projection ended with {:?}",
                        out.status
                    )));
                }
                out.x
            }
            AtomKind::IndicatorExpEpigraph => project_exp_epigraph(v),
        })
    }

    /// Fenchel–Young test of `q in d psi(x)`: `psi(x) + psi*(q) - <x,q> <= tol`.
    pub fn subdiff_check(&self, x: &DVector<f64>, q: &DVector<f64>, tol: f64) -> Result<Certificate> {
        check_dim(self.name(), self.dim, x.len())?;
        check_dim(self.name(), self.dim, q.len())?;
        let fx = self.eval(x)?;
        let Some(fx) = fx.finite() else {
            return Ok(Certificate::domain_failure("x is outside the domain"));
        };
        let conj = match &self.kind {
            AtomKind::IndicatorPolyhedron { matrix, rhs } => support_polyhedron(matrix, rhs, q)?,
            _ => self.conjugate_eval(q)?.to_f64(),
        };
        let residual = (fx + conj - x.dot(q)).abs();
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        Ok(Certificate::from_bool(residual <= tol, residual))
    }

    /// Membership in `dom psi`, or in its relative interior when asked.
    /// Polyhedral atoms answer plain membership either way.
    pub fn domain_check(&self, x: &DVector<f64>, want_relative_interior: bool) -> Certificate {
        if x.len() != self.dim {
            return Certificate::domain_failure(format!(
                "dimension {} does not match atom dimension {}",
                x.len(),
                self.dim
            ));
        }
        if self.has_full_domain() {
            return Certificate::pass(0.0);
        }
        if !self.in_domain(x) {
            return Certificate::domain_failure("point is outside the domain");
        }
        if want_relative_interior && !self.is_polyhedral() {
            // exp epigraph: the interior is x_2 > exp(x_1)
            let gap = x[1] - x[0].exp();
            if gap <= domain_slack(x) {
                return Certificate::fail(gap)
                    .with_note("point is on the boundary, not in the relative interior");
            }
            return Certificate::pass(gap);
        }
        Certificate::pass(0.0)
    }

    /// `d psi(x)` as a polyhedral set; errors outside the domain.
    pub fn subdiff_set(&self, x: &DVector<f64>) -> Result<SubgradSet> {
        check_dim(self.name(), self.dim, x.len())?;
        if !self.in_domain(x) {
            return Err(Error::EmptySubdifferential(format!(
                "{} at a point outside its domain",
                self.name()
            )));
        }
        let n = self.dim;
        let tol = zero_tol(x);
        let zeros = DVector::zeros(n);
        Ok(match &self.kind {
            AtomKind::Zero => SubgradSet::point(zeros),
            AtomKind::HalfSquaredNorm { center, mask } => SubgradSet::point(DVector::from_fn(n, |i, _| {
                if mask[i] {
                    x[i] - center[i]
                } else {
                    0.0
                }
            })),
            AtomKind::L1Norm { center } => {
                let d = x - center;
                let tied: Vec<bool> = d.iter().map(|v| v.abs() <= tol).collect();
                let offset = DVector::from_fn(n, |i, _| if tied[i] { 0.0 } else { d[i].signum() });
                let lo: Vec<f64> = tied.iter().map(|&t| if t { -1.0 } else { 0.0 }).collect();
                let hi: Vec<f64> = tied.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
                SubgradSet::boxed(offset, &lo, &hi)
            }
            AtomKind::LinearPlusIndicatorInfBall { center } => {
                let ones = DVector::from_element(n, 1.0);
                normal_cone_box(center.clone(), x, &(-&ones), &ones, tol)
            }
            AtomKind::IndicatorBox { lower, upper } => normal_cone_box(zeros, x, lower, upper, tol),
            AtomKind::IndicatorNonneg => {
                let lower = DVector::zeros(n);
                let upper = DVector::from_element(n, f64::INFINITY);
                normal_cone_box(zeros, x, &lower, &upper, tol)
            }
            AtomKind::IndicatorZero => {
                SubgradSet::boxed(zeros, &vec![f64::NEG_INFINITY; n], &vec![f64::INFINITY; n])
            }
            AtomKind::IndicatorPolyhedron { matrix, rhs } => {
                let cx = matrix * x;
                let ptol = tol * (1.0 + matrix.amax());
                let act: Vec<usize> = (0..rhs.len()).filter(|&i| cx[i] >= rhs[i] - ptol).collect();
                SubgradSet {
                    offset: zeros,
                    generators: DMatrix::from_fn(n, act.len(), |j, k| matrix[(act[k], j)]),
                    lo: DVector::zeros(act.len()),
                    hi: DVector::from_element(act.len(), f64::INFINITY),
                }
            }
            AtomKind::IndicatorExpEpigraph => {
                let e = x[0].exp();
                if x[1] - e > tol {
                    SubgradSet::point(zeros)
                } else {
                    SubgradSet {
                        offset: zeros,
                        generators: DMatrix::from_column_slice(2, 1, &[e, -1.0]),
                        lo: DVector::zeros(1),
                        hi: DVector::from_element(1, f64::INFINITY),
                    }
                }
            }
        })
    }

    /// `d psi*(q)`, i.e. the set of maximizers of `<q,x> - psi(x)`.
    pub fn conj_subdiff_set(&self, q: &DVector<f64>) -> Result<SubgradSet> {
        check_dim(self.name(), self.dim, q.len())?;
        if !self.conjugate_eval(q)?.is_finite() {
            return Err(Error::EmptySubdifferential(format!(
                "conjugate of {} at a point outside its domain",
                self.name()
            )));
        }
        let n = self.dim;
        let tol = zero_tol(q);
        let zeros = DVector::zeros(n);
        let free = vec![f64::NEG_INFINITY; n];
        let free_hi = vec![f64::INFINITY; n];
        Ok(match &self.kind {
            AtomKind::Zero => SubgradSet::boxed(zeros, &free, &free_hi),
            AtomKind::HalfSquaredNorm { center, mask } => {
                let offset = DVector::from_fn(n, |i, _| if mask[i] { q[i] + center[i] } else { 0.0 });
                let lo: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::NEG_INFINITY }).collect();
                let hi: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
                SubgradSet::boxed(offset, &lo, &hi)
            }
            AtomKind::L1Norm { center } => {
                let ones = DVector::from_element(n, 1.0);
                normal_cone_box(center.clone(), q, &(-&ones), &ones, tol)
            }
            AtomKind::LinearPlusIndicatorInfBall { center } => {
                let l1 = ConvexAtom::l1_norm(center.clone())?;
                l1.subdiff_set(q)?
            }
            AtomKind::IndicatorBox { lower, upper } => {
                let mut offset = DVector::zeros(n);
                let mut lo = vec![0.0; n];
                let mut hi = vec![0.0; n];
                for i in 0..n {
                    if q[i] > tol {
                        offset[i] = upper[i];
                    } else if q[i] < -tol {
                        offset[i] = lower[i];
                    } else if lower[i].is_finite() {
                        offset[i] = lower[i];
                        hi[i] = upper[i] - lower[i];
                    } else if upper[i].is_finite() {
                        offset[i] = upper[i];
                        lo[i] = f64::NEG_INFINITY;
                    } else {
                        lo[i] = f64::NEG_INFINITY;
                        hi[i] = f64::INFINITY;
                    }
                }
                SubgradSet::boxed(offset, &lo, &hi)
            }
            AtomKind::IndicatorNonneg => {
                let lo = vec![0.0; n];
                let hi: Vec<f64> = q.iter().map(|&v| if v >= -tol { f64::INFINITY } else { 0.0 }).collect();
                SubgradSet::boxed(zeros, &lo, &hi)
            }
            AtomKind::IndicatorZero => SubgradSet::point(zeros),
            AtomKind::IndicatorPolyhedron { .. } => {
                return Err(Error::UnsupportedConjugate("polyhedron"))
            }
            AtomKind::IndicatorExpEpigraph => {
                if q[0] > 0.0 && q[1] < 0.0 {
                    let ratio = q[0] / -q[1];
                    SubgradSet::point(DVector::from_vec(vec![ratio.ln(), ratio]))
                } else {
                    return Err(Error::UnsupportedAtom(
                        "exp_epigraph conjugate subdifferential is not polyhedral here",
                    ));
                }
            }
        })
    }

    /// `dom psi` as linear rows.
    pub fn domain_rows(&self) -> Result<LinearRows> {
        let n = self.dim;
        Ok(match &self.kind {
            AtomKind::Zero | AtomKind::HalfSquaredNorm { .. } | AtomKind::L1Norm { .. } => {
                LinearRows::empty(n)
            }
            AtomKind::LinearPlusIndicatorInfBall { .. } => LinearRows::from_bounds(
                &DVector::from_element(n, -1.0),
                &DVector::from_element(n, 1.0),
            ),
            AtomKind::IndicatorBox { lower, upper } => LinearRows::from_bounds(lower, upper),
            AtomKind::IndicatorNonneg => {
                LinearRows::from_bounds(&DVector::zeros(n), &DVector::from_element(n, f64::INFINITY))
            }
            AtomKind::IndicatorZero => LinearRows::from_bounds(&DVector::zeros(n), &DVector::zeros(n)),
            AtomKind::IndicatorPolyhedron { matrix, rhs } => LinearRows {
                ineq: matrix.clone(),
                ineq_rhs: rhs.clone(),
                eq: DMatrix::zeros(0, n),
                eq_rhs: DVector::zeros(0),
            },
            AtomKind::IndicatorExpEpigraph => {
                return Err(Error::UnsupportedAtom("exp_epigraph has no linear description"))
            }
        })
    }

    /// `dom psi*` as linear rows.
    pub fn conjugate_domain_rows(&self) -> Result<LinearRows> {
        let n = self.dim;
        let inf = f64::INFINITY;
        Ok(match &self.kind {
            AtomKind::Zero => LinearRows::from_bounds(&DVector::zeros(n), &DVector::zeros(n)),
            AtomKind::HalfSquaredNorm { mask, .. } => LinearRows::from_bounds(
                &DVector::from_fn(n, |i, _| if mask[i] { -inf } else { 0.0 }),
                &DVector::from_fn(n, |i, _| if mask[i] { inf } else { 0.0 }),
            ),
            AtomKind::L1Norm { .. } => LinearRows::from_bounds(
                &DVector::from_element(n, -1.0),
                &DVector::from_element(n, 1.0),
            ),
            AtomKind::LinearPlusIndicatorInfBall { .. } | AtomKind::IndicatorZero => LinearRows::empty(n),
            AtomKind::IndicatorBox { lower, upper } => LinearRows::from_bounds(
                &DVector::from_fn(n, |i, _| if lower[i].is_finite() { -inf } else { 0.0 }),
                &DVector::from_fn(n, |i, _| if upper[i].is_finite() { inf } else { 0.0 }),
            ),
            AtomKind::IndicatorNonneg => {
                LinearRows::from_bounds(&DVector::from_element(n, -inf), &DVector::zeros(n))
            }
            AtomKind::IndicatorPolyhedron { .. } => {
                return Err(Error::UnsupportedConjugate("polyhedron"))
            }
            AtomKind::IndicatorExpEpigraph => {
                return Err(Error::UnsupportedAtom("exp_epigraph conjugate domain is not polyhedral"))
            }
        })
    }
}

/// `offset + N_[lower,upper](x)`.
fn normal_cone_box(
    offset: DVector<f64>,
    x: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    tol: f64,
) -> SubgradSet {
    let n = x.len();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for i in 0..n {
        if x[i] <= lower[i] + tol {
            lo[i] = f64::NEG_INFINITY;
        }
        if x[i] >= upper[i] - tol {
            hi[i] = f64::INFINITY;
        }
    }
    SubgradSet::boxed(offset, &lo, &hi)
}

/// `sup {<q,x> | Cx <= c}` by LP.
fn support_polyhedron(matrix: &DMatrix<f64>, rhs: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    let n = q.len();
    let prob = QpProblem {
        p: DMatrix::zeros(n, n),
        q: -q,
        a: matrix.clone(),
        l: DVector::from_element(rhs.len(), f64::NEG_INFINITY),
        u: rhs.clone(),
    };
    let out = qp::solve(&prob, &SolverConfig::default());
    match out.status {
        QpStatus::Solved => Ok(-out.objective),
        QpStatus::Unbounded => Ok(f64::INFINITY),
        s => Err(Error::Indeterminate(format!("support function LP ended with {s:?}"))),
    }
}

/// Euclidean projection onto `{x_2 >= exp(x_1)}`. Outside the set the
/// projection lies on the boundary curve at the unique root of
/// `p - v_1 + e^{2p} - v_2 e^p`, which sits below `v_1`.
fn project_exp_epigraph(v: &DVector<f64>) -> DVector<f64> {
    if v[1] >= v[0].exp() {
        return v.clone();
    }
    let h = |p: f64| p - v[0] + (2.0 * p).exp() - v[1] * p.exp();
    let mut hi = v[0];
    let mut step = 1.0;
    let mut lo = hi - step;
    while h(lo) > 0.0 {
        step *= 2.0;
        lo = hi - step;
    }
    // bisection to machine precision, then one Newton polish
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut p = 0.5 * (lo + hi);
    let dh = 1.0 + 2.0 * (2.0 * p).exp() - v[1] * p.exp();
    if dh > 0.0 {
        let newton = p - h(p) / dh;
        if newton.is_finite() && (newton - p).abs() <= (hi - lo).max(1e-300) * 4.0 {
            p = newton;
        }
    }
    DVector::from_vec(vec![p, p.exp()])
}

/// `{kind, dim, params}` wire form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomJson {
    pub kind: String,
    pub dim: usize,
    #[serde(default)]
    pub params: AtomParams,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_ext_vec")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_ext_vec")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<Vec<f64>>,
}

mod opt_ext_vec {
    use super::ext_vec;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => ext_vec::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "ext_vec")] Vec<f64>);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

impl From<ConvexAtom> for AtomJson {
    fn from(a: ConvexAtom) -> Self {
        let mut params = AtomParams::default();
        match &a.kind {
            AtomKind::HalfSquaredNorm { center, mask } => {
                params.center = Some(vec_of(center));
                if mask.iter().any(|m| !m) {
                    params.mask = Some(mask.clone());
                }
            }
            AtomKind::L1Norm { center } | AtomKind::LinearPlusIndicatorInfBall { center } => {
                params.center = Some(vec_of(center));
            }
            AtomKind::IndicatorBox { lower, upper } => {
                params.lower = Some(vec_of(lower));
                params.upper = Some(vec_of(upper));
            }
            AtomKind::IndicatorPolyhedron { matrix, rhs } => {
                params.matrix = Some(matrix_to_rows(matrix));
                params.rhs = Some(vec_of(rhs));
            }
            _ => {}
        }
        AtomJson {
            kind: a.name().to_string(),
            dim: a.dim,
            params,
        }
    }
}

impl TryFrom<AtomJson> for ConvexAtom {
    type Error = Error;

    fn try_from(j: AtomJson) -> Result<Self> {
        let n = j.dim;
        let p = j.params;
        let need = |v: Option<Vec<f64>>, field: &str| -> Result<DVector<f64>> {
            let v = v.ok_or_else(|| {
                Error::InvalidParams(format!("atom `{}`: missing params.{field}", j.kind))
            })?;
            check_dim(&format!("atom `{}` params.{field}", j.kind), n, v.len())?;
            Ok(DVector::from_vec(v))
        };
        let center_or_zero = |v: Option<Vec<f64>>| -> Result<DVector<f64>> {
            match v {
                Some(_) => need(v, "center"),
                None => Ok(DVector::zeros(n)),
            }
        };
        let atom = match j.kind.as_str() {
            "zero" => ConvexAtom::zero(n)?,
            "half_sq_norm" => {
                let center = center_or_zero(p.center)?;
                let mask = p.mask.unwrap_or_else(|| vec![true; n]);
                ConvexAtom::half_sq_norm_masked(center, mask)?
            }
            "l1_norm" => ConvexAtom::l1_norm(center_or_zero(p.center)?)?,
            "linear_plus_inf_ball" => ConvexAtom::linear_plus_inf_ball(center_or_zero(p.center)?)?,
            "box" => ConvexAtom::indicator_box(need(p.lower, "lower")?, need(p.upper, "upper")?)?,
            "nonneg" => ConvexAtom::nonneg(n)?,
            "indicator_zero" => ConvexAtom::indicator_zero(n)?,
            "polyhedron" => {
                let rows = p.matrix.ok_or_else(|| {
                    Error::InvalidParams("atom `polyhedron`: missing params.matrix".into())
                })?;
                let m = rows_to_matrix(&rows, Some(n), "polyhedron matrix")?;
                check_dim("polyhedron matrix columns", n, m.ncols())?;
                let rhs = p
                    .rhs
                    .ok_or_else(|| Error::InvalidParams("atom `polyhedron`: missing params.rhs".into()))?;
                ConvexAtom::polyhedron(m, DVector::from_vec(rhs))?
            }
            "exp_epigraph" => {
                check_dim("exp_epigraph", 2, n)?;
                ConvexAtom::exp_epigraph()
            }
            other => return Err(Error::InvalidParams(format!("unknown atom kind `{other}`"))),
        };
        Ok(atom)
    }
}

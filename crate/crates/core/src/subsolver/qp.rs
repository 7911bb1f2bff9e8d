//! Dense operator-splitting solver for convex quadratic programs
//!
//! ```text
//! minimize    1/2 x'Px + q'x
//! subject to  l <= Ax <= u
//! ```
//!
//! The iteration is the relaxed ADMM splitting on `(x, z = Ax)` with Ruiz
//! equilibration and adaptive penalty. Once the iterates settle, the active
//! set is read off the multipliers and the reduced KKT system is solved
//! directly ("polishing"), which is what brings desk-scale problems to
//! 1e-10-level accuracy. Unboundedness is only reported after a recession LP
//! has produced a certified direction; infeasibility comes with a Farkas-type
//! multiplier vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::tol::inf_norm;

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
}

/// Solver knobs; the defaults target dense problems with a few hundred
/// variables at most.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub divergence_threshold: f64,
    pub relaxation: f64,
    pub rho: f64,
    pub sigma: f64,
    pub check_interval: usize,
    pub scaling_iters: usize,
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 100_000,
            divergence_threshold: 1e6,
            relaxation: 1.6,
            rho: 0.1,
            sigma: 1e-6,
            check_interval: 10,
            scaling_iters: 10,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Solved,
    PrimalInfeasible,
    Unbounded,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct QpResult {
    pub status: QpStatus,
    pub x: DVector<f64>,
    /// Multipliers: `y_i > 0` only at the upper bound, `y_i < 0` only at the lower.
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub prim_res: f64,
    pub dual_res: f64,
    /// Normalized Farkas multipliers when `PrimalInfeasible`.
    pub farkas: Option<DVector<f64>>,
    /// Certified recession direction when `Unbounded`; `x` is then a feasible point.
    pub direction: Option<DVector<f64>>,
    pub polished: bool,
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_SCALE: f64 = 1e3;
const POLISH_DELTA: f64 = 1e-7;
const POLISH_REFINE: usize = 30;
const INFEAS_EPS: f64 = 1e-6;

impl QpProblem {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    fn validate(&self) {
        let (n, m) = (self.n(), self.m());
        assert_eq!(self.p.shape(), (n, n), "P shape");
        assert_eq!(self.a.shape(), (m, n), "A shape");
        assert_eq!(self.u.len(), m, "u length");
        for i in 0..m {
            assert!(
                !(self.l[i] > self.u[i]),
                "row {i}: lower bound {} exceeds upper bound {}",
                self.l[i],
                self.u[i]
            );
        }
    }

    /// Unscaled primal and dual residuals with their normalizers.
    fn residuals(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> Residuals {
        let ax = &self.a * x;
        let px = &self.p * x;
        let aty = self.a.transpose() * y;
        let prim = inf_norm(&(&ax - z));
        let dual = inf_norm(&(&px + &self.q + &aty));
        Residuals {
            prim,
            dual,
            prim_scale: 1.0 + inf_norm(&ax).max(inf_norm(z)),
            dual_scale: 1.0 + inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&self.q)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Residuals {
    prim: f64,
    dual: f64,
    prim_scale: f64,
    dual_scale: f64,
}

impl Residuals {
    fn converged(&self, tol: f64) -> bool {
        self.prim <= tol * self.prim_scale && self.dual <= tol * self.dual_scale
    }
}

struct Scaled {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

fn equilibrate(prob: &QpProblem, iters: usize) -> Scaled {
    let (n, m) = (prob.n(), prob.m());
    let mut p = prob.p.clone();
    let mut a = prob.a.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let clamp = |norm: f64| {
        if norm < 1e-4 {
            1.0
        } else {
            (1.0 / norm.sqrt()).clamp(1e-4, 1e4)
        }
    };
    for _ in 0..iters {
        let mut dd = DVector::zeros(n);
        for j in 0..n {
            let cp = p.column(j).amax();
            let ca = if m > 0 { a.column(j).amax() } else { 0.0 };
            dd[j] = clamp(cp.max(ca));
        }
        let mut ee = DVector::zeros(m);
        for i in 0..m {
            ee[i] = clamp(a.row(i).amax());
        }
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] *= dd[i] * dd[j];
            }
            for i in 0..m {
                a[(i, j)] *= ee[i] * dd[j];
            }
        }
        d.component_mul_assign(&dd);
        e.component_mul_assign(&ee);
    }
    let mut q = prob.q.component_mul(&d);
    let mean_p = if n > 0 {
        (0..n).map(|j| p.column(j).amax()).sum::<f64>() / n as f64
    } else {
        0.0
    };
    let cost_norm = mean_p.max(inf_norm(&q));
    let c = if cost_norm < 1e-4 {
        1.0
    } else {
        (1.0 / cost_norm).clamp(1e-4, 1e4)
    };
    p *= c;
    q *= c;
    let l = prob.l.component_mul(&e);
    let u = prob.u.component_mul(&e);
    Scaled { p, q, a, l, u, d, e, c }
}

impl Scaled {
    fn unscale_x(&self, xs: &DVector<f64>) -> DVector<f64> {
        xs.component_mul(&self.d)
    }

    fn unscale_y(&self, ys: &DVector<f64>) -> DVector<f64> {
        ys.component_mul(&self.e) / self.c
    }

    fn unscale_z(&self, zs: &DVector<f64>) -> DVector<f64> {
        zs.component_div(&self.e)
    }
}

fn rho_vector(l: &DVector<f64>, u: &DVector<f64>, rho: f64) -> DVector<f64> {
    DVector::from_iterator(
        l.len(),
        l.iter().zip(u.iter()).map(|(&lo, &hi)| {
            if lo == hi {
                (RHO_EQ_SCALE * rho).min(RHO_MAX)
            } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                RHO_MIN
            } else {
                rho
            }
        }),
    )
}

fn factor(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    rho: &DVector<f64>,
    sigma: f64,
) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
    let n = p.nrows();
    let mut k = p.clone();
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    let scaled_a = DMatrix::from_fn(a.nrows(), n, |i, j| a[(i, j)] * rho[i]);
    k += a.transpose() * scaled_a;
    // Symmetrize against round-off before factoring.
    let k = (&k + k.transpose()) * 0.5;
    k.cholesky().expect("ADMM system matrix is positive definite")
}

fn clamp_box(v: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        v.len(),
        v.iter()
            .zip(l.iter().zip(u.iter()))
            .map(|(&x, (&lo, &hi))| x.max(lo).min(hi)),
    )
}

pub fn solve(prob: &QpProblem, cfg: &SolverConfig) -> QpResult {
    solve_inner(prob, cfg, true)
}

fn solve_inner(prob: &QpProblem, cfg: &SolverConfig, certify: bool) -> QpResult {
    prob.validate();
    let (n, m) = (prob.n(), prob.m());
    let s = equilibrate(prob, cfg.scaling_iters);
    let alpha = cfg.relaxation;
    let sigma = cfg.sigma;
    let mut rho = cfg.rho;
    let mut rho_vec = rho_vector(&s.l, &s.u, rho);
    let mut chol = factor(&s.p, &s.a, &rho_vec, sigma);

    let mut xs = DVector::zeros(n);
    let mut zs = clamp_box(&DVector::zeros(m), &s.l, &s.u);
    let mut ys = DVector::zeros(m);
    let at = s.a.transpose();

    let mut next_recession_check = 0usize;
    let mut polish_failures = 0usize;
    let mut last_polish_iter = 0usize;

    for k in 1..=cfg.max_iter.max(1) {
        let x_prev = xs.clone();
        let y_prev = ys.clone();
        let z_prev = zs.clone();

        let mut rhs = &x_prev * sigma - &s.q;
        if m > 0 {
            let w = rho_vec.component_mul(&z_prev) - &y_prev;
            rhs += &at * w;
        }
        let x_tilde = chol.solve(&rhs);
        let z_tilde = &s.a * &x_tilde;
        xs = &x_tilde * alpha + &x_prev * (1.0 - alpha);
        let z_relaxed = &z_tilde * alpha + &z_prev * (1.0 - alpha);
        zs = clamp_box(&(&z_relaxed + y_prev.component_div(&rho_vec)), &s.l, &s.u);
        ys = &y_prev + rho_vec.component_mul(&(&z_relaxed - &zs));

        if k % cfg.check_interval != 0 && k != cfg.max_iter {
            continue;
        }

        let x = s.unscale_x(&xs);
        let y = s.unscale_y(&ys);
        let z = s.unscale_z(&zs);
        let res = prob.residuals(&x, &y, &z);

        let settled = res.prim <= 1e-3 * res.prim_scale && res.dual <= 1e-3 * res.dual_scale;
        let periodic = k - last_polish_iter >= 20 * cfg.check_interval * (1 + polish_failures.min(20));
        if cfg.polish && (res.converged(cfg.tol) || settled || periodic) {
            last_polish_iter = k;
            if let Some(out) = polish(prob, &s, &ys, &zs, cfg.tol) {
                return QpResult { iterations: k, ..out };
            }
            polish_failures += 1;
        }
        if res.converged(cfg.tol) {
            return QpResult {
                status: QpStatus::Solved,
                objective: prob.objective(&x),
                x,
                y,
                z,
                iterations: k,
                prim_res: res.prim,
                dual_res: res.dual,
                farkas: None,
                direction: None,
                polished: false,
            };
        }

        if m > 0 {
            let dy = s.unscale_y(&(&ys - &y_prev));
            if let Some(cert) = farkas_candidate(prob, &dy) {
                return QpResult {
                    status: QpStatus::PrimalInfeasible,
                    objective: f64::INFINITY,
                    x,
                    y,
                    z,
                    iterations: k,
                    prim_res: res.prim,
                    dual_res: res.dual,
                    farkas: Some(cert),
                    direction: None,
                    polished: false,
                };
            }
        }

        if certify && k >= next_recession_check {
            let dx = s.unscale_x(&(&xs - &x_prev));
            let diverging = inf_norm(&x) > cfg.divergence_threshold
                || looks_unbounded(prob, &dx);
            if diverging {
                if let Some(out) = certify_unbounded(prob, cfg) {
                    return QpResult { iterations: k, ..out };
                }
                next_recession_check = 2 * k;
            }
        }

        // Penalty adaptation in the scaled space.
        let ax = &s.a * &xs;
        let prim_s = inf_norm(&(&ax - &zs)) / inf_norm(&ax).max(inf_norm(&zs)).max(1e-12);
        let dual_s = inf_norm(&(&s.p * &xs + &s.q + &at * &ys))
            / inf_norm(&(&s.p * &xs))
                .max(inf_norm(&(&at * &ys)))
                .max(inf_norm(&s.q))
                .max(1e-12);
        if m > 0 && prim_s > 0.0 && dual_s > 0.0 {
            let new_rho = (rho * (prim_s / dual_s).sqrt()).clamp(RHO_MIN, RHO_MAX);
            if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                rho = new_rho;
                rho_vec = rho_vector(&s.l, &s.u, rho);
                chol = factor(&s.p, &s.a, &rho_vec, sigma);
            }
        }
    }

    let x = s.unscale_x(&xs);
    let y = s.unscale_y(&ys);
    let z = s.unscale_z(&zs);
    if certify {
        if let Some(out) = certify_unbounded(prob, cfg) {
            return QpResult { iterations: cfg.max_iter, ..out };
        }
    }
    let res = prob.residuals(&x, &y, &z);
    QpResult {
        status: QpStatus::MaxIterations,
        objective: prob.objective(&x),
        x,
        y,
        z,
        iterations: cfg.max_iter,
        prim_res: res.prim,
        dual_res: res.dual,
        farkas: None,
        direction: None,
        polished: false,
    }
}

/// Tests whether `dy` (normalized) is a Farkas certificate: `A'y = 0` and
/// the support value `u'y+ + l'y-` is negative.
fn farkas_candidate(prob: &QpProblem, dy: &DVector<f64>) -> Option<DVector<f64>> {
    let norm = inf_norm(dy);
    if norm < 1e-14 {
        return None;
    }
    let mut y = dy / norm;
    for i in 0..y.len() {
        if (y[i] > 0.0 && prob.u[i] == f64::INFINITY) || (y[i] < 0.0 && prob.l[i] == f64::NEG_INFINITY)
        {
            y[i] = 0.0;
        }
    }
    if !verify_farkas(prob, &y) {
        return None;
    }
    Some(polish_farkas(prob, &y).unwrap_or(y))
}

/// Projects `y` onto `{A'y = 0}` on its own support. The projection is kept
/// only when it preserves the sign pattern and a negative support value.
fn polish_farkas(prob: &QpProblem, y: &DVector<f64>) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..y.len()).filter(|&i| y[i] != 0.0).collect();
    let a_s = prob.a.select_rows(&support);
    let y_s = DVector::from_iterator(support.len(), support.iter().map(|&i| y[i]));
    let gram = a_s.transpose() * &a_s;
    let correction = gram.pseudo_inverse(1e-12).ok()? * (a_s.transpose() * &y_s);
    let proj = &y_s - &a_s * correction;
    let mut out = DVector::zeros(y.len());
    for (k, &i) in support.iter().enumerate() {
        if proj[k] * y[i] < 0.0 {
            return None;
        }
        out[i] = proj[k];
    }
    let norm = inf_norm(&out);
    if norm == 0.0 {
        return None;
    }
    out /= norm;
    (verify_farkas(prob, &out) && inf_norm(&(prob.a.transpose() * &out)) <= inf_norm(&(prob.a.transpose() * y)))
        .then_some(out)
}

/// Support value `sup { y'z : l <= z <= u }` restricted to the finite bounds.
fn support_value(prob: &QpProblem, y: &DVector<f64>) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            if yi > 0.0 {
                yi * prob.u[i]
            } else if yi < 0.0 {
                yi * prob.l[i]
            } else {
                0.0
            }
        })
        .sum()
}

pub fn verify_farkas(prob: &QpProblem, y: &DVector<f64>) -> bool {
    let norm = inf_norm(y);
    if norm == 0.0 {
        return false;
    }
    let a_scale = 1.0 + prob.a.amax();
    let aty = inf_norm(&(prob.a.transpose() * y)) / norm;
    let sv = support_value(prob, y) / norm;
    sv.is_finite() && aty <= INFEAS_EPS * a_scale && sv < -INFEAS_EPS * a_scale
}

fn looks_unbounded(prob: &QpProblem, dx: &DVector<f64>) -> bool {
    let norm = inf_norm(dx);
    if norm < 1e-12 {
        return false;
    }
    let d = dx / norm;
    let eps = 1e-5;
    if inf_norm(&(&prob.p * &d)) > eps * (1.0 + prob.p.amax()) {
        return false;
    }
    if prob.q.dot(&d) >= -eps * (1.0 + inf_norm(&prob.q)) {
        return false;
    }
    let ad = &prob.a * &d;
    (0..prob.m()).all(|i| {
        let lo_ok = prob.l[i] == f64::NEG_INFINITY || ad[i] >= -eps;
        let hi_ok = prob.u[i] == f64::INFINITY || ad[i] <= eps;
        lo_ok && hi_ok
    })
}

/// Recession LP: `min q'd  s.t.  Pd = 0,  Ad in rec[l,u],  -1 <= d <= 1`.
/// A strictly negative value certifies unboundedness of any feasible QP with
/// this data; a feasible point is then attached as the base of the ray.
fn certify_unbounded(prob: &QpProblem, cfg: &SolverConfig) -> Option<QpResult> {
    let direction = recession_direction(prob, cfg)?;
    let base = feasible_point(prob, cfg);
    if base.status == QpStatus::PrimalInfeasible {
        return Some(base);
    }
    if base.status != QpStatus::Solved {
        return None;
    }
    let res = prob.residuals(&base.x, &DVector::zeros(prob.m()), &base.z);
    Some(QpResult {
        status: QpStatus::Unbounded,
        objective: f64::NEG_INFINITY,
        y: DVector::zeros(prob.m()),
        z: base.z,
        x: base.x,
        iterations: 0,
        prim_res: res.prim,
        dual_res: f64::INFINITY,
        farkas: None,
        direction: Some(direction),
        polished: base.polished,
    })
}

pub fn recession_direction(prob: &QpProblem, cfg: &SolverConfig) -> Option<DVector<f64>> {
    let (n, m) = (prob.n(), prob.m());
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    let p_scale = prob.p.amax();
    if p_scale > 0.0 {
        for i in 0..n {
            let row: Vec<f64> = prob.p.row(i).iter().copied().collect();
            if row.iter().any(|v| *v != 0.0) {
                rows.push((row, 0.0, 0.0));
            }
        }
    }
    for i in 0..m {
        let lo = if prob.l[i] == f64::NEG_INFINITY { f64::NEG_INFINITY } else { 0.0 };
        let hi = if prob.u[i] == f64::INFINITY { f64::INFINITY } else { 0.0 };
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            continue;
        }
        rows.push((prob.a.row(i).iter().copied().collect(), lo, hi));
    }
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        rows.push((row, -1.0, 1.0));
    }
    let k = rows.len();
    let lp = QpProblem {
        p: DMatrix::zeros(n, n),
        q: prob.q.clone(),
        a: DMatrix::from_fn(k, n, |i, j| rows[i].0[j]),
        l: DVector::from_iterator(k, rows.iter().map(|r| r.1)),
        u: DVector::from_iterator(k, rows.iter().map(|r| r.2)),
    };
    let sub_cfg = SolverConfig {
        max_iter: cfg.max_iter.min(50_000),
        ..*cfg
    };
    let out = solve_inner(&lp, &sub_cfg, false);
    if out.status != QpStatus::Solved {
        return None;
    }
    let d = out.x;
    let q_scale = 1.0 + inf_norm(&prob.q);
    let check_eps = 1e-7;
    let slope = prob.q.dot(&d);
    if slope >= -check_eps * q_scale {
        return None;
    }
    if inf_norm(&(&prob.p * &d)) > check_eps * (1.0 + p_scale) {
        return None;
    }
    let ad = &prob.a * &d;
    let cone_ok = (0..m).all(|i| {
        (prob.l[i] == f64::NEG_INFINITY || ad[i] >= -check_eps)
            && (prob.u[i] == f64::INFINITY || ad[i] <= check_eps)
    });
    cone_ok.then_some(d)
}

/// Minimum-norm point of `{x | l <= Ax <= u}`.
pub fn feasible_point(prob: &QpProblem, cfg: &SolverConfig) -> QpResult {
    let n = prob.n();
    let fp = QpProblem {
        p: DMatrix::identity(n, n),
        q: DVector::zeros(n),
        a: prob.a.clone(),
        l: prob.l.clone(),
        u: prob.u.clone(),
    };
    solve_inner(&fp, cfg, false)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Active {
    Inactive,
    Lower,
    Upper,
    Equality,
}

/// Solves the reduced KKT system on the guessed active set, correcting the
/// guess a few times (add violated rows, drop rows with wrong-sign multipliers).
fn polish(
    prob: &QpProblem,
    s: &Scaled,
    ys: &DVector<f64>,
    zs: &DVector<f64>,
    tol: f64,
) -> Option<QpResult> {
    let (n, m) = (prob.n(), prob.m());
    let mut active: Vec<Active> = (0..m)
        .map(|i| {
            if s.l[i] == s.u[i] {
                Active::Equality
            } else if zs[i] - s.l[i] < -ys[i] {
                Active::Lower
            } else if s.u[i] - zs[i] < ys[i] {
                Active::Upper
            } else {
                Active::Inactive
            }
        })
        .collect();

    let mut best: Option<(DVector<f64>, DVector<f64>)> = None;
    for _round in 0..12 {
        let idx: Vec<usize> = (0..m).filter(|&i| active[i] != Active::Inactive).collect();
        let k = idx.len();
        let dim = n + k;
        let mut k0 = DMatrix::zeros(dim, dim);
        k0.view_mut((0, 0), (n, n)).copy_from(&s.p);
        for (r, &i) in idx.iter().enumerate() {
            for j in 0..n {
                k0[(n + r, j)] = s.a[(i, j)];
                k0[(j, n + r)] = s.a[(i, j)];
            }
        }
        let mut kd = k0.clone();
        for i in 0..n {
            kd[(i, i)] += POLISH_DELTA;
        }
        for r in 0..k {
            kd[(n + r, n + r)] -= POLISH_DELTA;
        }
        let mut rhs = DVector::zeros(dim);
        for j in 0..n {
            rhs[j] = -s.q[j];
        }
        for (r, &i) in idx.iter().enumerate() {
            rhs[n + r] = match active[i] {
                Active::Lower | Active::Equality => s.l[i],
                Active::Upper => s.u[i],
                Active::Inactive => unreachable!(),
            };
        }
        let lu = kd.lu();
        let mut sol = lu.solve(&rhs)?;
        for _ in 0..POLISH_REFINE {
            let r = &rhs - &k0 * &sol;
            if inf_norm(&r) <= 1e-14 * (1.0 + inf_norm(&rhs)) {
                break;
            }
            sol += lu.solve(&r)?;
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let xp = sol.rows(0, n).into_owned();
        let mut yp = DVector::zeros(m);
        for (r, &i) in idx.iter().enumerate() {
            yp[i] = sol[n + r];
        }

        // Active-set corrections in the scaled space.
        let ax = &s.a * &xp;
        let viol_tol = tol * (1.0 + inf_norm(&ax));
        let sign_tol = tol * (1.0 + inf_norm(&yp));
        let mut changed = false;
        for i in 0..m {
            match active[i] {
                Active::Inactive => {
                    if ax[i] < s.l[i] - viol_tol {
                        active[i] = Active::Lower;
                        changed = true;
                    } else if ax[i] > s.u[i] + viol_tol {
                        active[i] = Active::Upper;
                        changed = true;
                    }
                }
                Active::Lower if yp[i] > sign_tol => {
                    active[i] = Active::Inactive;
                    changed = true;
                }
                Active::Upper if yp[i] < -sign_tol => {
                    active[i] = Active::Inactive;
                    changed = true;
                }
                _ => {}
            }
        }
        best = Some((xp, yp));
        if !changed {
            break;
        }
    }

    let (xp, yp) = best?;
    let zp = clamp_box(&(&s.a * &xp), &s.l, &s.u);
    let x = s.unscale_x(&xp);
    let y = s.unscale_y(&yp);
    let z = clamp_box(&s.unscale_z(&zp), &prob.l, &prob.u);
    let res = prob.residuals(&x, &y, &z);
    let sign_ok = (0..m).all(|i| {
        let slack_tol = tol * res.prim_scale;
        let y_tol = tol * res.dual_scale;
        if prob.l[i] == prob.u[i] {
            true
        } else if y[i] > y_tol {
            (prob.u[i] - z[i]).abs() <= slack_tol
        } else if y[i] < -y_tol {
            (z[i] - prob.l[i]).abs() <= slack_tol
        } else {
            true
        }
    });
    if !(sign_ok && res.converged(tol)) {
        return None;
    }
    Some(QpResult {
        status: QpStatus::Solved,
        objective: prob.objective(&x),
        x,
        y,
        z,
        iterations: 0,
        prim_res: res.prim,
        dual_res: res.dual,
        farkas: None,
        direction: None,
        polished: true,
    })
}

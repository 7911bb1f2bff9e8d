//! Linear feasibility with Farkas certificates, and the minimum-residual
//! search over sums of polyhedral subgradient sets.

use nalgebra::{DMatrix, DVector};

use crate::atoms::{LinearRows, SubgradSet};
use crate::certificate::{Certificate, Verdict};
use crate::subsolver::qp::{self, QpProblem, QpStatus, SolverConfig};

/// Decides `{x | C x <= c}` with equality on `eq_rows` and slack at least
/// `margin` on `strict_rows`. The witness on success is the minimum-norm
/// feasible point (`"x"`); on failure it is a normalized multiplier vector
/// `y` (`"farkas"`) with `C'y = 0`, `y >= 0` off `eq_rows` and `<c', y> < 0`,
/// where `c'` is the margin-shifted right-hand side.
pub fn lp_feasibility(
    c_mat: &DMatrix<f64>,
    c_vec: &DVector<f64>,
    eq_rows: &[usize],
    strict_rows: &[usize],
    margin: f64,
) -> Certificate {
    lp_feasibility_with(c_mat, c_vec, eq_rows, strict_rows, margin, &SolverConfig::default())
}

pub fn lp_feasibility_with(
    c_mat: &DMatrix<f64>,
    c_vec: &DVector<f64>,
    eq_rows: &[usize],
    strict_rows: &[usize],
    margin: f64,
    cfg: &SolverConfig,
) -> Certificate {
    assert!(margin >= 0.0, "margin must be nonnegative");
    assert_eq!(c_mat.nrows(), c_vec.len(), "C and c disagree on the row count");
    let (k, n) = c_mat.shape();
    let mut u = c_vec.clone();
    for &i in strict_rows {
        u[i] -= margin;
    }
    let mut l = DVector::from_element(k, f64::NEG_INFINITY);
    for &i in eq_rows {
        l[i] = u[i];
    }
    let prob = QpProblem {
        p: DMatrix::identity(n, n),
        q: DVector::zeros(n),
        a: c_mat.clone(),
        l,
        u,
    };
    let out = qp::feasible_point(&prob, cfg);
    match out.status {
        QpStatus::Solved => {
            let viol = (0..k)
                .map(|i| (out.z[i] - prob.u[i]).max(prob.l[i] - out.z[i]).max(0.0))
                .fold(0.0_f64, f64::max);
            let ax = c_mat * &out.x;
            let true_viol = (0..k)
                .map(|i| (ax[i] - prob.u[i]).max(prob.l[i] - ax[i]).max(0.0))
                .fold(viol, f64::max);
            Certificate::pass(true_viol).with_witness("x", &out.x)
        }
        QpStatus::PrimalInfeasible => {
            let y = out.farkas.expect("infeasible status carries a certificate");
            let gap = -(0..k)
                .map(|i| if y[i] > 0.0 { y[i] * prob.u[i] } else if y[i] < 0.0 { y[i] * prob.l[i] } else { 0.0 })
                .sum::<f64>();
            Certificate::fail(gap).with_witness("farkas", &y)
        }
        s => Certificate::new(Verdict::Indeterminate, f64::NAN)
            .with_note(format!("feasibility solve ended with {s:?}")),
    }
}

/// Stacks several row systems over a common variable vector.
#[derive(Debug, Clone)]
pub struct SystemBuilder {
    n: usize,
    rows: Vec<DVector<f64>>,
    rhs: Vec<f64>,
    eq: Vec<usize>,
    strict: Vec<usize>,
}

impl SystemBuilder {
    pub fn new(n: usize) -> Self {
        SystemBuilder {
            n,
            rows: Vec::new(),
            rhs: Vec::new(),
            eq: Vec::new(),
            strict: Vec::new(),
        }
    }

    fn push(&mut self, row: DVector<f64>, rhs: f64) -> usize {
        self.rows.push(row);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    /// Adds `rows` applied to `M x`.
    pub fn add_rows(&mut self, rows: &LinearRows, m: &DMatrix<f64>, strict: bool) {
        let ci = &rows.ineq * m;
        for i in 0..ci.nrows() {
            let k = self.push(ci.row(i).transpose(), rows.ineq_rhs[i]);
            if strict {
                self.strict.push(k);
            }
        }
        let ce = &rows.eq * m;
        for i in 0..ce.nrows() {
            let k = self.push(ce.row(i).transpose(), rows.eq_rhs[i]);
            self.eq.push(k);
        }
    }

    pub fn add_le(&mut self, row: DVector<f64>, rhs: f64) {
        self.push(row, rhs);
    }

    pub fn add_eq(&mut self, row: DVector<f64>, rhs: f64) {
        let k = self.push(row, rhs);
        self.eq.push(k);
    }

    pub fn solve(&self, margin: f64, cfg: &SolverConfig) -> Certificate {
        let k = self.rows.len();
        let c = DMatrix::from_fn(k, self.n, |i, j| self.rows[i][j]);
        let rhs = DVector::from_vec(self.rhs.clone());
        lp_feasibility_with(&c, &rhs, &self.eq, &self.strict, margin, cfg)
    }
}

pub fn rows_feasible(rows: &LinearRows, cfg: &SolverConfig) -> bool {
    let n = rows.ncols();
    let mut sys = SystemBuilder::new(n);
    sys.add_rows(rows, &DMatrix::identity(n, n), false);
    sys.solve(0.0, cfg).passed()
}

/// Result of the subgradient witness search.
#[derive(Debug, Clone)]
pub struct WitnessFit {
    /// Euclidean norm of the best residual `sum_k M_k g_k + h`.
    pub residual: f64,
    /// One chosen member of each set, in input order.
    pub members: Vec<DVector<f64>>,
    pub converged: bool,
}

/// Minimizes `|sum_k M_k g_k + h|` over `g_k` in the sets `S_k`, posed as the
/// bound-constrained least-squares problem in the set parameters.
pub fn min_residual(terms: &[(&DMatrix<f64>, &SubgradSet)], h: &DVector<f64>, cfg: &SolverConfig) -> WitnessFit {
    let d = h.len();
    let mut c = h.clone();
    let mut blocks = Vec::new();
    let mut n_t = 0;
    for (m, s) in terms {
        c += *m * &s.offset;
        blocks.push(n_t);
        n_t += s.n_params();
    }
    let finish = |ts: Vec<DVector<f64>>| {
        let members: Vec<DVector<f64>> = terms.iter().zip(&ts).map(|((_, s), t)| s.at(t)).collect();
        let mut r = h.clone();
        for ((m, _), g) in terms.iter().zip(&members) {
            r += *m * g;
        }
        (r.norm(), members)
    };
    if n_t == 0 {
        let ts = terms.iter().map(|_| DVector::zeros(0)).collect();
        let (residual, members) = finish(ts);
        return WitnessFit { residual, members, converged: true };
    }

    // variables (t, r): r - sum M_k G_k t_k = c, lo <= t <= hi, minimize |r|^2 / 2
    let nv = n_t + d;
    let mut mg = DMatrix::zeros(d, n_t);
    for ((m, s), &off) in terms.iter().zip(&blocks) {
        if s.n_params() > 0 {
            mg.view_mut((0, off), (d, s.n_params())).copy_from(&(*m * &s.generators));
        }
    }
    let mut lo_all = Vec::with_capacity(n_t);
    let mut hi_all = Vec::with_capacity(n_t);
    for (_, s) in terms {
        lo_all.extend(s.lo.iter().copied());
        hi_all.extend(s.hi.iter().copied());
    }
    let bounded: Vec<usize> = (0..n_t)
        .filter(|&j| lo_all[j].is_finite() || hi_all[j].is_finite())
        .collect();
    let rows = d + bounded.len();
    let mut a = DMatrix::zeros(rows, nv);
    let mut l = DVector::zeros(rows);
    let mut u = DVector::zeros(rows);
    for i in 0..d {
        for j in 0..n_t {
            a[(i, j)] = -mg[(i, j)];
        }
        a[(i, n_t + i)] = 1.0;
        l[i] = c[i];
        u[i] = c[i];
    }
    for (k, &j) in bounded.iter().enumerate() {
        a[(d + k, j)] = 1.0;
        l[d + k] = lo_all[j];
        u[d + k] = hi_all[j];
    }
    let mut p = DMatrix::zeros(nv, nv);
    for i in 0..d {
        p[(n_t + i, n_t + i)] = 1.0;
    }
    let prob = QpProblem {
        p,
        q: DVector::zeros(nv),
        a,
        l,
        u,
    };
    let out = qp::solve(&prob, cfg);
    let t_all = DVector::from_fn(n_t, |j, _| out.x[j].max(lo_all[j]).min(hi_all[j]));
    let ts: Vec<DVector<f64>> = terms
        .iter()
        .zip(&blocks)
        .map(|((_, s), &off)| t_all.rows(off, s.n_params()).into_owned())
        .collect();
    let (residual, members) = finish(ts);
    WitnessFit {
        residual,
        members,
        converged: out.status == QpStatus::Solved,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_is_feasible() {
        // x >= 1, x <= 2 written as -x <= -1, x <= 2
        let c = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let cert = lp_feasibility(&c, &DVector::from_vec(vec![-1.0, 2.0]), &[], &[], 0.0);
        assert!(cert.passed());
        let x = cert.witness("x").unwrap()[0];
        assert!((1.0 - 1e-9..=2.0 + 1e-9).contains(&x));
    }

    #[test]
    fn contradictory_rows_give_farkas() {
        // x >= 1, -x >= 0
        let c = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let rhs = DVector::from_vec(vec![-1.0, 0.0]);
        let cert = lp_feasibility(&c, &rhs, &[], &[], 0.0);
        assert_eq!(cert.verdict, Verdict::Fail);
        let y = cert.witness("farkas").unwrap();
        assert!(y.iter().all(|&v| v >= -1e-12));
        assert!((c.transpose() * &y).amax() < 1e-6);
        assert!(rhs.dot(&y) < 0.0);
    }

    #[test]
    fn strict_margin_tightens() {
        // x <= 0 and -x <= 0 with a strict margin on the first row
        let c = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let rhs = DVector::zeros(2);
        assert!(lp_feasibility(&c, &rhs, &[], &[], 0.0).passed());
        assert!(!lp_feasibility(&c, &rhs, &[], &[0], 0.1).passed());
    }

    #[test]
    fn separable_pair_min_norm_witness() {
        // rows -c_i (q_i w + w0) <= -1 with q = (2, -2), c = (1, -1)
        let c = DMatrix::from_row_slice(2, 2, &[-2.0, -1.0, -2.0, 1.0]);
        let cert = lp_feasibility(&c, &DVector::from_vec(vec![-1.0, -1.0]), &[], &[], 0.0);
        assert!(cert.passed());
        let x = cert.witness("x").unwrap();
        assert!((x[0] - 0.5).abs() < 1e-8 && x[1].abs() < 1e-8);
    }

    #[test]
    fn witness_search_over_ray() {
        // min |g + h| over g in {t (1, 1) | t >= 0}, h = (-2, -2) -> 0
        let set = SubgradSet {
            offset: DVector::zeros(2),
            generators: DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            lo: DVector::zeros(1),
            hi: DVector::from_element(1, f64::INFINITY),
        };
        let eye = DMatrix::identity(2, 2);
        let fit = min_residual(&[(&eye, &set)], &DVector::from_vec(vec![-2.0, -2.0]), &SolverConfig::default());
        assert!(fit.residual < 1e-9);
        assert!((fit.members[0][0] - 2.0).abs() < 1e-8);
        let fit = min_residual(&[(&eye, &set)], &DVector::from_vec(vec![1.0, 1.0]), &SolverConfig::default());
        assert!((fit.residual - 2f64.sqrt()).abs() < 1e-8);
    }
}

//! Lowering of atom terms `psi(E v + o)` (or `psi*(E v + o)`) into the data
//! of a convex QP. Every catalog atom except the exp epigraph and the
//! polyhedron conjugate is piecewise linear-quadratic, so the lowering is
//! exact; auxiliary variables are appended after the main block.

use nalgebra::{DMatrix, DVector};

use crate::atoms::{AtomKind, ConvexAtom};
use crate::error::{Error, Result};
use crate::subsolver::qp::QpProblem;

pub(crate) struct Row {
    pub coef: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

/// QP under construction over `n_main` main variables plus auxiliaries.
pub(crate) struct QpBuilder {
    n_main: usize,
    n_aux: usize,
    quad: Vec<(usize, usize, f64)>,
    lin: Vec<(usize, f64)>,
    pub constant: f64,
    rows: Vec<Row>,
}

impl QpBuilder {
    pub fn new(n_main: usize) -> Self {
        QpBuilder {
            n_main,
            n_aux: 0,
            quad: Vec::new(),
            lin: Vec::new(),
            constant: 0.0,
            rows: Vec::new(),
        }
    }

    fn aux(&mut self) -> usize {
        self.n_aux += 1;
        self.n_main + self.n_aux - 1
    }

    /// Adds `lo <= coef . v <= hi` and returns its row index.
    pub fn row(&mut self, coef: Vec<(usize, f64)>, lo: f64, hi: f64) -> usize {
        self.rows.push(Row { coef, lo, hi });
        self.rows.len() - 1
    }

    fn expr_row(e: &DMatrix<f64>, i: usize) -> Vec<(usize, f64)> {
        (0..e.ncols())
            .filter(|&j| e[(i, j)] != 0.0)
            .map(|j| (j, e[(i, j)]))
            .collect()
    }

    /// `lo <= s_i <= hi` for `s = E v + o`.
    fn bound(&mut self, e: &DMatrix<f64>, o: &DVector<f64>, i: usize, lo: f64, hi: f64) {
        self.row(Self::expr_row(e, i), lo - o[i], hi - o[i]);
    }

    /// `c * s_i` added to the objective.
    fn linear(&mut self, e: &DMatrix<f64>, o: &DVector<f64>, i: usize, c: f64) {
        if c == 0.0 {
            return;
        }
        for (j, v) in Self::expr_row(e, i) {
            self.lin.push((j, c * v));
        }
        self.constant += c * o[i];
    }

    /// `1/2 (s_i - a)^2` added to the objective.
    fn square(&mut self, e: &DMatrix<f64>, o: &DVector<f64>, i: usize, a: f64) {
        let row = Self::expr_row(e, i);
        for &(j, vj) in &row {
            for &(k, vk) in &row {
                self.quad.push((j, k, vj * vk));
            }
        }
        self.linear(e, o, i, o[i] - a);
        self.constant -= (o[i] - a) * o[i];
        self.constant += 0.5 * (o[i] - a).powi(2);
    }

    /// Aux `t >= |s_i - a|`, objective `+t`.
    fn abs(&mut self, e: &DMatrix<f64>, o: &DVector<f64>, i: usize, a: f64) {
        let t = self.aux();
        let mut plus = Self::expr_row(e, i);
        plus.push((t, -1.0));
        self.row(plus, f64::NEG_INFINITY, a - o[i]);
        let mut minus: Vec<(usize, f64)> = Self::expr_row(e, i).into_iter().map(|(j, v)| (j, -v)).collect();
        minus.push((t, -1.0));
        self.row(minus, f64::NEG_INFINITY, o[i] - a);
        self.lin.push((t, 1.0));
    }

    /// Aux `t >= max(hi * s_i, lo * s_i)`, objective `+t`.
    fn max_of_two(&mut self, e: &DMatrix<f64>, o: &DVector<f64>, i: usize, lo: f64, hi: f64) {
        let t = self.aux();
        for c in [hi, lo] {
            let mut row: Vec<(usize, f64)> = Self::expr_row(e, i).into_iter().map(|(j, v)| (j, c * v)).collect();
            row.push((t, -1.0));
            self.row(row, f64::NEG_INFINITY, -c * o[i]);
        }
        self.lin.push((t, 1.0));
    }

    /// Adds `psi(E v + o)`, or `psi*(E v + o)` when `conjugate`.
    pub fn add_term(&mut self, atom: &ConvexAtom, conjugate: bool, e: &DMatrix<f64>, o: &DVector<f64>) -> Result<()> {
        let k = atom.dim;
        let inf = f64::INFINITY;
        match (&atom.kind, conjugate) {
            (AtomKind::Zero, false) | (AtomKind::IndicatorZero, true) => {}
            (AtomKind::Zero, true) | (AtomKind::IndicatorZero, false) => {
                for i in 0..k {
                    self.bound(e, o, i, 0.0, 0.0);
                }
            }
            (AtomKind::HalfSquaredNorm { center, mask }, false) => {
                for i in (0..k).filter(|&i| mask[i]) {
                    self.square(e, o, i, center[i]);
                }
            }
            (AtomKind::HalfSquaredNorm { center, mask }, true) => {
                for i in 0..k {
                    if mask[i] {
                        // 1/2 s^2 + a s = 1/2 (s + a)^2 - a^2/2
                        self.square(e, o, i, -center[i]);
                        self.constant -= 0.5 * center[i] * center[i];
                    } else {
                        self.bound(e, o, i, 0.0, 0.0);
                    }
                }
            }
            (AtomKind::L1Norm { center }, false) | (AtomKind::LinearPlusIndicatorInfBall { center }, true) => {
                for i in 0..k {
                    self.abs(e, o, i, center[i]);
                }
            }
            (AtomKind::LinearPlusIndicatorInfBall { center }, false) | (AtomKind::L1Norm { center }, true) => {
                for i in 0..k {
                    self.linear(e, o, i, center[i]);
                    self.bound(e, o, i, -1.0, 1.0);
                }
            }
            (AtomKind::IndicatorBox { lower, upper }, false) => {
                for i in 0..k {
                    self.bound(e, o, i, lower[i], upper[i]);
                }
            }
            (AtomKind::IndicatorBox { lower, upper }, true) => {
                for i in 0..k {
                    let (l, u) = (lower[i], upper[i]);
                    match (l.is_finite(), u.is_finite()) {
                        (true, true) if l == u => self.linear(e, o, i, u),
                        (true, true) => self.max_of_two(e, o, i, l, u),
                        (true, false) => {
                            self.bound(e, o, i, -inf, 0.0);
                            self.linear(e, o, i, l);
                        }
                        (false, true) => {
                            self.bound(e, o, i, 0.0, inf);
                            self.linear(e, o, i, u);
                        }
                        (false, false) => self.bound(e, o, i, 0.0, 0.0),
                    }
                }
            }
            (AtomKind::IndicatorNonneg, false) => {
                for i in 0..k {
                    self.bound(e, o, i, 0.0, inf);
                }
            }
            (AtomKind::IndicatorNonneg, true) => {
                for i in 0..k {
                    self.bound(e, o, i, -inf, 0.0);
                }
            }
            (AtomKind::IndicatorPolyhedron { matrix, rhs }, false) => {
                let ce = matrix * e;
                let co = matrix * o;
                for i in 0..rhs.len() {
                    self.row(Self::expr_row(&ce, i), -inf, rhs[i] - co[i]);
                }
            }
            (AtomKind::IndicatorPolyhedron { .. }, true) => {
                return Err(Error::UnsupportedConjugate("polyhedron"));
            }
            (AtomKind::IndicatorExpEpigraph, _) => {
                return Err(Error::UnsupportedAtom("exp_epigraph"));
            }
        }
        Ok(())
    }

    pub fn add_linear_main(&mut self, c: &DVector<f64>) {
        for (j, &v) in c.iter().enumerate() {
            if v != 0.0 {
                self.lin.push((j, v));
            }
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_main + self.n_aux
    }

    pub fn build(&self) -> QpProblem {
        let n = self.n_total();
        let mut p = DMatrix::zeros(n, n);
        for &(i, j, v) in &self.quad {
            p[(i, j)] += v;
        }
        let mut q = DVector::zeros(n);
        for &(j, v) in &self.lin {
            q[j] += v;
        }
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in &row.coef {
                a[(i, j)] += v;
            }
        }
        QpProblem {
            p,
            q,
            a,
            l: DVector::from_iterator(m, self.rows.iter().map(|r| r.lo)),
            u: DVector::from_iterator(m, self.rows.iter().map(|r| r.hi)),
        }
    }
}

//! Primal and stationary-dual problem containers.
//!
//! Primal: `F(x) = f(x) + g(Ax) + Phi(Bx - b)`, with convex part `Theta`.
//! Dual:   `G(w) = <b,z> + f*(-A'y - B'z) + g*(y) + Psi(z)`, `w = [y; z]`,
//! with convex part `Xi`.

use nalgebra::{DMatrix, DVector};

use crate::atoms::ConvexAtom;
use crate::cardinality::{check_weights, CardFlavor, Side, Variant};
use crate::error::{check_dim, Error, Result};
use crate::extended::ExtendedReal;
use crate::tol::zero_tol;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalModel {
    pub f: ConvexAtom,
    pub g: ConvexAtom,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub card: CardFlavor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualModel {
    /// Atoms whose conjugates enter the objective.
    pub f: ConvexAtom,
    pub g: ConvexAtom,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub card: CardFlavor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Primal,
    Dual,
}

/// Objective split into its convex and cardinality parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub total: ExtendedReal,
    pub convex: ExtendedReal,
    pub card: ExtendedReal,
}

fn check_shapes(f: &ConvexAtom, g: &ConvexAtom, a: &DMatrix<f64>, b: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<()> {
    let n = f.dim;
    check_dim("rows of A (dimension of g)", g.dim, a.nrows())?;
    check_dim("columns of A (dimension of f)", n, a.ncols())?;
    check_dim("columns of B (dimension of f)", n, b.ncols())?;
    check_dim("length of b (rows of B)", b.nrows(), rhs.len())?;
    if b.nrows() == 0 {
        return Err(Error::InvalidParams("B must have at least one row".into()));
    }
    let finite = a.iter().chain(b.iter()).chain(rhs.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidParams("A, B and b must be finite".into()));
    }
    Ok(())
}

impl PrimalModel {
    pub fn new(
        f: ConvexAtom,
        g: ConvexAtom,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        rhs: DVector<f64>,
        variant: Variant,
        lambda: DVector<f64>,
    ) -> Result<Self> {
        check_shapes(&f, &g, &a, &b, &rhs)?;
        check_dim("length of lambda (rows of B)", b.nrows(), lambda.len())?;
        let card = CardFlavor::new(Side::PrimalPhi, variant, lambda)?;
        Ok(PrimalModel { f, g, a, b, rhs, card })
    }

    pub fn n(&self) -> usize {
        self.f.dim
    }

    pub fn m(&self) -> usize {
        self.g.dim
    }

    pub fn r(&self) -> usize {
        self.b.nrows()
    }

    pub fn variant(&self) -> Variant {
        self.card.variant
    }

    /// `Bx - b`.
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b * x - &self.rhs
    }

    /// The stationary dual with weights `mu`.
    pub fn derive_dual(&self, mu: &DVector<f64>) -> Result<DualModel> {
        check_dim("length of mu", self.r(), mu.len())?;
        check_weights(mu)?;
        for atom in [&self.f, &self.g] {
            if !atom.has_conjugate() {
                return Err(Error::UnsupportedConjugate(atom.name()));
            }
        }
        Ok(DualModel {
            f: self.f.clone(),
            g: self.g.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            rhs: self.rhs.clone(),
            card: self.card.paired(mu.clone())?,
        })
    }

    /// `Theta(x) = f(x) + g(Ax)`.
    pub fn theta(&self, x: &DVector<f64>) -> Result<ExtendedReal> {
        check_dim("primal point", self.n(), x.len())?;
        Ok(self.f.eval(x)? + self.g.eval(&(&self.a * x))?)
    }

    /// `F(x)`; support identification uses `zero_tol(Bx - b)` unless given.
    pub fn objective(&self, x: &DVector<f64>, tol: Option<f64>) -> Result<ObjectiveValue> {
        let convex = self.theta(x)?;
        let u = self.residual(x);
        let card = self.card.eval(&u, tol.unwrap_or_else(|| zero_tol(&u)))?;
        Ok(ObjectiveValue {
            total: convex + card,
            convex,
            card,
        })
    }

    /// Same model with `Phi_0` rewritten as `Phi_+` on the stacked operator `[B; -B]`.
    pub fn stacked_plus(&self) -> Result<PrimalModel> {
        if self.variant() == Variant::Plus {
            return Ok(self.clone());
        }
        let (r, n) = (self.r(), self.n());
        let b2 = DMatrix::from_fn(2 * r, n, |i, j| if i < r { self.b[(i, j)] } else { -self.b[(i - r, j)] });
        let rhs2 = DVector::from_fn(2 * r, |i, _| if i < r { self.rhs[i] } else { -self.rhs[i - r] });
        let w = &self.card.weights;
        let lam2 = DVector::from_fn(2 * r, |i, _| w[i % r]);
        PrimalModel::new(self.f.clone(), self.g.clone(), self.a.clone(), b2, rhs2, Variant::Plus, lam2)
    }
}

impl DualModel {
    /// Direct construction, for duals written down in closed form.
    pub fn new(
        f: ConvexAtom,
        g: ConvexAtom,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        rhs: DVector<f64>,
        variant: Variant,
        mu: DVector<f64>,
    ) -> Result<Self> {
        check_shapes(&f, &g, &a, &b, &rhs)?;
        check_dim("length of mu (rows of B)", b.nrows(), mu.len())?;
        for atom in [&f, &g] {
            if !atom.has_conjugate() {
                return Err(Error::UnsupportedConjugate(atom.name()));
            }
        }
        let card = CardFlavor::new(Side::DualPsi, variant, mu)?;
        Ok(DualModel { f, g, a, b, rhs, card })
    }

    pub fn n(&self) -> usize {
        self.f.dim
    }

    pub fn m(&self) -> usize {
        self.g.dim
    }

    pub fn r(&self) -> usize {
        self.b.nrows()
    }

    pub fn dim(&self) -> usize {
        self.m() + self.r()
    }

    pub fn variant(&self) -> Variant {
        self.card.variant
    }

    pub fn split(&self, w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (w.rows(0, self.m()).into_owned(), w.rows(self.m(), self.r()).into_owned())
    }

    pub fn join(y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let mut w = DVector::zeros(y.len() + z.len());
        w.rows_mut(0, y.len()).copy_from(y);
        w.rows_mut(y.len(), z.len()).copy_from(z);
        w
    }

    /// `-Q'w = -A'y - B'z`.
    pub fn neg_qt(&self, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        -(self.a.transpose() * y + self.b.transpose() * z)
    }

    /// `Xi(w) = f*(-Q'w) + g*(y) + <b,z>`.
    pub fn xi(&self, w: &DVector<f64>) -> Result<ExtendedReal> {
        check_dim("dual point", self.dim(), w.len())?;
        let (y, z) = self.split(w);
        Ok(self.f.conjugate_eval(&self.neg_qt(&y, &z))? + self.g.conjugate_eval(&y)? + self.rhs.dot(&z))
    }

    /// `G(w)`; support identification uses `zero_tol(z)` unless given.
    pub fn objective(&self, w: &DVector<f64>, tol: Option<f64>) -> Result<ObjectiveValue> {
        let convex = self.xi(w)?;
        let (_, z) = self.split(w);
        let card = self.card.eval(&z, tol.unwrap_or_else(|| zero_tol(&z)))?;
        Ok(ObjectiveValue {
            total: convex + card,
            convex,
            card,
        })
    }

    /// The primal whose stationary dual this is, with weights `lambda`.
    pub fn primal_counterpart(&self, lambda: &DVector<f64>) -> Result<PrimalModel> {
        PrimalModel::new(
            self.f.clone(),
            self.g.clone(),
            self.a.clone(),
            self.b.clone(),
            self.rhs.clone(),
            self.variant(),
            lambda.clone(),
        )
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.card.weights
    }

    /// Same data with other weights.
    pub fn with_mu(&self, mu: &DVector<f64>) -> Result<DualModel> {
        check_dim("length of mu", self.r(), mu.len())?;
        let mut d = self.clone();
        d.card = CardFlavor::new(Side::DualPsi, self.variant(), mu.clone())?;
        Ok(d)
    }
}

/// Largest absolute entry over the model data, used to scale pass thresholds.
pub fn data_scale(a: &DMatrix<f64>, b: &DMatrix<f64>, rhs: &DVector<f64>, f: &ConvexAtom, g: &ConvexAtom) -> f64 {
    let mut s = a.amax().max(b.amax()).max(rhs.amax());
    for atom in [f, g] {
        use crate::atoms::AtomKind::*;
        let extra = match &atom.kind {
            HalfSquaredNorm { center, .. } | L1Norm { center } | LinearPlusIndicatorInfBall { center } => center.amax(),
            IndicatorBox { lower, upper } => lower
                .iter()
                .chain(upper.iter())
                .filter(|v| v.is_finite())
                .fold(0.0_f64, |acc, v| acc.max(v.abs())),
            IndicatorPolyhedron { matrix, rhs } => matrix.amax().max(rhs.amax()),
            _ => 0.0,
        };
        s = s.max(extra);
    }
    s
}

impl PrimalModel {
    pub fn data_scale(&self) -> f64 {
        data_scale(&self.a, &self.b, &self.rhs, &self.f, &self.g)
    }
}

impl DualModel {
    pub fn data_scale(&self) -> f64 {
        data_scale(&self.a, &self.b, &self.rhs, &self.f, &self.g)
    }
}

//! Weighted cardinality terms and their limiting subdifferentials.
//!
//! `Phi_0(u) = sum lambda_i [u_i != 0]`, `Phi_+(u) = sum lambda_i [u_i > 0]`,
//! `Psi_0 = Phi_0` on the dual side and `Psi_+(z) = Phi_0(z) + indicator(z >= 0)`.
//! Subdifferentials are products of `{0}`, `R` and `R_+` fixed by the
//! support pattern, so they are handled as coordinate boxes.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{check_dim, Error, Result};
use crate::extended::ExtendedReal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    PrimalPhi,
    DualPsi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Zero,
    Plus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardFlavor {
    pub side: Side,
    pub variant: Variant,
    #[serde(with = "weights_serde")]
    pub weights: DVector<f64>,
}

mod weights_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub fn check_weights(w: &DVector<f64>) -> Result<()> {
    for (i, &v) in w.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveWeight { index: i, value: v });
        }
    }
    Ok(())
}

impl CardFlavor {
    pub fn new(side: Side, variant: Variant, weights: DVector<f64>) -> Result<Self> {
        check_weights(&weights)?;
        Ok(CardFlavor { side, variant, weights })
    }

    pub fn r(&self) -> usize {
        self.weights.len()
    }

    /// The partner under stationary duality, carrying `weights`.
    pub fn paired(&self, weights: DVector<f64>) -> Result<Self> {
        let side = match self.side {
            Side::PrimalPhi => Side::DualPsi,
            Side::DualPsi => Side::PrimalPhi,
        };
        CardFlavor::new(side, self.variant, weights)
    }

    fn is_nonzero(&self, v: f64, tol: f64) -> bool {
        match (self.side, self.variant) {
            (Side::PrimalPhi, Variant::Plus) => v > tol,
            _ => v.abs() > tol,
        }
    }

    fn requires_nonneg(&self) -> bool {
        self.side == Side::DualPsi && self.variant == Variant::Plus
    }

    /// Weighted count, `+inf` for `Psi_+` outside the orthant.
    pub fn eval(&self, u: &DVector<f64>, zero_tol: f64) -> Result<ExtendedReal> {
        check_dim("cardinality argument", self.r(), u.len())?;
        if self.requires_nonneg() && u.iter().any(|&v| v < -zero_tol) {
            return Ok(ExtendedReal::PosInfinity);
        }
        let total = (0..self.r())
            .filter(|&i| self.is_nonzero(u[i], zero_tol))
            .map(|i| self.weights[i])
            .sum();
        Ok(ExtendedReal::Finite(total))
    }

    /// Indices counted by the term.
    pub fn support(&self, u: &DVector<f64>, zero_tol: f64) -> Vec<usize> {
        (0..u.len()).filter(|&i| u[i].abs() > zero_tol).collect()
    }

    /// Componentwise bounds `(lo, hi)` of the subdifferential at `point`.
    pub fn pattern_box(&self, point: &DVector<f64>, zero_tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim("cardinality point", self.r(), point.len())?;
        if self.requires_nonneg() && point.iter().any(|&v| v < -zero_tol) {
            return Err(Error::EmptySubdifferential(
                "Psi_+ at a point with a negative entry".into(),
            ));
        }
        let mut lo = vec![0.0; self.r()];
        let mut hi = vec![0.0; self.r()];
        for i in 0..self.r() {
            if point[i].abs() <= zero_tol {
                hi[i] = f64::INFINITY;
                if !(self.side == Side::PrimalPhi && self.variant == Variant::Plus) {
                    lo[i] = f64::NEG_INFINITY;
                }
            }
        }
        Ok((lo, hi))
    }

    /// Tests `candidate in d(term)(point)`; the residual is the largest
    /// pattern violation.
    pub fn subdiff_check(
        &self,
        point: &DVector<f64>,
        candidate: &DVector<f64>,
        zero_tol: f64,
    ) -> Result<Certificate> {
        check_dim("cardinality candidate", self.r(), candidate.len())?;
        let (lo, hi) = match self.pattern_box(point, zero_tol) {
            Ok(b) => b,
            Err(Error::EmptySubdifferential(msg)) => return Ok(Certificate::domain_failure(msg)),
            Err(e) => return Err(e),
        };
        let residual = (0..self.r())
            .map(|i| (lo[i] - candidate[i]).max(candidate[i] - hi[i]).max(0.0))
            .fold(0.0, f64::max);
        Ok(Certificate::from_bool(residual <= zero_tol, residual))
    }

    /// Nearest subgradient to `target`, or the minimum-norm one (zero).
    pub fn subgradient_select(
        &self,
        point: &DVector<f64>,
        target: Option<&DVector<f64>>,
        zero_tol: f64,
    ) -> Result<DVector<f64>> {
        let (lo, hi) = self.pattern_box(point, zero_tol)?;
        let Some(t) = target else {
            return Ok(DVector::zeros(self.r()));
        };
        check_dim("cardinality target", self.r(), t.len())?;
        Ok(DVector::from_fn(self.r(), |i, _| t[i].max(lo[i]).min(hi[i])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn flavor(side: Side, variant: Variant, r: usize) -> CardFlavor {
        CardFlavor::new(side, variant, DVector::from_element(r, 1.0)).unwrap()
    }

    #[test]
    fn counts() {
        let u = v(&[0.0, 2.0, -3.0]);
        let phi0 = flavor(Side::PrimalPhi, Variant::Zero, 3);
        let phip = flavor(Side::PrimalPhi, Variant::Plus, 3);
        assert_eq!(phi0.eval(&u, 1e-8).unwrap(), ExtendedReal::Finite(2.0));
        assert_eq!(phip.eval(&u, 1e-8).unwrap(), ExtendedReal::Finite(1.0));
        let psip = CardFlavor::new(Side::DualPsi, Variant::Plus, v(&[1.0, 2.0])).unwrap();
        assert!(psip.eval(&v(&[0.0, -1.0]), 1e-8).unwrap().is_pos_infinite());
    }

    #[test]
    fn subdifferential_patterns() {
        let phip = flavor(Side::PrimalPhi, Variant::Plus, 2);
        let u = v(&[0.0, 1.0]);
        assert!(phip.subdiff_check(&u, &v(&[0.5, 0.0]), 1e-8).unwrap().passed());
        assert!(!phip.subdiff_check(&u, &v(&[-0.5, 0.0]), 1e-8).unwrap().passed());
        let phi0 = flavor(Side::PrimalPhi, Variant::Zero, 2);
        assert!(phi0.subdiff_check(&u, &v(&[-7.0, 0.0]), 1e-8).unwrap().passed());
        let psip = flavor(Side::DualPsi, Variant::Plus, 2);
        let z = v(&[0.0, 3.0]);
        assert!(psip.subdiff_check(&z, &v(&[4.0, 0.0]), 1e-8).unwrap().passed());
        assert!(!psip.subdiff_check(&z, &v(&[4.0, 1.0]), 1e-8).unwrap().passed());
        let neg = psip.subdiff_check(&v(&[-1.0, 0.0]), &v(&[0.0, 0.0]), 1e-8).unwrap();
        assert!(neg.domain_violation);
    }

    #[test]
    fn selection_projects_onto_pattern() {
        let phi0 = flavor(Side::PrimalPhi, Variant::Zero, 2);
        let u = v(&[0.0, 5.0]);
        assert_eq!(phi0.subgradient_select(&u, Some(&v(&[3.0, 9.0])), 1e-8).unwrap(), v(&[3.0, 0.0]));
        let phip = flavor(Side::PrimalPhi, Variant::Plus, 2);
        assert_eq!(phip.subgradient_select(&u, Some(&v(&[-3.0, 9.0])), 1e-8).unwrap(), v(&[0.0, 0.0]));
        let psi0 = flavor(Side::DualPsi, Variant::Zero, 2);
        assert_eq!(psi0.subgradient_select(&v(&[2.0, 0.0]), None, 1e-8).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn nonpositive_weight_rejected() {
        assert!(CardFlavor::new(Side::PrimalPhi, Variant::Zero, v(&[1.0, 0.0])).is_err());
    }

    fn sparse_vec(r: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), -3.0..3.0f64], r)
    }

    proptest! {
        #[test]
        fn stationary_duality(u in sparse_vec(5), z in sparse_vec(5), plus in any::<bool>()) {
            let variant = if plus { Variant::Plus } else { Variant::Zero };
            let phi = flavor(Side::PrimalPhi, variant, 5);
            let psi = flavor(Side::DualPsi, variant, 5);
            let (u, z) = (DVector::from_vec(u), DVector::from_vec(z));
            let tol = 1e-8;
            let a = phi.subdiff_check(&u, &z, tol).unwrap().passed();
            let b = psi.subdiff_check(&z, &u, tol).unwrap().passed();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn zero_decomposes_into_plus_parts(u in sparse_vec(6), w in prop::collection::vec(0.1..5.0f64, 6)) {
            let w = DVector::from_vec(w);
            let u = DVector::from_vec(u);
            let phi0 = CardFlavor::new(Side::PrimalPhi, Variant::Zero, w.clone()).unwrap();
            let phip = CardFlavor::new(Side::PrimalPhi, Variant::Plus, w.clone()).unwrap();
            let lhs = phi0.eval(&u, 1e-8).unwrap().to_f64();
            let rhs = phip.eval(&u, 1e-8).unwrap().to_f64() + phip.eval(&-&u, 1e-8).unwrap().to_f64();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
            prop_assert!(lhs >= 0.0 && lhs <= w.sum() + 1e-12);
        }

        #[test]
        fn selection_is_a_member(u in sparse_vec(4), t in prop::collection::vec(-5.0..5.0f64, 4), plus in any::<bool>()) {
            let variant = if plus { Variant::Plus } else { Variant::Zero };
            let phi = flavor(Side::PrimalPhi, variant, 4);
            let u = DVector::from_vec(u);
            let t = DVector::from_vec(t);
            let s = phi.subgradient_select(&u, Some(&t), 1e-8).unwrap();
            prop_assert!(phi.subdiff_check(&u, &s, 0.0).unwrap().passed());
        }
    }
}

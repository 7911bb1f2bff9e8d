//! Fixtures shared by the criterion benches.

use ccopt::zoo::{self, Graph};
use ccopt::{DualModel, PrimalModel};
use nalgebra::DVector;

/// Edge denoising on a line of `n` vertices with a noisy two-level signal.
pub fn edge_model(n: usize, seed: u64) -> PrimalModel {
    let sig = zoo::piecewise_signal(n, 1, 0.2, seed).expect("valid signal parameters");
    zoo::edge_denoising(&Graph::Line(n), &sig.observed, &DVector::from_element(n - 1, 1.0))
        .expect("line graph model")
}

/// Calcium deconvolution on a trace of length `n`.
pub fn calcium_model(n: usize, seed: u64) -> PrimalModel {
    let sig = zoo::spike_train(n, 0.3, 0.6, 0.1, seed).expect("valid trace parameters");
    zoo::calcium(&sig.observed, &DVector::from_element(n - 1, 0.5)).expect("calcium model")
}

/// Sparse SVM dual on `r` separable points in the plane.
pub fn svm_dual(r: usize, seed: u64) -> DualModel {
    let data = zoo::separable_2class(2, r, 1.0, seed).expect("valid data parameters");
    zoo::sparse_svm_dual(&data.points, &data.labels, &DVector::from_element(r, 1.0), None).expect("svm dual")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_requested_sizes() {
        assert_eq!(edge_model(6, 1).r(), 5);
        assert_eq!(calcium_model(5, 1).n(), 5);
        assert_eq!(svm_dual(4, 1).r(), 4);
    }
}

//! Shared tolerance rules. Every module identifies supports, active bounds
//! and domain membership through these helpers so that enumeration,
//! stationarity and correspondence agree on what "zero" means.

use nalgebra::DVector;

/// Relative factor of the support-identification tolerance.
pub const ZERO_TOL_REL: f64 = 1e-8;

/// Relative factor of the slack used for membership in polyhedral sets.
pub const DOMAIN_SLACK_REL: f64 = 1e-9;

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `1e-8 * (1 + |v|_inf)`.
pub fn zero_tol(v: &DVector<f64>) -> f64 {
    ZERO_TOL_REL * (1.0 + inf_norm(v))
}

/// `1e-9 * (1 + |v|_inf)`.
pub fn domain_slack(v: &DVector<f64>) -> f64 {
    DOMAIN_SLACK_REL * (1.0 + inf_norm(v))
}

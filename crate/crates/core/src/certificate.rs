use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The check lies outside what the catalog can decide.
    Indeterminate,
}

/// A verdict together with the vectors that justify it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    #[serde(with = "crate::schema::ext_f64")]
    pub residual: f64,
    #[serde(default)]
    pub domain_violation: bool,
    #[serde(default)]
    pub witnesses: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Certificate {
    pub fn new(verdict: Verdict, residual: f64) -> Self {
        Certificate {
            verdict,
            residual,
            domain_violation: false,
            witnesses: BTreeMap::new(),
            note: None,
        }
    }

    pub fn pass(residual: f64) -> Self {
        Self::new(Verdict::Pass, residual)
    }

    pub fn fail(residual: f64) -> Self {
        Self::new(Verdict::Fail, residual)
    }

    pub fn indeterminate(note: impl Into<String>) -> Self {
        Self::new(Verdict::Indeterminate, f64::NAN).with_note(note)
    }

    pub fn domain_failure(note: impl Into<String>) -> Self {
        let mut c = Self::fail(f64::INFINITY).with_note(note);
        c.domain_violation = true;
        c
    }

    pub fn from_bool(ok: bool, residual: f64) -> Self {
        if ok {
            Self::pass(residual)
        } else {
            Self::fail(residual)
        }
    }

    pub fn with_witness(mut self, name: &str, v: &DVector<f64>) -> Self {
        self.witnesses.insert(name.to_string(), v.iter().copied().collect());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn witness(&self, name: &str) -> Option<DVector<f64>> {
        self.witnesses
            .get(name)
            .map(|v| DVector::from_column_slice(v))
    }
}

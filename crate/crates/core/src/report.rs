//! Shared reporting records.
//!
//! Every measured check in the crate reports failures the same way: a named
//! check, the bound it was held to, the value actually measured, and enough
//! witness data to reproduce the failure by hand. Passing checks return
//! empty violation lists; failure is data, not a panic.

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub check: String,
    pub bound: f64,
    pub measured: f64,
    pub witnesses: Vec<Value>,
}

impl Violation {
    pub fn new(check: &str, bound: f64, measured: f64) -> Self {
        Violation { check: check.to_string(), bound, measured, witnesses: Vec::new() }
    }

    pub fn with_witness(mut self, w: Value) -> Self {
        self.witnesses.push(w);
        self
    }

    /// Convenience for the common "tuple of vertices" witness.
    pub fn with_vertices(self, label: &str, verts: &[usize]) -> Self {
        self.with_witness(json!({ label: verts }))
    }
}

/// Outcome of one named check: measured maximum against its bound, plus any
/// violations. `measured <= bound` iff `violations` is empty, by contract of
/// every producer in this crate.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub bound: f64,
    pub measured: f64,
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

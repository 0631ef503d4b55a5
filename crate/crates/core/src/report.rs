//! Grid-check reports shared by the optimality verifier and the
//! equilibrium condition checker.

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

/// Worst observed violation of one named condition and where it occurred.
///
/// For a one-sided condition `g(x) <= 0` the violation is the raw maximum of
/// `g` over the grid, so a comfortably satisfied condition reports a negative
/// value. Residual-style conditions report a magnitude.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionStat {
    pub max_violation: f64,
    pub at_x: f64,
}

/// Named condition checks in evaluation order.
///
/// Serializes to `{condition_name: {max_violation, at_x}}`.
#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    entries: Vec<(String, ConditionStat)>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, max_violation: f64, at_x: f64) {
        self.entries
            .push((name.to_owned(), ConditionStat { max_violation, at_x }));
    }

    pub fn get(&self, name: &str) -> Option<ConditionStat> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| *s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ConditionStat)> {
        self.entries.iter().map(|(n, s)| (n.as_str(), *s))
    }

    /// True when every recorded violation is at or below `tol`.
    pub fn passed(&self, tol: f64) -> bool {
        self.entries.iter().all(|(_, s)| s.max_violation <= tol)
    }

    pub fn worst(&self) -> Option<(&str, ConditionStat)> {
        self.iter()
            .max_by(|a, b| a.1.max_violation.total_cmp(&b.1.max_violation))
    }
}

impl Serialize for CheckReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (name, stat) in &self.entries {
            map.serialize_entry(name, stat)?;
        }
        map.end()
    }
}

/// Inclusive grid from `lo` to `hi` in steps of `step` (endpoints to
/// step-rounding).
pub fn grid_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && hi >= lo, "grid_range requires step > 0 and hi >= lo");
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Folds `values` into the running (max, argmax) pair of a condition.
pub(crate) fn max_over<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (x, v) in pairs {
        if v > best.0 {
            best = (v, x);
        }
    }
    (best.0, best.1)
}

//! Verification reports: measured constants, the bound being checked,
//! slack, and pass/fail, serialized as versioned JSON.

use serde::Serialize;
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: u32 = 1;

/// One checked inequality: `lhs <= bound` (exact or toleranced).
#[derive(Serialize, Clone, Debug)]
pub struct CheckLine {
    pub check: String,
    pub lhs: f64,
    pub bound: f64,
    pub pass: bool,
    /// bound - lhs; negative only on failure.
    pub slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

#[derive(Serialize, Clone, Debug)]
pub struct VerificationReport {
    pub schema: u32,
    pub theorem: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    pub constants: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paper_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    pub pass: bool,
    pub checks: Vec<CheckLine>,
}

pub fn le_rel(lhs: f64, bound: f64, tol: f64) -> bool {
    lhs <= bound + tol * bound.abs().max(lhs.abs()).max(1.0)
}

impl VerificationReport {
    pub fn new(theorem: impl Into<String>) -> Self {
        VerificationReport {
            schema: SCHEMA_VERSION,
            theorem: theorem.into(),
            class: None,
            delta: None,
            constants: BTreeMap::new(),
            paper_bound: None,
            slack: None,
            pass: true,
            checks: Vec::new(),
        }
    }

    pub fn with_delta(mut self, delta: &crate::exact::Rational) -> Self {
        self.delta = Some(crate::exact::format_rational(delta));
        self
    }

    pub fn with_class(mut self, class: impl Into<String>) -> Self {
        self.class = Some(class.into());
        self
    }

    pub fn constant(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.constants.insert(name.into(), value);
        self
    }

    fn push(&mut self, check: String, lhs: f64, bound: f64, pass: bool, witness: Option<String>) {
        self.pass &= pass;
        self.checks.push(CheckLine {
            check,
            lhs,
            bound,
            pass,
            slack: bound - lhs,
            witness,
        });
    }

    /// Exact inequality lhs <= bound.
    pub fn check_le_exact(&mut self, check: impl Into<String>, lhs: f64, bound: f64) -> bool {
        let ok = lhs <= bound;
        self.push(check.into(), lhs, bound, ok, None);
        ok
    }

    /// lhs <= bound up to a relative tolerance.
    pub fn check_le_rel(
        &mut self,
        check: impl Into<String>,
        lhs: f64,
        bound: f64,
        tol: f64,
    ) -> bool {
        let ok = le_rel(lhs, bound, tol);
        self.push(check.into(), lhs, bound, ok, None);
        ok
    }

    pub fn check_le_rel_witness(
        &mut self,
        check: impl Into<String>,
        lhs: f64,
        bound: f64,
        tol: f64,
        witness: String,
    ) -> bool {
        let ok = le_rel(lhs, bound, tol);
        self.push(check.into(), lhs, bound, ok, Some(witness));
        ok
    }

    /// Record the headline bound of the report (mirrored in `paper_bound`
    /// and `slack`), checked at the given tolerance (0 for exact).
    pub fn headline(&mut self, check: impl Into<String>, lhs: f64, bound: f64, tol: f64) -> bool {
        let ok = if tol == 0.0 {
            lhs <= bound
        } else {
            le_rel(lhs, bound, tol)
        };
        self.paper_bound = Some(bound);
        self.slack = Some(bound - lhs);
        self.push(check.into(), lhs, bound, ok, None);
        ok
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// Flat CSV rows (check,lhs,bound,pass,slack) for constant tables.
    pub fn csv_rows(&self) -> String {
        let mut out = String::from("check,lhs,bound,pass,slack\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.check, c.lhs, c.bound, c.pass, c.slack
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_tracks_pass_and_slack() {
        let mut r = VerificationReport::new("demo");
        assert!(r.check_le_exact("a", 1.0, 2.0));
        assert!(r.check_le_rel("b", 1.0 + 1e-12, 1.0, 1e-9));
        assert!(r.pass);
        r.headline("main", 3.0, 2.0, 0.0);
        assert!(!r.pass);
        assert_eq!(r.slack, Some(-1.0));
        let v = r.to_json();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["checks"].as_array().unwrap().len(), 3);
    }
}

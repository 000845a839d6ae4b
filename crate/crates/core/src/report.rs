use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Status::Pass
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
        })
    }
}

/// Comparison a metric must satisfy against a named tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl Cmp {
    fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Cmp::Le => value <= bound,
            Cmp::Lt => value < bound,
            Cmp::Ge => value >= bound,
            Cmp::Gt => value > bound,
            Cmp::Eq => value == bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
            Cmp::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub metric: String,
    pub cmp: Cmp,
    pub tolerance: String,
}

/// Structured pass/fail outcome. `status` is pass exactly when every
/// registered check holds (and no error was recorded).
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub task: String,
    pub status: Status,
    pub metrics: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

impl Report {
    pub fn new(task: impl Into<String>) -> Self {
        Report {
            task: task.into(),
            status: Status::Pass,
            metrics: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            error: None,
        }
    }

    /// A report for a task that could not be carried out.
    pub fn from_error(task: impl Into<String>, err: &crate::Error) -> Self {
        let mut r = Report::new(task);
        r.error = Some(err.to_string());
        r.notes.push(format!("error: {err}"));
        r.status = Status::Fail;
        r
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.metrics.insert(name.into(), value);
        self
    }

    pub fn tolerance(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.tolerances.insert(name.into(), value);
        self
    }

    /// Registers `metric cmp tolerance`; both names must be recorded before
    /// [`Report::finish`] is called.
    pub fn require(&mut self, metric: &str, cmp: Cmp, tolerance: &str) -> &mut Self {
        self.checks.push(Check {
            metric: metric.to_string(),
            cmp,
            tolerance: tolerance.to_string(),
        });
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    fn check_holds(&self, c: &Check) -> bool {
        match (
            self.metrics.get(&c.metric),
            self.tolerances.get(&c.tolerance),
        ) {
            (Some(v), Some(t)) => c.cmp.holds(*v, *t),
            _ => false,
        }
    }

    /// Evaluates every check and sets `status`.
    pub fn finish(mut self) -> Self {
        let ok = self.error.is_none() && self.checks.iter().all(|c| self.check_holds(c));
        self.status = Status::from_bool(ok);
        for c in &self.checks {
            if !self.check_holds(c) {
                let v = self.metrics.get(&c.metric).copied().unwrap_or(f64::NAN);
                let t = self
                    .tolerances
                    .get(&c.tolerance)
                    .copied()
                    .unwrap_or(f64::NAN);
                self.notes.push(format!(
                    "violated: {} = {v:e} not {} {} = {t:e}",
                    c.metric,
                    c.cmp.symbol(),
                    c.tolerance
                ));
            }
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.status.is_pass()
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_tracks_checks() {
        let mut r = Report::new("t");
        r.metric("residual", 1e-12).tolerance("tol", 1e-10);
        r.require("residual", Cmp::Le, "tol");
        let r = r.finish();
        assert!(r.passed());

        let mut r = Report::new("t");
        r.metric("residual", 1e-8).tolerance("tol", 1e-10);
        r.require("residual", Cmp::Le, "tol");
        let r = r.finish();
        assert!(!r.passed());
        assert!(r.notes[0].contains("residual"));

        let mut r = Report::new("t");
        r.require("missing", Cmp::Le, "tol");
        assert!(!r.finish().passed());
    }
}

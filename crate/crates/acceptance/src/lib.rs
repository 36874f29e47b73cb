//! Pass/fail bookkeeping for the acceptance run.
//!
//! Each check runs in isolation (a panic counts as a failure) and prints one
//! line as soon as it finishes. Set `ACCEPTANCE_FILTER` to a substring to
//! run only matching checks.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

pub type Outcome = Result<String, String>;

#[derive(Debug)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

#[derive(Debug, Default)]
pub struct Report {
    filter: Option<String>,
    results: Vec<CheckResult>,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

impl Report {
    pub fn from_env() -> Self {
        Report {
            filter: std::env::var("ACCEPTANCE_FILTER")
                .ok()
                .filter(|f| !f.is_empty()),
            results: Vec::new(),
        }
    }

    pub fn run(&mut self, name: &str, check: impl FnOnce() -> Outcome) {
        if self.filter.as_deref().is_some_and(|f| !name.contains(f)) {
            return;
        }
        let start = Instant::now();
        let (passed, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(Ok(d)) => (true, d),
            Ok(Err(d)) => (false, d),
            Err(p) => (false, format!("panic: {}", panic_message(p))),
        };
        let r = CheckResult {
            name: name.to_string(),
            passed,
            detail,
            elapsed: start.elapsed(),
        };
        println!(
            "{} {:<26} {:>8.1}s  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.elapsed.as_secs_f64(),
            r.detail
        );
        self.results.push(r);
    }

    pub fn results(&self) -> &[CheckResult] {
        &self.results
    }

    /// Print the summary line; true when every check passed.
    pub fn finish(&self) -> bool {
        let failed = self.results.iter().filter(|r| !r.passed).count();
        println!(
            "acceptance: {} passed, {failed} failed",
            self.results.len() - failed
        );
        failed == 0
    }
}

/// `Ok(detail)` when `cond` holds, `Err(detail)` otherwise.
pub fn verdict(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_failures() {
        let mut r = Report::default();
        r.run("ok", || Ok("fine".into()));
        r.run("bad", || Err("nope".into()));
        r.run("boom", || panic!("kaboom"));
        let passed: Vec<bool> = r.results().iter().map(|x| x.passed).collect();
        assert_eq!(passed, [true, false, false]);
        assert!(r.results()[2].detail.contains("kaboom"));
        assert!(!r.finish());
    }

    #[test]
    fn filter_skips_non_matching() {
        let mut r = Report {
            filter: Some("grad".into()),
            ..Default::default()
        };
        r.run("gradient", || Ok(String::new()));
        r.run("layout", || Err(String::new()));
        assert_eq!(r.results().len(), 1);
        assert!(r.finish());
    }
}

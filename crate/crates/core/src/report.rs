//! Pass/fail reports shared by the validators and the verification suite.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, name: impl Into<String>, pass: bool, detail: Option<String>) {
        self.checks.push(Check { name: name.into(), pass, detail });
    }

    pub fn ok(&mut self, name: impl Into<String>) {
        self.push(name, true, None);
    }

    pub fn fail(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.push(name, false, Some(detail.into()));
    }

    /// Records `pass`, attaching `detail` only on failure.
    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl FnOnce() -> String) {
        let detail = if pass { None } else { Some(detail()) };
        self.push(name, pass, detail);
    }

    pub fn extend_prefixed(&mut self, prefix: &str, other: Report) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{} {}", if c.pass { "ok  " } else { "FAIL" }, c.name)?;
            if let Some(d) = &c.detail {
                write!(f, ": {d}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

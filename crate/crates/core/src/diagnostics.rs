//! Diagnostics shared by every compile stage.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// A finding about a layout. `code` is one of the stable strings listed in
/// the crate documentation (`rule.grid`, `collide.beam`, ...); `subject`
/// names the plate, element or beam concerned.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &str, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code: code.to_string(),
            subject: subject.into(),
            message: message.into(),
        }
    }

    pub fn warning(code: &str, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code: code.to_string(),
            subject: subject.into(),
            message: message.into(),
        }
    }

    /// Prefixes the subject with a plate or instance name. Plate-level
    /// findings already named after the scope keep the bare name.
    pub fn within(mut self, scope: &str) -> Self {
        self.subject = if self.subject.is_empty() || self.subject == scope {
            scope.to_string()
        } else {
            format!("{scope}/{}", self.subject)
        };
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.severity, self.code, self.subject, self.message)
    }
}

/// Sorts by severity, code, subject and message, dropping exact duplicates.
pub fn sort_diagnostics(d: &mut Vec<Diagnostic>) {
    d.sort();
    d.dedup();
}

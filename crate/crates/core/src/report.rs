//! Annotations attached to results, and line-oriented output.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnotationKind {
    /// A printed formula disagrees with the exact computation in a way no
    /// uniform weight explains.
    Typo,
    /// A printed formula is a constant multiple of the exact one.
    WeightConvention,
    /// A printed classification disagrees with the computed one.
    ClassificationDiscrepancy,
}

impl AnnotationKind {
    pub fn label(self) -> &'static str {
        match self {
            AnnotationKind::Typo => "typo",
            AnnotationKind::WeightConvention => "weight-convention",
            AnnotationKind::ClassificationDiscrepancy => "classification-discrepancy",
        }
    }
}

impl fmt::Display for AnnotationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A note about a published formula: which printed form it concerns and
/// what the computation found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub printed: String,
    pub message: String,
}

impl Annotation {
    pub fn new(
        kind: AnnotationKind,
        printed: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Annotation {
            kind,
            printed: printed.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.kind, self.printed, self.message)
    }
}

/// Output style shared by the report types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    JsonLines,
}

/// Anything that renders as human text and as one JSON object per line.
pub trait Report {
    fn text(&self) -> String;
    fn json_value(&self) -> serde_json::Value;

    fn json_line(&self) -> String {
        serde_json::to_string(&self.json_value()).expect("report values serialize")
    }

    fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Text => self.text(),
            OutputFormat::JsonLines => self.json_line(),
        }
    }
}

/// Serializes through `Display`.
pub fn display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Formats a float compactly for text reports.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() < 1e-3 || v.abs() >= 1e4 {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

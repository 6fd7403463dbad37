//! JSON check reports and fixed-precision number formatting.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Formats with 17 significant digits (`d.dddddddddddddddde±x`).
pub fn fmt_f64(x: f64) -> String {
    // no signed zero in output
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// An `f64` serialized with 17 significant digits; non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(fmt_f64(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

/// Outcome of one numeric check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub samples: usize,
    pub mean: Sig17,
    pub max_abs_residual: Sig17,
    pub tolerance: Sig17,
    pub pass: bool,
    /// Check-specific fields appended after the fixed ones.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Extra>,
}

/// Value of a check-specific report field.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Extra {
    Number(Sig17),
    Count(u64),
    Flag(bool),
    Text(String),
}

impl From<f64> for Extra {
    fn from(v: f64) -> Self {
        Extra::Number(Sig17(v))
    }
}

impl From<usize> for Extra {
    fn from(v: usize) -> Self {
        Extra::Count(v as u64)
    }
}

impl From<bool> for Extra {
    fn from(v: bool) -> Self {
        Extra::Flag(v)
    }
}

impl From<&str> for Extra {
    fn from(v: &str) -> Self {
        Extra::Text(v.to_string())
    }
}

impl CheckReport {
    /// Passes when `max_abs_residual < tolerance`.
    pub fn new(check: &str, samples: usize, mean: f64, max_abs_residual: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            samples,
            mean: Sig17(mean),
            max_abs_residual: Sig17(max_abs_residual),
            tolerance: Sig17(tolerance),
            pass: max_abs_residual < tolerance,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Extra>) -> Self {
        self.extra.insert(key.to_string(), value.into());
        self
    }

    /// Fails the check regardless of the residual.
    pub fn require(mut self, condition: bool) -> Self {
        self.pass &= condition;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-8.0), "-8.0000000000000000e0");
        assert_eq!(fmt_f64(-0.0), "0.0000000000000000e0");
        let r = CheckReport::new("x", 3, 1.5, 2e-10, 1e-9);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["pass"], true);
        assert_eq!(v["max_abs_residual"].as_f64(), Some(2e-10));
        assert!(r.to_json().contains("1.5000000000000000e0"));
        assert!(!CheckReport::new("x", 1, 0.0, f64::NAN, 1.0).pass);
        assert!(CheckReport::new("x", 1, 0.0, f64::NAN, 1.0).to_json().contains("null"));
        let extended = CheckReport::new("x", 1, 0.0, 0.5, 1.0).with("constant", 0.1).with("nonzero", false).require(false);
        let text = extended.to_json();
        assert!(text.contains("\"constant\": 1.0000000000000001e-1"), "{text}");
        assert!(!extended.pass);
    }
}

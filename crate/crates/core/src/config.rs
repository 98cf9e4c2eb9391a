//! Plain-text `key = value` action files.
//!
//! ```text
//! # quartic oscillator
//! dimension = 1
//! mass = 1
//! v2 = 1
//! v4 = 0.01
//! ```
//!
//! `dimension` and `mass` are required. Coefficients default to zero. Keys that
//! do not belong to the chosen dimension, unknown keys and duplicates are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::potential::{ActionSpec, Potential};

const KEYS_1D: &[&str] = &["dimension", "mass", "v0", "v2", "v4", "v6"];
const KEYS_2D: &[&str] = &["dimension", "mass", "v0", "v2", "v22", "v4"];
const ALL_KEYS: &[&str] = &["dimension", "mass", "v0", "v2", "v4", "v6", "v22"];

pub fn parse_action(text: &str) -> Result<ActionSpec> {
    parse_with(text, true)
}

/// Like [`parse_action`] but without the confinement check, for fitted or
/// derived quantum actions whose leading coefficient may be slightly negative.
pub fn parse_quantum_action(text: &str) -> Result<ActionSpec> {
    parse_with(text, false)
}

fn parse_with(text: &str, validate: bool) -> Result<ActionSpec> {
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        if !ALL_KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("line {}: `{key}` is not a number", lineno + 1)))?;
        if entries.insert(key.to_string(), value).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
    }

    let dimension = *entries
        .get("dimension")
        .ok_or_else(|| Error::Config("missing key `dimension`".into()))?;
    let mass = *entries.get("mass").ok_or_else(|| Error::Config("missing key `mass`".into()))?;
    let allowed = match dimension {
        d if d == 1.0 => KEYS_1D,
        d if d == 2.0 => KEYS_2D,
        d => return Err(Error::Config(format!("dimension must be 1 or 2 (got {d})"))),
    };
    if let Some(bad) = entries.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Config(format!("key `{bad}` not valid for dimension {dimension}")));
    }
    let get = |k: &str| entries.get(k).copied().unwrap_or(0.0);
    if !validate {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Config(format!("mass must be > 0 (got {mass})")));
        }
        let template = if dimension == 1.0 { ActionSpec::quartic_1d() } else { ActionSpec::pullen_edmonds() };
        let c = if dimension == 1.0 {
            [get("v0"), get("v2"), get("v4"), get("v6")]
        } else {
            [get("v0"), get("v2"), get("v22"), get("v4")]
        };
        return Ok(template.with_parameters(mass, c));
    }
    let spec = if dimension == 1.0 {
        ActionSpec::one_d(mass, get("v0"), get("v2"), get("v4"), get("v6"))
    } else {
        ActionSpec::two_d(mass, get("v0"), get("v2"), get("v22"), get("v4"))
    };
    spec.map_err(|e| Error::Config(e.to_string()))
}

/// Inverse of [`parse_action`]; values are written with round-trip precision.
pub fn format_action(spec: &ActionSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dimension = {}", spec.dimension());
    let _ = writeln!(out, "mass = {:?}", spec.mass);
    match &spec.potential {
        Potential::OneD(p) => {
            for (k, v) in [("v0", p.v0), ("v2", p.v2), ("v4", p.v4), ("v6", p.v6)] {
                let _ = writeln!(out, "{k} = {v:?}");
            }
        }
        Potential::TwoD(p) => {
            for (k, v) in [("v0", p.v0), ("v2", p.v2), ("v22", p.v22), ("v4", p.v4)] {
                let _ = writeln!(out, "{k} = {v:?}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_both_families() {
        let a = parse_action("dimension = 1\nmass = 1\nv2 = 1\nv4 = 0.01 # quartic\n").unwrap();
        assert_eq!(a, ActionSpec::quartic_1d());
        let b = parse_action("# PE\ndimension=2\nmass=1\nv2=0.5\nv22=0.05\n").unwrap();
        assert_eq!(b, ActionSpec::pullen_edmonds());
    }

    #[test]
    fn rejects_unknown_misplaced_and_duplicate_keys() {
        assert!(parse_action("dimension = 1\nmass = 1\nv2 = 1\nfoo = 3\n").is_err());
        assert!(parse_action("dimension = 1\nmass = 1\nv2 = 1\nv22 = 3\n").is_err());
        assert!(parse_action("dimension = 2\nmass = 1\nv2 = 1\nv6 = 3\n").is_err());
        assert!(parse_action("dimension = 1\nmass = 1\nv2 = 1\nv2 = 3\n").is_err());
        assert!(parse_action("mass = 1\nv2 = 1\n").is_err());
        assert!(parse_action("dimension = 3\nmass = 1\nv2 = 1\n").is_err());
        assert!(parse_action("dimension = 1\nmass = one\n").is_err());
        assert!(parse_action("dimension = 1\nmass = 1\nv2 = -1\n").is_err());
    }

    #[test]
    fn quantum_actions_skip_confinement() {
        let text = "dimension = 1\nmass = 0.999\nv0 = 0.7\nv2 = 1.01\nv4 = 0.0099\nv6 = -6.9e-7\n";
        assert!(parse_action(text).is_err());
        let q = parse_quantum_action(text).unwrap();
        assert_eq!(q.coefficients(), [0.7, 1.01, 0.0099, -6.9e-7]);
        assert!(parse_quantum_action("dimension = 2\nmass = 0\nv2 = 1\n").is_err());
    }

    proptest! {
        #[test]
        fn format_parse_roundtrip(m in 0.1f64..3.0, v0 in -2.0f64..2.0, v2 in 0.01f64..3.0, c in -0.1f64..0.3, v4 in 0.0f64..0.1) {
            let a = ActionSpec::two_d(m, v0, v2, c, v4).unwrap();
            prop_assert_eq!(parse_action(&format_action(&a)).unwrap(), a);
            let b = ActionSpec::one_d(m, v0, v2, v4, 0.0).unwrap();
            prop_assert_eq!(parse_action(&format_action(&b)).unwrap(), b);
        }
    }
}

//! Physical quantities with optional unit suffixes, stored in SI.
//!
//! Lengths accept `m`, `cm`, `mm`, `um`/`µm`; times accept `s`, `ms`,
//! `us`/`µs`, `ns`. Bare numbers are already SI.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot read {text:?} as a {kind}: {reason}")]
pub struct UnitError {
    pub text: String,
    pub kind: &'static str,
    pub reason: &'static str,
}

// (suffix, units per SI unit); dividing keeps e.g. "10us" == 1e-5 exactly
const LENGTH_UNITS: &[(&str, f64)] = &[("mm", 1e3), ("cm", 1e2), ("um", 1e6), ("µm", 1e6), ("m", 1.0)];
const TIME_UNITS: &[(&str, f64)] = &[("ms", 1e3), ("us", 1e6), ("µs", 1e6), ("ns", 1e9), ("s", 1.0)];

fn parse_with(text: &str, units: &[(&str, f64)], kind: &'static str) -> Result<f64, UnitError> {
    let err = |reason| UnitError {
        text: text.to_string(),
        kind,
        reason,
    };
    let t = text.trim();
    let (number, per_si) = units
        .iter()
        .find_map(|&(suffix, per_si)| t.strip_suffix(suffix).map(|rest| (rest.trim_end(), per_si)))
        .unwrap_or((t, 1.0));
    let value: f64 = number.parse().map_err(|_| err("not a number"))?;
    if !value.is_finite() {
        return Err(err("not finite"));
    }
    Ok(value / per_si)
}

/// Parses a length such as `"2mm"`, `"0.1"` or `"10 cm"` into meters.
pub fn parse_length(text: &str) -> Result<f64, UnitError> {
    parse_with(text, LENGTH_UNITS, "length")
}

/// Parses a duration such as `"10us"` or `"1e-5"` into seconds.
pub fn parse_time(text: &str) -> Result<f64, UnitError> {
    parse_with(text, TIME_UNITS, "time")
}

macro_rules! quantity {
    ($name:ident, $parse:ident, $expect:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = $name;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        f.write_str($expect)
                    }
                    fn visit_f64<E: de::Error>(self, v: f64) -> Result<$name, E> {
                        Ok($name(v))
                    }
                    fn visit_i64<E: de::Error>(self, v: i64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }
                    fn visit_u64<E: de::Error>(self, v: u64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }
                    fn visit_str<E: de::Error>(self, v: &str) -> Result<$name, E> {
                        $parse(v).map($name).map_err(E::custom)
                    }
                }
                d.deserialize_any(V)
            }
        }
    };
}

quantity!(Length, parse_length, "a length in meters or a string with a unit suffix");
quantity!(Duration, parse_time, "a time in seconds or a string with a unit suffix");

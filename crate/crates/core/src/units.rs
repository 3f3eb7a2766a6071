//! Unit conversions and a unit-aware quantity type for scenario files.
//!
//! Internally every power is in linear watts and every ratio is linear.
//! Decibel forms only appear when reading or writing files.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// A power value read from a scenario file.
///
/// Accepts a bare number (watts) or a string with a unit suffix:
/// `"27 dBm"`, `"2 mW"`, `"0.1 W"`. Always serialized as a bare number of
/// watts so that save/load is value-exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Watts(pub f64);

/// A dimensionless ratio read from a scenario file: bare number (linear)
/// or a string such as `"3 dB"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio(pub f64);

fn split_unit(s: &str) -> std::result::Result<(f64, String), String> {
    let s = s.trim();
    let idx = s.find(|c: char| c.is_ascii_alphabetic()).ok_or_else(|| format!("missing unit suffix in {s:?}"))?;
    let (num, unit) = s.split_at(idx);
    let value = f64::from_str(num.trim()).map_err(|e| format!("bad number in {s:?}: {e}"))?;
    if !value.is_finite() {
        return Err(format!("non-finite value in {s:?}"));
    }
    Ok((value, unit.trim().to_ascii_lowercase()))
}

impl FromStr for Watts {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Ok(v) = f64::from_str(s.trim()) {
            return Ok(Watts(v));
        }
        let (value, unit) = split_unit(s)?;
        match unit.as_str() {
            "dbm" => Ok(Watts(dbm_to_watts(value))),
            "w" => Ok(Watts(value)),
            "mw" => Ok(Watts(value * 1e-3)),
            other => Err(format!("unknown power unit {other:?}")),
        }
    }
}

impl FromStr for Ratio {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Ok(v) = f64::from_str(s.trim()) {
            return Ok(Ratio(v));
        }
        let (value, unit) = split_unit(s)?;
        match unit.as_str() {
            "db" => Ok(Ratio(db_to_linear(value))),
            other => Err(format!("unknown ratio unit {other:?}")),
        }
    }
}

macro_rules! number_or_suffixed {
    ($ty:ident, $expect:literal) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = $ty;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        f.write_str($expect)
                    }
                    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<$ty, E> {
                        Ok($ty(v))
                    }
                    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<$ty, E> {
                        Ok($ty(v as f64))
                    }
                    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<$ty, E> {
                        Ok($ty(v as f64))
                    }
                    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<$ty, E> {
                        v.parse().map_err(E::custom)
                    }
                }
                d.deserialize_any(V)
            }
        }
    };
}

number_or_suffixed!(Watts, "a number of watts or a string like \"27 dBm\"");
number_or_suffixed!(Ratio, "a linear number or a string like \"3 dB\"");

//! Serde helpers accepting numbers either as JSON numbers or as exact decimal strings.

use serde::de::{Deserializer, Error as _};
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrStr {
    Num(f64),
    Str(String),
}

fn to_f64<E: serde::de::Error>(v: NumOrStr) -> Result<f64, E> {
    match v {
        NumOrStr::Num(x) => Ok(x),
        NumOrStr::Str(s) => s.trim().parse::<f64>().map_err(|e| E::custom(format!("invalid number '{s}': {e}"))),
    }
}

pub fn f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    to_f64(NumOrStr::deserialize(d)?)
}

pub fn opt_f64<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Option::<NumOrStr>::deserialize(d)?.map(to_f64).transpose()
}

fn to_u64<E: serde::de::Error>(v: NumOrStr) -> Result<u64, E> {
    match v {
        NumOrStr::Num(x) if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 => Ok(x as u64),
        NumOrStr::Num(x) => Err(E::custom(format!("expected a non-negative integer, got {x}"))),
        NumOrStr::Str(s) => s.trim().parse::<u64>().map_err(|e| E::custom(format!("invalid integer '{s}': {e}"))),
    }
}

pub fn u64<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    to_u64(NumOrStr::deserialize(d)?)
}

pub fn opt_u64<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    Option::<NumOrStr>::deserialize(d)?.map(to_u64).transpose()
}

pub fn opt_u32<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u32>, D::Error> {
    match opt_u64(d)? {
        Some(v) => u32::try_from(v).map(Some).map_err(|_| D::Error::custom(format!("{v} does not fit in u32"))),
        None => Ok(None),
    }
}

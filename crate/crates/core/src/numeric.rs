//! Exact rational helpers shared by the rate modules.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn from_u128(n: u128) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `a / b` for two binomial-sized integers; `b` must be non-zero.
pub fn frac_u128(a: u128, b: u128) -> Rational {
    Rational::new(BigInt::from(a), BigInt::from(b))
}

pub fn floor_i64(x: &Rational) -> i64 {
    x.floor().to_integer().to_i64().expect("floor fits in i64")
}

pub fn ceil_i64(x: &Rational) -> i64 {
    x.ceil().to_integer().to_i64().expect("ceil fits in i64")
}

pub fn frac(x: &Rational) -> Rational {
    x - x.floor()
}

pub fn is_integer(x: &Rational) -> bool {
    x.is_integer()
}

pub fn pow(x: &Rational, k: u32) -> Rational {
    num_traits::pow(x.clone(), k as usize)
}

pub fn to_f64(x: &Rational) -> f64 {
    // numerator/denominator may exceed f64 range individually
    let n = x.numer();
    let d = x.denom();
    match (n.to_f64(), d.to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            let shift = d.bits().max(n.bits()).saturating_sub(900);
            let a = (n >> shift).to_f64().unwrap_or(0.0);
            let b = (d >> shift).to_f64().unwrap_or(1.0);
            a / b
        }
    }
}

/// Exact rational from an `f64` (binary expansion, no rounding).
pub fn from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Closest rational with denominator at most `max_den` (best approximation
/// by scanning denominators, fine for the small bounds used here).
pub fn snap(x: f64, max_den: i64) -> Rational {
    let mut best = ratio(x.round() as i64, 1);
    let mut best_err = (x - x.round()).abs();
    for d in 2..=max_den {
        let n = (x * d as f64).round() as i64;
        let err = (x - n as f64 / d as f64).abs();
        if err + 1e-15 < best_err {
            best = ratio(n, d);
            best_err = err;
        }
    }
    best
}

/// Parses `"0.85"`, `"-2"`, `"3/4"` or `"1e-3"`-free decimal strings exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, fracpart) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && fracpart.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(fracpart.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{fracpart}");
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let d = num_traits::pow(BigInt::from(10), fracpart.len());
    let r = Rational::new(n, d);
    Ok(if neg { -r } else { r })
}

/// `"7/4"`, `"2"`, `"0"`, `"-1/3"`.
pub fn format_rational(x: &Rational) -> String {
    if x.is_integer() {
        x.to_integer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn lcm_u64(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

pub fn abs(x: &Rational) -> Rational {
    x.abs()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub mod serde_rational {
    //! Serialize rationals as exact strings.
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

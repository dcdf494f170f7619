//! Closed-form achievable rates for two files.
//!
//! `c(K, a, n) = C(K-a, n) / C(K, n)` is the fraction of subfiles cached by
//! `n` users that a fixed set of `a` users all miss. Every rate below is a
//! sum of such terms, interpolated linearly between integer `n`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::binom;
use crate::error::{Error, Result};
use crate::numeric::{self, frac_u128, Rational};

/// `C(K-a, n) / C(K, n)` for integer `0 <= n <= K`.
pub fn c_term(users: usize, a: usize, n: usize) -> Rational {
    let k = users as i64;
    frac_u128(binom(k - a as i64, n as i64), binom(k, n as i64))
}

/// `c(K, a, x)` linearly interpolated between `floor(x)` and `floor(x) + 1`.
pub fn interp(users: usize, a: usize, x: &Rational) -> Rational {
    let n = numeric::floor_i64(x) as usize;
    let f = numeric::frac(x);
    let lo = c_term(users, a, n);
    if f.is_zero() {
        return lo;
    }
    let hi = c_term(users, a, n + 1);
    (Rational::one() - &f) * lo + f * hi
}

/// `(R1, R2)` at an integer profile; the scheme sends `max(R1, R2)` when
/// both files are requested.
pub fn pair_rates(users: usize, r1: usize, r2: usize) -> (Rational, Rational) {
    let r1_rate = c_term(users, 1, r1) + c_term(users, 2, r2);
    let r2_rate = c_term(users, 1, r2) + c_term(users, 2, r1);
    (r1_rate, r2_rate)
}

/// Two-sided rate `max(R1, R2)` at an integer profile.
pub fn two_sided_rate(users: usize, r1: usize, r2: usize) -> Rational {
    let (a, b) = pair_rates(users, r1, r2);
    a.max(b)
}

/// `(K - r) / K`, the rate when only one file is requested.
pub fn one_sided_rate(users: usize, r: usize) -> Rational {
    c_term(users, 1, r)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prop1Order {
    /// `R1 >= R2`.
    pub first_dominates: bool,
    /// `R1 - R2 = (r1 - r2)(K - r1 - r2) / (K (K - 1))`.
    pub gap: Rational,
}

pub fn prop1_order(users: usize, r1: usize, r2: usize) -> Result<Prop1Order> {
    if r1 <= r2 || r1 > users {
        return Err(Error::InvalidArgument(format!(
            "ordering needs r2 < r1 <= K, got ({r1}, {r2}) with K = {users}"
        )));
    }
    let k = users as i64;
    let gap = numeric::ratio(
        (r1 as i64 - r2 as i64) * (k - r1 as i64 - r2 as i64),
        k * (k - 1),
    );
    Ok(Prop1Order { first_dominates: r1 + r2 <= users, gap })
}

/// `[C(K, r+1) - C(K-2, r+1)] / C(K, r)`, the two-file rate with equal
/// allocations.
pub fn uniform_pair_rate(users: usize, r: usize) -> Rational {
    let k = users as i64;
    let r = r as i64;
    frac_u128(binom(k, r + 1) - binom(k - 2, r + 1), binom(k, r))
}

/// Probabilities of the three demand classes `{1}`, `{2}`, `{1, 2}`.
pub fn demand_class_probs(users: usize, p1: &Rational) -> (Rational, Rational, Rational) {
    let p2 = Rational::one() - p1;
    let only1 = numeric::pow(p1, users as u32);
    let only2 = numeric::pow(&p2, users as u32);
    let both = Rational::one() - &only1 - &only2;
    (only1, only2, both)
}

/// Interpolated `(R1(t), R2(t))` for fractional allocations.
pub fn line_rates(users: usize, t1: &Rational, t2: &Rational) -> (Rational, Rational) {
    let r1_rate = interp(users, 1, t1) + interp(users, 2, t2);
    let r2_rate = interp(users, 1, t2) + interp(users, 2, t1);
    (r1_rate, r2_rate)
}

fn check_point(users: usize, p1: &Rational, t1: &Rational, t2: &Rational) -> Result<()> {
    let k = numeric::int(users as i64);
    if users == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    for t in [t1, t2] {
        if *t < Rational::zero() || *t > k {
            return Err(Error::InvalidArgument(format!(
                "allocation {} outside [0, {users}]",
                numeric::format_rational(t)
            )));
        }
    }
    if *p1 < Rational::zero() || *p1 > Rational::one() {
        return Err(Error::InvalidArgument(format!(
            "probability {} outside [0, 1]",
            numeric::format_rational(p1)
        )));
    }
    Ok(())
}

/// Expected delivery rate of the memory-shared scheme at `(t1, t2)`.
///
/// The scheme itself assumes `t2 <= t1` with file 1 the more popular one;
/// the formula is evaluated as written for any point of `[0, K]^2`.
pub fn expected_rate(users: usize, p1: &Rational, t1: &Rational, t2: &Rational) -> Result<Rational> {
    check_point(users, p1, t1, t2)?;
    let (only1, only2, both) = demand_class_probs(users, p1);
    let k = numeric::int(users as i64);
    let (a, b) = line_rates(users, t1, t2);
    Ok(only1 * (&k - t1) / &k + only2 * (&k - t2) / &k + both * a.max(b))
}

/// `p1` mapped to the more popular file; `true` when labels were swapped.
pub fn canonicalize(p1: &Rational) -> (Rational, bool) {
    let half = numeric::ratio(1, 2);
    if *p1 < half {
        (Rational::one() - p1, true)
    } else {
        (p1.clone(), false)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatePoint {
    #[serde(with = "numeric::serde_rational")]
    pub t1: Rational,
    #[serde(with = "numeric::serde_rational")]
    pub t2: Rational,
    #[serde(with = "numeric::serde_rational")]
    pub rbar: Rational,
}

impl RatePoint {
    pub fn evaluate(users: usize, p1: &Rational, t1: Rational, t2: Rational) -> Result<Self> {
        let rbar = expected_rate(users, p1, &t1, &t2)?;
        Ok(RatePoint { t1, t2, rbar })
    }
}

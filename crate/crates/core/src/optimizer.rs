//! Optimal two-file allocation along `t1 + t2 = KM` and the grouping
//! baselines.
//!
//! The expected rate restricted to the line is convex and piecewise linear
//! in `t1`, with kinks only where `t1` or `t2` is an integer or `t1 = t2`.
//! The optimum is therefore the first kink whose right slope clears a
//! threshold that depends on `p1` only, found by binary search.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, Rational};
use crate::rates::{self, c_term};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakpoint {
    #[serde(with = "numeric::serde_rational")]
    pub t1: Rational,
    pub integer_t1: bool,
    pub integer_t2: bool,
    pub diagonal: bool,
}

fn check_memory(memory: &Rational) -> Result<()> {
    if *memory < Rational::zero() || *memory > numeric::int(2) {
        return Err(Error::InvalidArgument(format!(
            "memory {} outside [0, 2]",
            numeric::format_rational(memory)
        )));
    }
    Ok(())
}

/// Kinks of the expected rate on `t1 ∈ [KM/2, min(K, KM)]`, increasing.
pub fn breakpoints(users: usize, memory: &Rational) -> Result<Vec<Breakpoint>> {
    check_memory(memory)?;
    let k = numeric::int(users as i64);
    let total = &k * memory;
    let lo = &total / numeric::int(2);
    let hi = if total < k { total.clone() } else { k.clone() };
    let mut ts = vec![lo.clone(), hi.clone()];
    for n in 0..=users as i64 {
        ts.push(numeric::int(n));
        ts.push(&total - numeric::int(n));
    }
    ts.retain(|t| *t >= lo && *t <= hi);
    ts.sort();
    ts.dedup();
    Ok(ts
        .into_iter()
        .map(|t1| {
            let t2 = &total - &t1;
            Breakpoint {
                integer_t1: t1.is_integer(),
                integer_t2: t2.is_integer(),
                diagonal: t1 == t2,
                t1,
            }
        })
        .collect())
}

fn c_at(users: usize, a: usize, n: i64) -> Rational {
    debug_assert!(n >= 0 && n as usize <= users);
    c_term(users, a, n as usize)
}

/// `(a, b)`: the binomial orders attached to `t1` and `t2`, which swap
/// depending on which of `R1`, `R2` dominates on the line.
fn orders(memory: &Rational) -> (usize, usize) {
    if *memory <= Rational::one() {
        (1, 2)
    } else {
        (2, 1)
    }
}

/// Right slope term `m+`; `None` at the right end of the line.
pub fn slope_plus(t1: &Rational, users: usize, memory: &Rational) -> Result<Option<Rational>> {
    check_memory(memory)?;
    let k = numeric::int(users as i64);
    let total = &k * memory;
    let hi = if total < k { total.clone() } else { k.clone() };
    if *t1 >= hi {
        return Ok(None);
    }
    let t2 = &total - t1;
    let (a, b) = orders(memory);
    let f = numeric::floor_i64(t1);
    let c = numeric::ceil_i64(&t2);
    Ok(Some(
        c_at(users, a, f + 1) - c_at(users, a, f) + c_at(users, b, c - 1) - c_at(users, b, c),
    ))
}

/// Left slope term `m-`, with `m- = -m+` at `t1 = t2`.
pub fn slope_minus(t1: &Rational, users: usize, memory: &Rational) -> Result<Option<Rational>> {
    check_memory(memory)?;
    let k = numeric::int(users as i64);
    let total = &k * memory;
    let t2 = &total - t1;
    if *t1 == t2 {
        return Ok(slope_plus(t1, users, memory)?.map(|m| -m));
    }
    let (a, b) = orders(memory);
    let c = numeric::ceil_i64(t1);
    let f = numeric::floor_i64(&t2);
    Ok(Some(
        c_at(users, a, c) - c_at(users, a, c - 1) + c_at(users, b, f) - c_at(users, b, f + 1),
    ))
}

/// `(p1^K - p2^K) / (K (1 - p1^K - p2^K))`; `None` when only one file can
/// ever be requested.
pub fn threshold(users: usize, p1: &Rational) -> Option<Rational> {
    let (a, b, both) = rates::demand_class_probs(users, p1);
    if both.is_zero() {
        return None;
    }
    Some((a - b) / (numeric::int(users as i64) * both))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    /// Popularity of the more popular file.
    #[serde(with = "numeric::serde_rational")]
    pub p1: Rational,
    /// Labels were swapped to make file 1 the more popular one.
    pub swapped: bool,
    #[serde(with = "numeric::serde_rational")]
    pub t1: Rational,
    #[serde(with = "numeric::serde_rational")]
    pub t2: Rational,
    #[serde(with = "numeric::serde_rational")]
    pub rbar: Rational,
    /// The segment to the right is flat, so larger `t1` are optimal too.
    pub tie: bool,
}

impl Allocation {
    /// `(t for file 1, t for file 2)` in the caller's labelling.
    pub fn original_labels(&self) -> (Rational, Rational) {
        if self.swapped {
            (self.t2.clone(), self.t1.clone())
        } else {
            (self.t1.clone(), self.t2.clone())
        }
    }
}

fn check_p(p1: &Rational) -> Result<()> {
    if *p1 < Rational::zero() || *p1 > Rational::one() {
        return Err(Error::InvalidArgument(format!(
            "p1 = {} outside [0, 1]",
            numeric::format_rational(p1)
        )));
    }
    Ok(())
}

/// Minimizer of the expected rate on the line, smallest `t1` among ties.
pub fn optimal_allocation(users: usize, p1: &Rational, memory: &Rational) -> Result<Allocation> {
    check_p(p1)?;
    if users == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    let (p1, swapped) = rates::canonicalize(p1);
    let bps = breakpoints(users, memory)?;
    let total = numeric::int(users as i64) * memory;
    let (idx, tie) = match threshold(users, &p1) {
        None => {
            let (a, b, _) = rates::demand_class_probs(users, &p1);
            if a > b {
                (bps.len() - 1, false)
            } else {
                (0, a == b && bps.len() > 1)
            }
        }
        Some(thr) => {
            let mut lo = 0usize;
            let mut hi = bps.len() - 1;
            while lo < hi {
                let mid = (lo + hi) / 2;
                match slope_plus(&bps[mid].t1, users, memory)? {
                    Some(m) if m < thr => lo = mid + 1,
                    _ => hi = mid,
                }
            }
            let tie = matches!(slope_plus(&bps[lo].t1, users, memory)?, Some(m) if m == thr);
            (lo, tie)
        }
    };
    let t1 = bps[idx].t1.clone();
    let t2 = &total - &t1;
    let rbar = rates::expected_rate(users, &p1, &t1, &t2)?;
    Ok(Allocation { p1, swapped, t1, t2, rbar, tie })
}

/// Equal split `r = KM/2` per file, interpolated between integer `r`.
pub fn baseline_uniform(users: usize, p1: &Rational, memory: &Rational) -> Result<Rational> {
    check_p(p1)?;
    check_memory(memory)?;
    let (a, b, both) = rates::demand_class_probs(users, p1);
    let k = numeric::int(users as i64);
    let at = |r: usize| -> Rational {
        (&a + &b) * (Rational::one() - numeric::int(r as i64) / &k)
            + &both * rates::uniform_pair_rate(users, r)
    };
    let r = &k * memory / numeric::int(2);
    let lo = numeric::floor_i64(&r) as usize;
    let f = numeric::frac(&r);
    if f.is_zero() {
        return Ok(at(lo));
    }
    Ok((Rational::one() - &f) * at(lo) + f * at(lo + 1))
}

/// Whole cache to the popular file up to one file's worth, rest to the
/// other.
pub fn baseline_grouping(users: usize, p1: &Rational, memory: &Rational) -> Result<Rational> {
    check_p(p1)?;
    check_memory(memory)?;
    let (p1, _) = rates::canonicalize(p1);
    let (a, b, _) = rates::demand_class_probs(users, &p1);
    let two = numeric::int(2);
    Ok(if *memory > Rational::one() {
        (Rational::one() - a) * (&two - memory)
    } else {
        -a - b * (Rational::one() - memory) + two - memory
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    /// `p1` at the switch (canonical labels).
    pub p1: f64,
    /// `|p1 - p2| = 2 p1 - 1`.
    pub gap: f64,
    #[serde(with = "numeric::serde_rational")]
    pub from_t1: Rational,
    #[serde(with = "numeric::serde_rational")]
    pub to_t1: Rational,
}

/// Values of `p1 ∈ [1/2, 1)` where the optimal `t1` changes, located by a
/// scan on a `1/steps` grid refined with `iterations` bisection steps.
pub fn region_boundaries(
    users: usize,
    memory: &Rational,
    steps: i64,
    iterations: usize,
) -> Result<Vec<RegionBoundary>> {
    let t_at = |p: &Rational| optimal_allocation(users, p, memory).map(|a| a.t1);
    let grid: Vec<Rational> = (steps..2 * steps).map(|i| numeric::ratio(i, 2 * steps)).collect();
    let ts = grid.iter().map(t_at).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 1..grid.len() {
        if ts[i] == ts[i - 1] {
            continue;
        }
        let (mut lo, mut hi) = (grid[i - 1].clone(), grid[i].clone());
        let t_lo = ts[i - 1].clone();
        for _ in 0..iterations {
            let mid = (&lo + &hi) / numeric::int(2);
            if t_at(&mid)? == t_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = (numeric::to_f64(&lo) + numeric::to_f64(&hi)) / 2.0;
        out.push(RegionBoundary { p1: p, gap: 2.0 * p - 1.0, from_t1: t_lo, to_t1: ts[i].clone() });
    }
    Ok(out)
}

/// Right slope of `max(R1, R2)` along the line, by exact finite differences.
pub fn finite_difference_slope(users: usize, memory: &Rational, a: &Rational, b: &Rational) -> Rational {
    let total = numeric::int(users as i64) * memory;
    let f = |t1: &Rational| {
        let (x, y) = rates::line_rates(users, t1, &(&total - t1));
        x.max(y)
    };
    (f(b) - f(a)) / (b - a)
}

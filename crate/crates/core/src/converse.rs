//! Lower bound on the expected rate of any scheme with uncoded placement.
//!
//! At a fixed allocation `t` the bound is an expectation over the set of
//! requested files of the best ordering of those files, where position `i`
//! of an ordering contributes `g_i(t) = c(K, i, t)` interpolated between
//! integers. Each `g_i` is convex, so the bound is a convex piecewise-linear
//! function of `t` and its minimum over `Σ t = MK` is a linear program.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, Rational};
use crate::rates::{c_term, interp};

/// `P(Range(d) = subset)` for i.i.d. demands, by inclusion-exclusion.
/// `subset` holds 1-based file indices.
pub fn range_probability(subset: &[usize], p: &[Rational], users: usize) -> Result<Rational> {
    let n = subset.len();
    if subset.iter().any(|&f| f == 0 || f > p.len()) {
        return Err(Error::InvalidArgument(format!("subset {subset:?} outside [1, {}]", p.len())));
    }
    let mut total = Rational::zero();
    for mask in 0u32..1 << n {
        let mass: Rational = (0..n).filter(|b| mask & 1 << b != 0).map(|b| p[subset[b] - 1].clone()).sum();
        let term = numeric::pow(&mass, users as u32);
        if (n - mask.count_ones() as usize) % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total)
}

/// `Σ_i g_i(t_{pi(i)})` for an ordering `pi` of `subset` (`pi[i]` is the
/// file at position `i + 1`).
pub fn r_pi(t: &[Rational], subset: &[usize], pi: &[usize], users: usize) -> Result<Rational> {
    let mut a = subset.to_vec();
    let mut b = pi.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    if a != b || a.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!("{pi:?} is not an ordering of {subset:?}")));
    }
    if pi.iter().any(|&f| f == 0 || f > t.len()) {
        return Err(Error::InvalidArgument(format!("ordering {pi:?} names a file outside t")));
    }
    Ok(pi.iter().enumerate().map(|(i, &f)| interp(users, i + 1, &t[f - 1])).sum())
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn nonempty_subsets(files: usize) -> Vec<Vec<usize>> {
    (1u32..1 << files)
        .map(|m| (0..files).filter(|b| m & 1 << b != 0).map(|b| b + 1).collect())
        .collect()
}

fn check_inputs(t: &[Rational], p: &[Rational], users: usize) -> Result<()> {
    if t.len() != p.len() || t.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} allocations for {} probabilities",
            t.len(),
            p.len()
        )));
    }
    check_p(p)?;
    let k = numeric::int(users as i64);
    if t.iter().any(|x| *x < Rational::zero() || *x > k) {
        return Err(Error::InvalidArgument(format!("allocation outside [0, {users}]")));
    }
    Ok(())
}

fn check_p(p: &[Rational]) -> Result<()> {
    if p.iter().any(|x| *x < Rational::zero()) || p.iter().sum::<Rational>() != Rational::one() {
        return Err(Error::InvalidArgument("probabilities must be non-negative and sum to 1".into()));
    }
    Ok(())
}

/// The bound at a fixed allocation (before minimizing over `t`).
pub fn converse_at(t: &[Rational], p: &[Rational], users: usize) -> Result<Rational> {
    check_inputs(t, p, users)?;
    let mut total = Rational::zero();
    for subset in nonempty_subsets(p.len()) {
        let prob = range_probability(&subset, p, users)?;
        if prob.is_zero() {
            continue;
        }
        let best = permutations(&subset)
            .iter()
            .map(|pi| r_pi(t, &subset, pi, users))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .expect("non-empty subset");
        total += prob * best;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieLocus {
    pub subset: Vec<usize>,
    pub orderings: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConverseResult {
    #[serde(with = "numeric::serde_rational")]
    pub value: Rational,
    #[serde(with = "rational_vec")]
    pub t: Vec<Rational>,
    /// `exact` for the breakpoint enumeration, `lp` for the linear program.
    pub method: String,
    /// Objective reported by the linear program, when one was solved.
    pub lp_value: Option<f64>,
    pub certified: bool,
    /// Subsets whose best ordering is not unique at `t`.
    pub ties: Vec<TieLocus>,
}

mod rational_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::numeric::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(format_rational).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Subsets whose maximizing ordering is not unique at `t`.
pub fn tie_loci(t: &[Rational], p: &[Rational], users: usize) -> Result<Vec<TieLocus>> {
    let mut out = Vec::new();
    for subset in nonempty_subsets(p.len()) {
        if subset.len() < 2 {
            continue;
        }
        let perms = permutations(&subset);
        let vals = perms.iter().map(|pi| r_pi(t, &subset, pi, users)).collect::<Result<Vec<_>>>()?;
        let best = vals.iter().max().expect("non-empty").clone();
        let orderings: Vec<Vec<usize>> =
            perms.into_iter().zip(&vals).filter(|(_, v)| **v == best).map(|(pi, _)| pi).collect();
        if orderings.len() > 1 {
            out.push(TieLocus { subset, orderings });
        }
    }
    Ok(out)
}

fn check_memory(files: usize, memory: &Rational) -> Result<()> {
    if *memory < Rational::zero() || *memory > numeric::int(files as i64) {
        return Err(Error::InvalidArgument(format!(
            "memory {} outside [0, {files}]",
            numeric::format_rational(memory)
        )));
    }
    Ok(())
}

/// Minimum of the bound over `Σ t = MK`, `0 <= t_i <= K`.
pub fn converse_bound(users: usize, p: &[Rational], memory: &Rational) -> Result<ConverseResult> {
    check_p(p)?;
    check_memory(p.len(), memory)?;
    if users == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    match p.len() {
        1 => {
            let t = vec![numeric::int(users as i64) * memory];
            let value = converse_at(&t, p, users)?;
            Ok(ConverseResult { value, t, method: "exact".into(), lp_value: None, certified: true, ties: vec![] })
        }
        2 => two_file_bound(users, p, memory),
        _ => lp_bound(users, p, memory),
    }
}

/// Exact minimum for two files: every kink of the restricted function lies
/// at an integer `t1`, an integer `t2` or `t1 = t2`.
fn two_file_bound(users: usize, p: &[Rational], memory: &Rational) -> Result<ConverseResult> {
    let k = numeric::int(users as i64);
    let total = &k * memory;
    let lo = if total > k { &total - &k } else { Rational::zero() };
    let hi = if total < k { total.clone() } else { k.clone() };
    let mut cands = vec![lo.clone(), hi.clone(), &total / numeric::int(2)];
    for n in 0..=users as i64 {
        cands.push(numeric::int(n));
        cands.push(&total - numeric::int(n));
    }
    cands.retain(|t| *t >= lo && *t <= hi);
    cands.sort();
    cands.dedup();
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    for t1 in cands {
        let t = vec![t1.clone(), &total - &t1];
        let v = converse_at(&t, p, users)?;
        if best.as_ref().map_or(true, |(b, _)| v < *b) {
            best = Some((v, t));
        }
    }
    let (value, t) = best.expect("line is non-empty");
    let ties = tie_loci(&t, p, users)?;
    Ok(ConverseResult { value, t, method: "exact".into(), lp_value: None, certified: true, ties })
}

/// Linear program in epigraph form: `z_{j,i} >= g_i(t_j)` through the
/// segments of `g_i`, `y_S >= Σ_i z_{pi(i), i}` for every ordering.
fn lp_bound(users: usize, p: &[Rational], memory: &Rational) -> Result<ConverseResult> {
    let n = p.len();
    let kf = users as f64;
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, kf))).collect();
    let z: Vec<Vec<_>> = (0..n)
        .map(|_| (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect())
        .collect();
    for j in 0..n {
        for i in 1..=n {
            for seg in 0..users {
                let c0 = numeric::to_f64(&c_term(users, i, seg));
                let c1 = numeric::to_f64(&c_term(users, i, seg + 1));
                let slope = c1 - c0;
                // z - slope * t >= c0 - slope * seg
                lp.add_constraint(&[(z[j][i - 1], 1.0), (t[j], -slope)], ComparisonOp::Ge, c0 - slope * seg as f64);
            }
        }
    }
    for subset in nonempty_subsets(n) {
        let prob = numeric::to_f64(&range_probability(&subset, p, users)?);
        let y = lp.add_var(prob, (0.0, f64::INFINITY));
        for pi in permutations(&subset) {
            let mut row = vec![(y, 1.0)];
            row.extend(pi.iter().enumerate().map(|(i, &f)| (z[f - 1][i], -1.0)));
            lp.add_constraint(&row[..], ComparisonOp::Ge, 0.0);
        }
    }
    let sum: Vec<_> = t.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(&sum[..], ComparisonOp::Eq, kf * numeric::to_f64(memory));
    let sol = lp.solve().map_err(|e| Error::Solver(e.to_string()))?;
    let lp_value = sol.objective();
    let raw: Vec<f64> = t.iter().map(|&v| sol[v]).collect();

    let total = numeric::int(users as i64) * memory;
    let k = numeric::int(users as i64);
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    for den in [1i64, 2, 3, 4, 6, 12, 24, 60, 120, 840, 2520] {
        let mut cand: Vec<Rational> = raw.iter().map(|&x| numeric::snap(x, den).max(Rational::zero()).min(k.clone())).collect();
        // restore Σ t = MK on the coordinate with the most room
        let diff = &total - cand.iter().sum::<Rational>();
        let j = (0..n)
            .max_by(|&a, &b| {
                let room = |x: &Rational| if diff >= Rational::zero() { &k - x } else { x.clone() };
                room(&cand[a]).cmp(&room(&cand[b]))
            })
            .expect("n >= 3");
        cand[j] += diff;
        if cand[j] < Rational::zero() || cand[j] > k {
            continue;
        }
        let v = converse_at(&cand, p, users)?;
        if best.as_ref().map_or(true, |(b, _)| v < *b) {
            best = Some((v, cand));
        }
    }
    let (value, t) = best.ok_or_else(|| Error::Solver("no feasible rounding of the LP point".into()))?;
    let certified = (numeric::to_f64(&value) - lp_value).abs() <= 1e-9;
    let ties = tie_loci(&t, p, users)?;
    Ok(ConverseResult { value, t, method: "lp".into(), lp_value: Some(lp_value), certified, ties })
}

/// Second differences of `n -> c(K, i, n)`; all must be non-negative.
pub fn second_differences(users: usize, i: usize) -> Vec<Rational> {
    (1..users)
        .map(|n| c_term(users, i, n + 1) - numeric::int(2) * c_term(users, i, n) + c_term(users, i, n - 1))
        .collect()
}

//! Memory sharing between integer profiles to realize fractional `(t1, t2)`.
//!
//! Each file is cut into consecutive segments, one per active integer point
//! of the plan, and every segment runs the integer-profile scheme on its own.

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::Profile;
use crate::delivery::{decode, delivery_rate, encode_delivery, DeliveryMessage, DemandVector};
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::numeric::{self, Rational};
use crate::placement::{place, CacheMap, PlacementConfig};
use crate::rates;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `frac(t1) + frac(t2) >= 1`.
    One,
    /// `frac(t1) + frac(t2) < 1`, including integer points.
    Two,
    /// Both allocations in the same unit cell, `floor(t1) = floor(t2)`.
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharePoint {
    pub r1: usize,
    pub r2: usize,
    #[serde(with = "numeric::serde_rational")]
    pub weight: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharePlan {
    #[serde(rename = "K")]
    pub users: usize,
    pub regime: Regime,
    /// Active points (zero weights dropped), in segment order.
    pub points: Vec<SharePoint>,
}

pub fn share_plan(users: usize, t1: &Rational, t2: &Rational) -> Result<SharePlan> {
    let k = numeric::int(users as i64);
    if *t2 < Rational::zero() || t2 > t1 || *t1 > k {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= t2 <= t1 <= {users}, got ({}, {})",
            numeric::format_rational(t1),
            numeric::format_rational(t2)
        )));
    }
    let a1 = numeric::floor_i64(t1) as usize;
    let a2 = numeric::floor_i64(t2) as usize;
    let f1 = numeric::frac(t1);
    let f2 = numeric::frac(t2);
    let one = Rational::one();
    let (regime, raw) = if a1 == a2 && !(f1.is_zero() && f2.is_zero()) {
        (
            Regime::Diagonal,
            vec![
                (a1 + 1, a1, &f1 - &f2),
                (a1 + 1, a1 + 1, f2.clone()),
                (a1, a1, &one - &f1),
            ],
        )
    } else if &f1 + &f2 >= one {
        (
            Regime::One,
            vec![
                (a1, a2 + 1, &one - &f1),
                (a1 + 1, a2, &one - &f2),
                (a1 + 1, a2 + 1, &f1 + &f2 - &one),
            ],
        )
    } else {
        (
            Regime::Two,
            vec![
                (a1 + 1, a2, f1.clone()),
                (a1, a2 + 1, f2.clone()),
                (a1, a2, &one - &f1 - &f2),
            ],
        )
    };
    let points: Vec<SharePoint> = raw
        .into_iter()
        .filter(|(_, _, w)| !w.is_zero())
        .map(|(r1, r2, weight)| SharePoint { r1, r2, weight })
        .collect();
    let plan = SharePlan { users, regime, points };
    let (m1, m2) = plan.average();
    if &m1 != t1 || &m2 != t2 || plan.points.iter().any(|p| p.r2 > p.r1 || p.r1 > users) {
        return Err(Error::Inconsistent(format!("share plan {plan:?} misses the target point")));
    }
    Ok(plan)
}

impl SharePlan {
    pub fn average(&self) -> (Rational, Rational) {
        let mut m1 = Rational::zero();
        let mut m2 = Rational::zero();
        for p in &self.points {
            m1 += &p.weight * numeric::int(p.r1 as i64);
            m2 += &p.weight * numeric::int(p.r2 as i64);
        }
        (m1, m2)
    }

    pub fn profiles(&self) -> Vec<Profile> {
        self.points
            .iter()
            .map(|p| Profile::new(vec![p.r1, p.r2]).expect("plan points are canonical"))
            .collect()
    }

    /// Weighted scheme rate for a set of requested files.
    pub fn class_rate(&self, requested: &[usize]) -> Result<Rational> {
        let mut total = Rational::zero();
        for p in &self.points {
            total += &p.weight * delivery_rate(self.users, p.r1, p.r2, requested)?;
        }
        Ok(total)
    }

    /// Smallest file length for which every segment splits into its own
    /// subfile count.
    pub fn minimal_file_len(&self) -> Result<u64> {
        let mut f = 1u64;
        for (p, prof) in self.points.iter().zip(self.profiles()) {
            let s = prof.subpacketization(self.users)?;
            let a = p.weight.numer().to_u64().expect("weight numerator fits");
            let b = p.weight.denom().to_u64().expect("weight denominator fits");
            let unit = b * s / a.gcd(&(b * s));
            f = f.lcm(&unit);
        }
        Ok(f)
    }

    /// Segment boundaries `P_0 = 0 < ... = F`.
    pub fn boundaries(&self, file_len: u64) -> Result<Vec<u64>> {
        let minimal = self.minimal_file_len()?;
        if file_len == 0 || file_len % minimal != 0 {
            return Err(Error::Indivisible { file_len, minimal });
        }
        let mut out = vec![0u64];
        let mut acc = Rational::zero();
        for p in &self.points {
            acc += &p.weight;
            let end = acc.clone() * numeric::int(file_len as i64);
            out.push(end.to_integer().to_u64().expect("boundary fits"));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointScheme {
    pub plan: SharePlan,
    pub file_len: u64,
    pub field: PrimeField,
}

impl JointScheme {
    pub fn new(plan: SharePlan, file_len: u64, field: PrimeField) -> Result<Self> {
        plan.boundaries(file_len)?;
        Ok(JointScheme { plan, file_len, field })
    }

    /// Per-segment placement configs; segment `j` uses subfiles of
    /// `theta_j F / S_j` symbols.
    pub fn segment_configs(&self) -> Result<Vec<PlacementConfig>> {
        let b = self.plan.boundaries(self.file_len)?;
        self.plan
            .profiles()
            .into_iter()
            .enumerate()
            .map(|(j, prof)| {
                let s = prof.subpacketization(self.plan.users)?;
                let len = (b[j + 1] - b[j]) / s;
                PlacementConfig::new(self.plan.users, prof, len as usize, self.field)
            })
            .collect()
    }

    fn split<'a>(&self, files: &'a [Vec<u64>]) -> Result<Vec<Vec<Vec<u64>>>> {
        if files.len() != 2 || files.iter().any(|f| f.len() as u64 != self.file_len) {
            return Err(Error::ConfigMismatch(format!(
                "expected 2 files of {} symbols",
                self.file_len
            )));
        }
        let b = self.plan.boundaries(self.file_len)?;
        Ok(b.windows(2)
            .map(|w| files.iter().map(|f| f[w[0] as usize..w[1] as usize].to_vec()).collect())
            .collect())
    }

    pub fn place(&self, files: &[Vec<u64>]) -> Result<Vec<CacheMap>> {
        let cfgs = self.segment_configs()?;
        self.split(files)?
            .iter()
            .zip(&cfgs)
            .map(|(seg, cfg)| place(cfg, seg))
            .collect()
    }

    pub fn deliver(&self, demand: &DemandVector, files: &[Vec<u64>]) -> Result<Vec<DeliveryMessage>> {
        let cfgs = self.segment_configs()?;
        self.split(files)?
            .iter()
            .zip(&cfgs)
            .map(|(seg, cfg)| encode_delivery(demand, seg, cfg))
            .collect()
    }

    pub fn decode(&self, user: usize, maps: &[CacheMap], msgs: &[DeliveryMessage]) -> Result<Vec<u64>> {
        if maps.len() != msgs.len() || maps.len() != self.plan.points.len() {
            return Err(Error::ConfigMismatch(format!(
                "{} cache maps and {} messages for {} segments",
                maps.len(),
                msgs.len(),
                self.plan.points.len()
            )));
        }
        let mut out = Vec::with_capacity(self.file_len as usize);
        for (map, msg) in maps.iter().zip(msgs) {
            out.extend(decode(user, map.user(user)?, msg)?);
        }
        Ok(out)
    }

    /// Transmitted symbols over `F`.
    pub fn realized_rate(&self, msgs: &[DeliveryMessage]) -> Rational {
        let sent: usize = msgs.iter().map(|m| m.symbols()).sum();
        Rational::new((sent as i64).into(), (self.file_len as i64).into())
    }

    /// Cached symbols of one user across all segments.
    pub fn cache_symbols(maps: &[CacheMap], user: usize) -> Result<usize> {
        maps.iter()
            .map(|m| {
                let u = m.user(user)?;
                Ok(u.entries.iter().map(|e| e.payload.as_ref().map_or(0, |p| p.len())).sum::<usize>())
            })
            .sum()
    }
}

/// Expected rate of the plan's realized per-class rates under `p1`.
pub fn plan_expected_rate(plan: &SharePlan, p1: &Rational) -> Result<Rational> {
    let (a, b, c) = rates::demand_class_probs(plan.users, p1);
    Ok(a * plan.class_rate(&[1])? + b * plan.class_rate(&[2])? + c * plan.class_rate(&[1, 2])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{int, parse_rational, ratio};
    use crate::placement::random_files;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn pts(plan: &SharePlan) -> Vec<(usize, usize, Rational)> {
        plan.points.iter().map(|p| (p.r1, p.r2, p.weight.clone())).collect()
    }

    #[test]
    fn integer_point_is_single_segment() {
        let plan = share_plan(4, &int(2), &int(1)).unwrap();
        assert_eq!(plan.regime, Regime::Two);
        assert_eq!(pts(&plan), vec![(2, 1, int(1))]);
    }

    #[test]
    fn regime_one_boundary() {
        let plan = share_plan(4, &q("2.5"), &q("1.5")).unwrap();
        assert_eq!(plan.regime, Regime::One);
        assert_eq!(pts(&plan), vec![(2, 2, ratio(1, 2)), (3, 1, ratio(1, 2))]);
    }

    #[test]
    fn regime_two_example() {
        let plan = share_plan(4, &q("2.3"), &q("1.2")).unwrap();
        assert_eq!(plan.regime, Regime::Two);
        assert_eq!(
            pts(&plan),
            vec![(3, 1, ratio(3, 10)), (2, 2, ratio(1, 5)), (2, 1, ratio(1, 2))]
        );
    }

    #[test]
    fn diagonal_cell_uses_canonical_points() {
        let plan = share_plan(2, &q("0.5"), &q("0.5")).unwrap();
        assert_eq!(plan.regime, Regime::Diagonal);
        assert_eq!(pts(&plan), vec![(1, 1, ratio(1, 2)), (0, 0, ratio(1, 2))]);
        let (_, r2) = rates::line_rates(2, &q("0.5"), &q("0.5"));
        assert_eq!(plan.class_rate(&[1, 2]).unwrap(), r2);
    }

    #[test]
    fn class_rates_match_interpolated_formula() {
        for k in 1..=6usize {
            let steps = 6 * k as i64;
            for i in 0..=steps {
                for j in 0..=i {
                    let t1 = ratio(i, 6);
                    let t2 = ratio(j, 6);
                    let plan = share_plan(k, &t1, &t2).unwrap();
                    let kk = int(k as i64);
                    assert_eq!(plan.class_rate(&[1]).unwrap(), (&kk - &t1) / &kk);
                    assert_eq!(plan.class_rate(&[2]).unwrap(), (&kk - &t2) / &kk);
                    let (a, b) = rates::line_rates(k, &t1, &t2);
                    assert_eq!(plan.class_rate(&[1, 2]).unwrap(), a.max(b), "K={k} t=({t1},{t2})");
                    let w: Rational = plan.points.iter().map(|p| p.weight.clone()).sum();
                    assert_eq!(w, int(1));
                    assert!(plan.points.iter().all(|p| p.weight > int(0)));
                }
            }
        }
    }

    #[test]
    fn minimal_len_and_boundaries() {
        let plan = share_plan(4, &q("2.5"), &q("0.5")).unwrap();
        let f = plan.minimal_file_len().unwrap();
        let b = plan.boundaries(f).unwrap();
        assert_eq!(*b.last().unwrap(), f);
        for ((w, prof), seg) in plan.points.iter().map(|p| &p.weight).zip(plan.profiles()).zip(b.windows(2)) {
            let s = prof.subpacketization(4).unwrap();
            assert_eq!((seg[1] - seg[0]) % s, 0);
            assert_eq!(numeric::int((seg[1] - seg[0]) as i64), w * numeric::int(f as i64));
        }
        assert!(matches!(plan.boundaries(f + 1), Err(Error::Indivisible { .. })));
    }

    #[test]
    fn joint_round_trip_and_rate() {
        let plan = share_plan(4, &q("2.5"), &q("0.5")).unwrap();
        let f = plan.minimal_file_len().unwrap();
        let scheme = JointScheme::new(plan.clone(), f, PrimeField::default()).unwrap();
        let files = random_files(2, f as usize, scheme.field, 21);
        let maps = scheme.place(&files).unwrap();
        let d = DemandVector::new(vec![1, 1, 2, 2], 2).unwrap();
        let msgs = scheme.deliver(&d, &files).unwrap();
        assert_eq!(scheme.realized_rate(&msgs), plan.class_rate(&[1, 2]).unwrap());
        for u in 1..=4 {
            assert_eq!(scheme.decode(u, &maps, &msgs).unwrap(), files[d.of(u) - 1]);
            let used = JointScheme::cache_symbols(&maps, u).unwrap();
            assert_eq!(numeric::int(used as i64), int(3) / int(4) * int(f as i64));
        }
    }

    #[test]
    fn rejects_bad_points() {
        assert!(share_plan(4, &int(1), &int(2)).is_err());
        assert!(share_plan(4, &int(5), &int(0)).is_err());
    }

    #[test]
    fn plan_expectation_matches_closed_form() {
        let p1 = q("0.8");
        let t1 = q("1.75");
        let t2 = q("0.25");
        let plan = share_plan(4, &t1, &t2).unwrap();
        assert_eq!(
            plan_expected_rate(&plan, &p1).unwrap(),
            rates::expected_rate(4, &p1, &t1, &t2).unwrap()
        );
    }
}

//! Brute-force verification of the two-file scheme.
//!
//! Entropies are linear: with `W` uniform over the field, `H(A W | B W)` in
//! subfile units is `rank([A; B]) - rank(B)`. Variables are the `2S`
//! subfiles, file 1 first, each file in chain-rank order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binom, chain_rank, Profile};
use crate::delivery::{self, description_layout, outer_code, DemandVector};
use crate::error::{Error, Result};
use crate::field::{mds_cauchy, rank, FieldMatrix, PrimeField};
use crate::placement::{place, place_structure, random_files, CacheMap, PlacementConfig};

/// `H(A W | B W)` in subfile units.
pub fn linear_entropy(a: &FieldMatrix, b: &FieldMatrix) -> Result<usize> {
    if a.cols != b.cols {
        return Err(Error::DimensionMismatch(format!(
            "entropy operands over {} and {} variables",
            a.cols, b.cols
        )));
    }
    Ok(rank(&b.vstack(a)?) - rank(b))
}

struct Instance {
    users: usize,
    profile: Profile,
    s: usize,
    field: PrimeField,
    map: CacheMap,
}

impl Instance {
    fn new(users: usize, r1: usize, r2: usize, field: PrimeField) -> Result<Self> {
        let profile = Profile::for_users(vec![r1, r2], users)?;
        let cfg = PlacementConfig::new(users, profile.clone(), 1, field)?;
        let s = cfg.subpacketization()? as usize;
        let map = place_structure(&cfg)?;
        Ok(Instance { users, profile, s, field, map })
    }

    fn var(&self, file: usize, chain: &crate::ChainIndex) -> Result<usize> {
        Ok((file - 1) * self.s + chain_rank(chain, self.users, &self.profile)? as usize)
    }

    fn cache(&self, users: &[usize]) -> Result<FieldMatrix> {
        let mut rows = Vec::new();
        for &u in users {
            for e in &self.map.user(u)?.entries {
                let mut row = vec![0u64; 2 * self.s];
                row[self.var(e.file, &e.chain)?] = 1;
                rows.push(row);
            }
        }
        FieldMatrix::from_rows(self.field, 2 * self.s, rows)
    }

    fn file(&self, file: usize) -> Result<FieldMatrix> {
        let rows = (0..self.s)
            .map(|j| {
                let mut row = vec![0u64; 2 * self.s];
                row[(file - 1) * self.s + j] = 1;
                row
            })
            .collect();
        FieldMatrix::from_rows(self.field, 2 * self.s, rows)
    }

    fn description(&self, file: usize, demand: &DemandVector) -> Result<FieldMatrix> {
        let layout = description_layout(file, demand, &self.profile)?;
        let mut rows = Vec::new();
        for g in &layout.groups {
            let inner = mds_cauchy(g.theta, g.kappa, self.field)?;
            for e in 0..g.theta {
                let mut row = vec![0u64; 2 * self.s];
                for (c, chain) in g.constituents.iter().enumerate() {
                    row[self.var(file, chain)?] = inner.get(e, c);
                }
                rows.push(row);
            }
        }
        FieldMatrix::from_rows(self.field, 2 * self.s, rows)
    }
}

/// `S · C(K-a, r) / C(K, r)`.
fn closed_form(s: usize, users: usize, a: usize, r: usize) -> usize {
    let k = users as i64;
    (s as u128 * binom(k - a as i64, r as i64) / binom(k, r as i64)) as usize
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub identity: String,
    pub expected: usize,
    pub actual: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lemma1Report {
    #[serde(rename = "K")]
    pub users: usize,
    pub r: [usize; 2],
    pub demand: Vec<usize>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn push(checks: &mut Vec<Check>, identity: String, expected: usize, actual: usize) {
    checks.push(Check { pass: expected == actual, identity, expected, actual });
}

/// Rank-based check of the description and cache entropy identities.
pub fn verify_lemma1(users: usize, r: [usize; 2], demand: &DemandVector, field: PrimeField) -> Result<Lemma1Report> {
    if !demand.is_two_sided() {
        return Err(Error::OneSidedDemand);
    }
    if demand.users() != users {
        return Err(Error::ConfigMismatch("demand length differs from K".into()));
    }
    let inst = Instance::new(users, r[0], r[1], field)?;
    let s = inst.s;
    let mut checks = Vec::new();
    for i in 1..=2usize {
        let w = inst.file(i)?;
        let desc = inst.description(i, demand)?;
        let own = demand.omega(i);
        let a = closed_form(s, users, 1, r[i - 1]);
        let b = closed_form(s, users, 2, r[i - 1]);
        push(&mut checks, format!("len(W*_{i})"), a, desc.rows);
        let mut max_in = 0;
        let mut max_out = 0;
        for u in 1..=users {
            let z = inst.cache(&[u])?;
            let h = linear_entropy(&desc, &z)?;
            if own.contains(u) {
                let h_file = linear_entropy(&w, &desc.vstack(&z)?)?;
                push(&mut checks, format!("H(W_{i} | W*_{i}, Z_{u})"), 0, h_file);
                max_in = max_in.max(h);
            } else {
                max_out = max_out.max(h);
            }
            push(&mut checks, format!("H(W_{i} | Z_{u})"), a, linear_entropy(&w, &z)?);
            for v in u + 1..=users {
                let zz = inst.cache(&[u, v])?;
                push(&mut checks, format!("H(W_{i} | Z_{u}, Z_{v})"), b, linear_entropy(&w, &zz)?);
            }
        }
        push(&mut checks, format!("max_(m in Omega_{i}) H(W*_{i} | Z_m)"), a, max_in);
        push(&mut checks, format!("max_(l not in Omega_{i}) H(W*_{i} | Z_l)"), b, max_out);
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(Lemma1Report { users, r, demand: demand.d.clone(), checks, pass })
}

/// All demand vectors over two files for `users` users.
pub fn all_demands(users: usize) -> Vec<DemandVector> {
    (0u32..1 << users)
        .map(|m| DemandVector { d: (0..users).map(|k| if m & 1 << k != 0 { 2 } else { 1 }).collect() })
        .collect()
}

/// Outer-code columns a user can rebuild, derived from its cache alone:
/// a description element is known iff every constituent is cached.
pub fn known_columns_from_cache(
    user: usize,
    demand: &DemandVector,
    map: &CacheMap,
    profile: &Profile,
) -> Result<Vec<usize>> {
    let cache = map.user(user)?;
    if !demand.is_two_sided() {
        return Ok(vec![]);
    }
    let mut out = Vec::new();
    let mut col = 0;
    for file in 1..=2 {
        for g in description_layout(file, demand, profile)?.groups {
            let known = g.constituents.iter().all(|c| cache.knows(file, c));
            if known {
                out.extend(col..col + g.theta);
            }
            col += g.theta;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeInstance {
    #[serde(rename = "K")]
    pub users: usize,
    pub r: [usize; 2],
    pub demand: Vec<usize>,
    pub seeds: Vec<u64>,
    pub rows: usize,
    pub columns: usize,
    pub decoded: bool,
    pub structure: bool,
    /// Every single-row deletion leaves some user underdetermined.
    pub tight: bool,
    pub pass: bool,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub k_max: usize,
    pub prime: u64,
    pub subfile_len: usize,
    pub seeds: Vec<u64>,
    pub instances: Vec<DecodeInstance>,
    pub pass: bool,
}

/// Row deletions that leave every user solvable (should be none).
pub fn slack_rows(
    cfg: &PlacementConfig,
    demand: &DemandVector,
    map: &CacheMap,
) -> Result<Vec<usize>> {
    let (outer, columns) = outer_code(cfg, demand)?;
    let mut unknown_sets = Vec::new();
    for u in 1..=cfg.users {
        let known = if demand.is_two_sided() {
            known_columns_from_cache(u, demand, map, &cfg.profile)?
        } else {
            let file = demand.of(u);
            let chains = crate::combinatorics::enumerate_chains(cfg.users, &cfg.profile)?;
            let cache = map.user(u)?;
            (0..columns.len()).filter(|&j| cache.knows(file, &chains[j])).collect()
        };
        unknown_sets.push((0..columns.len()).filter(|j| !known.contains(j)).collect::<Vec<_>>());
    }
    let mut slack = Vec::new();
    for drop in 0..outer.rows {
        let keep: Vec<usize> = (0..outer.rows).filter(|&r| r != drop).collect();
        let reduced = outer.select_rows(&keep);
        let all_ok = unknown_sets
            .iter()
            .all(|unk| rank(&reduced.select_columns(unk)) == unk.len());
        if all_ok {
            slack.push(drop);
        }
    }
    Ok(slack)
}

fn run_instance(
    users: usize,
    r: [usize; 2],
    demand: &DemandVector,
    seeds: &[u64],
    subfile_len: usize,
    field: PrimeField,
) -> DecodeInstance {
    let mut violations = Vec::new();
    let mut rows = 0;
    let mut columns = 0;
    let mut decoded = true;
    let mut structure = true;
    let mut tight = true;
    let result: Result<()> = (|| {
        let cfg = PlacementConfig::new(users, Profile::new(r.to_vec())?, subfile_len, field)?;
        let s = cfg.subpacketization()? as usize;
        let req = demand.requested();
        let rate = delivery::delivery_rate(users, r[0], r[1], &req)?;
        let want_rows = rate * crate::numeric::int(s as i64);
        for (n, &seed) in seeds.iter().enumerate() {
            let files = random_files(2, cfg.file_len()?, field, seed);
            let map = place(&cfg, &files)?;
            let msg = delivery::encode_delivery(demand, &files, &cfg)?;
            rows = msg.rows.len();
            columns = msg.columns.len();
            if n == 0 {
                if crate::numeric::int(rows as i64) != want_rows {
                    structure = false;
                    violations.push(format!("rows {rows} != S * R = {want_rows}"));
                }
                let want_cols = if demand.is_two_sided() {
                    closed_form(s, users, 1, r[0]) + closed_form(s, users, 1, r[1])
                } else {
                    s
                };
                if columns != want_cols {
                    structure = false;
                    violations.push(format!("columns {columns} != {want_cols}"));
                }
                for u in 1..=users {
                    let cached = map.user(u)?.entries.len();
                    if cached * users != s * (r[0] + r[1]) {
                        structure = false;
                        violations.push(format!("user {u} caches {cached} subfiles"));
                    }
                    if demand.is_two_sided() {
                        let mine = known_columns_from_cache(u, demand, &map, &cfg.profile)?;
                        let theirs = delivery::known_columns(u, demand, &msg.columns);
                        if mine != theirs {
                            structure = false;
                            violations.push(format!("user {u}: known columns disagree"));
                        }
                        let other = 3 - demand.of(u);
                        let unknown_other = closed_form(s, users, 2, r[other - 1]);
                        let len_other = closed_form(s, users, 1, r[other - 1]);
                        if len_other - mine.len() != unknown_other {
                            structure = false;
                            violations.push(format!(
                                "user {u}: {} unknown elements of W*_{other}, expected {unknown_other}",
                                len_other - mine.len()
                            ));
                        }
                    }
                }
                if rows > 0 {
                    let slack = slack_rows(&cfg, demand, &map)?;
                    if !slack.is_empty() {
                        tight = false;
                        violations.push(format!("rows {slack:?} can be dropped"));
                    }
                }
            }
            for u in 1..=users {
                match delivery::decode(u, map.user(u)?, &msg) {
                    Ok(w) if w == files[demand.of(u) - 1] => {}
                    Ok(_) => {
                        decoded = false;
                        violations.push(format!("seed {seed}: user {u} decoded a wrong file"));
                    }
                    Err(e) => {
                        decoded = false;
                        violations.push(format!("seed {seed}: user {u}: {e}"));
                    }
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        decoded = false;
        violations.push(e.to_string());
    }
    DecodeInstance {
        users,
        r,
        demand: demand.d.clone(),
        seeds: seeds.to_vec(),
        rows,
        columns,
        decoded,
        structure,
        tight,
        pass: violations.is_empty(),
        violations,
    }
}

/// Every profile and demand vector for `K <= k_max`, decoded at every user.
pub fn exhaustive_decode(k_max: usize, seeds: &[u64], subfile_len: usize, field: PrimeField) -> DecodeReport {
    let mut cases = Vec::new();
    for users in 1..=k_max {
        for r1 in 0..=users {
            for r2 in 0..=r1 {
                for d in all_demands(users) {
                    cases.push((users, [r1, r2], d));
                }
            }
        }
    }
    let instances: Vec<DecodeInstance> = cases
        .par_iter()
        .map(|(users, r, d)| run_instance(*users, *r, d, seeds, subfile_len, field))
        .collect();
    let pass = instances.iter().all(|i| i.pass);
    DecodeReport { k_max, prime: field.prime(), subfile_len, seeds: seeds.to_vec(), instances, pass }
}

/// `verify_lemma1` over every profile and two-sided demand for `K <= k_max`.
pub fn lemma1_sweep(k_max: usize, field: PrimeField) -> Vec<Result<Lemma1Report>> {
    let mut cases = Vec::new();
    for users in 2..=k_max {
        for r1 in 0..=users {
            for r2 in 0..=r1 {
                for d in all_demands(users).into_iter().filter(|d| d.is_two_sided()) {
                    cases.push((users, [r1, r2], d));
                }
            }
        }
    }
    cases.par_iter().map(|(users, r, d)| verify_lemma1(*users, *r, d, field)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf() -> PrimeField {
        PrimeField::default()
    }

    fn demand(d: &[usize]) -> DemandVector {
        DemandVector::new(d.to_vec(), 2).unwrap()
    }

    #[test]
    fn entropy_basics() {
        let id = FieldMatrix::identity(gf(), 5);
        assert_eq!(linear_entropy(&id, &id).unwrap(), 0);
        let empty = FieldMatrix::zeros(gf(), 0, 5);
        assert_eq!(linear_entropy(&id, &empty).unwrap(), 5);
        let twice = id.vstack(&id).unwrap();
        assert_eq!(linear_entropy(&twice, &empty).unwrap(), 5);
        assert!(linear_entropy(&id, &FieldMatrix::identity(gf(), 4)).is_err());
    }

    #[test]
    fn outsider_entropy_worked_example() {
        let d = demand(&[1, 1, 1, 2]);
        let inst = Instance::new(4, 2, 1, gf()).unwrap();
        let desc = inst.description(2, &d).unwrap();
        let z1 = inst.cache(&[1]).unwrap();
        assert_eq!(linear_entropy(&desc, &z1).unwrap(), 6);
    }

    #[test]
    fn entropy_identities_small_cases() {
        let r = verify_lemma1(4, [2, 1], &demand(&[1, 1, 1, 2]), gf()).unwrap();
        assert!(r.pass, "{:?}", r.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        let r = verify_lemma1(2, [1, 1], &demand(&[1, 2]), gf()).unwrap();
        assert!(r.pass);
        assert!(verify_lemma1(2, [1, 1], &demand(&[1, 1]), gf()).is_err());
    }

    #[test]
    fn worked_example_is_tight() {
        let cfg = PlacementConfig::new(4, Profile::new(vec![2, 1]).unwrap(), 1, gf()).unwrap();
        let map = place_structure(&cfg).unwrap();
        let d = demand(&[1, 1, 1, 2]);
        assert!(slack_rows(&cfg, &d, &map).unwrap().is_empty());
        let known = known_columns_from_cache(1, &d, &map, &cfg.profile).unwrap();
        assert_eq!(15 - known.len(), 12);
    }

    #[test]
    fn small_exhaustive_sweep() {
        let report = exhaustive_decode(3, &[1, 2], 2, gf());
        let bad: Vec<_> = report.instances.iter().filter(|i| !i.pass).collect();
        assert!(bad.is_empty(), "{bad:?}");
    }
}

//! Two-file delivery: aligned descriptions, outer MDS code and two-layer
//! peeling decoder.
//!
//! For file `i` the chains are grouped by their intersection `(rho_1, rho_2)`
//! with the users that want the *other* file. A group's constituents differ
//! only inside `Omega_i`; an inner Cauchy code compresses them to `theta`
//! elements, exactly the number a requester of file `i` is missing. Both
//! descriptions are stacked and coded once more with an outer Cauchy code.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{binom, chain_rank, combinations_colex, enumerate_group_keys};
use crate::combinatorics::{ChainIndex, GroupKey, Profile, UserSet};
use crate::error::{Error, Result};
use crate::field::{mds_cauchy, solve, solve_after_drop, FieldMatrix, PrimeField};
use crate::numeric::Rational;
use crate::placement::{subfile, PlacementConfig, UserCache};
use crate::rates;

pub const SCHEMA_VERSION: u32 = 1;
pub const CONSTRUCTION: &str = "cauchy";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector {
    pub d: Vec<usize>,
}

impl DemandVector {
    pub fn new(d: Vec<usize>, files: usize) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidArgument("empty demand vector".into()));
        }
        if let Some(&bad) = d.iter().find(|&&f| f == 0 || f > files) {
            return Err(Error::InvalidArgument(format!(
                "demanded file {bad} outside [1, {files}]"
            )));
        }
        Ok(DemandVector { d })
    }

    pub fn users(&self) -> usize {
        self.d.len()
    }

    /// File requested by `user` (1-based).
    pub fn of(&self, user: usize) -> usize {
        self.d[user - 1]
    }

    /// `Omega_i`: the users requesting `file`.
    pub fn omega(&self, file: usize) -> UserSet {
        UserSet::from_bits(
            self.d
                .iter()
                .enumerate()
                .filter(|(_, &f)| f == file)
                .fold(0u64, |acc, (k, _)| acc | 1 << k),
        )
    }

    /// Distinct requested files, increasing.
    pub fn requested(&self) -> Vec<usize> {
        let mut v = self.d.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn is_two_sided(&self) -> bool {
        self.requested().len() == 2
    }
}

/// `(kappa, theta)` of a group with `|rho_1| = s1`, `|rho_2| = s2` in the
/// description of `file`, where `k_i = |Omega_file|`.
pub fn group_dims(file: usize, s1: usize, s2: usize, k_i: usize, r1: usize, r2: usize) -> (usize, usize) {
    let (s1, s2, r1, r2, k) = (s1 as i64, s2 as i64, r1 as i64, r2 as i64, k_i as i64);
    let m2 = r2 - s2;
    let m1 = r1 - s1 - m2;
    let kappa = binom(k, m2) * binom(k - m2, m1);
    if kappa == 0 || k == 0 {
        return (kappa as usize, 0);
    }
    let missing = if file == 1 { r1 - s1 } else { r2 - s2 };
    let num = kappa * (k - missing).max(0) as u128;
    debug_assert_eq!(num % k as u128, 0);
    (kappa as usize, (num / k as u128) as usize)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupLayout {
    pub key: GroupKey,
    pub kappa: usize,
    pub theta: usize,
    /// Constituent chains, colexicographic in `(x1, x2)`.
    pub constituents: Vec<ChainIndex>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DescriptionLayout {
    pub file: usize,
    pub groups: Vec<GroupLayout>,
}

impl DescriptionLayout {
    /// Number of description elements.
    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.theta).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn two_file_profile(profile: &Profile) -> Result<(usize, usize)> {
    match profile.as_slice() {
        &[r1, r2] => Ok((r1, r2)),
        other => Err(Error::InvalidArgument(format!(
            "delivery is defined for two files, profile has {}",
            other.len()
        ))),
    }
}

/// Group structure of the description of `file`; groups with no elements
/// are left out.
pub fn description_layout(file: usize, demand: &DemandVector, profile: &Profile) -> Result<DescriptionLayout> {
    let (r1, r2) = two_file_profile(profile)?;
    if !demand.is_two_sided() {
        return Err(Error::OneSidedDemand);
    }
    if file != 1 && file != 2 {
        return Err(Error::InvalidArgument(format!("file {file} outside [1, 2]")));
    }
    let own = demand.omega(file);
    let other = demand.omega(3 - file);
    let mut groups = Vec::new();
    for key in enumerate_group_keys(other, r1, r2) {
        let (s1, s2) = (key.s1(), key.s2());
        let (kappa, theta) = group_dims(file, s1, s2, own.len(), r1, r2);
        if theta == 0 {
            continue;
        }
        let mut constituents = Vec::with_capacity(kappa);
        for x1 in combinations_colex(own, r1 - s1) {
            for x2 in combinations_colex(x1, r2 - s2) {
                constituents.push(ChainIndex::new(vec![key.rho[0].union(x1), key.rho[1].union(x2)]));
            }
        }
        debug_assert_eq!(constituents.len(), kappa);
        groups.push(GroupLayout { key, kappa, theta, constituents });
    }
    Ok(DescriptionLayout { file, groups })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionGroup {
    pub key: GroupKey,
    pub kappa: usize,
    pub theta: usize,
    pub elements: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Description {
    pub file: usize,
    pub groups: Vec<DescriptionGroup>,
}

impl Description {
    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.elements.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn elements(&self) -> impl Iterator<Item = &Vec<u64>> {
        self.groups.iter().flat_map(|g| g.elements.iter())
    }
}

fn check_files(cfg: &PlacementConfig, files: &[Vec<u64>]) -> Result<()> {
    let f = cfg.file_len()?;
    if files.len() != cfg.files() || files.iter().any(|x| x.len() != f) {
        return Err(Error::ConfigMismatch(format!(
            "expected {} files of {f} symbols",
            cfg.files()
        )));
    }
    Ok(())
}

fn check_demand(cfg: &PlacementConfig, demand: &DemandVector) -> Result<()> {
    if demand.users() != cfg.users {
        return Err(Error::ConfigMismatch(format!(
            "demand has {} entries for {} users",
            demand.users(),
            cfg.users
        )));
    }
    if demand.d.iter().any(|&f| f == 0 || f > cfg.files()) {
        return Err(Error::ConfigMismatch("demand names a file outside the library".into()));
    }
    Ok(())
}

/// Builds `W*_file` from the file payloads.
pub fn build_description(
    file: usize,
    demand: &DemandVector,
    files: &[Vec<u64>],
    cfg: &PlacementConfig,
) -> Result<Description> {
    check_files(cfg, files)?;
    check_demand(cfg, demand)?;
    let layout = description_layout(file, demand, &cfg.profile)?;
    let mut groups = Vec::with_capacity(layout.groups.len());
    for g in &layout.groups {
        let inner = mds_cauchy(g.theta, g.kappa, cfg.field)?;
        let parts = g
            .constituents
            .iter()
            .map(|c| Ok(subfile(&files[file - 1], chain_rank(c, cfg.users, &cfg.profile)?, cfg.subfile_len)))
            .collect::<Result<Vec<_>>>()?;
        groups.push(DescriptionGroup {
            key: g.key,
            kappa: g.kappa,
            theta: g.theta,
            elements: inner.apply(&parts),
        });
    }
    Ok(Description { file, groups })
}

/// Scheme rate for the set of requested files (subset of `{1, 2}`).
pub fn delivery_rate(users: usize, r1: usize, r2: usize, requested: &[usize]) -> Result<Rational> {
    let mut req = requested.to_vec();
    req.sort_unstable();
    req.dedup();
    match req.as_slice() {
        [1] => Ok(rates::one_sided_rate(users, r1)),
        [2] => Ok(rates::one_sided_rate(users, r2)),
        [1, 2] => Ok(rates::two_sided_rate(users, r1, r2)),
        _ => Err(Error::InvalidArgument(format!("requested set {requested:?} not in {{1}}, {{2}}, {{1,2}}"))),
    }
}

/// `S · C(K-a, r) / C(K, r)` as an exact integer.
fn scaled(s: u64, users: usize, a: usize, r: usize) -> u64 {
    let k = users as i64;
    let num = s as u128 * binom(k - a as i64, r as i64);
    let den = binom(k, r as i64);
    debug_assert_eq!(num % den, 0);
    (num / den) as u64
}

/// Outer-code row count `S · R` for a demand.
pub fn row_count(cfg: &PlacementConfig, demand: &DemandVector) -> Result<usize> {
    let (r1, r2) = two_file_profile(&cfg.profile)?;
    let s = cfg.subpacketization()?;
    let r = [r1, r2];
    let req = demand.requested();
    Ok(match req.as_slice() {
        [i] => scaled(s, cfg.users, 1, r[i - 1]) as usize,
        _ => {
            let a = |i: usize| scaled(s, cfg.users, 1, r[i]);
            let b = |i: usize| scaled(s, cfg.users, 2, r[i]);
            (a(0) + b(1)).max(a(1) + b(0)) as usize
        }
    })
}

/// One outer-code column: element `element` of group `rho` in `W*_file`,
/// or subfile rank `element` of `file` for a single-file message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnLabel {
    pub file: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<[UserSet; 2]>,
    pub element: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryMessage {
    pub schema_version: u32,
    #[serde(rename = "K")]
    pub users: usize,
    pub r: Profile,
    pub p: u64,
    pub subfile_len: usize,
    pub construction: String,
    pub demand: DemandVector,
    pub columns: Vec<ColumnLabel>,
    pub rows: Vec<Vec<u64>>,
}

impl DeliveryMessage {
    pub fn field(&self) -> Result<PrimeField> {
        PrimeField::new(self.p)
    }

    /// Transmitted symbols.
    pub fn symbols(&self) -> usize {
        self.rows.len() * self.subfile_len
    }

    pub fn config(&self) -> Result<PlacementConfig> {
        PlacementConfig::new(self.users, self.r.clone(), self.subfile_len, self.field()?)
    }
}

fn description_columns(layout: &DescriptionLayout) -> Vec<ColumnLabel> {
    layout
        .groups
        .iter()
        .flat_map(|g| {
            (0..g.theta).map(move |e| ColumnLabel { file: layout.file, rho: Some(g.key.rho), element: e })
        })
        .collect()
}

/// Outer matrix and column labels for a demand.
pub fn outer_code(cfg: &PlacementConfig, demand: &DemandVector) -> Result<(FieldMatrix, Vec<ColumnLabel>)> {
    let rows = row_count(cfg, demand)?;
    let columns = if demand.is_two_sided() {
        let mut c = description_columns(&description_layout(1, demand, &cfg.profile)?);
        c.extend(description_columns(&description_layout(2, demand, &cfg.profile)?));
        c
    } else {
        let file = demand.requested()[0];
        (0..cfg.subpacketization()? as usize)
            .map(|e| ColumnLabel { file, rho: None, element: e })
            .collect()
    };
    Ok((mds_cauchy(rows, columns.len(), cfg.field)?, columns))
}

pub fn encode_delivery(demand: &DemandVector, files: &[Vec<u64>], cfg: &PlacementConfig) -> Result<DeliveryMessage> {
    two_file_profile(&cfg.profile)?;
    check_files(cfg, files)?;
    check_demand(cfg, demand)?;
    let (outer, columns) = outer_code(cfg, demand)?;
    let stacked: Vec<Vec<u64>> = if demand.is_two_sided() {
        let d1 = build_description(1, demand, files, cfg)?;
        let d2 = build_description(2, demand, files, cfg)?;
        d1.elements().chain(d2.elements()).cloned().collect()
    } else {
        let file = demand.requested()[0];
        (0..cfg.subpacketization()?)
            .map(|j| subfile(&files[file - 1], j, cfg.subfile_len).to_vec())
            .collect()
    };
    let refs: Vec<&[u64]> = stacked.iter().map(|v| v.as_slice()).collect();
    Ok(DeliveryMessage {
        schema_version: SCHEMA_VERSION,
        users: cfg.users,
        r: cfg.profile.clone(),
        p: cfg.field.prime(),
        subfile_len: cfg.subfile_len,
        construction: CONSTRUCTION.into(),
        demand: demand.clone(),
        columns,
        rows: outer.apply(&refs),
    })
}

/// Columns of the outer code a user can rebuild from its cache: whole
/// groups of the other file's description whose `rho` of that file's index
/// contains the user.
pub fn known_columns(user: usize, demand: &DemandVector, columns: &[ColumnLabel]) -> Vec<usize> {
    let other = 3 - demand.of(user);
    columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.file == other && c.rho.is_some_and(|rho| rho[other - 1].contains(user)))
        .map(|(j, _)| j)
        .collect()
}

fn cached<'a>(cache: &'a UserCache, file: usize, chain: &ChainIndex, len: usize) -> Result<&'a [u64]> {
    let p = cache.payload(file, chain).ok_or_else(|| {
        Error::ConfigMismatch(format!("user {} lacks payload for file {file} chain {chain}", cache.id))
    })?;
    if p.len() != len {
        return Err(Error::ConfigMismatch(format!(
            "cached subfile has {} symbols, message expects {len}",
            p.len()
        )));
    }
    Ok(p)
}

fn subtract_columns(
    field: PrimeField,
    rows: &[Vec<u64>],
    outer: &FieldMatrix,
    cols: &[usize],
    values: &[Vec<u64>],
) -> Vec<Vec<u64>> {
    let mut out = rows.to_vec();
    for (r, row) in out.iter_mut().enumerate() {
        for (&c, v) in cols.iter().zip(values) {
            let coef = outer.get(r, c);
            if coef == 0 {
                continue;
            }
            for (a, &x) in row.iter_mut().zip(v) {
                *a = field.sub(*a, field.mul(coef, x));
            }
        }
    }
    out
}

/// Recovers `W_{d_user}` from the user's cache and a delivery message.
pub fn decode(user: usize, cache: &UserCache, msg: &DeliveryMessage) -> Result<Vec<u64>> {
    let cfg = msg.config()?;
    let field = cfg.field;
    let len = cfg.subfile_len;
    if user == 0 || user > cfg.users || cache.id != user {
        return Err(Error::ConfigMismatch(format!("cache of user {} used to decode user {user}", cache.id)));
    }
    if msg.rows.iter().any(|r| r.len() != len) {
        return Err(Error::ConfigMismatch("message row length differs from subfile length".into()));
    }
    let demand = &msg.demand;
    let (outer, columns) = outer_code(&cfg, demand)?;
    if columns != msg.columns || outer.rows != msg.rows.len() {
        return Err(Error::ConfigMismatch("message layout does not match its metadata".into()));
    }
    let file = demand.of(user);
    let s = cfg.subpacketization()? as usize;
    let mut out = vec![0u64; s * len];
    let mut put = |chain: &ChainIndex, data: &[u64]| -> Result<()> {
        let j = chain_rank(chain, cfg.users, &cfg.profile)? as usize;
        out[j * len..(j + 1) * len].copy_from_slice(data);
        Ok(())
    };

    if !demand.is_two_sided() {
        let chains = crate::combinatorics::enumerate_chains(cfg.users, &cfg.profile)?;
        let known: Vec<usize> = (0..s).filter(|&j| cache.knows(file, &chains[j])).collect();
        let values = known
            .iter()
            .map(|&j| cached(cache, file, &chains[j], len).map(|p| p.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let rhs = subtract_columns(field, &msg.rows, &outer, &known, &values);
        let unknown: Vec<usize> = (0..s).filter(|j| !known.contains(j)).collect();
        let solved = solve_after_drop(&outer, &known, &rhs)?;
        for (&j, v) in known.iter().zip(&values).chain(unknown.iter().zip(&solved)) {
            put(&chains[j], v)?;
        }
        return Ok(out);
    }

    // step 1: outer code
    let other = 3 - file;
    let other_layout = description_layout(other, demand, &cfg.profile)?;
    let own_layout = description_layout(file, demand, &cfg.profile)?;
    let known = known_columns(user, demand, &columns);
    let mut known_values = Vec::with_capacity(known.len());
    let offset = if other == 1 { 0 } else { own_layout.len() };
    let mut col = offset;
    for g in &other_layout.groups {
        let user_knows = g.key.rho[other - 1].contains(user);
        if user_knows {
            let inner = mds_cauchy(g.theta, g.kappa, field)?;
            let parts = g
                .constituents
                .iter()
                .map(|c| cached(cache, other, c, len))
                .collect::<Result<Vec<_>>>()?;
            known_values.extend(inner.apply(&parts));
        }
        col += g.theta;
    }
    debug_assert_eq!(col - offset, other_layout.len());
    let rhs = subtract_columns(field, &msg.rows, &outer, &known, &known_values);
    let solved = solve_after_drop(&outer, &known, &rhs)?;
    let unknown: Vec<usize> = (0..columns.len()).filter(|j| !known.contains(j)).collect();
    let own_offset = if file == 1 { 0 } else { other_layout.len() };
    let mut own_elements = vec![Vec::new(); own_layout.len()];
    for (&j, v) in unknown.iter().zip(solved) {
        if j >= own_offset && j < own_offset + own_layout.len() {
            own_elements[j - own_offset] = v;
        }
    }

    // step 2: inner codes of the own description
    let mut next = 0;
    for g in &own_layout.groups {
        let elements = &own_elements[next..next + g.theta];
        next += g.theta;
        let inner = mds_cauchy(g.theta, g.kappa, field)?;
        let known: Vec<usize> = (0..g.kappa).filter(|&c| cache.knows(file, &g.constituents[c])).collect();
        let values = known
            .iter()
            .map(|&c| cached(cache, file, &g.constituents[c], len).map(|p| p.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let rhs = subtract_columns(field, elements, &inner, &known, &values);
        let unknown: Vec<usize> = (0..g.kappa).filter(|c| !known.contains(c)).collect();
        if unknown.len() != g.theta {
            return Err(Error::Singular(format!(
                "group {:?} leaves {} unknown constituents for {} elements",
                g.key,
                unknown.len(),
                g.theta
            )));
        }
        let solved = solve(&inner.select_columns(&unknown), &rhs)?;
        for (&c, v) in known.iter().zip(&values).chain(unknown.iter().zip(&solved)) {
            put(&g.constituents[c], v)?;
        }
    }
    // constituents not in any element-bearing group are all cached
    let chains = crate::combinatorics::enumerate_chains(cfg.users, &cfg.profile)?;
    let covered: std::collections::HashSet<&ChainIndex> =
        own_layout.groups.iter().flat_map(|g| g.constituents.iter()).collect();
    for c in chains.iter().filter(|c| !covered.contains(c)) {
        let p = cached(cache, file, c, len)?.to_vec();
        put(c, &p)?;
    }
    Ok(out)
}

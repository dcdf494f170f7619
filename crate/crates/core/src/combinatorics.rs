//! Integer combinatorics and the nested-chain subfile index.
//!
//! A subfile of every file is labelled by a chain `tau_N ⊆ … ⊆ tau_1 ⊆ [K]`
//! with `|tau_j| = r_j`. Chains are enumerated lexicographically by
//! `(tau_1, tau_2, …)` (each set compared as a sorted tuple), and
//! [`chain_rank`]/[`chain_unrank`] are the matching mixed-radix bijection.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Binomial coefficient with zero extension: `C(a, b) = 0` if `b < 0` or `b > a`.
pub fn binom(a: i64, b: i64) -> u128 {
    if b < 0 || b > a || a < 0 {
        return 0;
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 0..b {
        // exact at every step: acc * (a - i) is divisible by (i + 1)
        acc = acc * (a - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `a! / (b_1! … b_n!)`, rejecting parts that do not sum to `a`.
pub fn multinomial(a: u64, parts: &[u64]) -> Result<u128> {
    let total: u64 = parts.iter().sum();
    if total != a {
        return Err(Error::InvalidArgument(format!(
            "multinomial parts sum to {total}, expected {a}"
        )));
    }
    let mut remaining = a as i64;
    let mut acc: u128 = 1;
    for &b in parts {
        acc = acc
            .checked_mul(binom(remaining, b as i64))
            .ok_or_else(|| Error::InvalidArgument("multinomial overflows u128".into()))?;
        remaining -= b as i64;
    }
    Ok(acc)
}

/// A set of users in `[1, 64]`, stored as a bitmask (bit `k-1` is user `k`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct UserSet(u64);

impl UserSet {
    pub const MAX_USER: usize = 64;

    pub fn empty() -> Self {
        UserSet(0)
    }

    /// `{1, …, k}`.
    pub fn full(k: usize) -> Self {
        assert!(k <= Self::MAX_USER);
        if k == 64 {
            UserSet(u64::MAX)
        } else {
            UserSet((1u64 << k) - 1)
        }
    }

    pub fn from_bits(bits: u64) -> Self {
        UserSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn from_users<I: IntoIterator<Item = usize>>(users: I) -> Result<Self> {
        let mut bits = 0u64;
        for u in users {
            if u == 0 || u > Self::MAX_USER {
                return Err(Error::InvalidArgument(format!("user index {u} outside [1, 64]")));
            }
            bits |= 1 << (u - 1);
        }
        Ok(UserSet(bits))
    }

    pub fn contains(self, user: usize) -> bool {
        user >= 1 && user <= Self::MAX_USER && self.0 & (1 << (user - 1)) != 0
    }

    pub fn with(self, user: usize) -> Self {
        UserSet(self.0 | (1 << (user - 1)))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: UserSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: UserSet) -> Self {
        UserSet(self.0 | other.0)
    }

    pub fn intersection(self, other: UserSet) -> Self {
        UserSet(self.0 & other.0)
    }

    pub fn difference(self, other: UserSet) -> Self {
        UserSet(self.0 & !other.0)
    }

    /// Users in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(tz + 1)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Largest user index present, 0 for the empty set.
    pub fn max_user(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }
}

impl fmt::Debug for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, u) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{u}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for UserSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for UserSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let users = Vec::<usize>::deserialize(d)?;
        let mut sorted = users.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != users {
            return Err(serde::de::Error::custom("user set must be sorted without duplicates"));
        }
        UserSet::from_users(users).map_err(serde::de::Error::custom)
    }
}

/// All `k`-subsets of `set`, lexicographic as sorted tuples.
pub fn combinations_lex(set: UserSet, k: usize) -> Vec<UserSet> {
    let elems = set.to_vec();
    let n = elems.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(binom(n as i64, k as i64) as usize);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(UserSet(idx.iter().fold(0u64, |acc, &i| acc | 1 << (elems[i] - 1))));
        // advance the rightmost index that still has room
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All `k`-subsets of `set` in colexicographic order (increasing bitmask).
pub fn combinations_colex(set: UserSet, k: usize) -> Vec<UserSet> {
    let mut v = combinations_lex(set, k);
    v.sort_unstable_by_key(|s| s.0);
    v
}

/// Lexicographic rank of a `k`-subset given by sorted positions in `[0, n)`.
fn rank_positions(pos: &[usize], n: usize) -> u128 {
    let k = pos.len();
    let mut rank = 0u128;
    let mut next = 0usize;
    for (i, &p) in pos.iter().enumerate() {
        for v in next..p {
            rank += binom((n - 1 - v) as i64, (k - 1 - i) as i64);
        }
        next = p + 1;
    }
    rank
}

fn unrank_positions(mut rank: u128, n: usize, k: usize) -> Vec<usize> {
    let mut pos = Vec::with_capacity(k);
    let mut v = 0usize;
    for i in 0..k {
        loop {
            let block = binom((n - 1 - v) as i64, (k - 1 - i) as i64);
            if rank < block {
                break;
            }
            rank -= block;
            v += 1;
        }
        pos.push(v);
        v += 1;
    }
    pos
}

/// Per-file cache profile `r_1 ≥ r_2 ≥ … ≥ r_N`, each in `[0, K]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Profile(Vec<usize>);

impl Profile {
    pub fn new(r: Vec<usize>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidProfile("profile needs at least one file".into()));
        }
        if r.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidProfile(format!("{r:?} is not non-increasing")));
        }
        Ok(Profile(r))
    }

    /// Checks `r_1 ≤ K` on top of monotonicity.
    pub fn for_users(r: Vec<usize>, users: usize) -> Result<Self> {
        let p = Self::new(r)?;
        if p.0[0] > users {
            return Err(Error::InvalidProfile(format!(
                "r_1 = {} exceeds the user count {users}",
                p.0[0]
            )));
        }
        Ok(p)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn files(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, file: usize) -> usize {
        self.0[file - 1]
    }

    /// Number of chains per file: `K choose (r_N, r_{N-1}-r_N, …, r_1-r_2, K-r_1)`.
    pub fn subpacketization(&self, users: usize) -> Result<u64> {
        if self.0[0] > users {
            return Err(Error::InvalidProfile(format!("r_1 exceeds K = {users}")));
        }
        let r = &self.0;
        let mut parts = vec![*r.last().unwrap() as u64];
        for j in (1..r.len()).rev() {
            parts.push((r[j - 1] - r[j]) as u64);
        }
        parts.push((users - r[0]) as u64);
        let s = multinomial(users as u64, &parts)?;
        u64::try_from(s).map_err(|_| Error::InvalidArgument("subpacketization exceeds u64".into()))
    }

    /// Radices of the mixed-radix chain rank: `C(K, r_1), C(r_1, r_2), …`.
    fn radices(&self, users: usize) -> Vec<u128> {
        let mut out = vec![binom(users as i64, self.0[0] as i64)];
        for w in self.0.windows(2) {
            out.push(binom(w[0] as i64, w[1] as i64));
        }
        out
    }
}

impl TryFrom<Vec<usize>> for Profile {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Profile::new(v)
    }
}

impl From<Profile> for Vec<usize> {
    fn from(p: Profile) -> Self {
        p.0
    }
}

/// Nested chain `(tau_1, …, tau_N)` labelling one subfile of every file.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainIndex {
    pub sets: Vec<UserSet>,
}

impl ChainIndex {
    pub fn new(sets: Vec<UserSet>) -> Self {
        ChainIndex { sets }
    }

    /// `tau_file` (1-based file index).
    pub fn tau(&self, file: usize) -> UserSet {
        self.sets[file - 1]
    }

    pub fn is_valid_for(&self, users: usize, profile: &Profile) -> bool {
        self.sets.len() == profile.files()
            && self.sets.iter().zip(profile.as_slice()).all(|(s, &r)| s.len() == r)
            && self.sets[0].is_subset(UserSet::full(users))
            && self.sets.windows(2).all(|w| w[1].is_subset(w[0]))
    }
}

impl fmt::Display for ChainIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.sets.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

/// Every chain for `(K, r)` in rank order.
pub fn enumerate_chains(users: usize, profile: &Profile) -> Result<Vec<ChainIndex>> {
    if profile.get(1) > users {
        return Err(Error::InvalidProfile(format!("r_1 exceeds K = {users}")));
    }
    if users > UserSet::MAX_USER {
        return Err(Error::InvalidArgument(format!("at most 64 users, got {users}")));
    }
    let r = profile.as_slice();
    let mut out = Vec::new();
    let mut stack = Vec::with_capacity(r.len());
    fn rec(
        r: &[usize],
        parent: UserSet,
        stack: &mut Vec<UserSet>,
        out: &mut Vec<ChainIndex>,
    ) {
        let depth = stack.len();
        if depth == r.len() {
            out.push(ChainIndex::new(stack.clone()));
            return;
        }
        for s in combinations_lex(parent, r[depth]) {
            stack.push(s);
            rec(r, s, stack, out);
            stack.pop();
        }
    }
    rec(r, UserSet::full(users), &mut stack, &mut out);
    Ok(out)
}

/// Position of `chain` in [`enumerate_chains`] order.
pub fn chain_rank(chain: &ChainIndex, users: usize, profile: &Profile) -> Result<u64> {
    if !chain.is_valid_for(users, profile) {
        return Err(Error::InvalidArgument(format!(
            "chain {chain} is not valid for K = {users}, r = {:?}",
            profile.as_slice()
        )));
    }
    let radices = profile.radices(users);
    let mut rank = 0u128;
    let mut parent = UserSet::full(users);
    for (level, &set) in chain.sets.iter().enumerate() {
        let universe = parent.to_vec();
        let pos: Vec<usize> = set
            .iter()
            .map(|u| universe.binary_search(&u).expect("subset of parent"))
            .collect();
        rank = rank * radices[level] + rank_positions(&pos, universe.len());
        parent = set;
    }
    Ok(rank as u64)
}

/// Inverse of [`chain_rank`].
pub fn chain_unrank(index: u64, users: usize, profile: &Profile) -> Result<ChainIndex> {
    let s = profile.subpacketization(users)?;
    if index >= s {
        return Err(Error::OutOfRange { index, limit: s });
    }
    let radices = profile.radices(users);
    let mut digits = vec![0u128; radices.len()];
    let mut rest = index as u128;
    for level in (0..radices.len()).rev() {
        digits[level] = rest % radices[level];
        rest /= radices[level];
    }
    let r = profile.as_slice();
    let mut parent = UserSet::full(users);
    let mut sets = Vec::with_capacity(r.len());
    for (level, &digit) in digits.iter().enumerate() {
        let universe = parent.to_vec();
        let pos = unrank_positions(digit, universe.len(), r[level]);
        let set = UserSet::from_users(pos.into_iter().map(|p| universe[p]))?;
        sets.push(set);
        parent = set;
    }
    Ok(ChainIndex::new(sets))
}

/// `(rho_1, rho_2)` with `rho_2 ⊆ rho_1 ⊆ Ω`: the part of a two-file chain
/// that falls inside the opposite-demand user set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub rho: [UserSet; 2],
}

impl GroupKey {
    pub fn s1(&self) -> usize {
        self.rho[0].len()
    }

    pub fn s2(&self) -> usize {
        self.rho[1].len()
    }
}

/// All group keys over `omega` for a two-file profile `(r1, r2)`, ordered by
/// `s1`, then `s2`, then `rho_1` and `rho_2` lexicographically.
pub fn enumerate_group_keys(omega: UserSet, r1: usize, r2: usize) -> Vec<GroupKey> {
    let mut out = Vec::new();
    for s1 in 0..=r1.min(omega.len()) {
        for s2 in 0..=r2.min(s1) {
            for rho1 in combinations_lex(omega, s1) {
                for rho2 in combinations_lex(rho1, s2) {
                    out.push(GroupKey { rho: [rho1, rho2] });
                }
            }
        }
    }
    out
}

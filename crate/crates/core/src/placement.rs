//! Uncoded placement over nested-chain subfiles.
//!
//! Every file is cut into `S` subfiles of `L` symbols, one per chain, and
//! user `k` stores subfile `(i, tau)` exactly when `k ∈ tau_i`. Subfile `j`
//! (chain rank `j`) occupies symbols `[jL, (j+1)L)` of its file.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{chain_rank, enumerate_chains, ChainIndex, Profile};
use crate::error::{Error, Result};
use crate::field::PrimeField;

pub const DEFAULT_SUBFILE_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacementConfig {
    pub users: usize,
    pub profile: Profile,
    pub subfile_len: usize,
    pub field: PrimeField,
}

impl PlacementConfig {
    pub fn new(users: usize, profile: Profile, subfile_len: usize, field: PrimeField) -> Result<Self> {
        if users == 0 {
            return Err(Error::InvalidArgument("need at least one user".into()));
        }
        if subfile_len == 0 {
            return Err(Error::InvalidArgument("subfile length must be at least 1".into()));
        }
        let profile = Profile::for_users(profile.as_slice().to_vec(), users)?;
        Ok(PlacementConfig { users, profile, subfile_len, field })
    }

    pub fn files(&self) -> usize {
        self.profile.files()
    }

    pub fn subpacketization(&self) -> Result<u64> {
        self.profile.subpacketization(self.users)
    }

    /// `F = S · L`.
    pub fn file_len(&self) -> Result<usize> {
        Ok(self.subpacketization()? as usize * self.subfile_len)
    }
}

/// `S` for a profile; see [`Profile::subpacketization`].
pub fn subpacketization(users: usize, profile: &Profile) -> Result<u64> {
    profile.subpacketization(users)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub file: usize,
    pub chain: ChainIndex,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Vec<u64>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct UserCache {
    pub id: usize,
    pub entries: Vec<CacheEntry>,
    #[serde(skip)]
    index: OnceLock<HashMap<(usize, ChainIndex), usize>>,
}

impl PartialEq for UserCache {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.entries == other.entries
    }
}

impl Eq for UserCache {}

impl UserCache {
    pub fn new(id: usize, entries: Vec<CacheEntry>) -> Self {
        UserCache { id, entries, index: OnceLock::new() }
    }

    fn index(&self) -> &HashMap<(usize, ChainIndex), usize> {
        self.index.get_or_init(|| {
            self.entries
                .iter()
                .enumerate()
                .map(|(i, e)| ((e.file, e.chain.clone()), i))
                .collect()
        })
    }

    pub fn knows(&self, file: usize, chain: &ChainIndex) -> bool {
        self.index().contains_key(&(file, chain.clone()))
    }

    pub fn payload(&self, file: usize, chain: &ChainIndex) -> Option<&[u64]> {
        self.index()
            .get(&(file, chain.clone()))
            .and_then(|&i| self.entries[i].payload.as_deref())
    }

    pub fn count_for(&self, file: usize) -> usize {
        self.entries.iter().filter(|e| e.file == file).count()
    }

    /// Cached symbols, counting `subfile_len` per entry.
    pub fn symbols(&self, subfile_len: usize) -> usize {
        self.entries.len() * subfile_len
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheMap {
    #[serde(rename = "K")]
    pub users: usize,
    pub r: Profile,
    /// Per-user file permutation, 1-based; absent means identity everywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perms: Option<Vec<Vec<usize>>>,
    #[serde(rename = "users")]
    pub caches: Vec<UserCache>,
}

impl CacheMap {
    pub fn user(&self, id: usize) -> Result<&UserCache> {
        self.caches
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("no cache for user {id}")))
    }

    pub fn has_payloads(&self) -> bool {
        self.caches.iter().all(|c| c.entries.iter().all(|e| e.payload.is_some()))
    }

    /// Same map without symbol payloads.
    pub fn without_payloads(&self) -> CacheMap {
        let caches = self
            .caches
            .iter()
            .map(|c| {
                UserCache::new(
                    c.id,
                    c.entries
                        .iter()
                        .map(|e| CacheEntry { file: e.file, chain: e.chain.clone(), payload: None })
                        .collect(),
                )
            })
            .collect();
        CacheMap { users: self.users, r: self.r.clone(), perms: self.perms.clone(), caches }
    }

    pub fn is_identity_placement(&self) -> bool {
        match &self.perms {
            None => true,
            Some(p) => p.iter().all(|perm| perm.iter().enumerate().all(|(i, &v)| v == i + 1)),
        }
    }
}

/// `files` uniformly random files of `len` symbols in `[0, p)`.
pub fn random_files(files: usize, len: usize, field: PrimeField, seed: u64) -> Vec<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..files)
        .map(|_| (0..len).map(|_| rng.gen_range(0..field.prime())).collect())
        .collect()
}

/// Slice of subfile `rank` inside a file.
pub fn subfile(file: &[u64], rank: u64, subfile_len: usize) -> &[u64] {
    let start = rank as usize * subfile_len;
    &file[start..start + subfile_len]
}

fn check_files(cfg: &PlacementConfig, files: &[Vec<u64>]) -> Result<()> {
    if files.len() != cfg.files() {
        return Err(Error::ConfigMismatch(format!(
            "{} files supplied for a profile over {} files",
            files.len(),
            cfg.files()
        )));
    }
    let f = cfg.file_len()?;
    for (i, file) in files.iter().enumerate() {
        if file.len() != f {
            return Err(Error::ConfigMismatch(format!(
                "file {} has {} symbols, expected S*L = {f}",
                i + 1,
                file.len()
            )));
        }
        if file.iter().any(|&v| v >= cfg.field.prime()) {
            return Err(Error::InvalidArgument(format!(
                "file {} holds a symbol outside the field",
                i + 1
            )));
        }
    }
    Ok(())
}

fn check_perms(perms: &[Vec<usize>], users: usize, files: usize) -> Result<()> {
    if perms.len() != users {
        return Err(Error::InvalidArgument(format!(
            "{} permutations for {users} users",
            perms.len()
        )));
    }
    for (j, perm) in perms.iter().enumerate() {
        let mut seen = vec![false; files];
        let ok = perm.len() == files
            && perm.iter().all(|&v| {
                (1..=files).contains(&v) && !std::mem::replace(&mut seen[v - 1], true)
            });
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "permutation of user {} is not a bijection on [1, {files}]: {perm:?}",
                j + 1
            )));
        }
    }
    Ok(())
}

fn place_inner(
    cfg: &PlacementConfig,
    files: Option<&[Vec<u64>]>,
    perms: Option<&[Vec<usize>]>,
) -> Result<CacheMap> {
    let chains = enumerate_chains(cfg.users, &cfg.profile)?;
    let n = cfg.files();
    let caches = (1..=cfg.users)
        .map(|k| {
            let mut entries = Vec::new();
            for i in 1..=n {
                let slot = perms.map_or(i, |p| p[k - 1][i - 1]);
                for (rank, chain) in chains.iter().enumerate() {
                    if chain.tau(slot).contains(k) {
                        let payload = files
                            .map(|fs| subfile(&fs[i - 1], rank as u64, cfg.subfile_len).to_vec());
                        entries.push(CacheEntry { file: i, chain: chain.clone(), payload });
                    }
                }
            }
            UserCache::new(k, entries)
        })
        .collect();
    Ok(CacheMap {
        users: cfg.users,
        r: cfg.profile.clone(),
        perms: perms.map(|p| p.to_vec()),
        caches,
    })
}

/// Fills every cache; payloads are copied verbatim from `files`.
pub fn place(cfg: &PlacementConfig, files: &[Vec<u64>]) -> Result<CacheMap> {
    check_files(cfg, files)?;
    place_inner(cfg, Some(files), None)
}

/// Placement structure only (no payloads).
pub fn place_structure(cfg: &PlacementConfig) -> Result<CacheMap> {
    place_inner(cfg, None, None)
}

/// Placement where user `j` stores `(i, tau)` iff `j ∈ tau_{perms[j][i]}`.
pub fn place_with_permutations(
    cfg: &PlacementConfig,
    files: &[Vec<u64>],
    perms: &[Vec<usize>],
) -> Result<CacheMap> {
    check_files(cfg, files)?;
    check_perms(perms, cfg.users, cfg.files())?;
    place_inner(cfg, Some(files), Some(perms))
}

/// Rank of every entry's chain, for consumers that address subfiles by index.
pub fn entry_ranks(map: &CacheMap, user: usize) -> Result<Vec<(usize, u64)>> {
    map.user(user)?
        .entries
        .iter()
        .map(|e| Ok((e.file, chain_rank(&e.chain, map.users, &map.r)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::UserSet;

    fn cfg(users: usize, r: &[usize], len: usize) -> PlacementConfig {
        PlacementConfig::new(users, Profile::new(r.to_vec()).unwrap(), len, PrimeField::default())
            .unwrap()
    }

    fn chain(t1: &[usize], t2: &[usize]) -> ChainIndex {
        ChainIndex::new(vec![
            UserSet::from_users(t1.iter().copied()).unwrap(),
            UserSet::from_users(t2.iter().copied()).unwrap(),
        ])
    }

    #[test]
    fn subpacketization_values() {
        let p = |r: &[usize]| Profile::new(r.to_vec()).unwrap();
        assert_eq!(subpacketization(4, &p(&[2, 1])).unwrap(), 12);
        assert_eq!(subpacketization(4, &p(&[4, 4])).unwrap(), 1);
        assert_eq!(subpacketization(6, &p(&[3, 3])).unwrap(), 20);
        assert!(subpacketization(3, &p(&[4, 1])).is_err());
    }

    #[test]
    fn user_one_matches_worked_table() {
        let c = cfg(4, &[2, 1], 2);
        let files = random_files(2, c.file_len().unwrap(), c.field, 1);
        let map = place(&c, &files).unwrap();
        let z1 = map.user(1).unwrap();
        let want = vec![
            (1, chain(&[1, 2], &[1])),
            (1, chain(&[1, 2], &[2])),
            (1, chain(&[1, 3], &[1])),
            (1, chain(&[1, 3], &[3])),
            (1, chain(&[1, 4], &[1])),
            (1, chain(&[1, 4], &[4])),
            (2, chain(&[1, 2], &[1])),
            (2, chain(&[1, 3], &[1])),
            (2, chain(&[1, 4], &[1])),
        ];
        let got: Vec<_> = z1.entries.iter().map(|e| (e.file, e.chain.clone())).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn zero_profile_leaves_caches_empty() {
        let c = cfg(3, &[0, 0], 4);
        let files = random_files(2, c.file_len().unwrap(), c.field, 2);
        let map = place(&c, &files).unwrap();
        assert!(map.caches.iter().all(|u| u.entries.is_empty()));
    }

    #[test]
    fn three_users_counts() {
        let c = cfg(3, &[2, 1], 1);
        let map = place_structure(&c).unwrap();
        // S = 6; W1: 6 * 2/3 = 4, W2: 6 * 1/3 = 2
        for u in &map.caches {
            assert_eq!(u.count_for(1), 4);
            assert_eq!(u.count_for(2), 2);
        }
    }

    #[test]
    fn cache_size_identity_and_uncoded_payloads() {
        for users in 1..=5 {
            for r1 in 0..=users {
                for r2 in 0..=r1 {
                    let c = cfg(users, &[r1, r2], 3);
                    let files = random_files(2, c.file_len().unwrap(), c.field, 9);
                    let map = place(&c, &files).unwrap();
                    let f = c.file_len().unwrap();
                    for u in &map.caches {
                        // cached symbols = (r1 + r2) / K * F
                        assert_eq!(u.symbols(3) * users, (r1 + r2) * f);
                        for e in &u.entries {
                            let rank = chain_rank(&e.chain, users, &c.profile).unwrap();
                            assert_eq!(
                                e.payload.as_deref().unwrap(),
                                subfile(&files[e.file - 1], rank, 3)
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn wrong_file_length_rejected() {
        let c = cfg(4, &[2, 1], 2);
        let files = vec![vec![0; 5], vec![0; 24]];
        assert!(matches!(place(&c, &files), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn identity_permutations_match_plain_placement() {
        let c = cfg(4, &[3, 1], 2);
        let files = random_files(2, c.file_len().unwrap(), c.field, 3);
        let perms = vec![vec![1, 2]; 4];
        let a = place(&c, &files).unwrap();
        let b = place_with_permutations(&c, &files, &perms).unwrap();
        assert_eq!(a.caches, b.caches);
    }

    #[test]
    fn swapped_preferences_for_two_users() {
        let c = cfg(2, &[2, 1], 1);
        let files = random_files(2, c.file_len().unwrap(), c.field, 4);
        let map = place_with_permutations(&c, &files, &[vec![1, 2], vec![2, 1]]).unwrap();
        let u1: Vec<_> = map.user(1).unwrap().entries.iter().map(|e| (e.file, e.chain.clone())).collect();
        assert_eq!(
            u1,
            vec![(1, chain(&[1, 2], &[1])), (1, chain(&[1, 2], &[2])), (2, chain(&[1, 2], &[1]))]
        );
        let u2: Vec<_> = map.user(2).unwrap().entries.iter().map(|e| (e.file, e.chain.clone())).collect();
        assert_eq!(
            u2,
            vec![(1, chain(&[1, 2], &[2])), (2, chain(&[1, 2], &[1])), (2, chain(&[1, 2], &[2]))]
        );
    }

    #[test]
    fn permutations_preserve_cache_size() {
        let c = cfg(4, &[3, 1, 0], 1);
        let files = random_files(3, c.file_len().unwrap(), c.field, 5);
        let perms = vec![vec![1, 2, 3], vec![3, 1, 2], vec![2, 3, 1], vec![1, 3, 2]];
        let map = place_with_permutations(&c, &files, &perms).unwrap();
        let s = c.subpacketization().unwrap() as usize;
        for u in &map.caches {
            assert_eq!(u.entries.len() * 4, s * (3 + 1));
        }
        assert!(place_with_permutations(&c, &files, &vec![vec![1, 1, 2]; 4]).is_err());
    }

    #[test]
    fn json_layout() {
        let c = cfg(2, &[1, 0], 1);
        let map = place_structure(&c).unwrap();
        let v: serde_json::Value = serde_json::to_value(&map).unwrap();
        assert_eq!(v["K"], 2);
        assert_eq!(v["r"], serde_json::json!([1, 0]));
        assert_eq!(v["users"][0]["id"], 1);
        assert_eq!(v["users"][0]["entries"][0]["chain"], serde_json::json!([[1], []]));
        let back: CacheMap = serde_json::from_value(v).unwrap();
        assert_eq!(back, map);
    }
}

//! Centralized coded caching for files with non-uniform popularity.
//!
//! Files are split into equal-size subfiles labelled by nested chains of user
//! sets, so every file shares one subpacketization while more popular files
//! occupy more cache. For two files the delivery phase compresses each
//! requested file into an aligned description, stacks both descriptions and
//! broadcasts an MDS-coded version of the stack; every user peels the outer
//! code first and then the inner per-group codes.
//!
//! Alongside the executable scheme the crate carries the exact rate calculus:
//! closed-form delivery rates, the expected rate for fractional allocations,
//! the uncoded-placement lower bound for any number of files, and the
//! breakpoint search for the optimal two-file allocation.

pub mod combinatorics;
pub mod converse;
pub mod delivery;
pub mod error;
pub mod field;
pub mod numeric;
pub mod optimizer;
pub mod oracle;
pub mod placement;
pub mod rates;
pub mod scheme;

pub use combinatorics::{binom, multinomial, ChainIndex, GroupKey, Profile, UserSet};
pub use delivery::{DeliveryMessage, DemandVector, Description};
pub use error::{Error, Result};
pub use field::{FieldMatrix, PrimeField, DEFAULT_PRIME};
pub use numeric::Rational;
pub use placement::{CacheMap, PlacementConfig};
pub use scheme::SharePlan;

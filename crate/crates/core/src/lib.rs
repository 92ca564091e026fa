//! Secure aggregation by multi-group circular masking.
//!
//! Users are split into small groups arranged in a chain (or a tree). Each
//! group additively shares its masked models with the next group and adds
//! Lagrange-coded copies so that the next group can interpolate the running
//! aggregates of users that dropped. The server only ever sees masked partial
//! sums and removes the total mask at the end.
//!
//! The crate also contains the pairwise-mask baseline, a deterministic
//! transport simulator with traffic accounting, and the analytical bounds.
//!
//! The pseudorandom generator is splitmix64. It makes runs reproducible and
//! is **not** cryptographically secure.

pub mod analysis;
pub mod engine;
pub mod ff;
pub mod grouping;
pub mod lagrange;
pub mod net;
pub mod pairwise;
pub mod sharing;

pub use engine::{run_round, Mode, ProtocolConfig, RoundResult, RoundStatus, Seeds};
pub use ff::{FieldElem, FieldVec, Seed};

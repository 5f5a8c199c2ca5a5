//! Simulation core for a hybrid human/LLM community-notes ecosystem.
//!
//! Everything in this crate is pure computation over explicit inputs and
//! seeded random substreams, so it builds without `std` (only `alloc` is
//! required). File formats, the CLI and other IO live in the `bridgesim`
//! companion crate.
//!
//! The pieces, bottom-up:
//!
//! - [`bridge`]: the bridging matrix-factorization scorer
//!   (`r = mu + i_u + i_n + f_u . f_n`), its SGD fit, influence caps and
//!   note status classification.
//! - [`population`]: a synthetic rater population and its rating behaviour.
//! - [`writers`]: human and LLM writer policies, post selection and the
//!   external submission protocol.
//! - [`rlcf`]: reward modelling over rater archetypes, the expected-intercept
//!   reward, rank-based evolution-strategy policy updates and the
//!   hacking/homogenization diagnostics.
//! - [`curation`]: claim matching, note adaptation, prescreening and rater
//!   allocation.
//! - [`harness`]: the round loop that wires all of the above together.
#![cfg_attr(not(test), no_std)]
// `!(x >= 0.0)` is how validation rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bridge;
pub mod curation;
pub mod harness;
pub mod ids;
pub mod linalg;
pub mod math;
pub mod population;
pub mod rlcf;
pub mod rng;
pub mod stats;
pub mod writers;

pub use ids::{NoteId, NoteOrigin, PostId, RaterId, WriterId};

//! Core algorithms for mining and predicting user interest similarity.
//!
//! The crate is `no_std` with `alloc`. Everything here is pure computation over
//! an in-memory [`corpus::Corpus`]; file formats, the CLI and thread pools live
//! in the `tagsim` companion crate.
//!
//! Pipeline, bottom-up:
//!
//! * [`corpus`]: immutable users / videos / behaviour logs with derived indexes.
//! * [`synthgen`]: seeded synthetic corpora with planted homophily.
//! * [`profiling`]: popular-tag (PTP), representative-tag (RTP) and video-based
//!   profiles, cosine similarity, individuality, self-similarity over time.
//! * [`pairfeat`]: the ten-feature record of a (target, helper) user pair.
//! * [`mlcore`]: linear / L1 / pruned tree / forest / GBDT / hybrid
//!   tree-encoded linear models.
//! * [`evalkit`]: AUC, reduced MAE ratio, correlation study tables, the
//!   train/test protocol.
//! * [`recommend`]: cold-start top-N recommendation and its scoring.
#![no_std]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod mlcore;
pub mod model;
pub mod pairfeat;
pub mod profiling;
pub mod recommend;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};

//! Measurement pipeline for lexical-innovation diffusion in threaded
//! online communities.
//!
//! The library is organised as a sequence of stages over an immutable
//! [`corpus::CorpusStore`]:
//!
//! 1. [`corpus`] — ingest newline-delimited JSON dumps into monthly bins.
//! 2. [`socialgraph`] — per-month interaction graphs, neighbourhood
//!    overlap, tie-strength and centralities.
//! 3. [`innovations`] — slang lexicon, innovation detection, innovators.
//! 4. [`trajectories`] — dissemination / tie-strength trajectories,
//!    slope index and success labels.
//! 5. [`analysis`] — population statistics, innovator profiling and the
//!    strong-tie adoption-probability procedure.
//! 6. [`prediction`] — random-forest success prediction with a weighted
//!    random baseline and cross-validation.
//! 7. [`synthcommunity`] — synthetic community generator with planted
//!    ground truth, used as the statistical oracle in tests.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod innovations;
pub mod pipeline;
pub mod prediction;
pub mod socialgraph;
pub mod stats;
pub mod synthcommunity;
pub mod trajectories;

pub use error::{PipelineError, Result};

//! Core library for `scitag`: extraction of the four generic scientific
//! concepts (Process, Method, Material, Data) from abstracts of scholarly
//! articles across ten STM domains.
//!
//! The pipeline is a feature-based linear-chain CRF over a BILOU tag set
//! with exact inference, plus the experiment machinery around it:
//!
//! - [`corpus`] — data model for annotated abstracts, BILOU codec, JSONL and
//!   CoNLL I/O, cross-validation fold planning, corpus statistics.
//! - [`features`] — deterministic sparse feature templates (identity, shape,
//!   affixes, context window, optional gazetteers and word clusters).
//! - [`crf`] — the tagger itself: log-space forward-backward, Viterbi,
//!   maximum-likelihood training with L2 regularization.
//! - [`metrics`] — span-based micro-averaged P/R/F1, token confusion,
//!   Cohen's kappa, Pearson's R.
//! - [`active`] — simulated pool-based active learning with MNLP and random
//!   sampling strategies.
//! - [`synth`] — deterministic synthetic corpora used by the test and
//!   benchmark harnesses.
//!
//! Everything is deterministic given a seed: randomness flows from one root
//! seed through named sub-streams (see [`rng`]).

pub mod active;
pub mod corpus;
pub mod crf;
pub mod features;
pub mod metrics;
pub mod rng;
pub mod synth;

//! Evaluation harness for complex-claim fact-checking through sub-claim
//! decomposition.
//!
//! The crate is organized along the experiment's data flow:
//!
//! * [`model`]: claims, sub-claims, evidence and the experiment axes.
//! * [`ingest`]: dataset files, temporal bounding, complexity filter, splits.
//! * [`alignment`]: structured verifier inputs and their rendered prompts.
//! * [`backends`]: verifier backends and verdict parsing.
//! * [`pipeline`]: cached, resumable experiment runs.
//! * [`metrics`] and [`stats`]: scores, error profiles, paired tests, agreement.
//! * [`report`]: result tables.

pub mod alignment;
pub mod backends;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synthetic;
pub mod text;

//! Scenario-driven evaluation pipeline for autonomous agents.
//!
//! The pipeline turns a natural-language scenario into a campaign of
//! deterministic 2-D simulation runs and rolls the observed behavior up an
//! ethical-decomposition graph into readiness scores:
//!
//! 1. [`graph`] — the Principles/KA/VAB/Observable DAG and the key-factor
//!    tables mapping scenario parameters onto the shared 0-100 difficulty
//!    scale.
//! 2. [`scenario`] — deterministic parsing of bracketed parameter
//!    expressions in prose.
//! 3. [`orchestrator`] — design-of-experiments expansion into realizations
//!    with difficulty signatures and equi-ethical buckets.
//! 4. [`scene`] — constraint-based actor placement.
//! 5. [`simkit`] — the seeded search-and-mark simulation and its run logs.
//! 6. [`scoring`] — observable evaluation, min-rollup, confidence, and
//!    multi-run aggregation.
//! 7. [`report`] — per-bucket summaries and SVG rendering.
//!
//! Everything downstream of a campaign seed is bit-deterministic; no stage
//! reads a clock or OS entropy.

pub mod graph;
pub mod orchestrator;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod scene;
pub mod scoring;
pub mod simkit;

#[cfg(test)]
pub(crate) mod testutil;

//! Batch front door for the conformal-flow toolkit: scenario configuration,
//! deterministic random-metric sampling, inequality audits, and experiment
//! orchestration with CSV/JSON emission.

pub mod audit;
pub mod config;
pub mod runner;
pub mod sample;

//! Experiment harness: MDP generation, actor-critic runs and step-size
//! sweeps written as CSV/SVG, and the `check-all` inequality suite.

pub mod config;
pub mod generate;
pub mod output;
pub mod suite;
pub mod svg;
pub mod sweep;

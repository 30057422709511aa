//! Experiment harness for proxy-surface compression: the figure and table
//! runs, their CSV layouts, and run manifests.

pub mod experiments;
pub mod output;

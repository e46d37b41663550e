//! Experiment harness for the adversarial QML benchmark: configuration,
//! orchestration pipelines, and report emission behind the `qadv` CLI.

pub mod config;
pub mod experiments;
pub mod model;
pub mod pgm;
pub mod report;

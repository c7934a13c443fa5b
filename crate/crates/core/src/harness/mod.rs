//! Batch experiment plumbing: configuration, scenario drivers, reports and manifests.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod report;
pub mod scenarios;

pub use config::ScenarioConfig;
pub use manifest::RunManifest;
pub use scenarios::{
    regenerate_stability_report, run_epsilon_sweep, run_norm_checks, run_stability, NormOutcome,
    StabilityOutcome, SweepOutcome,
};

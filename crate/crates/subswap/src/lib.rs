//! Experiment front end for `subswap-core`: JSON configs and presets, CSV and
//! JSON outputs with run manifests, and rayon-parallel sweeps.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;
pub mod sweep;

pub use subswap_core as core_api;

//! File formats, reports, plots and manifests for the `scalefit` command.

pub mod error;
pub mod io;
pub mod manifest;
pub mod report;
pub mod svg;

pub use error::InputError;
pub use manifest::{Inputs, RunManifest};

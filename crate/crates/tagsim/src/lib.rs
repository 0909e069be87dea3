//! Std companion of `tagsim-core`: corpus CSV files, artifact formats,
//! run manifests, parallel pipeline stages and the `tagsim` command line.

pub mod cli;
pub mod config;
pub mod formats;
pub mod io;
pub mod manifest;
pub mod pipeline;

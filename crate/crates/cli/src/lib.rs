//! File formats, dataset IO and experiment orchestration around
//! [`dwsnn_core`].

pub mod config;
pub mod cycling;
pub mod data;
pub mod devices;
pub mod error;
pub mod experiment;
pub mod idx;
pub mod store;
pub mod table;

pub use error::{CliError, Result};

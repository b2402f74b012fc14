//! Exact simulation and second-order analysis of meter readout statistics in
//! weak system-meter interactions, with and without post-selection.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod formulas;
pub mod meter;
pub mod numdiff;
pub mod operator;
pub mod random;
pub mod report;

pub use error::{Error, Result};

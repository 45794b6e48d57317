pub mod dist;
pub mod error;
pub mod stats;

pub use error::{Error, Result};
pub mod alignment;
pub mod calibration;
pub mod cli;
pub mod ingest;
pub mod measures;
pub mod record;
pub mod selfcheck;
pub mod synth;

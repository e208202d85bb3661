pub mod beacons;
pub mod blob;
pub mod cli;
pub mod datasets;
pub mod harness;
mod error;
pub mod model;
pub mod ndgrad;
pub mod worlds;

pub use error::{Error, Result};

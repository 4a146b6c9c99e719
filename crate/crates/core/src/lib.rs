//! Distributed optimization over directed graphs with bounded, time-varying
//! communication delays.

pub mod analysis;
pub mod async_frost;
pub mod dac;
pub mod delay;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod objectives;
pub mod sync;

pub use error::{Error, Result};

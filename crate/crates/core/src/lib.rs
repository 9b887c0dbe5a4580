//! Polar coding for binary-input block fading channels.

pub mod channel;
pub mod construction;
pub mod error;
pub mod harness;
pub mod mi;
pub mod numeric;
pub mod polar;
pub mod rng;
pub mod schemes;
pub mod subchannel;

pub use error::{Error, Result};

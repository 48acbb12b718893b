//! Homomorphic template matching with the Fan-Vercauteren scheme.

pub mod codec;
mod error;
pub mod fv;
pub mod matcher;
pub mod protocol;
pub mod ring;

pub use error::{Error, Result};

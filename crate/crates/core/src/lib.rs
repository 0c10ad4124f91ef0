pub mod error;
pub mod numerics;

pub use error::{Error, Module, Result};
pub mod payoffs;
pub mod envelope;
pub mod hjb;
pub mod hedging;
pub mod dp;
pub mod dual;

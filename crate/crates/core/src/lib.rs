//! Exact error probabilities of grid constellations in Gaussian noise, their
//! log-concavity and averages over fading, and the local SNR bounds built on
//! top of them.
//!
//! The SNR variable throughout is `t = log(1 / sigma)` for a grid with fixed
//! spacing; [`grid::SnrPoint`] converts to dB.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod bounds;
pub mod error;
pub mod fading;
pub mod gaussian;
pub mod grid;
pub mod modem;
pub mod quad;
pub mod roots;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};

//! Variational reconstruction of 1D compressed-sensing signals, adversarial
//! attacks on the reconstruction maps, and numerical checks of the
//! data-consistency plus symmetric-Bregman stability bound.

pub mod attacks;
pub mod bench;
pub mod error;
pub mod io;
pub mod linops;
pub mod rng;
pub mod signals;
pub mod solvers;
pub mod stability;

pub use error::{Error, Result};

//! Differentiable Hodgkin–Huxley simulation engine.
//!
//! The crate covers point neurons with arbitrary channel sets, exact
//! reverse-mode gradients with checkpointed recomputation, a small training
//! stack, multicompartment morphologies, a desk-scale cortical microcircuit,
//! and a byte cipher built on the frequency selectivity of HH neurons.

pub mod adjoint;
pub mod cortex;
pub mod dynamics;
pub mod error;
pub mod hhcrypt;
pub mod learn;
pub mod morphology;
pub mod plot;

pub use error::{Error, Result};

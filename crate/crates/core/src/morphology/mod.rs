//! Multicompartment neurons on a compartment graph with explicit axial
//! coupling.

mod demo;
mod graph;
mod sim;

pub use demo::*;
pub use graph::{CompartmentGraph, CompartmentSpec, EdgeSpec, MorphologyConfig, STABILITY_LIMIT};
pub use sim::{
    axial_current, coincidence_experiment, morph_step, run_pulses, MorphState, MorphTrace, Pulse,
};

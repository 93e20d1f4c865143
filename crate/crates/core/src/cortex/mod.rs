//! Desk-scale layered cortical microcircuit of HH neurons with delayed
//! exponential synapses and compound-Poisson external drive.

mod background;
mod buffer;
mod network;
mod sim;
mod tables;

pub use background::{background_sample, BackgroundSpec, CompoundPoisson};
pub use buffer::SpikeBuffer;
pub use network::{
    build_network, expected_counts, pair_count, random_member, BlockStats, ExpectedCounts,
    NetworkConfig, NetworkTopology, PopulationSpec, PATCH_AREA_MM2,
};
pub use sim::{
    simulate, simulate_batch, CortexConfig, PopulationStats, RunResult, Simulation, SpikeEvent,
    ThalamicStimulus, DEFAULT_EXC_GAIN, DEFAULT_INH_GAIN,
};
pub use tables::{gaussian_pair_mean, MicrocircuitTable, ThalamusTable, N_POPULATIONS};

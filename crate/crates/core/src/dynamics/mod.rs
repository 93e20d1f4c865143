//! Point-neuron dynamics: channel descriptions, the fused HH step, LIF, and
//! trace simulation.

pub mod channel;
pub mod hh;
pub mod lif;
pub mod rates;
pub mod reference;
pub mod response;
pub mod trace;

pub use channel::{ChannelSpec, GateSpec, HHParams, LIFParams};
pub use hh::{gate_step, hh_step, hh_step_in_place, ionic_current, spike_detect, NeuronState};
pub use lif::{lif_step, lif_step_in_place};
pub use rates::RateFn;
pub use response::{firing_band, sine_response_rate, sine_spike_times, step_perturbation_counts};
pub use trace::{isi_cv, simulate, sinusoid, PointModel, Trace};

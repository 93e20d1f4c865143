//! Reverse-mode gradients through neuron dynamics.

mod bptt;
mod checkpoint;
mod gradcheck;
mod step;
mod surrogate;

pub use bptt::{
    backward_through_time, forward_checkpointed, ForwardPass, Gradients, LossSeeds, TapeStats,
};
pub use checkpoint::{make_plan, CheckpointPlan};
pub use gradcheck::{
    grad_check_hh, potential_loss, relative_error, GradCheckEntry, GradCheckReport,
    DEFAULT_FD_STEP, FD_ABS_FLOOR,
};
pub use step::{hh_step_backward, AdjointState, Differentiable};
pub use surrogate::{surrogate_grad, SurrogateKind, SurrogateSpec};

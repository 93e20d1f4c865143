//! Training stack for fitting spiking pipelines to recorded traces.

mod adam;
mod dense;
pub mod io;
mod metrics;
mod psp;
mod segment;
mod task;

pub use adam::{cosine_lr, AdamConfig, AdamState};
pub use dense::DenseLayer;
pub use metrics::{cross_entropy_loss, mse_loss, smape};
pub use psp::{psp_filter, psp_filter_grouped, PSPKernel};
pub use segment::{segment_traces, split_train_test, Sample, SegmentationScheme};
pub use task::{
    evaluate, fit, teacher_student_task, train_until, EpochRecord, History, StudentModel,
    TeacherStudentConfig, TeacherStudentTask, TrainConfig, TrainerState,
};

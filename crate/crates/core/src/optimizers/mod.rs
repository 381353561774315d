//! SARAH, its step-size rules, and baseline methods.

mod baselines;
mod sarah;
mod step_size;
mod trace;

pub use baselines::{
    adagrad_run, adagrad_step, gd_run, gd_run_observed, sgd_run, AdaGradBatch, AdaGradConfig,
    GdConfig, SgdConfig, SgdSchedule,
};
pub use sarah::{
    sarah_run, sarah_run_observed, sarah_with, EndGradient, SarahCall, SarahConfig, SnapshotRule,
};
pub use step_size::{
    bb_eta, bb_eta_raw, modified_bb_eta, BbStep, Interval, ModifiedBbKind, StepChoice, StepRule,
    StepSizeController,
};
pub use trace::{RunResult, StopReason, Trace, TraceRecord};

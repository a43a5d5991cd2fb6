//! Pipeline-Stage-Task model and the campaign drivers built on it.
//!
//! Tasks within a stage may run concurrently; stages of a pipeline run
//! strictly in sequence. One pipeline of four stages forms one adaptive
//! iteration.

mod campaign;
mod payload;
mod pipeline;
mod scaling;
mod task;

pub use campaign::{
    campaign_loop, gain, gain_ratio, initial_state, queue_waves, run_baseline, CampaignMode, CampaignOutcome,
    CampaignReport, FoldEvent, FrameRecord, GainError, IterationSummary, LatentRecord, LineageEntry, LossRecord,
    TaskOrigin, TerminationCause,
};
pub use payload::{CampaignContext, CorpusRow, StageInput, StageRunner, TaskOutput};
pub use pipeline::{
    advance, build_md_pipeline, build_pipeline, IterationPlan, Pipeline, Stage, StageCompletion, STAGE_AGGREGATE,
    STAGE_INFERENCE, STAGE_MD, STAGE_TRAIN,
};
pub use scaling::{run_scaling, ScalingRow};
pub use task::{ResourceShape, TaskDescriptor, TaskKind, TaskPayload, TaskState};

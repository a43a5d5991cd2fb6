use serde::{Deserialize, Serialize};

use crate::dynamics::SegmentPlan;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MdSegment,
    Aggregate,
    MlTrain,
    Inference,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::MdSegment => "md_segment",
            TaskKind::Aggregate => "aggregate",
            TaskKind::MlTrain => "ml_train",
            TaskKind::Inference => "inference",
        }
    }

    pub fn requires_gpu(self) -> bool {
        matches!(self, TaskKind::MdSegment | TaskKind::MlTrain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Scheduled,
    Running,
    Done,
    Failed,
    Killed,
}

impl TaskState {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskState::Pending => "pending",
            TaskState::Scheduled => "scheduled",
            TaskState::Running => "running",
            TaskState::Done => "done",
            TaskState::Failed => "failed",
            TaskState::Killed => "killed",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::Done | TaskState::Failed | TaskState::Killed)
    }

    /// `Pending -> Scheduled -> Running -> {Done, Failed, Killed}`.
    pub fn can_transition_to(self, next: TaskState) -> bool {
        use TaskState::*;
        matches!(
            (self, next),
            (Pending, Scheduled) | (Scheduled, Running) | (Running, Done) | (Running, Failed) | (Running, Killed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceShape {
    pub cores: usize,
    pub gpus: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskPayload {
    MdSegment(SegmentPlan),
    Aggregate { iteration: usize },
    MlTrain { iteration: usize, latent_dim: usize },
    Inference { iteration: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDescriptor {
    pub id: u64,
    pub kind: TaskKind,
    pub shape: ResourceShape,
    pub payload: TaskPayload,
    state: TaskState,
}

impl TaskDescriptor {
    pub fn new(id: u64, kind: TaskKind, shape: ResourceShape, payload: TaskPayload) -> Result<Self> {
        if shape.cores == 0 {
            return Err(Error::invalid(format!("task {id} needs at least one core")));
        }
        if kind.requires_gpu() && shape.gpus == 0 {
            return Err(Error::invalid(format!("{} task {id} needs at least one GPU", kind.as_str())));
        }
        Ok(TaskDescriptor {
            id,
            kind,
            shape,
            payload,
            state: TaskState::Pending,
        })
    }

    pub fn state(&self) -> TaskState {
        self.state
    }

    pub fn transition(&mut self, next: TaskState) -> Result<()> {
        if !self.state.can_transition_to(next) {
            return Err(Error::invalid(format!(
                "task {}: illegal transition {} -> {}",
                self.id,
                self.state.as_str(),
                next.as_str()
            )));
        }
        self.state = next;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task() -> TaskDescriptor {
        TaskDescriptor::new(
            1,
            TaskKind::Aggregate,
            ResourceShape { cores: 1, gpus: 0 },
            TaskPayload::Aggregate { iteration: 0 },
        )
        .unwrap()
    }

    #[test]
    fn legal_path() {
        let mut t = task();
        for s in [TaskState::Scheduled, TaskState::Running, TaskState::Done] {
            t.transition(s).unwrap();
        }
        assert!(t.state().is_terminal());
    }

    #[test]
    fn illegal_transitions_rejected() {
        let mut t = task();
        assert!(t.transition(TaskState::Running).is_err());
        assert!(t.transition(TaskState::Done).is_err());
        t.transition(TaskState::Scheduled).unwrap();
        t.transition(TaskState::Running).unwrap();
        t.transition(TaskState::Killed).unwrap();
        assert!(t.transition(TaskState::Running).is_err());
    }

    #[test]
    fn gpu_kinds_need_gpus() {
        assert!(TaskDescriptor::new(
            1,
            TaskKind::MlTrain,
            ResourceShape { cores: 1, gpus: 0 },
            TaskPayload::MlTrain { iteration: 0, latent_dim: 3 },
        )
        .is_err());
    }
}

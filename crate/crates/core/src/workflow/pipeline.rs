use crate::config::ConfigDocument;
use crate::dynamics::SegmentPlan;
use crate::error::{Error, Result};
use crate::runtime::{PayloadRunner, Runtime, StageRun};
use crate::workflow::task::{ResourceShape, TaskDescriptor, TaskKind, TaskPayload};

pub const STAGE_MD: usize = 0;
pub const STAGE_AGGREGATE: usize = 1;
pub const STAGE_TRAIN: usize = 2;
pub const STAGE_INFERENCE: usize = 3;

#[derive(Debug, Clone)]
pub struct Stage {
    pub index: usize,
    pub tasks: Vec<TaskDescriptor>,
}

impl Stage {
    /// Complete once every task is terminal. An empty stage is complete.
    pub fn is_complete(&self) -> bool {
        self.tasks.iter().all(|t| t.state().is_terminal())
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub iteration: usize,
    pub stages: Vec<Stage>,
}

impl Pipeline {
    /// Earliest stage that still has non-terminal tasks.
    pub fn next_stage(&self) -> Option<usize> {
        self.stages.iter().position(|s| !s.is_complete())
    }

    pub fn is_complete(&self) -> bool {
        self.next_stage().is_none()
    }

    pub fn stage(&self, index: usize) -> &Stage {
        &self.stages[index]
    }
}

/// Stage-1 seeds for one iteration plus the next free task id.
#[derive(Debug, Clone)]
pub struct IterationPlan {
    pub iteration: usize,
    pub segments: Vec<SegmentPlan>,
    pub next_task_id: u64,
}

fn md_task(plan: SegmentPlan, cores: usize) -> Result<TaskDescriptor> {
    TaskDescriptor::new(
        plan.task_id,
        TaskKind::MdSegment,
        ResourceShape { cores, gpus: 1 },
        TaskPayload::MdSegment(plan),
    )
}

/// Four stages: MD segments, one aggregation task, one training task per
/// latent dimension and one inference task. Task ids for stages 2 to 4 are
/// taken from `plan.next_task_id` onward; returns the pipeline and the next
/// unused id.
pub fn build_pipeline(cfg: &ConfigDocument, plan: &IterationPlan) -> Result<(Pipeline, u64)> {
    if plan.segments.is_empty() {
        return Err(Error::CampaignAborted(format!(
            "iteration {}: no outlier seeds and no surviving tasks",
            plan.iteration
        )));
    }
    let w = &cfg.workflow;
    let it = plan.iteration;
    let mut id = plan.next_task_id;
    let mut next = || {
        id += 1;
        id - 1
    };
    let md = plan
        .segments
        .iter()
        .cloned()
        .map(|p| md_task(p, w.md_cores))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = vec![TaskDescriptor::new(
        next(),
        TaskKind::Aggregate,
        ResourceShape { cores: w.ml_cores, gpus: 0 },
        TaskPayload::Aggregate { iteration: it },
    )?];
    let train = (cfg.learning.min_latent_dim..=cfg.learning.max_latent_dim)
        .map(|d| {
            TaskDescriptor::new(
                next(),
                TaskKind::MlTrain,
                ResourceShape { cores: w.ml_cores, gpus: 1 },
                TaskPayload::MlTrain { iteration: it, latent_dim: d },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let inference = vec![TaskDescriptor::new(
        next(),
        TaskKind::Inference,
        ResourceShape { cores: w.ml_cores, gpus: 1 },
        TaskPayload::Inference { iteration: it },
    )?];
    let stages = [md, aggregate, train, inference]
        .into_iter()
        .enumerate()
        .map(|(index, tasks)| Stage { index, tasks })
        .collect();
    Ok((Pipeline { iteration: it, stages }, id))
}

/// Single MD stage, used by the non-adaptive control and the scaling
/// harness.
pub fn build_md_pipeline(cfg: &ConfigDocument, plan: &IterationPlan) -> Result<Pipeline> {
    if plan.segments.is_empty() {
        return Err(Error::CampaignAborted(format!("iteration {}: empty MD stage", plan.iteration)));
    }
    let tasks = plan
        .segments
        .iter()
        .cloned()
        .map(|p| md_task(p, cfg.workflow.md_cores))
        .collect::<Result<Vec<_>>>()?;
    Ok(Pipeline {
        iteration: plan.iteration,
        stages: vec![Stage { index: STAGE_MD, tasks }],
    })
}

#[derive(Debug)]
pub struct StageCompletion<O> {
    pub iteration: usize,
    pub stage: usize,
    pub run: StageRun<O>,
}

/// Submits the earliest incomplete stage and blocks until all its tasks are
/// terminal. Later stages stay Pending throughout.
pub fn advance<R: PayloadRunner>(
    pipeline: &mut Pipeline,
    runtime: &mut Runtime,
    runner: &R,
) -> Result<StageCompletion<R::Output>> {
    let k = pipeline
        .next_stage()
        .ok_or_else(|| Error::invalid("pipeline already complete"))?;
    let iteration = pipeline.iteration;
    let stage = &mut pipeline.stages[k];
    let run = runtime.execute_stage(iteration, k, &mut stage.tasks, runner)?;
    Ok(StageCompletion { iteration, stage: k, run })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Conformation;
    use crate::runtime::{acquire_pool, PayloadReport, PoolSpec};
    use crate::workflow::TaskState;

    fn plan(n: usize) -> IterationPlan {
        IterationPlan {
            iteration: 0,
            segments: (0..n as u64)
                .map(|task_id| SegmentPlan {
                    task_id,
                    parent_outlier: None,
                    steps: 10,
                    stride: 5,
                    initial: Conformation::point(0.0, 0.0),
                })
                .collect(),
            next_task_id: n as u64,
        }
    }

    #[test]
    fn four_stage_shape() {
        let cfg = ConfigDocument::default();
        let (p, next) = build_pipeline(&cfg, &plan(120)).unwrap();
        let sizes: Vec<usize> = p.stages.iter().map(|s| s.tasks.len()).collect();
        assert_eq!(sizes, vec![120, 1, 10, 1]);
        assert_eq!(next, 132);
        let dims: Vec<_> = p.stages[STAGE_TRAIN]
            .tasks
            .iter()
            .map(|t| match t.payload {
                TaskPayload::MlTrain { latent_dim, .. } => latent_dim,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(dims, (3..=12).collect::<Vec<_>>());
    }

    #[test]
    fn seven_outliers_three_survivors() {
        let (p, _) = build_pipeline(&ConfigDocument::default(), &plan(10)).unwrap();
        assert_eq!(p.stages[STAGE_MD].tasks.len(), 10);
        assert_eq!(p.stages[STAGE_TRAIN].tasks.len(), 10);
    }

    #[test]
    fn empty_stage_one_aborts() {
        let err = build_pipeline(&ConfigDocument::default(), &plan(0)).unwrap_err();
        assert!(matches!(err, Error::CampaignAborted(_)));
    }

    struct Nop;
    struct Unit;
    impl PayloadReport for Unit {}
    impl PayloadRunner for Nop {
        type Output = Unit;
        fn run(&self, _: &TaskDescriptor) -> Result<Unit> {
            Ok(Unit)
        }
    }

    #[test]
    fn stages_advance_in_order() {
        let cfg = ConfigDocument::default();
        let (mut p, _) = build_pipeline(&cfg, &plan(3)).unwrap();
        let mut rt = Runtime::new(acquire_pool(PoolSpec::default()).unwrap(), Default::default());
        for k in 0..4 {
            assert_eq!(p.next_stage(), Some(k));
            let c = advance(&mut p, &mut rt, &Nop).unwrap();
            assert_eq!(c.stage, k);
            assert!(p.stages[k].is_complete());
            for later in &p.stages[k + 1..] {
                assert!(later.tasks.iter().all(|t| t.state() == TaskState::Pending));
            }
        }
        assert!(p.is_complete());
        assert!(advance(&mut p, &mut rt, &Nop).is_err());
    }
}

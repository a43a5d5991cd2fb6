use serde::Serialize;

use crate::config::ConfigDocument;
use crate::dynamics::{run_segment, SegmentPlan};
use crate::error::{Error, Result};
use crate::runtime::{acquire_pool, PoolSpec, Runtime};
use crate::workflow::campaign::initial_state;
use crate::workflow::payload::{CampaignContext, StageInput, StageRunner};
use crate::workflow::pipeline::{advance, build_md_pipeline, IterationPlan};

/// One weak-scaling measurement. Times are seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub tasks: usize,
    pub nodes: usize,
    pub gpus: usize,
    pub ttx: f64,
    pub eoh: f64,
    pub bookkeeping: f64,
    pub frames: u64,
    pub bytes: u64,
}

/// Largest divisor of `n` not above `cap`.
fn node_width(n: usize, cap: usize) -> usize {
    (1..=cap.min(n)).rev().find(|w| n % w == 0).unwrap_or(1)
}

/// Stage-1-only workloads with as many GPUs as tasks and fixed work per
/// task.
pub fn run_scaling(cfg: &ConfigDocument, counts: &[usize]) -> Result<Vec<ScalingRow>> {
    let mut cfg = cfg.clone();
    cfg.output.directory = None;
    let ctx = CampaignContext::new(&cfg)?;
    let s = &cfg.scaling;
    if let Some(&bad) = counts.iter().find(|&&c| c == 0 || c > s.max_gpus) {
        return Err(Error::Config(format!(
            "scaling count {bad} outside 1..={} (scaling.max_gpus)",
            s.max_gpus
        )));
    }
    // one untimed segment first: the first few hundred ms of compute on a
    // cold core run measurably slower and would inflate the first row
    let warm = SegmentPlan {
        task_id: 0,
        parent_outlier: None,
        steps: s.steps_per_task,
        stride: s.stride,
        initial: initial_state(&cfg, &ctx.spec, 0),
    };
    run_segment(&ctx.spec, &ctx.langevin, &warm)?;

    let mut rows = Vec::with_capacity(counts.len());
    for &n in counts {
        let width = node_width(n, cfg.pool.gpus_per_node);
        let spec = PoolSpec {
            nodes: n / width,
            cores_per_node: cfg.pool.cores_per_node,
            gpus_per_node: width,
        };
        let mut rt = Runtime::new(acquire_pool(spec)?, cfg.workflow.clock);
        let plan = IterationPlan {
            iteration: 0,
            segments: (0..n as u64)
                .map(|id| SegmentPlan {
                    task_id: id,
                    parent_outlier: None,
                    steps: s.steps_per_task,
                    stride: s.stride,
                    initial: initial_state(&cfg, &ctx.spec, id),
                })
                .collect(),
            next_task_id: n as u64,
        };
        let mut pipeline = build_md_pipeline(&cfg, &plan)?;
        let runner = StageRunner {
            ctx: &ctx,
            input: StageInput::Md,
        };
        let m = advance(&mut pipeline, &mut rt, &runner)?.run.metrics;
        rows.push(ScalingRow {
            tasks: n,
            nodes: spec.nodes,
            gpus: spec.nodes * spec.gpus_per_node,
            ttx: m.ttx,
            eoh: m.eoh,
            bookkeeping: m.bookkeeping,
            frames: m.frames,
            bytes: m.bytes,
        });
    }
    Ok(rows)
}

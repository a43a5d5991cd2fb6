//! Adaptive campaign driver and its non-adaptive control.

use std::collections::{BTreeMap, BTreeSet};

use log::info;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::adaptivity::{
    cull_decision, rebalance, select_outliers, GpuSplit, OutlierList, QueueWaits, RebalanceDecision, TaskRecentFrames,
};
use crate::config::{ConfigDocument, SeedPriority};
use crate::dynamics::{perturb, stretched_chain, Conformation, FrameRef, PotentialSpec, SegmentPlan};
use crate::error::{Error, Result};
use crate::latent::{split_holdout, LatentModel};
use crate::rng::{stream, Purpose};
use crate::runtime::{acquire_pool, MetricsRecord, Placement, Runtime, StageRun, TaskEvent};
use crate::workflow::payload::{CampaignContext, CorpusRow, SegmentResult, StageInput, StageRunner, TaskOutput};
use crate::workflow::pipeline::{advance, build_md_pipeline, build_pipeline, IterationPlan, Pipeline};
use crate::workflow::task::TaskState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignMode {
    Adaptive,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    Folded,
    BudgetExhausted,
    MaxIterations,
    /// An iteration-fatal failure; the report is partial.
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOrigin {
    Initial,
    Outlier,
    Survivor,
    Restart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageEntry {
    pub task: u64,
    pub iteration: usize,
    pub origin: TaskOrigin,
    /// Task the starting conformation came from.
    pub parent_task: Option<u64>,
    pub parent_outlier: Option<FrameRef>,
    pub state: TaskState,
    pub steps: u64,
    pub culled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldEvent {
    pub iteration: usize,
    pub frame: FrameRef,
    pub rmsd: Option<f64>,
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub md_tasks: usize,
    pub failed_md_tasks: usize,
    pub outlier_seeded: usize,
    pub survivors: usize,
    pub frames: u64,
    pub aggregate_steps: u64,
    pub min_rmsd: Option<f64>,
    pub max_q: Option<f64>,
    pub split: GpuSplit,
    pub corpus_frames: Option<usize>,
    pub train_samples: Option<usize>,
    pub heldout_samples: Option<usize>,
    /// Held-out reconstruction loss by latent dimension; failed fits absent.
    pub heldout_loss: BTreeMap<usize, f64>,
    pub best_latent_dim: Option<usize>,
    pub eps: Option<f64>,
    pub clusters: Option<usize>,
    pub noise_points: Option<usize>,
    pub outliers: Option<usize>,
    pub culled: Vec<u64>,
    pub rebalance: Option<RebalanceDecision>,
}

/// Deterministic campaign result. Timings live in [`CampaignOutcome`] only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub mode: CampaignMode,
    pub seed: u64,
    pub termination: TerminationCause,
    pub diagnostic: Option<String>,
    pub iterations: usize,
    /// Total sampling consumed by all MD tasks.
    pub aggregate_steps: u64,
    /// Sampling consumed when the first folded frame appeared, with every
    /// task of the folding stage advanced in lockstep up to that step.
    pub steps_to_first_fold: Option<u64>,
    pub first_fold: Option<FoldEvent>,
    pub summaries: Vec<IterationSummary>,
    pub lineage: Vec<LineageEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRecord {
    pub iteration: usize,
    pub task: u64,
    pub step: u64,
    pub rmsd: Option<f64>,
    pub q: Option<f64>,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentRecord {
    pub iteration: usize,
    pub frame: FrameRef,
    pub z: Vec<f64>,
    pub rmsd: Option<f64>,
    pub q: Option<f64>,
    pub label: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub latent_dim: usize,
    pub train_loss: f64,
    pub heldout_loss: f64,
    pub train_samples: usize,
    pub corpus_frames: usize,
}

/// Everything a campaign produced: the deterministic report plus timing
/// and plot data.
#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub report: CampaignReport,
    pub metrics: Vec<MetricsRecord>,
    pub trace: Vec<Placement>,
    pub events: Vec<TaskEvent>,
    pub frames: Vec<FrameRecord>,
    pub latent: Vec<LatentRecord>,
    pub losses: Vec<LossRecord>,
    pub outliers: Vec<(usize, OutlierList)>,
}

/// Unfolded starting state for a fresh task.
pub fn initial_state(cfg: &ConfigDocument, spec: &PotentialSpec, task_id: u64) -> Conformation {
    let d = &cfg.dynamics;
    let mut rng = stream(cfg.workflow.seed, task_id, Purpose::InitialState);
    match spec {
        PotentialSpec::GoChain3D(_) => {
            perturb(&stretched_chain(spec.bead_count(), d.initial_spacing), d.initial_perturbation, 3, &mut rng)
        }
        PotentialSpec::DoubleWell2D(_) => perturb(&Conformation::point(-1.0, 0.0), d.initial_perturbation, 2, &mut rng),
    }
}

/// Mean scheduling wave of a queue of `n` single-GPU tasks on `slots` GPUs.
pub fn queue_waves(n: usize, slots: usize) -> f64 {
    if n == 0 || slots == 0 {
        return 0.0;
    }
    (0..n).map(|k| (k / slots) as f64).sum::<f64>() / n as f64
}

struct FoldHit {
    step: u64,
    task: u64,
    frame: usize,
}

/// Lockstep fold accounting over one MD stage.
fn first_fold(segments: &BTreeMap<u64, SegmentResult>) -> Option<(FoldHit, u64)> {
    let hit = segments
        .values()
        .filter_map(|s| {
            s.folded_at.map(|i| FoldHit {
                step: s.traj.frames[i].step,
                task: s.traj.task_id,
                frame: i,
            })
        })
        .min_by_key(|h| (h.step, h.task))?;
    let consumed = segments.values().map(|s| s.traj.aggregate_steps.min(hit.step)).sum();
    Some((hit, consumed))
}

struct Driver<'a> {
    ctx: &'a CampaignContext,
    rt: Runtime,
    report: CampaignReport,
    frames: Vec<FrameRecord>,
    latent: Vec<LatentRecord>,
    losses: Vec<LossRecord>,
    outliers: Vec<(usize, OutlierList)>,
    metrics: Vec<MetricsRecord>,
    lineage: BTreeMap<u64, LineageEntry>,
}

impl<'a> Driver<'a> {
    fn new(ctx: &'a CampaignContext, mode: CampaignMode) -> Result<Self> {
        let rt = Runtime::new(acquire_pool(ctx.cfg.pool)?, ctx.cfg.workflow.clock);
        Ok(Driver {
            ctx,
            rt,
            report: CampaignReport {
                mode,
                seed: ctx.cfg.workflow.seed,
                termination: TerminationCause::MaxIterations,
                diagnostic: None,
                iterations: 0,
                aggregate_steps: 0,
                steps_to_first_fold: None,
                first_fold: None,
                summaries: Vec::new(),
                lineage: Vec::new(),
            },
            frames: Vec::new(),
            latent: Vec::new(),
            losses: Vec::new(),
            outliers: Vec::new(),
            metrics: Vec::new(),
            lineage: BTreeMap::new(),
        })
    }

    fn finish(mut self) -> CampaignOutcome {
        self.report.lineage = self.lineage.into_values().collect();
        CampaignOutcome {
            report: self.report,
            metrics: self.metrics,
            trace: self.rt.trace().to_vec(),
            events: self.rt.events().to_vec(),
            frames: self.frames,
            latent: self.latent,
            losses: self.losses,
            outliers: self.outliers,
        }
    }

    fn abort(&mut self, e: Error) {
        self.report.termination = TerminationCause::Aborted;
        self.report.diagnostic = Some(e.to_string());
    }

    fn fresh_plan(&self, iteration: usize, first_id: u64, n: usize, steps: u64) -> IterationPlan {
        let d = &self.ctx.cfg.dynamics;
        let segments = (0..n as u64)
            .map(|k| SegmentPlan {
                task_id: first_id + k,
                parent_outlier: None,
                steps,
                stride: d.stride,
                initial: initial_state(&self.ctx.cfg, &self.ctx.spec, first_id + k),
            })
            .collect::<Vec<_>>();
        IterationPlan {
            iteration,
            segments,
            next_task_id: first_id + n as u64,
        }
    }

    fn note_lineage(&mut self, plan: &IterationPlan, origins: &BTreeMap<u64, (TaskOrigin, Option<u64>)>) {
        for s in &plan.segments {
            let (origin, parent_task) = origins.get(&s.task_id).copied().unwrap_or((TaskOrigin::Initial, None));
            self.lineage.insert(
                s.task_id,
                LineageEntry {
                    task: s.task_id,
                    iteration: plan.iteration,
                    origin,
                    parent_task,
                    parent_outlier: s.parent_outlier,
                    state: TaskState::Pending,
                    steps: 0,
                    culled: false,
                },
            );
        }
    }

    /// Runs Stage 1, records frames and lineage, and checks for a fold.
    /// Returns the segment results keyed by task id.
    fn md_stage(
        &mut self,
        pipeline: &mut Pipeline,
        summary: &mut IterationSummary,
    ) -> Result<(BTreeMap<u64, SegmentResult>, bool)> {
        let runner = StageRunner {
            ctx: self.ctx,
            input: StageInput::Md,
        };
        let done = advance(pipeline, &mut self.rt, &runner)?;
        self.metrics.push(done.run.metrics.clone());
        let mut segments = BTreeMap::new();
        for (id, o) in done.run.outcomes {
            let l = self.lineage.get_mut(&id).expect("lineage recorded at submission");
            l.state = o.state;
            match o.output {
                Some(TaskOutput::Segment(s)) => {
                    l.steps = s.traj.aggregate_steps;
                    segments.insert(id, s);
                }
                _ => summary.failed_md_tasks += 1,
            }
        }
        summary.failed_md_tasks += segments.values().filter(|s| s.traj.failed()).count();
        for s in segments.values() {
            for (f, c) in s.traj.frames.iter().zip(&s.coords) {
                self.frames.push(FrameRecord {
                    iteration: pipeline.iteration,
                    task: s.traj.task_id,
                    step: f.step,
                    rmsd: c.map(|c| c.rmsd),
                    q: c.map(|c| c.q),
                    x: f.conformation.positions()[0][0],
                });
                if let Some(c) = c {
                    summary.min_rmsd = Some(summary.min_rmsd.map_or(c.rmsd, |m: f64| m.min(c.rmsd)));
                    summary.max_q = Some(summary.max_q.map_or(c.q, |m: f64| m.max(c.q)));
                }
            }
        }
        let stage_steps: u64 = segments.values().map(|s| s.traj.aggregate_steps).sum();
        summary.frames = segments.values().map(|s| s.traj.frames.len() as u64 - 1).sum();
        let before = self.report.aggregate_steps;
        self.report.aggregate_steps += stage_steps;
        summary.aggregate_steps = self.report.aggregate_steps;
        let folded = match first_fold(&segments) {
            Some((hit, consumed)) => {
                let c = segments[&hit.task].coords[hit.frame];
                self.report.steps_to_first_fold = Some(before + consumed);
                self.report.first_fold = Some(FoldEvent {
                    iteration: pipeline.iteration,
                    frame: FrameRef {
                        task: hit.task,
                        step: hit.step,
                    },
                    rmsd: c.map(|c| c.rmsd),
                    q: c.map(|c| c.q),
                });
                self.report.termination = TerminationCause::Folded;
                true
            }
            None => false,
        };
        Ok((segments, folded))
    }

    fn new_summary(&self, iteration: usize, plan: &IterationPlan, origins: &BTreeMap<u64, (TaskOrigin, Option<u64>)>) -> IterationSummary {
        let count = |o: TaskOrigin| origins.values().filter(|(x, _)| *x == o).count();
        IterationSummary {
            iteration,
            md_tasks: plan.segments.len(),
            failed_md_tasks: 0,
            outlier_seeded: count(TaskOrigin::Outlier),
            survivors: count(TaskOrigin::Survivor),
            frames: 0,
            aggregate_steps: 0,
            min_rmsd: None,
            max_q: None,
            split: self.rt.pool().split().unwrap_or(GpuSplit {
                md: self.ctx.cfg.pool.total_gpus(),
                ml: 0,
            }),
            corpus_frames: None,
            train_samples: None,
            heldout_samples: None,
            heldout_loss: BTreeMap::new(),
            best_latent_dim: None,
            eps: None,
            clusters: None,
            noise_points: None,
            outliers: None,
            culled: Vec::new(),
            rebalance: None,
        }
    }

    fn budget_exhausted(&self) -> bool {
        self.report.aggregate_steps >= self.ctx.cfg.workflow.aggregate_step_budget
    }
}

fn take_outputs(run: StageRun<TaskOutput>) -> BTreeMap<u64, (TaskState, Option<TaskOutput>, Option<String>)> {
    run.outcomes
        .into_iter()
        .map(|(id, o)| (id, (o.state, o.output, o.diagnostic)))
        .collect()
}

/// Random subset of `0..n` of size `k` (all of them when `k >= n`), sorted.
fn subsample(n: usize, k: usize, seed: u64, id: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = stream(seed, id, Purpose::Sampling);
    let mut v = sample(&mut rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// The adaptive loop: simulate, aggregate, train one model per latent
/// dimension, embed and cluster, then reseed from outliers, cull stuck
/// tasks and rebalance GPUs. Repeats until a fold, budget exhaustion or the
/// iteration limit.
pub fn campaign_loop(cfg: &ConfigDocument) -> Result<CampaignOutcome> {
    let ctx = CampaignContext::new(cfg)?;
    let mut drv = Driver::new(&ctx, CampaignMode::Adaptive)?;
    let total_gpus = cfg.pool.total_gpus();
    let policy = cfg.adaptivity.rebalance;
    let mut split = policy.initial_split(total_gpus);
    drv.rt.pool_mut().apply_split(split)?;

    let mut plan = drv.fresh_plan(0, 0, cfg.workflow.initial_md_tasks, cfg.dynamics.segment_steps);
    let mut origins: BTreeMap<u64, (TaskOrigin, Option<u64>)> = BTreeMap::new();
    let mut corpus: Vec<CorpusRow> = Vec::new();
    let mut corpus_index: BTreeMap<FrameRef, usize> = BTreeMap::new();
    let mut loss_history: Vec<f64> = Vec::new();

    for iteration in 0..cfg.workflow.max_iterations {
        if drv.budget_exhausted() {
            drv.report.termination = TerminationCause::BudgetExhausted;
            return Ok(drv.finish());
        }
        plan.iteration = iteration;
        info!("iteration {iteration}: {} MD tasks", plan.segments.len());
        drv.note_lineage(&plan, &origins);
        let mut summary = drv.new_summary(iteration, &plan, &origins);
        let result = adaptive_iteration(
            &mut drv,
            &plan,
            &mut summary,
            &mut corpus,
            &mut corpus_index,
            &mut loss_history,
            &mut split,
        );
        drv.report.iterations = iteration + 1;
        match result {
            Ok(IterationEnd::Folded) => {
                drv.report.summaries.push(summary);
                return Ok(drv.finish());
            }
            Ok(IterationEnd::Next(next_plan, next_origins)) => {
                drv.report.summaries.push(summary);
                plan = next_plan;
                origins = next_origins;
            }
            Err(e) => {
                drv.report.summaries.push(summary);
                drv.abort(e);
                return Ok(drv.finish());
            }
        }
    }
    drv.report.termination = if drv.budget_exhausted() {
        TerminationCause::BudgetExhausted
    } else {
        TerminationCause::MaxIterations
    };
    Ok(drv.finish())
}

enum IterationEnd {
    Folded,
    Next(IterationPlan, BTreeMap<u64, (TaskOrigin, Option<u64>)>),
}

#[allow(clippy::too_many_arguments)]
fn adaptive_iteration(
    drv: &mut Driver<'_>,
    plan: &IterationPlan,
    summary: &mut IterationSummary,
    corpus: &mut Vec<CorpusRow>,
    corpus_index: &mut BTreeMap<FrameRef, usize>,
    loss_history: &mut Vec<f64>,
    split: &mut GpuSplit,
) -> Result<IterationEnd> {
    let ctx = drv.ctx;
    let cfg = &ctx.cfg;
    let iteration = plan.iteration;
    let seed = cfg.workflow.seed;
    let (mut pipeline, next_id) = build_pipeline(cfg, plan)?;

    // Stage 1
    let (segments, folded) = drv.md_stage(&mut pipeline, summary)?;
    if folded {
        return Ok(IterationEnd::Folded);
    }

    // Stage 2
    let runner = StageRunner {
        ctx,
        input: StageInput::Aggregate {
            iteration,
            segments: &segments,
        },
    };
    let done = advance(&mut pipeline, &mut drv.rt, &runner)?;
    drv.metrics.push(done.run.metrics.clone());
    for (_, (state, out, diag)) in take_outputs(done.run) {
        match out {
            Some(TaskOutput::Aggregate(a)) if state == TaskState::Done => {
                for r in a.rows {
                    corpus_index.insert(r.frame, corpus.len());
                    corpus.push(r);
                }
            }
            _ => {
                return Err(Error::CampaignAborted(format!(
                    "aggregation failed: {}",
                    diag.unwrap_or_default()
                )))
            }
        }
    }
    summary.corpus_frames = Some(corpus.len());
    if corpus.len() < 10 {
        return Err(Error::CampaignAborted(format!("corpus has only {} frames", corpus.len())));
    }

    // Stage 3
    let l = &cfg.learning;
    let picked = subsample(corpus.len(), l.max_samples, seed, iteration as u64);
    let (train_idx, heldout_idx) =
        split_holdout(picked.len(), l.train.heldout_fraction, l.train.heldout_max, seed ^ iteration as u64);
    let train: Vec<Vec<f64>> = train_idx.iter().map(|&i| corpus[picked[i]].features.clone()).collect();
    let heldout: Vec<Vec<f64>> = heldout_idx.iter().map(|&i| corpus[picked[i]].features.clone()).collect();
    summary.train_samples = Some(train.len());
    summary.heldout_samples = Some(heldout.len());
    let runner = StageRunner {
        ctx,
        input: StageInput::Train {
            train: &train,
            heldout: &heldout,
        },
    };
    let done = advance(&mut pipeline, &mut drv.rt, &runner)?;
    drv.metrics.push(done.run.metrics.clone());
    let mut models: BTreeMap<usize, (LatentModel, f64)> = BTreeMap::new();
    for (_, (state, out, _)) in take_outputs(done.run) {
        if let (TaskState::Done, Some(TaskOutput::Train(t))) = (state, out) {
            summary.heldout_loss.insert(t.latent_dim, t.heldout_loss);
            drv.losses.push(LossRecord {
                iteration,
                latent_dim: t.latent_dim,
                train_loss: t.report.reconstruction,
                heldout_loss: t.heldout_loss,
                train_samples: train.len(),
                corpus_frames: corpus.len(),
            });
            models.insert(t.latent_dim, (t.model, t.heldout_loss));
        }
    }
    if models.is_empty() {
        return Err(Error::CampaignAborted("every training task failed".into()));
    }

    // Stage 4: the last `window` frames of every finished task are always
    // embedded; the rest of the budget is a uniform corpus sample.
    let cull = cfg.adaptivity.cull;
    let mut mandatory: BTreeSet<usize> = BTreeSet::new();
    let mut recent: Vec<(u64, Vec<usize>)> = Vec::new();
    for s in segments.values().filter(|s| !s.traj.failed()) {
        let n = s.traj.frames.len();
        let from = n.saturating_sub(cull.window.max(1)).max(1);
        let rows: Vec<usize> = (from..n).map(|i| corpus_index[&s.traj.frame_ref(i)]).collect();
        if !rows.is_empty() {
            mandatory.extend(rows.iter().copied());
            recent.push((s.traj.task_id, rows));
        }
    }
    let budget = cfg.adaptivity.max_inference_points.max(mandatory.len());
    let others: Vec<usize> = (0..corpus.len()).filter(|i| !mandatory.contains(i)).collect();
    let fill = subsample(others.len(), budget - mandatory.len(), seed, (1 << 32) + iteration as u64);
    let mut selected: Vec<usize> = mandatory.iter().copied().chain(fill.iter().map(|&k| others[k])).collect();
    selected.sort_unstable();
    let position: BTreeMap<usize, usize> = selected.iter().enumerate().map(|(p, &r)| (r, p)).collect();
    let points: Vec<Vec<f64>> = selected.iter().map(|&r| corpus[r].features.clone()).collect();
    let refs: Vec<FrameRef> = selected.iter().map(|&r| corpus[r].frame).collect();

    let runner = StageRunner {
        ctx,
        input: StageInput::Inference {
            models: &models,
            points: &points,
        },
    };
    let done = advance(&mut pipeline, &mut drv.rt, &runner)?;
    drv.metrics.push(done.run.metrics.clone());
    let inf = match take_outputs(done.run).into_values().next() {
        Some((TaskState::Done, Some(TaskOutput::Inference(r)), _)) => r,
        Some((_, _, diag)) => {
            return Err(Error::CampaignAborted(format!("inference failed: {}", diag.unwrap_or_default())))
        }
        None => return Err(Error::CampaignAborted("inference produced no result".into())),
    };
    summary.best_latent_dim = Some(inf.best_dim);
    summary.eps = Some(inf.eps);
    summary.clusters = Some(inf.labeling.cluster_count());
    summary.noise_points = Some(inf.labeling.noise_count());
    for (k, &r) in selected.iter().enumerate() {
        let row = &corpus[r];
        drv.latent.push(LatentRecord {
            iteration,
            frame: row.frame,
            z: inf.embedding[k].clone(),
            rmsd: row.coords.map(|c| c.rmsd),
            q: row.coords.map(|c| c.q),
            label: inf.labeling.labels[k].as_i64(),
        });
    }

    // Post-stage decisions.
    let outliers = select_outliers(&inf.labeling, &inf.embedding, &refs, cfg.adaptivity.caps)?;
    summary.outliers = Some(outliers.len());
    let running: Vec<TaskRecentFrames> = recent
        .iter()
        .map(|(task, rows)| TaskRecentFrames {
            task: *task,
            points: rows.iter().map(|r| position[r]).collect(),
        })
        .collect();
    let kill = cull_decision(&running, &inf.labeling, &outliers, &cull)?;
    for &t in &kill {
        if let Some(l) = drv.lineage.get_mut(&t) {
            l.culled = true;
        }
    }
    summary.culled = kill.iter().copied().collect();

    loss_history.push(inf.best_loss);
    let waits = QueueWaits {
        md: queue_waves(plan.segments.len(), split.md),
        ml: queue_waves(models.len(), split.ml),
    };
    let decision = rebalance(loss_history, *split, waits, &cfg.adaptivity.rebalance);
    summary.rebalance = Some(decision);
    *split = GpuSplit {
        md: decision.md_gpus,
        ml: decision.ml_gpus,
    };
    drv.rt.pool_mut().apply_split(*split)?;

    // Next Stage 1 from outlier seeds and survivors, capped in the
    // configured priority order.
    let d = &cfg.dynamics;
    let seeds: Vec<(Conformation, Option<FrameRef>, TaskOrigin, u64)> = outliers
        .entries
        .iter()
        .map(|o| {
            let row = &corpus[corpus_index[&o.frame]];
            (row.conformation.clone(), Some(o.frame), TaskOrigin::Outlier, o.frame.task)
        })
        .collect();
    let survivors: Vec<(Conformation, Option<FrameRef>, TaskOrigin, u64)> = segments
        .values()
        .filter(|s| !s.traj.failed() && !kill.contains(&s.traj.task_id))
        .map(|s| (s.traj.last().conformation.clone(), None, TaskOrigin::Survivor, s.traj.task_id))
        .collect();
    let ordered: Vec<_> = match cfg.workflow.seed_priority {
        SeedPriority::Outliers => seeds.into_iter().chain(survivors).collect(),
        SeedPriority::Survivors => survivors.into_iter().chain(seeds).collect(),
    };
    let mut id = next_id;
    let mut segs = Vec::new();
    let mut origins = BTreeMap::new();
    for (initial, parent_outlier, origin, parent) in ordered.into_iter().take(cfg.workflow.max_md_tasks) {
        segs.push(SegmentPlan {
            task_id: id,
            parent_outlier,
            steps: d.segment_steps,
            stride: d.stride,
            initial,
        });
        origins.insert(id, (origin, Some(parent)));
        id += 1;
    }
    drv.outliers.push((iteration, outliers));
    Ok(IterationEnd::Next(
        IterationPlan {
            iteration: iteration + 1,
            segments: segs,
            next_task_id: id,
        },
        origins,
    ))
}

/// Non-adaptive control: the same initial ensemble with a longer segment
/// cap, no learning, and fresh unfolded restarts whenever segments end.
pub fn run_baseline(cfg: &ConfigDocument) -> Result<CampaignOutcome> {
    let ctx = CampaignContext::new(cfg)?;
    let mut drv = Driver::new(&ctx, CampaignMode::Baseline)?;
    let n = cfg.workflow.initial_md_tasks;
    let mut next_id = 0u64;
    for round in 0..cfg.workflow.max_iterations {
        if drv.budget_exhausted() {
            drv.report.termination = TerminationCause::BudgetExhausted;
            return Ok(drv.finish());
        }
        let origin = if round == 0 { TaskOrigin::Initial } else { TaskOrigin::Restart };
        let plan = drv.fresh_plan(round, next_id, n, cfg.dynamics.baseline_segment_steps);
        next_id = plan.next_task_id;
        let origins = plan.segments.iter().map(|s| (s.task_id, (origin, None))).collect();
        drv.note_lineage(&plan, &origins);
        let mut summary = drv.new_summary(round, &plan, &origins);
        let mut pipeline = build_md_pipeline(cfg, &plan)?;
        let r = drv.md_stage(&mut pipeline, &mut summary);
        drv.report.iterations = round + 1;
        drv.report.summaries.push(summary);
        match r {
            Ok((_, true)) => return Ok(drv.finish()),
            Ok((_, false)) => {}
            Err(e) => {
                drv.abort(e);
                return Ok(drv.finish());
            }
        }
    }
    drv.report.termination = if drv.budget_exhausted() {
        TerminationCause::BudgetExhausted
    } else {
        TerminationCause::MaxIterations
    };
    Ok(drv.finish())
}

/// Ratio of baseline to adaptive sampling.
pub fn gain_ratio(baseline_steps: f64, adaptive_steps: f64) -> f64 {
    baseline_steps / adaptive_steps
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainError {
    /// A report did not end in a fold.
    Incomparable(String),
}

impl std::fmt::Display for GainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GainError::Incomparable(m) => write!(f, "incomparable: {m}"),
        }
    }
}

impl std::error::Error for GainError {}

/// Effective sampling gain: baseline steps to first fold over adaptive
/// steps to first fold. Both reports must have terminated Folded.
pub fn gain(adaptive: &CampaignReport, baseline: &CampaignReport) -> std::result::Result<f64, GainError> {
    let steps = |r: &CampaignReport, name: &str| match (r.termination, r.steps_to_first_fold) {
        (TerminationCause::Folded, Some(s)) if s > 0 => Ok(s as f64),
        (t, _) => Err(GainError::Incomparable(format!("{name} report terminated {t:?}"))),
    };
    Ok(gain_ratio(steps(baseline, "baseline")?, steps(adaptive, "adaptive")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_arithmetic() {
        assert!((gain_ratio(14.0, 6.0) - 2.33).abs() < 0.01);
    }

    #[test]
    fn queue_waves_counts_waiting_rounds() {
        assert_eq!(queue_waves(8, 8), 0.0);
        assert_eq!(queue_waves(10, 4), 0.8);
        assert_eq!(queue_waves(0, 4), 0.0);
    }

    fn double_well() -> ConfigDocument {
        ConfigDocument::from_json(
            r#"{
                "system": {"kind": "double_well"},
                "dynamics": {"segment_steps": 2000, "baseline_segment_steps": 2000, "stride": 100},
                "learning": {"train": {"epochs": 2}, "hidden": [8], "max_samples": 200},
                "adaptivity": {"max_inference_points": 300},
                "workflow": {"fold": {"kind": "basin", "x_above": 0.0}, "initial_md_tasks": 8, "max_md_tasks": 8,
                             "max_iterations": 100, "aggregate_step_budget": 1000000}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn zero_budget_terminates_immediately() {
        let mut cfg = double_well();
        cfg.workflow.aggregate_step_budget = 0;
        for out in [campaign_loop(&cfg).unwrap(), run_baseline(&cfg).unwrap()] {
            assert_eq!(out.report.termination, TerminationCause::BudgetExhausted);
            assert_eq!(out.report.iterations, 0);
            assert_eq!(out.report.aggregate_steps, 0);
        }
    }

    #[test]
    fn double_well_folds_and_is_deterministic() {
        let cfg = double_well();
        let a = campaign_loop(&cfg).unwrap();
        assert_eq!(a.report.termination, TerminationCause::Folded, "{:?}", a.report.diagnostic);
        assert!(a.report.aggregate_steps <= 1_000_000 + 8 * 2000);
        let b = campaign_loop(&cfg).unwrap();
        assert_eq!(a.report, b.report);
        let base = run_baseline(&cfg).unwrap();
        assert_eq!(base.report, run_baseline(&cfg).unwrap().report);
        // the baseline consumes every step of the tasks it launched
        let launched: u64 = base.report.lineage.iter().map(|l| l.steps).sum();
        assert_eq!(launched, base.report.aggregate_steps);
    }

    #[test]
    fn identical_reports_give_unit_gain() {
        let cfg = double_well();
        let a = campaign_loop(&cfg).unwrap().report;
        assert_eq!(gain(&a, &a), Ok(1.0));
        let mut unfolded = a.clone();
        unfolded.termination = TerminationCause::MaxIterations;
        assert!(matches!(gain(&unfolded, &a), Err(GainError::Incomparable(_))));
    }
}

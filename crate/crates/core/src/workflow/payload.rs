//! Task payloads of the four campaign stages.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use crate::adaptivity::{dbscan, median_kth_neighbor_distance, select_best_model, ClusterLabeling, DbscanParams, ModelScore};
use crate::config::ConfigDocument;
use crate::dynamics::{run_segment, write_jsonl, Conformation, FrameRef, LangevinParams, PotentialSpec, Trajectory};
use crate::error::{Error, Result};
use crate::features::{contact_matrix, vectorize, vectorize_nonadjacent, FoldCriterion, FoldingCoordinates, NativeReference};
use crate::latent::{fit, reconstruction_loss, LatentModel, LossReport};
use crate::runtime::{PayloadReport, PayloadRunner};
use crate::workflow::task::{TaskDescriptor, TaskPayload};

/// Immutable campaign-wide inputs shared by every payload.
pub struct CampaignContext {
    pub cfg: ConfigDocument,
    pub spec: PotentialSpec,
    pub reference: Option<NativeReference>,
    pub langevin: LangevinParams,
    pub fold: FoldCriterion,
    pub out_dir: Option<PathBuf>,
}

impl CampaignContext {
    pub fn new(cfg: &ConfigDocument) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.system.build()?;
        let reference = match spec.native() {
            Some(n) => Some(NativeReference::new(n.clone(), cfg.system.contact_cutoff())?),
            None => None,
        };
        Ok(CampaignContext {
            langevin: cfg.dynamics.langevin(cfg.workflow.seed),
            fold: cfg.workflow.fold,
            out_dir: cfg.output.directory.as_ref().map(PathBuf::from),
            cfg: cfg.clone(),
            spec,
            reference,
        })
    }

    pub fn coordinates(&self, c: &Conformation) -> Result<Option<FoldingCoordinates>> {
        self.reference.as_ref().map(|r| r.coordinates(c)).transpose()
    }

    /// Model input for one frame: the strict upper triangle of the contact
    /// map for chains, coordinates scaled into `[0, 1]` for the particle.
    pub fn featurize(&self, c: &Conformation) -> Result<Vec<f64>> {
        match self.spec {
            PotentialSpec::GoChain3D(_) => {
                let m = contact_matrix(c, self.cfg.system.contact_cutoff())?;
                Ok(if self.cfg.learning.include_adjacent {
                    vectorize(&m)
                } else {
                    vectorize_nonadjacent(&m)
                })
            }
            PotentialSpec::DoubleWell2D(_) => {
                let p = c.positions()[0];
                Ok(vec![((p[0] + 2.0) / 4.0).clamp(0.0, 1.0), ((p[1] + 2.0) / 4.0).clamp(0.0, 1.0)])
            }
        }
    }

    fn traj_dir(&self) -> Option<PathBuf> {
        if self.cfg.output.trajectories {
            self.out_dir.as_ref().map(|d| d.join("traj"))
        } else {
            None
        }
    }
}

/// One embedded corpus frame.
#[derive(Debug, Clone)]
pub struct CorpusRow {
    pub frame: FrameRef,
    pub iteration: usize,
    pub features: Vec<f64>,
    pub conformation: Conformation,
    pub coords: Option<FoldingCoordinates>,
}

#[derive(Debug)]
pub struct SegmentResult {
    pub traj: Trajectory,
    /// Parallel to `traj.frames`.
    pub coords: Vec<Option<FoldingCoordinates>>,
    /// Index of the first folded frame after the initial one.
    pub folded_at: Option<usize>,
    pub bytes: u64,
}

#[derive(Debug)]
pub struct AggregateResult {
    pub rows: Vec<CorpusRow>,
    pub bytes: u64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub latent_dim: usize,
    pub model: LatentModel,
    pub report: LossReport,
    pub heldout_loss: f64,
    pub bytes: u64,
}

#[derive(Debug)]
pub struct InferenceResult {
    pub best_dim: usize,
    pub best_loss: f64,
    pub eps: f64,
    pub embedding: Vec<Vec<f64>>,
    pub labeling: ClusterLabeling,
}

#[derive(Debug)]
pub enum TaskOutput {
    Segment(SegmentResult),
    Aggregate(AggregateResult),
    Train(TrainResult),
    Inference(InferenceResult),
}

impl PayloadReport for TaskOutput {
    fn frames(&self) -> u64 {
        match self {
            TaskOutput::Segment(s) => s.traj.frames.len() as u64 - 1,
            TaskOutput::Aggregate(a) => a.rows.len() as u64,
            _ => 0,
        }
    }

    fn bytes(&self) -> u64 {
        match self {
            TaskOutput::Segment(s) => s.bytes,
            TaskOutput::Aggregate(a) => a.bytes,
            TaskOutput::Train(t) => t.bytes,
            TaskOutput::Inference(_) => 0,
        }
    }

    fn failure(&self) -> Option<String> {
        match self {
            TaskOutput::Segment(s) => s.traj.failure.clone(),
            _ => None,
        }
    }
}

/// What the current stage reads from earlier stages.
pub enum StageInput<'a> {
    Md,
    Aggregate {
        iteration: usize,
        segments: &'a BTreeMap<u64, SegmentResult>,
    },
    Train {
        train: &'a [Vec<f64>],
        heldout: &'a [Vec<f64>],
    },
    Inference {
        models: &'a BTreeMap<usize, (LatentModel, f64)>,
        points: &'a [Vec<f64>],
    },
}

pub struct StageRunner<'a> {
    pub ctx: &'a CampaignContext,
    pub input: StageInput<'a>,
}

/// Writes into a file when one is given, otherwise only counts bytes.
fn persist(path: Option<PathBuf>, f: impl FnOnce(&mut dyn Write) -> Result<u64>) -> Result<u64> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent)?;
            }
            let mut w = BufWriter::new(File::create(&p)?);
            let n = f(&mut w)?;
            w.flush()?;
            Ok(n)
        }
        None => f(&mut std::io::sink()),
    }
}

#[derive(Serialize)]
struct FeatureLine<'a> {
    task: u64,
    step: u64,
    features: &'a [f64],
}

impl StageRunner<'_> {
    fn segment(&self, task: &TaskDescriptor) -> Result<SegmentResult> {
        let TaskPayload::MdSegment(plan) = &task.payload else {
            return Err(Error::invalid("segment payload expected"));
        };
        let ctx = self.ctx;
        let traj = run_segment(&ctx.spec, &ctx.langevin, plan)?;
        let coords = traj
            .frames
            .iter()
            .map(|f| ctx.coordinates(&f.conformation))
            .collect::<Result<Vec<_>>>()?;
        let folded_at = (1..traj.frames.len()).find(|&i| ctx.fold.is_folded(&traj.frames[i].conformation, coords[i]));
        let path = ctx.traj_dir().map(|d| d.join(format!("{}.jsonl", traj.task_id)));
        let bytes = persist(path, |w| write_jsonl(&traj, w))?;
        Ok(SegmentResult {
            traj,
            coords,
            folded_at,
            bytes,
        })
    }

    fn aggregate(&self, iteration: usize, segments: &BTreeMap<u64, SegmentResult>) -> Result<AggregateResult> {
        let mut rows = Vec::new();
        for s in segments.values() {
            for (i, f) in s.traj.frames.iter().enumerate().skip(1) {
                rows.push(CorpusRow {
                    frame: s.traj.frame_ref(i),
                    iteration,
                    features: self.ctx.featurize(&f.conformation)?,
                    conformation: f.conformation.clone(),
                    coords: s.coords[i],
                });
            }
        }
        let path = self.ctx.out_dir.as_ref().map(|d| d.join("features").join(format!("iter_{iteration}.jsonl")));
        let bytes = persist(path, |w| {
            let mut n = 0u64;
            for r in &rows {
                let mut line = serde_json::to_vec(&FeatureLine {
                    task: r.frame.task,
                    step: r.frame.step,
                    features: &r.features,
                })?;
                line.push(b'\n');
                w.write_all(&line)?;
                n += line.len() as u64;
            }
            Ok(n)
        })?;
        Ok(AggregateResult { rows, bytes })
    }

    fn train(&self, task: &TaskDescriptor, train: &[Vec<f64>], heldout: &[Vec<f64>]) -> Result<TrainResult> {
        let TaskPayload::MlTrain { iteration, latent_dim } = task.payload else {
            return Err(Error::invalid("training payload expected"));
        };
        let input_dim = train.first().map(Vec::len).ok_or_else(|| Error::invalid("empty training set"))?;
        let l = &self.ctx.cfg.learning;
        let seed = l
            .train
            .seed
            .wrapping_add(self.ctx.cfg.workflow.seed.wrapping_mul(0x9e37_79b9))
            .wrapping_add(iteration as u64);
        let model = LatentModel::init(input_dim, &l.hidden, latent_dim, seed)?;
        let tc = crate::latent::TrainConfig { seed, ..l.train };
        let (model, report) = fit(model, train, &tc)?;
        let heldout_loss = reconstruction_loss(&model, heldout)?;
        let bytes = match &self.ctx.out_dir {
            Some(d) => {
                let dir = d.join("models");
                fs::create_dir_all(&dir)?;
                let text = model.to_checkpoint()?;
                fs::write(dir.join(format!("iter_{iteration}_d{latent_dim}.json")), &text)?;
                text.len() as u64
            }
            None => 0,
        };
        Ok(TrainResult {
            latent_dim,
            model,
            report,
            heldout_loss,
            bytes,
        })
    }

    fn inference(&self, models: &BTreeMap<usize, (LatentModel, f64)>, points: &[Vec<f64>]) -> Result<InferenceResult> {
        let scores: Vec<ModelScore> = models
            .iter()
            .map(|(&d, (_, loss))| ModelScore {
                latent_dim: d,
                heldout_loss: *loss,
            })
            .collect();
        let best = select_best_model(&scores)?;
        let best_dim = scores[best].latent_dim;
        let model = &models[&best_dim].0;
        let embedding = points
            .iter()
            .map(|x| model.encode(x).map(|(mu, _)| mu))
            .collect::<Result<Vec<_>>>()?;
        let a = &self.ctx.cfg.adaptivity;
        let eps = match a.eps {
            Some(e) => e,
            None => median_kth_neighbor_distance(&embedding, a.min_pts)?,
        };
        let labeling = dbscan(&embedding, &DbscanParams { eps, min_pts: a.min_pts })?;
        Ok(InferenceResult {
            best_dim,
            best_loss: scores[best].heldout_loss,
            eps,
            embedding,
            labeling,
        })
    }
}

impl PayloadRunner for StageRunner<'_> {
    type Output = TaskOutput;

    fn run(&self, task: &TaskDescriptor) -> Result<TaskOutput> {
        match (&self.input, &task.payload) {
            (StageInput::Md, TaskPayload::MdSegment(_)) => self.segment(task).map(TaskOutput::Segment),
            (StageInput::Aggregate { iteration, segments }, TaskPayload::Aggregate { .. }) => {
                self.aggregate(*iteration, segments).map(TaskOutput::Aggregate)
            }
            (StageInput::Train { train, heldout }, TaskPayload::MlTrain { .. }) => {
                self.train(task, train, heldout).map(TaskOutput::Train)
            }
            (StageInput::Inference { models, points }, TaskPayload::Inference { .. }) => {
                self.inference(models, points).map(TaskOutput::Inference)
            }
            _ => Err(Error::invalid(format!("task {} does not belong to this stage", task.id))),
        }
    }
}

//! JSON configuration document with defaults, unknown-key detection and
//! validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adaptivity::{CullPolicy, OutlierCaps, RebalancePolicy};
use crate::dynamics::{DoubleWell, GoChainBuilder, LangevinParams, PotentialSpec};
use crate::error::{Error, Result};
use crate::features::FoldCriterion;
use crate::latent::{TrainConfig, MAX_LATENT_DIM, MIN_LATENT_DIM};
use crate::runtime::{ClockMode, PoolSpec};

/// Physical system under study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    GoChain(GoChainBuilder),
    DoubleWell(DoubleWell),
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig::GoChain(GoChainBuilder::default())
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<PotentialSpec> {
        Ok(match self {
            SystemConfig::GoChain(b) => PotentialSpec::GoChain3D(b.build()?),
            SystemConfig::DoubleWell(dw) => {
                if !(dw.barrier > 0.0 && dw.transverse > 0.0) {
                    return Err(Error::Config("double_well parameters must be > 0".into()));
                }
                PotentialSpec::DoubleWell2D(*dw)
            }
        })
    }

    /// Contact cutoff used for featurization and native contacts.
    pub fn contact_cutoff(&self) -> f64 {
        match self {
            SystemConfig::GoChain(b) => b.contact_cutoff,
            SystemConfig::DoubleWell(_) => 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub friction: f64,
    pub temperature: f64,
    /// Per-task segment cap of the adaptive campaign.
    pub segment_steps: u64,
    /// Per-task segment cap of the non-adaptive control.
    pub baseline_segment_steps: u64,
    pub stride: u64,
    /// Bead spacing of the stretched starting chain.
    pub initial_spacing: f64,
    /// Uniform per-coordinate perturbation of starting states.
    pub initial_perturbation: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            dt: 5e-4,
            friction: 1.0,
            temperature: 0.3,
            segment_steps: 20_000,
            baseline_segment_steps: 100_000,
            stride: 500,
            initial_spacing: 1.05,
            initial_perturbation: 0.1,
        }
    }
}

impl DynamicsConfig {
    pub fn langevin(&self, seed: u64) -> LangevinParams {
        LangevinParams {
            dt: self.dt,
            friction: self.friction,
            temperature: self.temperature,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningConfig {
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
    pub min_latent_dim: usize,
    pub max_latent_dim: usize,
    /// Frames drawn from the corpus per iteration (training plus held-out).
    pub max_samples: usize,
    /// Keep the always-formed `|i-j| = 1` contacts in the model input.
    pub include_adjacent: bool,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            train: TrainConfig {
                epochs: 20,
                ..Default::default()
            },
            hidden: vec![64, 32],
            min_latent_dim: MIN_LATENT_DIM,
            max_latent_dim: MAX_LATENT_DIM,
            max_samples: 2000,
            include_adjacent: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptivityConfig {
    pub min_pts: usize,
    /// Fixed neighbourhood radius; `null` uses the median distance to the
    /// `min_pts`-th neighbour, recomputed every iteration.
    pub eps: Option<f64>,
    pub caps: OutlierCaps,
    pub cull: CullPolicy,
    pub rebalance: RebalancePolicy,
    /// Frames embedded per inference step.
    pub max_inference_points: usize,
}

impl Default for AdaptivityConfig {
    fn default() -> Self {
        AdaptivityConfig {
            min_pts: 4,
            eps: None,
            caps: OutlierCaps::default(),
            cull: CullPolicy::default(),
            rebalance: RebalancePolicy::default(),
            max_inference_points: 3000,
        }
    }
}

/// Which candidates fill Stage 1 first when seeds and survivors together
/// exceed `max_md_tasks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPriority {
    Outliers,
    Survivors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub seed: u64,
    pub initial_md_tasks: usize,
    /// Upper bound on Stage-1 size after the first iteration.
    pub max_md_tasks: usize,
    pub seed_priority: SeedPriority,
    pub max_iterations: usize,
    pub aggregate_step_budget: u64,
    pub fold: FoldCriterion,
    pub clock: ClockMode,
    pub md_cores: usize,
    pub ml_cores: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: 0,
            initial_md_tasks: 120,
            max_md_tasks: 120,
            seed_priority: SeedPriority::Survivors,
            max_iterations: 50,
            aggregate_step_budget: 200_000_000,
            fold: FoldCriterion::default(),
            clock: ClockMode::Virtual,
            md_cores: 1,
            ml_cores: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<String>,
    pub formats: Vec<OutputFormat>,
    /// Write `traj/<task_id>.jsonl` for every MD task.
    pub trajectories: bool,
    pub rmsd_hist_bins: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: None,
            formats: vec![OutputFormat::Json, OutputFormat::Csv],
            trajectories: true,
            rmsd_hist_bins: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub counts: Vec<usize>,
    pub steps_per_task: u64,
    pub stride: u64,
    /// Largest GPU count the harness may request.
    pub max_gpus: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            counts: vec![4, 8, 16, 32],
            steps_per_task: 100_000,
            stride: 1000,
            max_gpus: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigDocument {
    pub system: SystemConfig,
    pub dynamics: DynamicsConfig,
    pub learning: LearningConfig,
    pub adaptivity: AdaptivityConfig,
    pub workflow: CampaignConfig,
    pub pool: PoolSpec,
    pub output: OutputConfig,
    pub scaling: ScalingConfig,
}

/// Reference subtree for tagged sections, chosen by their `kind`.
fn variant_reference(path: &str, kind: &str) -> Option<Value> {
    let v = match (path, kind) {
        ("system", "go_chain") => serde_json::to_value(SystemConfig::GoChain(GoChainBuilder::default())),
        ("system", "double_well") => serde_json::to_value(SystemConfig::DoubleWell(DoubleWell::default())),
        ("workflow.fold", "native") => serde_json::to_value(FoldCriterion::default()),
        ("workflow.fold", "basin") => serde_json::to_value(FoldCriterion::Basin { x_above: 0.0 }),
        _ => return None,
    };
    v.ok()
}

fn collect_unknown(user: &Value, reference: &Value, path: &str, out: &mut Vec<String>) {
    let (Value::Object(u), Value::Object(r)) = (user, reference) else {
        return;
    };
    let swapped;
    let r = match u.get("kind").and_then(Value::as_str) {
        Some(kind) if r.contains_key("kind") => match variant_reference(path, kind) {
            Some(Value::Object(m)) => {
                swapped = m;
                &swapped
            }
            _ => r,
        },
        _ => r,
    };
    for (k, v) in u {
        let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        match r.get(k) {
            None => out.push(p),
            Some(rv) => collect_unknown(v, rv, &p, out),
        }
    }
}

/// Dotted paths of keys the document does not define.
pub fn unknown_keys(user: &Value) -> Vec<String> {
    let reference = serde_json::to_value(ConfigDocument::default()).expect("defaults serialize");
    let mut out = Vec::new();
    collect_unknown(user, &reference, "", &mut out);
    out
}

impl ConfigDocument {
    /// Parses, rejects unknown keys (all of them are listed), applies
    /// defaults and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("malformed JSON at line {} column {}: {e}", e.line(), e.column())))?;
        if !value.is_object() {
            return Err(Error::Config("top level must be a JSON object".into()));
        }
        let unknown = unknown_keys(&value);
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let doc: ConfigDocument = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid value at line {} column {}: {e}", e.line(), e.column())))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Error::Config(m);
        let d = &self.dynamics;
        d.langevin(0).validate().map_err(|e| cfg(format!("dynamics: {e}")))?;
        for (name, steps) in [("segment_steps", d.segment_steps), ("baseline_segment_steps", d.baseline_segment_steps)] {
            if steps == 0 || d.stride == 0 || steps % d.stride != 0 {
                return Err(cfg(format!("dynamics.{name} ({steps}) must be positive and divisible by stride ({})", d.stride)));
            }
        }
        if !(d.initial_spacing > 0.0) || !(d.initial_perturbation >= 0.0) {
            return Err(cfg("dynamics: initial_spacing must be > 0 and initial_perturbation >= 0".into()));
        }

        let l = &self.learning;
        l.train.validate().map_err(|e| cfg(format!("learning.train: {e}")))?;
        if l.hidden.is_empty() || l.hidden.contains(&0) {
            return Err(cfg("learning.hidden must list positive layer widths".into()));
        }
        if l.min_latent_dim < MIN_LATENT_DIM || l.max_latent_dim > MAX_LATENT_DIM || l.min_latent_dim > l.max_latent_dim {
            return Err(cfg(format!(
                "learning latent dims must satisfy {MIN_LATENT_DIM} <= min <= max <= {MAX_LATENT_DIM}"
            )));
        }
        if l.max_samples < 10 {
            return Err(cfg("learning.max_samples must be >= 10".into()));
        }

        let a = &self.adaptivity;
        if a.min_pts < 2 {
            return Err(cfg("adaptivity.min_pts must be >= 2".into()));
        }
        if let Some(eps) = a.eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(cfg("adaptivity.eps must be > 0".into()));
            }
        }
        if a.max_inference_points < a.min_pts + 1 {
            return Err(cfg("adaptivity.max_inference_points is too small".into()));
        }

        let w = &self.workflow;
        if w.initial_md_tasks == 0 || w.max_md_tasks == 0 {
            return Err(cfg("workflow.initial_md_tasks and max_md_tasks must be >= 1".into()));
        }
        if w.max_iterations == 0 {
            return Err(cfg("workflow.max_iterations must be >= 1".into()));
        }
        if w.md_cores == 0 || w.ml_cores == 0 {
            return Err(cfg("workflow core counts must be >= 1".into()));
        }
        match (self.system, w.fold) {
            (SystemConfig::GoChain(_), FoldCriterion::Native { rmsd_below, q_at_least }) => {
                if !(rmsd_below > 0.0) || !(q_at_least > 0.0 && q_at_least <= 1.0) {
                    return Err(cfg("workflow.fold thresholds out of range".into()));
                }
            }
            (SystemConfig::DoubleWell(_), FoldCriterion::Basin { .. }) => {}
            (SystemConfig::GoChain(_), _) => return Err(cfg("go_chain requires a native fold criterion".into())),
            (SystemConfig::DoubleWell(_), _) => return Err(cfg("double_well requires a basin fold criterion".into())),
        }

        self.pool.validate().map_err(|e| cfg(format!("pool: {e}")))?;
        if self.pool.total_gpus() < 2 {
            return Err(cfg("pool needs at least 2 GPUs for the MD/ML split".into()));
        }
        if w.md_cores.max(w.ml_cores) > self.pool.cores_per_node {
            return Err(cfg("task core counts exceed cores_per_node".into()));
        }
        if self.output.rmsd_hist_bins == 0 {
            return Err(cfg("output.rmsd_hist_bins must be >= 1".into()));
        }
        let s = &self.scaling;
        if s.counts.is_empty() || s.counts.contains(&0) {
            return Err(cfg("scaling.counts must be non-empty and positive".into()));
        }
        if s.steps_per_task == 0 || s.stride == 0 || s.steps_per_task % s.stride != 0 {
            return Err(cfg("scaling.steps_per_task must be positive and divisible by stride".into()));
        }
        if let SystemConfig::GoChain(b) = self.system {
            b.build().map_err(|e| cfg(format!("system: {e}")))?;
        } else {
            self.system.build()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let d = ConfigDocument::default();
        d.validate().unwrap();
        let back = ConfigDocument::from_json(&d.to_json_pretty()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn empty_object_means_defaults() {
        assert_eq!(ConfigDocument::from_json("{}").unwrap(), ConfigDocument::default());
    }

    #[test]
    fn all_unknown_keys_listed() {
        let err = ConfigDocument::from_json(r#"{"bogus": 1, "dynamics": {"dt": 1e-4, "typo": 2}, "system": {"kind": "go_chain", "beads": 3}}"#)
            .unwrap_err()
            .to_string();
        for k in ["bogus", "dynamics.typo", "system.beads"] {
            assert!(err.contains(k), "{err}");
        }
    }

    #[test]
    fn variant_keys_checked_against_their_kind() {
        let ok = r#"{"system": {"kind": "double_well", "barrier": 2.0}, "workflow": {"fold": {"kind": "basin", "x_above": 0.5}}}"#;
        let d = ConfigDocument::from_json(ok).unwrap();
        assert!(matches!(d.system, SystemConfig::DoubleWell(DoubleWell { barrier, .. }) if barrier == 2.0));
        let bad = r#"{"system": {"kind": "double_well", "bead_count": 3}}"#;
        assert!(ConfigDocument::from_json(bad).unwrap_err().to_string().contains("system.bead_count"));
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = ConfigDocument::from_json("{\n  \"pool\": {\n    \"nodes\": 2,,\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            r#"{"dynamics": {"dt": -1}}"#,
            r#"{"dynamics": {"stride": 300}}"#,
            r#"{"workflow": {"initial_md_tasks": 0}}"#,
            r#"{"learning": {"min_latent_dim": 2}}"#,
            r#"{"pool": {"nodes": 0}}"#,
            r#"{"workflow": {"fold": {"kind": "basin", "x_above": 0}}}"#,
        ] {
            assert!(matches!(ConfigDocument::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }
}

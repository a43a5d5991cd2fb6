use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GpuSplit {
    pub md: usize,
    pub ml: usize,
}

impl GpuSplit {
    pub fn total(&self) -> usize {
        self.md + self.ml
    }
}

/// Queue pressure of the last MD and ML stages, in scheduling waves.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QueueWaits {
    pub md: f64,
    pub ml: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RebalancePolicy {
    /// Relative loss improvement below which learning counts as plateaued.
    pub plateau_threshold: f64,
    pub initial_ml_gpus: usize,
}

impl Default for RebalancePolicy {
    fn default() -> Self {
        RebalancePolicy {
            plateau_threshold: 0.02,
            initial_ml_gpus: 4,
        }
    }
}

impl RebalancePolicy {
    pub fn initial_split(&self, total: usize) -> GpuSplit {
        let ml = self.initial_ml_gpus.clamp(1, total.saturating_sub(1).max(1));
        GpuSplit {
            md: total.saturating_sub(ml),
            ml,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RebalanceTrigger {
    Initial,
    LossPlateau,
    LossImproving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebalanceDecision {
    pub md_gpus: usize,
    pub ml_gpus: usize,
    pub trigger: RebalanceTrigger,
}

/// Shifts one GPU between the MD and ML partitions based on the best
/// held-out loss of each completed training iteration.
///
/// With fewer than two iterations the configured initial split applies. A
/// relative improvement below the plateau threshold moves a GPU to MD
/// (keeping at least one for ML); otherwise, if ML tasks queued longer than
/// MD tasks, a GPU moves to ML (keeping at least one for MD).
pub fn rebalance(
    loss_history: &[f64],
    current: GpuSplit,
    waits: QueueWaits,
    policy: &RebalancePolicy,
) -> RebalanceDecision {
    let total = current.total();
    if loss_history.len() < 2 {
        let s = policy.initial_split(total);
        return RebalanceDecision {
            md_gpus: s.md,
            ml_gpus: s.ml,
            trigger: RebalanceTrigger::Initial,
        };
    }
    let prev = loss_history[loss_history.len() - 2];
    let last = loss_history[loss_history.len() - 1];
    let improvement = if prev.abs() > 0.0 { (prev - last) / prev.abs() } else { 0.0 };
    let (mut md, mut ml) = (current.md, current.ml);
    let trigger = if !(improvement >= policy.plateau_threshold) {
        if ml > 1 {
            ml -= 1;
            md += 1;
        }
        RebalanceTrigger::LossPlateau
    } else {
        if waits.ml > waits.md && md > 1 {
            md -= 1;
            ml += 1;
        }
        RebalanceTrigger::LossImproving
    };
    RebalanceDecision {
        md_gpus: md,
        ml_gpus: ml,
        trigger,
    }
}

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::adaptivity::dbscan::{ClusterLabeling, Label};
use crate::adaptivity::outliers::OutlierList;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CullPolicy {
    pub window: usize,
    /// Clusters at least this large count as "stuck" basins.
    pub stuck_threshold: usize,
    pub min_alive: usize,
}

impl Default for CullPolicy {
    fn default() -> Self {
        CullPolicy {
            window: 5,
            stuck_threshold: 11,
            min_alive: 1,
        }
    }
}

/// Recent embedded frames of one running task, oldest first, as indices
/// into the clustered point set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskRecentFrames {
    pub task: u64,
    pub points: Vec<usize>,
}

/// A task is terminated when each of its last `window` frames sits in a
/// cluster of at least `stuck_threshold` members and none of them was
/// picked as an outlier. At least `min_alive` tasks always survive; the
/// lowest task ids are spared first.
pub fn cull_decision(
    running: &[TaskRecentFrames],
    labeling: &ClusterLabeling,
    outliers: &OutlierList,
    policy: &CullPolicy,
) -> Result<BTreeSet<u64>> {
    let picked: BTreeSet<usize> = outliers.entries.iter().map(|o| o.point_index).collect();
    let mut kill = BTreeSet::new();
    for t in running {
        if t.points.is_empty() {
            return Err(Error::invalid(format!("task {} has no embedded frames", t.task)));
        }
        if let Some(&bad) = t.points.iter().find(|&&p| p >= labeling.len()) {
            return Err(Error::invalid(format!("task {} refers to missing point {bad}", t.task)));
        }
        let start = t.points.len().saturating_sub(policy.window.max(1));
        let recent = &t.points[start..];
        let stuck = recent.iter().all(|&p| match labeling.labels[p] {
            Label::Noise => false,
            Label::Cluster(c) => labeling.cluster_sizes[c] >= policy.stuck_threshold,
        });
        let productive = recent.iter().any(|p| picked.contains(p));
        if stuck && !productive {
            kill.insert(t.task);
        }
    }
    let max_kill = running.len().saturating_sub(policy.min_alive);
    while kill.len() > max_kill {
        let first = *kill.iter().next().unwrap();
        kill.remove(&first);
    }
    Ok(kill)
}

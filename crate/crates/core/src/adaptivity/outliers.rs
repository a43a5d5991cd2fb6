use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adaptivity::dbscan::{ClusterLabeling, Label};
use crate::dynamics::FrameRef;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierCaps {
    pub max_total: usize,
    pub max_per_cluster: usize,
}

impl Default for OutlierCaps {
    fn default() -> Self {
        OutlierCaps {
            max_total: 150,
            max_per_cluster: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outlier {
    pub frame: FrameRef,
    /// Index of the point in the clustered set.
    pub point_index: usize,
    pub latent: Vec<f64>,
    /// `None` for noise.
    pub cluster: Option<usize>,
    pub density: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierList {
    pub entries: Vec<Outlier>,
    pub caps: OutlierCaps,
}

impl OutlierList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Candidates are every noise point plus every member of a cluster no
/// larger than `max_per_cluster`; they are ranked by ascending
/// neighbourhood density (then index) and truncated to `max_total`.
pub fn select_outliers(
    labeling: &ClusterLabeling,
    points: &[Vec<f64>],
    frame_refs: &[FrameRef],
    caps: OutlierCaps,
) -> Result<OutlierList> {
    let n = labeling.len();
    for len in [points.len(), frame_refs.len(), labeling.density.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| match labeling.labels[i] {
            Label::Noise => true,
            Label::Cluster(c) => labeling.cluster_sizes[c] <= caps.max_per_cluster,
        })
        .collect();
    candidates.sort_by_key(|&i| (labeling.density[i], i));

    let mut per_cluster: BTreeMap<usize, usize> = BTreeMap::new();
    let mut entries = Vec::new();
    for i in candidates {
        if entries.len() >= caps.max_total {
            break;
        }
        let cluster = labeling.labels[i].cluster();
        if let Some(c) = cluster {
            let count = per_cluster.entry(c).or_insert(0);
            if *count >= caps.max_per_cluster {
                continue;
            }
            *count += 1;
        }
        entries.push(Outlier {
            frame: frame_refs[i],
            point_index: i,
            latent: points[i].clone(),
            cluster,
            density: labeling.density[i],
        });
    }
    Ok(OutlierList { entries, caps })
}

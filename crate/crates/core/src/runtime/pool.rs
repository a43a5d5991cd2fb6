use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptivity::GpuSplit;
use crate::error::{Error, Result};
use crate::workflow::{ResourceShape, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolSpec {
    pub nodes: usize,
    pub cores_per_node: usize,
    pub gpus_per_node: usize,
}

impl Default for PoolSpec {
    fn default() -> Self {
        PoolSpec {
            nodes: 2,
            cores_per_node: 42,
            gpus_per_node: 6,
        }
    }
}

impl PoolSpec {
    pub fn total_gpus(&self) -> usize {
        self.nodes * self.gpus_per_node
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.cores_per_node == 0 || self.gpus_per_node == 0 {
            return Err(Error::invalid(format!(
                "pool needs positive nodes, cores and GPUs, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpuRole {
    Md,
    Ml,
}

impl GpuRole {
    pub fn for_kind(kind: TaskKind) -> GpuRole {
        match kind {
            TaskKind::MdSegment => GpuRole::Md,
            _ => GpuRole::Ml,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) cores: Vec<Option<u64>>,
    pub(crate) gpus: Vec<Option<u64>>,
    pub(crate) roles: Vec<Option<GpuRole>>,
}

/// Acquired block of virtual resources. Every allocation is tracked per
/// core and per GPU so double booking is impossible by construction.
#[derive(Debug, Clone)]
pub struct ResourcePool {
    spec: PoolSpec,
    pub(crate) nodes: Vec<Node>,
    acquired_at: Instant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoolSnapshot {
    pub free_cores: Vec<usize>,
    pub free_gpus: Vec<usize>,
    pub allocated_cores: usize,
    pub allocated_gpus: usize,
}

pub fn acquire_pool(spec: PoolSpec) -> Result<ResourcePool> {
    spec.validate()?;
    let nodes = (0..spec.nodes)
        .map(|_| Node {
            cores: vec![None; spec.cores_per_node],
            gpus: vec![None; spec.gpus_per_node],
            roles: vec![None; spec.gpus_per_node],
        })
        .collect();
    Ok(ResourcePool {
        spec,
        nodes,
        acquired_at: Instant::now(),
    })
}

impl ResourcePool {
    pub fn spec(&self) -> PoolSpec {
        self.spec
    }

    pub fn acquired_at(&self) -> Instant {
        self.acquired_at
    }

    pub fn snapshot(&self) -> PoolSnapshot {
        let free_cores: Vec<usize> = self.nodes.iter().map(|n| n.cores.iter().filter(|c| c.is_none()).count()).collect();
        let free_gpus: Vec<usize> = self.nodes.iter().map(|n| n.gpus.iter().filter(|g| g.is_none()).count()).collect();
        PoolSnapshot {
            allocated_cores: self.spec.nodes * self.spec.cores_per_node - free_cores.iter().sum::<usize>(),
            allocated_gpus: self.spec.total_gpus() - free_gpus.iter().sum::<usize>(),
            free_cores,
            free_gpus,
        }
    }

    /// Tags the first `split.ml` GPUs (node 0 first) for learning and the
    /// rest for simulation. Fails if the split does not cover the pool.
    pub fn apply_split(&mut self, split: GpuSplit) -> Result<()> {
        if split.total() != self.spec.total_gpus() {
            return Err(Error::invalid(format!(
                "split {split:?} does not cover {} GPUs",
                self.spec.total_gpus()
            )));
        }
        let gpn = self.spec.gpus_per_node;
        for (n, node) in self.nodes.iter_mut().enumerate() {
            for (g, role) in node.roles.iter_mut().enumerate() {
                let global = n * gpn + g;
                *role = Some(if global < split.ml { GpuRole::Ml } else { GpuRole::Md });
            }
        }
        Ok(())
    }

    /// Removes role tags; any GPU may then serve any task.
    pub fn clear_split(&mut self) {
        for node in &mut self.nodes {
            node.roles.iter_mut().for_each(|r| *r = None);
        }
    }

    pub fn split(&self) -> Option<GpuSplit> {
        let mut md = 0;
        let mut ml = 0;
        for node in &self.nodes {
            for r in &node.roles {
                match r {
                    Some(GpuRole::Md) => md += 1,
                    Some(GpuRole::Ml) => ml += 1,
                    None => return None,
                }
            }
        }
        Some(GpuSplit { md, ml })
    }

    fn gpu_usable(&self, node: usize, gpu: usize, role: GpuRole) -> bool {
        self.nodes[node].gpus[gpu].is_none() && self.nodes[node].roles[gpu].is_none_or(|r| r == role)
    }

    /// Whether a task of this shape could ever be placed on some node.
    pub fn can_ever_fit(&self, kind: TaskKind, shape: ResourceShape) -> bool {
        let role = GpuRole::for_kind(kind);
        self.nodes.iter().any(|node| {
            let gpus = node.roles.iter().filter(|r| r.is_none_or(|r| r == role)).count();
            shape.cores <= node.cores.len() && shape.gpus <= gpus
        })
    }

    /// First node with room for the whole shape.
    pub(crate) fn find_slot(&self, kind: TaskKind, shape: ResourceShape) -> Option<(usize, Vec<usize>, Vec<usize>)> {
        let role = GpuRole::for_kind(kind);
        for (n, node) in self.nodes.iter().enumerate() {
            let cores: Vec<usize> = (0..node.cores.len()).filter(|&c| node.cores[c].is_none()).take(shape.cores).collect();
            if cores.len() < shape.cores {
                continue;
            }
            let gpus: Vec<usize> = (0..node.gpus.len()).filter(|&g| self.gpu_usable(n, g, role)).take(shape.gpus).collect();
            if gpus.len() < shape.gpus {
                continue;
            }
            return Some((n, cores, gpus));
        }
        None
    }

    pub(crate) fn allocate(&mut self, task: u64, node: usize, cores: &[usize], gpus: &[usize]) {
        let n = &mut self.nodes[node];
        for &c in cores {
            debug_assert!(n.cores[c].is_none());
            n.cores[c] = Some(task);
        }
        for &g in gpus {
            debug_assert!(n.gpus[g].is_none());
            n.gpus[g] = Some(task);
        }
    }

    pub(crate) fn release(&mut self, task: u64, node: usize, cores: &[usize], gpus: &[usize]) {
        let n = &mut self.nodes[node];
        for &c in cores {
            debug_assert_eq!(n.cores[c], Some(task));
            n.cores[c] = None;
        }
        for &g in gpus {
            debug_assert_eq!(n.gpus[g], Some(task));
            n.gpus[g] = None;
        }
    }
}

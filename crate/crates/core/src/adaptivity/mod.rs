//! Decision layer: density-based clustering of latent embeddings, outlier
//! selection, per-task culling, model selection and MD/ML GPU rebalancing.

mod cull;
mod dbscan;
mod outliers;
mod rebalance;
mod selection;

pub use cull::{cull_decision, CullPolicy, TaskRecentFrames};
pub use dbscan::{dbscan, kth_neighbor_distances, median_kth_neighbor_distance, ClusterLabeling, DbscanParams, Label};
pub use outliers::{select_outliers, Outlier, OutlierCaps, OutlierList};
pub use rebalance::{rebalance, GpuSplit, QueueWaits, RebalanceDecision, RebalancePolicy, RebalanceTrigger};
pub use selection::{select_best_model, ModelScore};

//! Simulated pilot backend: a virtual pool of nodes, cores and GPUs, a
//! first-fit-decreasing scheduler, an executor and per-stage accounting.

mod executor;
mod metrics;
mod pool;
mod scheduler;

pub use executor::{ClockMode, PayloadReport, PayloadRunner, Placement, Runtime, StageRun, TaskEvent, TaskOutcome};
pub use metrics::{busy_envelope, record_metrics, MetricsRecord};
pub use pool::{acquire_pool, GpuRole, PoolSnapshot, PoolSpec, ResourcePool};
pub use scheduler::{schedule, Assignment, Schedule};

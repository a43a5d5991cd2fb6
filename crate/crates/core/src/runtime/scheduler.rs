use crate::error::{Error, Result};
use crate::runtime::pool::ResourcePool;
use crate::workflow::TaskDescriptor;

/// Resources granted to one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Position of the task in the pending slice passed to [`schedule`].
    pub index: usize,
    pub task: u64,
    pub node: usize,
    pub cores: Vec<usize>,
    pub gpus: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    pub placed: Vec<Assignment>,
    /// Indices (into the pending slice) left waiting, in arrival order.
    pub pending: Vec<usize>,
}

/// First-fit-decreasing by GPU count. Ties keep arrival order. Placed
/// resources are allocated in `pool` before returning.
///
/// A task whose shape can never fit on a single node rejects the whole call
/// without allocating anything.
pub fn schedule(pending: &[&TaskDescriptor], pool: &mut ResourcePool) -> Result<Schedule> {
    for t in pending {
        if !pool.can_ever_fit(t.kind, t.shape) {
            let spec = pool.spec();
            return Err(Error::Rejected {
                task: t.id,
                reason: format!(
                    "{} task needs {} cores / {} GPUs but nodes offer {} cores / {} GPUs under the current partition",
                    t.kind.as_str(),
                    t.shape.cores,
                    t.shape.gpus,
                    spec.cores_per_node,
                    spec.gpus_per_node
                ),
            });
        }
    }
    let mut order: Vec<usize> = (0..pending.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(pending[i].shape.gpus));

    let mut out = Schedule::default();
    let mut waiting = vec![false; pending.len()];
    for i in order {
        let t = pending[i];
        match pool.find_slot(t.kind, t.shape) {
            Some((node, cores, gpus)) => {
                pool.allocate(t.id, node, &cores, &gpus);
                out.placed.push(Assignment {
                    index: i,
                    task: t.id,
                    node,
                    cores,
                    gpus,
                });
            }
            None => waiting[i] = true,
        }
    }
    out.pending = (0..pending.len()).filter(|&i| waiting[i]).collect();
    Ok(out)
}

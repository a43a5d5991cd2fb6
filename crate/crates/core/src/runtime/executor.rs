use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::metrics::{record_metrics, MetricsRecord};
use crate::runtime::pool::ResourcePool;
use crate::runtime::scheduler::{schedule, Assignment};
use crate::workflow::{TaskDescriptor, TaskKind, TaskState};

/// How the runtime advances its clock.
///
/// `Virtual` runs each payload for real on the calling thread and charges
/// its measured thread CPU time as device occupancy on a discrete-event
/// clock, so concurrency is modelled faithfully even on a single core.
/// `Wall` runs placed payloads on real threads and timestamps with the
/// monotonic wall clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    Virtual,
    Wall,
}

/// Accounting a payload result exposes to the runtime.
pub trait PayloadReport {
    fn frames(&self) -> u64 {
        0
    }
    fn bytes(&self) -> u64 {
        0
    }
    /// A result that carries usable partial output but should mark the
    /// task Failed.
    fn failure(&self) -> Option<String> {
        None
    }
}

pub trait PayloadRunner: Sync {
    type Output: PayloadReport + Send;
    fn run(&self, task: &TaskDescriptor) -> Result<Self::Output>;
}

/// One scheduled task over its lifetime. Timestamps are seconds since pool
/// acquisition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub task: u64,
    pub kind: TaskKind,
    pub iteration: usize,
    pub stage: usize,
    pub node: usize,
    pub cores: Vec<usize>,
    pub gpus: Vec<usize>,
    pub enqueue_ts: f64,
    pub start_ts: f64,
    pub end_ts: f64,
    pub state: TaskState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskEvent {
    pub task: u64,
    pub kind: TaskKind,
    pub state: TaskState,
    pub timestamp: f64,
}

#[derive(Debug)]
pub struct TaskOutcome<O> {
    pub state: TaskState,
    pub output: Option<O>,
    pub diagnostic: Option<String>,
    pub duration: f64,
}

#[derive(Debug)]
pub struct StageRun<O> {
    pub outcomes: BTreeMap<u64, TaskOutcome<O>>,
    pub metrics: MetricsRecord,
}

pub struct Runtime {
    pool: ResourcePool,
    clock: ClockMode,
    now: f64,
    trace: Vec<Placement>,
    events: Vec<TaskEvent>,
}

fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: clock_gettime only writes into the provided timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "payload panicked".into()
    }
}

fn invoke<R: PayloadRunner>(runner: &R, task: &TaskDescriptor) -> std::result::Result<R::Output, String> {
    match catch_unwind(AssertUnwindSafe(|| runner.run(task))) {
        Ok(Ok(o)) => Ok(o),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(format!("panic: {}", panic_message(p))),
    }
}

struct Running<O> {
    index: usize,
    assignment: Assignment,
    start: f64,
    end: f64,
    result: std::result::Result<O, String>,
}

impl Runtime {
    pub fn new(pool: ResourcePool, clock: ClockMode) -> Self {
        Runtime {
            pool,
            clock,
            now: 0.0,
            trace: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn pool(&self) -> &ResourcePool {
        &self.pool
    }

    pub fn pool_mut(&mut self) -> &mut ResourcePool {
        &mut self.pool
    }

    pub fn clock(&self) -> ClockMode {
        self.clock
    }

    pub fn trace(&self) -> &[Placement] {
        &self.trace
    }

    pub fn events(&self) -> &[TaskEvent] {
        &self.events
    }

    fn now(&self) -> f64 {
        match self.clock {
            ClockMode::Virtual => self.now,
            ClockMode::Wall => self.pool.acquired_at().elapsed().as_secs_f64(),
        }
    }

    fn event(&mut self, t: &TaskDescriptor, ts: f64) {
        self.events.push(TaskEvent {
            task: t.id,
            kind: t.kind,
            state: t.state(),
            timestamp: ts,
        });
    }

    /// Runs every Pending task of one stage to a terminal state. Returns
    /// per-task outcomes keyed by id together with the stage metrics.
    pub fn execute_stage<R: PayloadRunner>(
        &mut self,
        iteration: usize,
        stage: usize,
        tasks: &mut [TaskDescriptor],
        runner: &R,
    ) -> Result<StageRun<R::Output>> {
        let mut seen = std::collections::BTreeSet::new();
        for t in tasks.iter() {
            if t.state() != TaskState::Pending {
                return Err(Error::invalid(format!("task {} submitted while {}", t.id, t.state().as_str())));
            }
            if !seen.insert(t.id) {
                return Err(Error::invalid(format!("duplicate task id {}", t.id)));
            }
        }
        let enqueue = self.now();
        for t in tasks.iter() {
            self.event(t, enqueue);
        }
        let (finished, bookkeeping) = match self.clock {
            ClockMode::Virtual => self.run_virtual(tasks, runner)?,
            ClockMode::Wall => self.run_wall(tasks, runner)?,
        };

        let mut outcomes = BTreeMap::new();
        let mut placements = Vec::with_capacity(finished.len());
        let (mut frames, mut bytes) = (0, 0);
        for r in finished {
            let t = &tasks[r.index];
            let (output, diagnostic) = match r.result {
                Ok(o) => {
                    frames += o.frames();
                    bytes += o.bytes();
                    let d = o.failure();
                    (Some(o), d)
                }
                Err(e) => (None, Some(e)),
            };
            let p = Placement {
                task: t.id,
                kind: t.kind,
                iteration,
                stage,
                node: r.assignment.node,
                cores: r.assignment.cores,
                gpus: r.assignment.gpus,
                enqueue_ts: enqueue,
                start_ts: r.start,
                end_ts: r.end,
                state: t.state(),
            };
            outcomes.insert(
                t.id,
                TaskOutcome {
                    state: t.state(),
                    output,
                    diagnostic,
                    duration: r.end - r.start,
                },
            );
            placements.push(p);
        }
        let metrics = record_metrics(iteration, stage, &placements, bookkeeping, frames, bytes);
        self.trace.extend(placements);
        Ok(StageRun { outcomes, metrics })
    }

    fn place(&mut self, tasks: &mut [TaskDescriptor], pending: &mut Vec<usize>, ts: f64) -> Result<Vec<Assignment>> {
        let refs: Vec<&TaskDescriptor> = pending.iter().map(|&i| &tasks[i]).collect();
        let s = schedule(&refs, &mut self.pool)?;
        let mut placed = Vec::with_capacity(s.placed.len());
        for mut a in s.placed {
            a.index = pending[a.index];
            tasks[a.index].transition(TaskState::Scheduled)?;
            self.event(&tasks[a.index], ts);
            placed.push(a);
        }
        *pending = s.pending.iter().map(|&k| pending[k]).collect();
        Ok(placed)
    }

    fn complete<O: PayloadReport>(&mut self, tasks: &mut [TaskDescriptor], r: &Running<O>) -> Result<()> {
        let a = &r.assignment;
        self.pool.release(a.task, a.node, &a.cores, &a.gpus);
        let failed = match &r.result {
            Ok(o) => o.failure().is_some(),
            Err(_) => true,
        };
        let t = &mut tasks[r.index];
        t.transition(if failed { TaskState::Failed } else { TaskState::Done })?;
        let t = tasks[r.index].clone();
        self.event(&t, r.end);
        Ok(())
    }

    fn run_virtual<R: PayloadRunner>(
        &mut self,
        tasks: &mut [TaskDescriptor],
        runner: &R,
    ) -> Result<(Vec<Running<R::Output>>, f64)> {
        let mut pending: Vec<usize> = (0..tasks.len()).collect();
        let mut running: Vec<Running<R::Output>> = Vec::new();
        let mut done = Vec::with_capacity(tasks.len());
        let mut bookkeeping = 0.0;
        loop {
            let b0 = thread_cpu_seconds();
            let placed = self.place(tasks, &mut pending, self.now)?;
            let b = thread_cpu_seconds() - b0;
            bookkeeping += b;
            self.now += b;
            for a in placed {
                tasks[a.index].transition(TaskState::Running)?;
                let start = self.now;
                let t = tasks[a.index].clone();
                self.event(&t, start);
                let c0 = thread_cpu_seconds();
                let result = invoke(runner, &t);
                let d = thread_cpu_seconds() - c0;
                running.push(Running {
                    index: a.index,
                    assignment: a,
                    start,
                    end: start + d,
                    result,
                });
            }
            if running.is_empty() {
                if !pending.is_empty() {
                    return Err(Error::invalid("pending tasks cannot be placed on an idle pool"));
                }
                break;
            }
            // Earliest completion; ties resolve to the earlier start.
            let k = (0..running.len())
                .min_by(|&x, &y| running[x].end.total_cmp(&running[y].end))
                .expect("non-empty");
            let r = running.remove(k);
            self.now = self.now.max(r.end);
            let b0 = thread_cpu_seconds();
            self.complete(tasks, &r)?;
            let b = thread_cpu_seconds() - b0;
            bookkeeping += b;
            self.now += b;
            done.push(r);
        }
        Ok((done, bookkeeping))
    }

    fn run_wall<R: PayloadRunner>(
        &mut self,
        tasks: &mut [TaskDescriptor],
        runner: &R,
    ) -> Result<(Vec<Running<R::Output>>, f64)> {
        let origin = self.pool.acquired_at();
        let mut pending: Vec<usize> = (0..tasks.len()).collect();
        let mut done = Vec::with_capacity(tasks.len());
        let mut bookkeeping = 0.0;
        std::thread::scope(|scope| -> Result<()> {
            let (tx, rx) = mpsc::channel::<Running<R::Output>>();
            let mut in_flight = 0usize;
            loop {
                let b0 = Instant::now();
                let now = origin.elapsed().as_secs_f64();
                let placed = self.place(tasks, &mut pending, now)?;
                for a in placed {
                    tasks[a.index].transition(TaskState::Running)?;
                    let t = tasks[a.index].clone();
                    self.event(&t, origin.elapsed().as_secs_f64());
                    let tx = tx.clone();
                    in_flight += 1;
                    scope.spawn(move || {
                        let start = origin.elapsed().as_secs_f64();
                        let result = invoke(runner, &t);
                        let end = origin.elapsed().as_secs_f64();
                        let _ = tx.send(Running {
                            index: a.index,
                            assignment: a,
                            start,
                            end,
                            result,
                        });
                    });
                }
                bookkeeping += b0.elapsed().as_secs_f64();
                if in_flight == 0 {
                    if !pending.is_empty() {
                        return Err(Error::invalid("pending tasks cannot be placed on an idle pool"));
                    }
                    return Ok(());
                }
                let r = rx.recv().map_err(|_| Error::invalid("executor channel closed"))?;
                let b0 = Instant::now();
                in_flight -= 1;
                self.complete(tasks, &r)?;
                done.push(r);
                bookkeeping += b0.elapsed().as_secs_f64();
            }
        })?;
        Ok((done, bookkeeping))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::pool::{acquire_pool, PoolSpec};
    use crate::workflow::{ResourceShape, TaskPayload};

    /// Burns a fixed amount of arithmetic; `latent_dim` selects the amount.
    struct Spin;

    struct Spun;

    impl PayloadReport for Spun {
        fn frames(&self) -> u64 {
            1
        }
    }

    fn spin(n: usize) -> f64 {
        let mut acc = 0.0f64;
        for i in 0..n {
            acc = (acc + i as f64).sqrt();
        }
        std::hint::black_box(acc)
    }

    impl PayloadRunner for Spin {
        type Output = Spun;
        fn run(&self, task: &TaskDescriptor) -> Result<Spun> {
            match task.payload {
                TaskPayload::MlTrain { latent_dim: 0, .. } => panic!("boom"),
                TaskPayload::MlTrain { latent_dim: 1, .. } => Err(Error::invalid("bad payload")),
                TaskPayload::MlTrain { latent_dim, .. } => {
                    spin(latent_dim);
                    Ok(Spun)
                },
                _ => Ok(Spun),
            }
        }
    }

    fn tasks(n: usize, work: usize) -> Vec<TaskDescriptor> {
        (0..n)
            .map(|i| {
                TaskDescriptor::new(
                    i as u64,
                    TaskKind::MlTrain,
                    ResourceShape { cores: 1, gpus: 1 },
                    TaskPayload::MlTrain { iteration: 0, latent_dim: work },
                )
                .unwrap()
            })
            .collect()
    }

    fn runtime(clock: ClockMode) -> Runtime {
        Runtime::new(acquire_pool(PoolSpec { nodes: 1, ..Default::default() }).unwrap(), clock)
    }

    const WORK: usize = 3_000_000;

    fn single_time(clock: ClockMode) -> f64 {
        let mut rt = runtime(clock);
        let mut ts = tasks(1, WORK);
        rt.execute_stage(0, 0, &mut ts, &Spin).unwrap().metrics.ttx
    }

    #[test]
    fn six_tasks_run_concurrently() {
        let one = single_time(ClockMode::Virtual);
        let mut rt = runtime(ClockMode::Virtual);
        let mut ts = tasks(6, WORK);
        let m = rt.execute_stage(0, 0, &mut ts, &Spin).unwrap().metrics;
        assert!((m.ttx / one - 1.0).abs() < 0.1, "ttx {} vs single {}", m.ttx, one);
        assert!(m.eoh < 0.05 * m.ttx);
        assert_eq!(m.frames, 6);
    }

    #[test]
    fn twelve_tasks_take_two_waves() {
        let one = single_time(ClockMode::Virtual);
        let mut rt = runtime(ClockMode::Virtual);
        let mut ts = tasks(12, WORK);
        let m = rt.execute_stage(0, 0, &mut ts, &Spin).unwrap().metrics;
        assert!((m.ttx / (2.0 * one) - 1.0).abs() < 0.15, "ttx {} vs single {}", m.ttx, one);
        assert!(ts.iter().all(|t| t.state() == TaskState::Done));
        assert_eq!(rt.pool().snapshot().allocated_gpus, 0);
    }

    #[test]
    fn failures_are_isolated() {
        for clock in [ClockMode::Virtual, ClockMode::Wall] {
            let mut rt = runtime(clock);
            let mut ts = tasks(4, 1000);
            ts[0].payload = TaskPayload::MlTrain { iteration: 0, latent_dim: 0 };
            ts[1].payload = TaskPayload::MlTrain { iteration: 0, latent_dim: 1 };
            let run = rt.execute_stage(0, 0, &mut ts, &Spin).unwrap();
            assert_eq!(run.outcomes[&0].state, TaskState::Failed);
            assert!(run.outcomes[&0].diagnostic.as_deref().unwrap().contains("boom"));
            assert_eq!(run.outcomes[&1].state, TaskState::Failed);
            assert_eq!(run.outcomes[&2].state, TaskState::Done);
            assert_eq!(run.outcomes[&3].state, TaskState::Done);
            assert_eq!(rt.pool().snapshot().allocated_gpus, 0);
        }
    }

    #[test]
    fn wall_clock_completes_all() {
        let mut rt = runtime(ClockMode::Wall);
        let mut ts = tasks(9, 10_000);
        let run = rt.execute_stage(0, 0, &mut ts, &Spin).unwrap();
        assert_eq!(run.outcomes.len(), 9);
        assert!(run.metrics.ttx > 0.0);
        assert_eq!(rt.trace().len(), 9);
        // Pending, Scheduled, Running, Done per task.
        assert_eq!(rt.events().len(), 36);
    }

    #[test]
    fn resubmission_rejected() {
        let mut rt = runtime(ClockMode::Virtual);
        let mut ts = tasks(1, 10);
        rt.execute_stage(0, 0, &mut ts, &Spin).unwrap();
        assert!(rt.execute_stage(0, 1, &mut ts, &Spin).is_err());
    }
}

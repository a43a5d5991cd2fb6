use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::conformation::Conformation;
use crate::dynamics::langevin::{Integrator, LangevinParams, NoiseStream};
use crate::dynamics::potential::PotentialSpec;
use crate::error::{Error, Result};

/// Points at one stored frame: the producing task and its step index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FrameRef {
    pub task: u64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub step: u64,
    pub conformation: Conformation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPlan {
    pub task_id: u64,
    pub parent_outlier: Option<FrameRef>,
    pub steps: u64,
    pub stride: u64,
    pub initial: Conformation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task_id: u64,
    pub parent_outlier: Option<FrameRef>,
    pub stride: u64,
    pub frames: Vec<Frame>,
    /// Sampling consumed: the last recorded step index.
    pub aggregate_steps: u64,
    /// Set when the integration diverged; frames up to the failure are kept.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn last(&self) -> &Frame {
        self.frames.last().expect("trajectory always holds its initial frame")
    }

    pub fn frame_ref(&self, idx: usize) -> FrameRef {
        FrameRef {
            task: self.task_id,
            step: self.frames[idx].step,
        }
    }
}

/// Integrates one simulation segment, recording every `stride`-th step plus
/// the initial frame.
pub fn run_segment(spec: &PotentialSpec, params: &LangevinParams, plan: &SegmentPlan) -> Result<Trajectory> {
    params.validate()?;
    if plan.steps == 0 {
        return Err(Error::invalid("segment needs steps > 0"));
    }
    if plan.stride == 0 || plan.steps % plan.stride != 0 {
        return Err(Error::invalid(format!(
            "stride {} must be >= 1 and divide steps {}",
            plan.stride, plan.steps
        )));
    }
    if plan.initial.bead_count() != spec.bead_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.bead_count(),
            got: plan.initial.bead_count(),
        });
    }
    plan.initial.check_finite()?;

    let integ = Integrator::new(spec, params);
    let mut noise = NoiseStream::new(params.seed, plan.task_id);
    let mut x = plan.initial.clone();
    let mut forces = vec![[0.0; 3]; x.bead_count()];
    let mut frames = Vec::with_capacity((plan.steps / plan.stride) as usize + 1);
    frames.push(Frame {
        step: 0,
        conformation: x.clone(),
    });
    let mut failure = None;
    for step in 1..=plan.steps {
        if let Err(e) = integ.advance(&mut x, &mut forces, &mut noise, step) {
            failure = Some(e.to_string());
            break;
        }
        if step % plan.stride == 0 {
            frames.push(Frame {
                step,
                conformation: x.clone(),
            });
        }
    }
    let aggregate_steps = frames.last().map(|f| f.step).unwrap_or(0);
    Ok(Trajectory {
        task_id: plan.task_id,
        parent_outlier: plan.parent_outlier,
        stride: plan.stride,
        frames,
        aggregate_steps,
        failure,
    })
}

#[derive(Serialize, Deserialize)]
struct FrameLine {
    task: u64,
    step: u64,
    pos: Conformation,
}

/// One JSON object per frame: `{"task": id, "step": n, "pos": [[x,y,z],...]}`.
/// Returns the number of bytes written.
pub fn write_jsonl<W: Write>(traj: &Trajectory, mut w: W) -> Result<u64> {
    let mut bytes = 0u64;
    for f in &traj.frames {
        let line = serde_json::to_string(&FrameLine {
            task: traj.task_id,
            step: f.step,
            pos: f.conformation.clone(),
        })?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        bytes += line.len() as u64 + 1;
    }
    Ok(bytes)
}

/// Reads frames back; `parent_outlier` is not part of the line format.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<(FrameRef, Conformation)>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fl: FrameLine = serde_json::from_str(&line)?;
        fl.pos.check_finite()?;
        out.push((
            FrameRef {
                task: fl.task,
                step: fl.step,
            },
            fl.pos,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::native::{stretched_chain, GoChainBuilder};
    use crate::dynamics::potential::DoubleWell;

    fn plan(task_id: u64, steps: u64, stride: u64, initial: Conformation) -> SegmentPlan {
        SegmentPlan {
            task_id,
            parent_outlier: None,
            steps,
            stride,
            initial,
        }
    }

    #[test]
    fn frame_count_and_spacing() {
        let spec = PotentialSpec::DoubleWell2D(DoubleWell::default());
        let t = run_segment(
            &spec,
            &LangevinParams::default(),
            &plan(1, 1000, 100, Conformation::point(-1.0, 0.0)),
        )
        .unwrap();
        assert_eq!(t.frames.len(), 11);
        assert_eq!(t.aggregate_steps, 1000);
        for (k, f) in t.frames.iter().enumerate() {
            assert_eq!(f.step, 100 * k as u64);
        }
    }

    #[test]
    fn identical_seeds_identical_bytes() {
        let spec = PotentialSpec::GoChain3D(GoChainBuilder::default().build().unwrap());
        let p = LangevinParams {
            seed: 42,
            ..Default::default()
        };
        let pl = plan(7, 2000, 50, stretched_chain(10, 1.05));
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_jsonl(&run_segment(&spec, &p, &pl).unwrap(), &mut a).unwrap();
        write_jsonl(&run_segment(&spec, &p, &pl).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let other = run_segment(&spec, &p, &plan(8, 2000, 50, stretched_chain(10, 1.05))).unwrap();
        assert_ne!(other, run_segment(&spec, &p, &pl).unwrap());
    }

    #[test]
    fn jsonl_round_trip() {
        let spec = PotentialSpec::DoubleWell2D(DoubleWell::default());
        let t = run_segment(
            &spec,
            &LangevinParams::default(),
            &plan(3, 100, 10, Conformation::point(-1.0, 0.0)),
        )
        .unwrap();
        let mut buf = Vec::new();
        let n = write_jsonl(&t, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        let first = std::str::from_utf8(&buf).unwrap().lines().next().unwrap();
        assert!(first.starts_with(r#"{"task":3,"step":0,"pos":[[-1.0,0.0,0.0]]}"#), "{first}");
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back.len(), t.frames.len());
        for ((r, c), f) in back.iter().zip(&t.frames) {
            assert_eq!(r.step, f.step);
            assert_eq!(c, &f.conformation);
        }
    }

    #[test]
    fn precondition_errors() {
        let spec = PotentialSpec::DoubleWell2D(DoubleWell::default());
        let p = LangevinParams::default();
        let c = Conformation::point(0.0, 0.0);
        assert!(run_segment(&spec, &p, &plan(1, 0, 1, c.clone())).is_err());
        assert!(run_segment(&spec, &p, &plan(1, 100, 0, c.clone())).is_err());
        assert!(run_segment(&spec, &p, &plan(1, 100, 30, c.clone())).is_err());
        assert!(run_segment(&spec, &p, &plan(1, 100, 10, stretched_chain(3, 1.0))).is_err());
    }

    #[test]
    fn divergence_keeps_partial_frames() {
        let spec = PotentialSpec::GoChain3D(GoChainBuilder::default().build().unwrap());
        // huge step: the bond force overshoots and the chain explodes
        let p = LangevinParams {
            dt: 0.5,
            friction: 1.0,
            temperature: 0.0,
            seed: 0,
        };
        let mut init = stretched_chain(10, 1.05);
        init.positions_mut()[5][1] = 0.3;
        let t = run_segment(&spec, &p, &plan(1, 1000, 1, init)).unwrap();
        assert!(t.failed());
        assert!(t.frames.len() < 1001);
        assert!(t.frames.iter().all(|f| f.conformation.is_finite()));
        assert_eq!(t.aggregate_steps, t.last().step);
    }
}

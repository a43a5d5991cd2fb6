//! Toy physics backends integrated with overdamped Langevin dynamics.
//!
//! Two systems are provided: a 2-D double-well particle and a 3-D Gō-model
//! bead chain whose attractive interactions exist only between native
//! contact pairs.

mod conformation;
mod langevin;
mod native;
mod potential;
mod trajectory;

pub use conformation::Conformation;
pub use langevin::{step_langevin, LangevinParams, NoiseStream};
pub use native::{helix_structure, perturb, relax, stretched_chain, GoChainBuilder, HelixShape};
pub use potential::{DoubleWell, GoChain, PotentialSpec};
pub use trajectory::{
    read_jsonl, run_segment, write_jsonl, Frame, FrameRef, SegmentPlan, Trajectory,
};

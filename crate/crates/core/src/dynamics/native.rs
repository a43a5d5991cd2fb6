use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::conformation::Conformation;
use crate::dynamics::langevin::{step_langevin, LangevinParams, NoiseStream};
use crate::dynamics::potential::{GoChain, PotentialSpec};
use crate::error::Result;

/// Helical reference curve: bead `i` sits at
/// `(r cos(i t), r sin(i t), i h)` in units of sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HelixShape {
    pub radius: f64,
    pub turn: f64,
    pub rise: f64,
}

impl Default for HelixShape {
    fn default() -> Self {
        // alpha-helix proportions with the bond length scaled to ~1 sigma
        HelixShape {
            radius: 0.605,
            turn: 1.745,
            rise: 0.395,
        }
    }
}

pub fn helix_structure(n: usize, shape: HelixShape, sigma: f64) -> Conformation {
    let positions = (0..n)
        .map(|i| {
            let t = shape.turn * i as f64;
            [
                shape.radius * t.cos() * sigma,
                shape.radius * t.sin() * sigma,
                shape.rise * i as f64 * sigma,
            ]
        })
        .collect();
    Conformation::from_raw(positions)
}

/// Chain laid out along x with the given bead spacing.
pub fn stretched_chain(n: usize, spacing: f64) -> Conformation {
    Conformation::from_raw((0..n).map(|i| [spacing * i as f64, 0.0, 0.0]).collect())
}

/// Adds an independent uniform offset in `[-magnitude, magnitude]` to each
/// moving coordinate.
pub fn perturb(c: &Conformation, magnitude: f64, dims: usize, rng: &mut impl Rng) -> Conformation {
    let mut out = c.clone();
    if magnitude > 0.0 {
        for p in out.positions_mut() {
            for v in p.iter_mut().take(dims) {
                *v += rng.random_range(-magnitude..=magnitude);
            }
        }
    }
    out
}

/// Zero-temperature descent for `steps` iterations.
pub fn relax(spec: &PotentialSpec, c: &Conformation, steps: usize, dt: f64) -> Result<Conformation> {
    let params = LangevinParams {
        dt,
        friction: 1.0,
        temperature: 0.0,
        seed: 0,
    };
    let mut noise = NoiseStream::new(0, 0);
    let mut x = c.clone();
    for s in 0..steps {
        x = step_langevin(&x, spec, &params, &mut noise).map_err(|e| match e {
            crate::Error::Divergence { reason, .. } => crate::Error::Divergence {
                step: s as u64,
                reason,
            },
            other => other,
        })?;
    }
    Ok(x)
}

/// Parameters for constructing the reference Gō chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GoChainBuilder {
    pub bead_count: usize,
    pub helix: HelixShape,
    pub bond_stiffness: f64,
    pub contact_epsilon: f64,
    pub contact_sigma: f64,
    pub contact_cutoff: f64,
    pub repulsion_epsilon: f64,
    pub relax_steps: usize,
    pub relax_dt: f64,
}

impl Default for GoChainBuilder {
    fn default() -> Self {
        GoChainBuilder {
            bead_count: 10,
            helix: HelixShape::default(),
            bond_stiffness: 100.0,
            // weak enough that unbiased folding at kT = 0.3 is a rare event
            contact_epsilon: 0.33,
            contact_sigma: 1.0,
            contact_cutoff: 1.5,
            repulsion_epsilon: 1.0,
            relax_steps: 1000,
            relax_dt: 5e-4,
        }
    }
}

impl GoChainBuilder {
    /// Contacts are read off the helix, the helix is relaxed under the
    /// resulting potential, and the contact set is re-derived from the
    /// relaxed structure.
    pub fn build(&self) -> Result<GoChain> {
        let helix = helix_structure(self.bead_count, self.helix, self.contact_sigma);
        let make = |native: Conformation| {
            GoChain::new(
                native,
                self.bond_stiffness,
                self.contact_epsilon,
                self.contact_sigma,
                self.contact_cutoff,
                self.repulsion_epsilon,
            )
        };
        let seed_chain = PotentialSpec::GoChain3D(make(helix.clone())?);
        let relaxed = relax(&seed_chain, &helix, self.relax_steps, self.relax_dt)?;
        make(relaxed)
    }
}

#[cfg(test)]
pub(crate) fn default_native(n: usize) -> Conformation {
    GoChainBuilder {
        bead_count: n,
        ..Default::default()
    }
    .build()
    .unwrap()
    .native()
    .clone()
}

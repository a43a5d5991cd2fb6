use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::conformation::Conformation;
use crate::dynamics::potential::PotentialSpec;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinParams {
    pub dt: f64,
    pub friction: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for LangevinParams {
    fn default() -> Self {
        LangevinParams {
            dt: 5e-4,
            friction: 1.0,
            temperature: 0.3,
            seed: 0,
        }
    }
}

impl LangevinParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.friction > 0.0 && self.friction.is_finite()) {
            return Err(Error::invalid(format!("friction must be > 0, got {}", self.friction)));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Task-local Gaussian noise, replayable from `(seed, task_id)` alone.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, task_id: u64) -> Self {
        NoiseStream {
            rng: stream(seed, task_id, Purpose::Dynamics),
        }
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// One Euler-Maruyama step of overdamped Langevin dynamics:
/// `x' = x + (dt/gamma) F(x) + sqrt(2 kT dt / gamma) xi`.
pub fn step_langevin(
    c: &Conformation,
    spec: &PotentialSpec,
    p: &LangevinParams,
    noise: &mut NoiseStream,
) -> Result<Conformation> {
    p.validate()?;
    let mut out = c.clone();
    let mut forces = vec![[0.0; 3]; c.bead_count()];
    Integrator::new(spec, p).advance(&mut out, &mut forces, noise, 0)?;
    Ok(out)
}

/// Reusable stepping kernel; keeps the force buffer across steps.
pub(crate) struct Integrator<'a> {
    spec: &'a PotentialSpec,
    mobility: f64,
    amplitude: f64,
    dims: usize,
}

impl<'a> Integrator<'a> {
    pub(crate) fn new(spec: &'a PotentialSpec, p: &LangevinParams) -> Self {
        let mobility = p.dt / p.friction;
        Integrator {
            spec,
            mobility,
            amplitude: (2.0 * p.temperature * mobility).sqrt(),
            dims: spec.spatial_dims(),
        }
    }

    pub(crate) fn advance(
        &self,
        x: &mut Conformation,
        forces: &mut [[f64; 3]],
        noise: &mut NoiseStream,
        step: u64,
    ) -> Result<()> {
        self.spec.energy_and_forces_into(x, forces);
        if !forces.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                step,
                reason: "non-finite force".into(),
            });
        }
        let noisy = self.amplitude > 0.0;
        for (p, f) in x.positions_mut().iter_mut().zip(forces.iter()) {
            for k in 0..self.dims {
                let xi = if noisy { noise.normal() } else { 0.0 };
                p[k] += self.mobility * f[k] + self.amplitude * xi;
            }
        }
        if !x.is_finite() {
            return Err(Error::Divergence {
                step,
                reason: "non-finite coordinates".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::native::GoChainBuilder;
    use crate::dynamics::potential::DoubleWell;

    fn cold(dt: f64) -> LangevinParams {
        LangevinParams {
            dt,
            friction: 1.0,
            temperature: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn zero_temperature_at_minimum_is_fixed() {
        let spec = PotentialSpec::DoubleWell2D(DoubleWell::default());
        let mut noise = NoiseStream::new(1, 1);
        let c = Conformation::point(1.0, 0.0);
        let next = step_langevin(&c, &spec, &cold(5e-4), &mut noise).unwrap();
        assert_eq!(next, c);
    }

    #[test]
    fn zero_temperature_single_step_closed_form() {
        let spec = PotentialSpec::DoubleWell2D(DoubleWell::default());
        let mut noise = NoiseStream::new(1, 1);
        let (dt, gamma) = (1e-2, 2.0);
        let p = LangevinParams {
            dt,
            friction: gamma,
            temperature: 0.0,
            seed: 0,
        };
        let next = step_langevin(&Conformation::point(0.5, 0.5), &spec, &p, &mut noise).unwrap();
        // dV/dx = 4x(x^2-1) = -1.5 at x = 0.5; dV/dy = y
        let x = 0.5 + dt / gamma * 1.5;
        let y = 0.5 * (1.0 - dt / gamma);
        let [nx, ny, nz] = next.positions()[0];
        assert!((nx - x).abs() < 1e-12);
        assert!((ny - y).abs() < 1e-12);
        assert_eq!(nz, 0.0);
    }

    #[test]
    fn free_diffusion_variance() {
        // flat potential: a double well with both coefficients ~0
        let spec = PotentialSpec::DoubleWell2D(DoubleWell {
            barrier: 0.0,
            transverse: 0.0,
        });
        let p = LangevinParams {
            dt: 1e-3,
            friction: 1.0,
            temperature: 0.3,
            seed: 9,
        };
        let steps = 10_000;
        let replicas = 1000;
        let integ = Integrator::new(&spec, &p);
        let mut sum_sq = [0.0; 2];
        for r in 0..replicas {
            let mut noise = NoiseStream::new(p.seed, r);
            let mut x = Conformation::point(0.0, 0.0);
            let mut f = [[0.0; 3]];
            for s in 0..steps {
                integ.advance(&mut x, &mut f, &mut noise, s).unwrap();
            }
            sum_sq[0] += x.positions()[0][0].powi(2);
            sum_sq[1] += x.positions()[0][1].powi(2);
        }
        let expected = 2.0 * p.temperature / p.friction * (steps as f64 * p.dt);
        for v in sum_sq {
            let var = v / replicas as f64;
            assert!((var - expected).abs() / expected < 0.05, "{var} vs {expected}");
        }
    }

    #[test]
    fn zero_temperature_energy_non_increasing() {
        let g = GoChainBuilder::default().build().unwrap();
        let spec = PotentialSpec::GoChain3D(g);
        let p = cold(5e-4);
        let integ = Integrator::new(&spec, &p);
        let mut x = crate::dynamics::stretched_chain(10, 1.05);
        // kink it so the descent has work to do
        x.positions_mut()[4][1] = 0.4;
        x.positions_mut()[7][2] = -0.3;
        let mut f = vec![[0.0; 3]; 10];
        let mut noise = NoiseStream::new(0, 0);
        let mut prev = spec.potential_energy(&x).unwrap();
        for s in 0..1000 {
            integ.advance(&mut x, &mut f, &mut noise, s).unwrap();
            let e = spec.potential_energy(&x).unwrap();
            assert!(e <= prev + 1e-12, "step {s}: {e} > {prev}");
            prev = e;
        }
        let dw = PotentialSpec::DoubleWell2D(DoubleWell::default());
        let integ = Integrator::new(&dw, &p);
        let mut x = Conformation::point(0.1, 1.5);
        let mut f = [[0.0; 3]];
        let mut prev = dw.potential_energy(&x).unwrap();
        for s in 0..1000 {
            integ.advance(&mut x, &mut f, &mut noise, s).unwrap();
            let e = dw.potential_energy(&x).unwrap();
            assert!(e <= prev + 1e-15);
            prev = e;
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = LangevinParams::default();
        p.dt = 0.0;
        assert!(p.validate().is_err());
        p.dt = 1e-3;
        p.temperature = -1.0;
        assert!(p.validate().is_err());
    }
}

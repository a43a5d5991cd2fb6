use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bead positions of a chain (or a single particle) at one instant.
///
/// The 2-D backend stores `z = 0` for every bead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Conformation {
    positions: Vec<[f64; 3]>,
}

impl Conformation {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("conformation needs at least one bead"));
        }
        let c = Conformation { positions };
        c.check_finite()?;
        Ok(c)
    }

    pub fn point(x: f64, y: f64) -> Self {
        Conformation {
            positions: vec![[x, y, 0.0]],
        }
    }

    pub(crate) fn from_raw(positions: Vec<[f64; 3]>) -> Self {
        Conformation { positions }
    }

    pub fn bead_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.positions
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().flatten().all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("conformation coordinates"))
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(&self.positions[i], &self.positions[j])
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.positions.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.positions {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        c.map(|v| v / n)
    }

    /// Applies `x -> R x + t` to every bead; `rotation` is row-major.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], translation: [f64; 3]) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|p| {
                let mut q = translation;
                for (r, row) in rotation.iter().enumerate() {
                    q[r] += row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
                }
                q
            })
            .collect();
        Conformation { positions }
    }
}

#[inline]
pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

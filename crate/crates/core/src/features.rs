//! Contact maps, Kabsch-superposed RMSD and fraction of native contacts.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::Conformation;
use crate::error::{Error, Result};

/// Symmetric binary matrix: entry `(i, j)` is 1 iff beads `i` and `j` are
/// closer than `cutoff`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactMatrix {
    order: usize,
    entries: Vec<u8>,
}

impl ContactMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.order + j] != 0
    }

    pub fn count_ones(&self) -> usize {
        self.entries.iter().filter(|&&e| e != 0).count()
    }
}

pub fn contact_matrix(c: &Conformation, cutoff: f64) -> Result<ContactMatrix> {
    if !(cutoff > 0.0) {
        return Err(Error::invalid(format!("cutoff must be > 0, got {cutoff}")));
    }
    c.check_finite()?;
    let n = c.bead_count();
    let mut entries = vec![0u8; n * n];
    for i in 0..n {
        entries[i * n + i] = 1;
        for j in i + 1..n {
            if c.distance(i, j) < cutoff {
                entries[i * n + j] = 1;
                entries[j * n + i] = 1;
            }
        }
    }
    Ok(ContactMatrix { order: n, entries })
}

/// Row-major strict upper triangle, length `N(N-1)/2`.
pub fn vectorize(m: &ContactMatrix) -> Vec<f64> {
    let n = m.order;
    let mut v = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            v.push(m.entries[i * n + j] as f64);
        }
    }
    v
}

/// Strict upper triangle without the always-on `|i - j| = 1` entries.
pub fn vectorize_nonadjacent(m: &ContactMatrix) -> Vec<f64> {
    let n = m.order;
    let mut v = Vec::new();
    for i in 0..n {
        for j in i + 2..n {
            v.push(m.entries[i * n + j] as f64);
        }
    }
    v
}

/// Inverse of [`vectorize`]; entries are thresholded at 0.5.
pub fn unvectorize(v: &[f64], order: usize) -> Result<ContactMatrix> {
    let expected = order * order.saturating_sub(1) / 2;
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: v.len(),
        });
    }
    let mut entries = vec![0u8; order * order];
    let mut k = 0;
    for i in 0..order {
        entries[i * order + i] = 1;
        for j in i + 1..order {
            let e = u8::from(v[k] >= 0.5);
            entries[i * order + j] = e;
            entries[j * order + i] = e;
            k += 1;
        }
    }
    Ok(ContactMatrix { order, entries })
}

fn centered(c: &Conformation) -> Vec<Vector3<f64>> {
    let m = c.centroid();
    c.positions()
        .iter()
        .map(|p| Vector3::new(p[0] - m[0], p[1] - m[1], p[2] - m[2]))
        .collect()
}

/// Optimal proper rotation taking centered `a` onto centered `b`.
///
/// Collinear or otherwise rank-deficient inputs still yield the best proper
/// rotation the SVD exposes; that is not treated as an error.
pub fn kabsch_rotation(a: &Conformation, b: &Conformation) -> Result<Matrix3<f64>> {
    check_pair(a, b)?;
    let (pa, pb) = (centered(a), centered(b));
    Ok(rotation_from_centered(&pa, &pb))
}

fn rotation_from_centered(pa: &[Vector3<f64>], pb: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for (x, y) in pa.iter().zip(pb) {
        h += x * y.transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let d = (v_t.transpose() * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    v_t.transpose() * correction * u.transpose()
}

fn check_pair(a: &Conformation, b: &Conformation) -> Result<()> {
    if a.bead_count() != b.bead_count() {
        return Err(Error::DimensionMismatch {
            expected: a.bead_count(),
            got: b.bead_count(),
        });
    }
    if a.bead_count() < 3 {
        return Err(Error::invalid("kabsch_rmsd needs at least 3 beads"));
    }
    a.check_finite()?;
    b.check_finite()
}

/// Minimum RMSD over proper rigid motions.
pub fn kabsch_rmsd(a: &Conformation, b: &Conformation) -> Result<f64> {
    check_pair(a, b)?;
    let (pa, pb) = (centered(a), centered(b));
    let r = rotation_from_centered(&pa, &pb);
    let sum: f64 = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (r * x - y).norm_squared())
        .sum();
    Ok((sum / pa.len() as f64).sqrt())
}

/// Native pairs `(i, j)`, `|i - j| >= 2`, closer than `cutoff` in `native`.
pub fn native_contacts(native: &Conformation, cutoff: f64) -> Vec<(usize, usize)> {
    let n = native.bead_count();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 2..n {
            if native.distance(i, j) < cutoff {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

pub fn native_contact_fraction(c: &Conformation, native: &Conformation, cutoff: f64) -> Result<f64> {
    if c.bead_count() != native.bead_count() {
        return Err(Error::DimensionMismatch {
            expected: native.bead_count(),
            got: c.bead_count(),
        });
    }
    c.check_finite()?;
    native.check_finite()?;
    let pairs = native_contacts(native, cutoff);
    Ok(fraction_formed(c, &pairs, cutoff)?)
}

/// Share of `pairs` closer than `cutoff` in `c`.
pub fn fraction_formed(c: &Conformation, pairs: &[(usize, usize)], cutoff: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("native structure has no contact pairs with |i-j| >= 2"));
    }
    let formed = pairs.iter().filter(|&&(i, j)| c.distance(i, j) < cutoff).count();
    Ok(formed as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldingCoordinates {
    pub rmsd: f64,
    pub q: f64,
}

/// When a frame counts as folded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FoldCriterion {
    /// `rmsd < rmsd_below` or `q >= q_at_least`.
    Native { rmsd_below: f64, q_at_least: f64 },
    /// First bead's x coordinate above `x_above` (double-well basin change).
    Basin { x_above: f64 },
}

impl Default for FoldCriterion {
    fn default() -> Self {
        FoldCriterion::Native {
            rmsd_below: 0.4,
            q_at_least: 0.9,
        }
    }
}

impl FoldCriterion {
    pub fn is_folded(&self, c: &Conformation, coords: Option<FoldingCoordinates>) -> bool {
        match *self {
            FoldCriterion::Native { rmsd_below, q_at_least } => {
                coords.is_some_and(|fc| fc.rmsd < rmsd_below || fc.q >= q_at_least)
            }
            FoldCriterion::Basin { x_above } => c.positions()[0][0] > x_above,
        }
    }
}

/// Precomputed analysis against a fixed native structure.
#[derive(Debug, Clone)]
pub struct NativeReference {
    native: Conformation,
    pairs: Vec<(usize, usize)>,
    cutoff: f64,
}

impl NativeReference {
    pub fn new(native: Conformation, cutoff: f64) -> Result<Self> {
        let pairs = native_contacts(&native, cutoff);
        if pairs.is_empty() {
            return Err(Error::invalid("native structure has no contact pairs with |i-j| >= 2"));
        }
        Ok(NativeReference {
            native,
            pairs,
            cutoff,
        })
    }

    pub fn native(&self) -> &Conformation {
        &self.native
    }

    pub fn coordinates(&self, c: &Conformation) -> Result<FoldingCoordinates> {
        Ok(FoldingCoordinates {
            rmsd: kabsch_rmsd(c, &self.native)?,
            q: fraction_formed(c, &self.pairs, self.cutoff)?,
        })
    }
}

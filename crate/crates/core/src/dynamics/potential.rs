use serde::{Deserialize, Serialize};

use crate::dynamics::conformation::{dist, Conformation};
use crate::error::{Error, Result};

/// `V(x, y) = a (x^2 - 1)^2 + b y^2 / 2`; the default `a = b = 1`.
/// 2^(1/6): where the purely repulsive 12-6 term reaches zero.
const WCA_CUT: f64 = 1.122_462_048_309_373;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoubleWell {
    pub barrier: f64,
    pub transverse: f64,
}

impl Default for DoubleWell {
    fn default() -> Self {
        DoubleWell {
            barrier: 1.0,
            transverse: 1.0,
        }
    }
}

/// Structure-based chain: harmonic bonds, 12-6 attraction between native
/// contact pairs, and a truncated-shifted repulsive core for every other
/// non-bonded pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GoChain {
    native: Conformation,
    native_pairs: Vec<(usize, usize)>,
    is_native: Vec<bool>,
    pub bond_stiffness: f64,
    pub contact_epsilon: f64,
    pub contact_sigma: f64,
    pub contact_cutoff: f64,
    pub repulsion_epsilon: f64,
}

impl GoChain {
    pub fn new(
        native: Conformation,
        bond_stiffness: f64,
        contact_epsilon: f64,
        contact_sigma: f64,
        contact_cutoff: f64,
        repulsion_epsilon: f64,
    ) -> Result<Self> {
        let n = native.bead_count();
        if n < 3 {
            return Err(Error::invalid(format!("Gō chain needs >= 3 beads, got {n}")));
        }
        native.check_finite()?;
        for (name, v) in [
            ("bond_stiffness", bond_stiffness),
            ("contact_epsilon", contact_epsilon),
            ("contact_sigma", contact_sigma),
            ("contact_cutoff", contact_cutoff),
            ("repulsion_epsilon", repulsion_epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for i in 0..n - 1 {
            let r = native.distance(i, i + 1);
            if r < 0.8 * contact_sigma || r > 1.2 * contact_sigma {
                return Err(Error::invalid(format!(
                    "native bond {i}-{} has length {r:.4}, outside [0.8, 1.2] sigma",
                    i + 1
                )));
            }
        }
        let mut native_pairs = Vec::new();
        let mut is_native = vec![false; n * n];
        for i in 0..n {
            for j in i + 2..n {
                if native.distance(i, j) < contact_cutoff {
                    native_pairs.push((i, j));
                    is_native[i * n + j] = true;
                    is_native[j * n + i] = true;
                }
            }
        }
        Ok(GoChain {
            native,
            native_pairs,
            is_native,
            bond_stiffness,
            contact_epsilon,
            contact_sigma,
            contact_cutoff,
            repulsion_epsilon,
        })
    }

    pub fn native(&self) -> &Conformation {
        &self.native
    }

    pub fn bead_count(&self) -> usize {
        self.native.bead_count()
    }

    /// Pairs `(i, j)`, `j >= i + 2`, closer than the contact cutoff in the
    /// native structure.
    pub fn native_pairs(&self) -> &[(usize, usize)] {
        &self.native_pairs
    }

    pub fn is_native_pair(&self, i: usize, j: usize) -> bool {
        self.is_native[i * self.bead_count() + j]
    }

    /// Energy contribution and `dE/dr` for one pair at distance `r`.
    #[inline]
    fn pair_term(&self, i: usize, j: usize, r: f64) -> (f64, f64) {
        let s = self.contact_sigma;
        if j == i + 1 {
            let dr = r - s;
            return (self.bond_stiffness * dr * dr, 2.0 * self.bond_stiffness * dr);
        }
        if self.is_native_pair(i, j) {
            let sr6 = (s / r).powi(6);
            let e = 4.0 * self.contact_epsilon * (sr6 * sr6 - sr6);
            let de = 4.0 * self.contact_epsilon * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r;
            return (e, de);
        }
        // evaluated unconditionally and masked, so a step costs the same
        // whatever the chain's shape
        let on = if r < s * WCA_CUT { 1.0 } else { 0.0 };
        let sr6 = (s / r).powi(6);
        let e = 4.0 * self.repulsion_epsilon * (sr6 * sr6 - sr6) + self.repulsion_epsilon;
        let de = 4.0 * self.repulsion_epsilon * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r;
        (on * e, on * de)
    }

    fn energy_and_forces(&self, c: &Conformation, forces: Option<&mut [[f64; 3]]>) -> f64 {
        let x = c.positions();
        let n = x.len();
        let mut energy = 0.0;
        match forces {
            None => {
                for i in 0..n {
                    for j in i + 1..n {
                        energy += self.pair_term(i, j, dist(&x[i], &x[j])).0;
                    }
                }
            }
            Some(f) => {
                f.iter_mut().for_each(|v| *v = [0.0; 3]);
                for i in 0..n {
                    for j in i + 1..n {
                        let d = [x[j][0] - x[i][0], x[j][1] - x[i][1], x[j][2] - x[i][2]];
                        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                        let (e, de) = self.pair_term(i, j, r);
                        energy += e;
                        let g = de / r;
                        for k in 0..3 {
                            f[j][k] -= g * d[k];
                            f[i][k] += g * d[k];
                        }
                    }
                }
            }
        }
        energy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    DoubleWell2D(DoubleWell),
    GoChain3D(GoChain),
}

impl PotentialSpec {
    pub fn bead_count(&self) -> usize {
        match self {
            PotentialSpec::DoubleWell2D(_) => 1,
            PotentialSpec::GoChain3D(g) => g.bead_count(),
        }
    }

    /// Number of coordinates per bead that the dynamics moves.
    pub fn spatial_dims(&self) -> usize {
        match self {
            PotentialSpec::DoubleWell2D(_) => 2,
            PotentialSpec::GoChain3D(_) => 3,
        }
    }

    pub fn native(&self) -> Option<&Conformation> {
        match self {
            PotentialSpec::DoubleWell2D(_) => None,
            PotentialSpec::GoChain3D(g) => Some(g.native()),
        }
    }

    fn check(&self, c: &Conformation) -> Result<()> {
        if c.bead_count() != self.bead_count() {
            return Err(Error::DimensionMismatch {
                expected: self.bead_count(),
                got: c.bead_count(),
            });
        }
        c.check_finite()
    }

    pub fn potential_energy(&self, c: &Conformation) -> Result<f64> {
        self.check(c)?;
        Ok(self.energy_unchecked(c))
    }

    pub fn force(&self, c: &Conformation) -> Result<Vec<[f64; 3]>> {
        self.check(c)?;
        let mut f = vec![[0.0; 3]; c.bead_count()];
        self.energy_and_forces_into(c, &mut f);
        Ok(f)
    }

    pub(crate) fn energy_unchecked(&self, c: &Conformation) -> f64 {
        match self {
            PotentialSpec::DoubleWell2D(w) => {
                let [x, y, _] = c.positions()[0];
                let q = x * x - 1.0;
                w.barrier * q * q + 0.5 * w.transverse * y * y
            }
            PotentialSpec::GoChain3D(g) => g.energy_and_forces(c, None),
        }
    }

    /// Writes forces into `f` and returns the energy.
    pub(crate) fn energy_and_forces_into(&self, c: &Conformation, f: &mut [[f64; 3]]) -> f64 {
        match self {
            PotentialSpec::DoubleWell2D(w) => {
                let [x, y, _] = c.positions()[0];
                let q = x * x - 1.0;
                f[0] = [-4.0 * w.barrier * x * q, -w.transverse * y, 0.0];
                w.barrier * q * q + 0.5 * w.transverse * y * y
            }
            PotentialSpec::GoChain3D(g) => g.energy_and_forces(c, Some(f)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::native::{default_native, stretched_chain};
    use rand::Rng;
    use rand::SeedableRng;

    fn go() -> PotentialSpec {
        PotentialSpec::GoChain3D(
            GoChain::new(default_native(10), 100.0, 1.0, 1.0, 1.5, 1.0).unwrap(),
        )
    }

    /// Straight pairwise sum written independently of `pair_term`.
    fn brute_force_energy(g: &GoChain, c: &Conformation) -> f64 {
        let x = c.positions();
        let n = x.len();
        let s = g.contact_sigma;
        let mut bonds = 0.0;
        for i in 0..n - 1 {
            let r = c.distance(i, i + 1);
            bonds += g.bond_stiffness * (r - s).powi(2);
        }
        let mut attractive = 0.0;
        for &(i, j) in g.native_pairs() {
            let r = c.distance(i, j);
            attractive += 4.0 * g.contact_epsilon * ((s / r).powi(12) - (s / r).powi(6));
        }
        let mut repulsive = 0.0;
        let cut = s * 2f64.powf(1.0 / 6.0);
        for i in 0..n {
            for j in i + 2..n {
                if g.native_pairs().contains(&(i, j)) {
                    continue;
                }
                let r = c.distance(i, j);
                if r < cut {
                    repulsive += 4.0 * g.repulsion_epsilon * ((s / r).powi(12) - (s / r).powi(6))
                        + g.repulsion_epsilon;
                }
            }
        }
        bonds + attractive + repulsive
    }

    pub(crate) fn random_chain(rng: &mut impl Rng, n: usize) -> Conformation {
        // self-avoiding-ish random walk with bond lengths in [0.9, 1.1]
        loop {
            let mut pos: Vec<[f64; 3]> = vec![[0.0; 3]];
            let mut ok = true;
            for _ in 1..n {
                let last = *pos.last().unwrap();
                let mut placed = false;
                for _attempt in 0..100 {
                    let u: [f64; 3] = [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ];
                    let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                    if !(0.1..=1.0).contains(&norm) {
                        continue;
                    }
                    let len = rng.random_range(0.9..1.1);
                    let p = [
                        last[0] + len * u[0] / norm,
                        last[1] + len * u[1] / norm,
                        last[2] + len * u[2] / norm,
                    ];
                    if pos.iter().all(|q| dist(q, &p) > 0.85) {
                        pos.push(p);
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Conformation::new(pos).unwrap();
            }
        }
    }

    #[test]
    fn double_well_values() {
        let dw = PotentialSpec::DoubleWell2D(DoubleWell::default());
        assert_eq!(dw.potential_energy(&Conformation::point(1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(dw.potential_energy(&Conformation::point(0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(dw.force(&Conformation::point(1.0, 0.0)).unwrap()[0], [0.0, 0.0, 0.0]);
        let f = dw.force(&Conformation::point(0.0, 0.0)).unwrap()[0];
        assert_eq!(f[0].abs() + f[1].abs(), 0.0);
    }

    #[test]
    fn go_energy_at_native_matches_pairwise_sum() {
        let spec = go();
        let PotentialSpec::GoChain3D(g) = &spec else { unreachable!() };
        let e = spec.potential_energy(g.native()).unwrap();
        let oracle = brute_force_energy(g, g.native());
        assert!(((e - oracle) / oracle).abs() < 1e-12, "{e} vs {oracle}");
    }

    #[test]
    fn go_energy_random_matches_pairwise_sum() {
        let spec = go();
        let PotentialSpec::GoChain3D(g) = &spec else { unreachable!() };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c = random_chain(&mut rng, 10);
            let e = spec.potential_energy(&c).unwrap();
            let oracle = brute_force_energy(g, &c);
            assert!(((e - oracle) / oracle.abs().max(1e-12)).abs() < 1e-12);
        }
    }

    fn fd_force(spec: &PotentialSpec, c: &Conformation, h: f64) -> Vec<[f64; 3]> {
        let dims = spec.spatial_dims();
        let mut out = vec![[0.0; 3]; c.bead_count()];
        for b in 0..c.bead_count() {
            for k in 0..dims {
                let mut plus = c.clone();
                plus.positions_mut()[b][k] += h;
                let mut minus = c.clone();
                minus.positions_mut()[b][k] -= h;
                out[b][k] = -(spec.potential_energy(&plus).unwrap()
                    - spec.potential_energy(&minus).unwrap())
                    / (2.0 * h);
            }
        }
        out
    }

    fn rel_err(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in a.iter().zip(b) {
            for k in 0..3 {
                num += (x[k] - y[k]).powi(2);
                den += x[k].powi(2);
            }
        }
        num.sqrt() / den.sqrt().max(1e-12)
    }

    #[test]
    fn go_force_matches_finite_differences() {
        let spec = go();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c = random_chain(&mut rng, 10);
            let f = spec.force(&c).unwrap();
            let fd = fd_force(&spec, &c, 1e-6);
            let e = rel_err(&f, &fd);
            assert!(e < 1e-6, "relative error {e}");
        }
    }

    #[test]
    fn double_well_force_matches_finite_differences() {
        let spec = PotentialSpec::DoubleWell2D(DoubleWell::default());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let c = Conformation::point(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let e = rel_err(&spec.force(&c).unwrap(), &fd_force(&spec, &c, 1e-6));
            assert!(e < 1e-6, "relative error {e}");
        }
    }

    #[test]
    fn go_rejects_bad_inputs() {
        let spec = go();
        let short = stretched_chain(5, 1.05);
        assert!(matches!(
            spec.potential_energy(&short),
            Err(Error::DimensionMismatch { expected: 10, got: 5 })
        ));
        let mut bad = stretched_chain(10, 1.05);
        bad.positions_mut()[3][1] = f64::INFINITY;
        assert!(matches!(spec.force(&bad), Err(Error::NonFinite(_))));
        assert!(GoChain::new(stretched_chain(2, 1.0), 100.0, 1.0, 1.0, 1.5, 1.0).is_err());
        assert!(GoChain::new(stretched_chain(5, 1.5), 100.0, 1.0, 1.0, 1.5, 1.0).is_err());
        assert!(GoChain::new(stretched_chain(5, 1.0), 0.0, 1.0, 1.0, 1.5, 1.0).is_err());
    }
}

//! Chain parameters, the single-magnon spectrum, and the propagator matrix.
//!
//! The uniform open XY chain diagonalizes into `N` independent magnon modes
//! with momenta `q_m = pi m / (N+1)` and excitation energies
//! `E_m = 2h - 2J cos(q_m)` measured relative to the all-down vacuum. The
//! propagator entry
//!
//! ```text
//! f_{j,l}(t) = 2/(N+1) * sum_m sin(q_m j) sin(q_m l) exp(-i E_m t)
//! ```
//!
//! is the amplitude for an excitation created at site `j` to be found at site
//! `l` a time `t` later. Each row of the matrix is a unit vector, the matrix
//! is symmetric, and it is invariant under the site mirror `j -> N+1-j`.

#![allow(clippy::needless_range_loop)]

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Couplings and geometry of the uniform open chain.
///
/// `j_z` is carried for the exact oracle; the analytic propagator and the
/// sector evolution are built in the `j_z = 0` regime where the magnon
/// picture is exact. Energies are in units of `j_xy`, times in its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    pub n_sites: usize,
    pub j_xy: f64,
    pub j_z: f64,
    pub h_field: f64,
}

impl ChainParams {
    pub fn new(n_sites: usize, j_xy: f64, j_z: f64, h_field: f64) -> Result<Self> {
        let params = ChainParams { n_sites, j_xy, j_z, h_field };
        params.validate()?;
        Ok(params)
    }

    /// The standard setup: `J = 1`, `J_z = 0`, `h = 1`.
    pub fn uniform(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, 1.0, 0.0, 1.0)
    }

    /// Same chain with a different magnetic field.
    pub fn with_field(mut self, h_field: f64) -> Self {
        self.h_field = h_field;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::EmptyChain);
        }
        if self.j_xy == 0.0 {
            return Err(Error::ZeroCoupling);
        }
        Ok(())
    }

    /// Energy of the all-down vacuum: `J_z (N-1) - h N`.
    ///
    /// The vacuum is the field ground state; a magnon costs `+2h` against it.
    /// This global phase cancels in every fidelity but fixes the convention
    /// the dense oracle must reproduce.
    pub fn vacuum_energy(&self) -> f64 {
        self.j_z * (self.n_sites as f64 - 1.0) - self.h_field * self.n_sites as f64
    }
}

/// One magnon mode of the open chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnonMode {
    /// Mode index `m` in `1..=N`.
    pub index: usize,
    /// Momentum `q_m = pi m / (N+1)`.
    pub momentum: f64,
    /// Excitation energy `E_m = 2h - 2J cos(q_m)` relative to the vacuum.
    pub energy: f64,
}

/// The `N` magnon modes of the chain, in mode order.
pub fn magnon_modes(params: &ChainParams) -> Vec<MagnonMode> {
    let n = params.n_sites;
    (1..=n)
        .map(|m| {
            let momentum = std::f64::consts::PI * m as f64 / (n as f64 + 1.0);
            MagnonMode {
                index: m,
                momentum,
                energy: 2.0 * params.h_field - 2.0 * params.j_xy * momentum.cos(),
            }
        })
        .collect()
}

/// The `N x N` single-magnon propagator at a fixed time.
#[derive(Debug, Clone)]
pub struct PropagatorMatrix {
    time: f64,
    entries: Array2<Complex64>,
}

impl PropagatorMatrix {
    pub fn n_sites(&self) -> usize {
        self.entries.nrows()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Entry `f_{j,l}` with 1-based site indices.
    pub fn entry(&self, j: usize, l: usize) -> Complex64 {
        self.entries[[j - 1, l - 1]]
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        &self.entries
    }

    /// Largest deviation of a row's squared-magnitude sum from one.
    pub fn max_row_norm_defect(&self) -> f64 {
        let n = self.n_sites();
        (0..n)
            .map(|j| {
                let s: f64 = (0..n).map(|l| self.entries[[j, l]].norm_sqr()).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation from `f_{j,l} = f_{l,j}`.
    pub fn max_symmetry_defect(&self) -> f64 {
        let n = self.n_sites();
        let mut worst = 0.0f64;
        for j in 0..n {
            for l in (j + 1)..n {
                worst = worst.max((self.entries[[j, l]] - self.entries[[l, j]]).norm());
            }
        }
        worst
    }

    /// Largest deviation from `f_{j,l} = f_{N+1-j,N+1-l}`.
    pub fn max_mirror_defect(&self) -> f64 {
        let n = self.n_sites();
        let mut worst = 0.0f64;
        for j in 0..n {
            for l in 0..n {
                let d = self.entries[[j, l]] - self.entries[[n - 1 - j, n - 1 - l]];
                worst = worst.max(d.norm());
            }
        }
        worst
    }
}

/// Precomputed sine transform and mode energies of one chain.
///
/// `sines[[j-1, m-1]] = sqrt(2/(N+1)) sin(q_m j)` is orthogonal, so the
/// propagator factors as `S diag(exp(-iEt)) S^T` and single entries, rows, or
/// state overlaps can be evaluated without building the full matrix.
#[derive(Debug, Clone)]
pub struct ModeTable {
    n_sites: usize,
    energies: Vec<f64>,
    sines: Array2<f64>,
}

impl ModeTable {
    pub fn new(params: &ChainParams) -> Self {
        let n = params.n_sites;
        let modes = magnon_modes(params);
        let norm = (2.0 / (n as f64 + 1.0)).sqrt();
        let mut sines = Array2::zeros((n, n));
        for j in 1..=n {
            for (col, mode) in modes.iter().enumerate() {
                sines[[j - 1, col]] = norm * (mode.momentum * j as f64).sin();
            }
        }
        ModeTable { n_sites: n, energies: modes.iter().map(|m| m.energy).collect(), sines }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Orthogonal sine matrix, `[site-1, mode-1]`.
    pub fn sines(&self) -> &Array2<f64> {
        &self.sines
    }

    /// Mode phase factors `exp(-i E_m t)`.
    pub fn phases(&self, t: f64) -> Vec<Complex64> {
        self.energies.iter().map(|&e| Complex64::from_polar(1.0, -e * t)).collect()
    }

    /// Single propagator entry `f_{j,l}` from precomputed phases (1-based).
    pub fn entry(&self, j: usize, l: usize, phases: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..self.n_sites {
            acc += self.sines[[j - 1, m]] * self.sines[[l - 1, m]] * phases[m];
        }
        acc
    }

    /// Mode weights `w_m = sum_j a_j S_{j,m}` of a sparse one-magnon
    /// amplitude list (1-based sites).
    pub fn project(&self, amplitudes: &[(usize, Complex64)]) -> Vec<Complex64> {
        let mut weights = vec![Complex64::new(0.0, 0.0); self.n_sites];
        for &(site, amp) in amplitudes {
            for m in 0..self.n_sites {
                weights[m] += amp * self.sines[[site - 1, m]];
            }
        }
        weights
    }

    /// Site amplitude `a_l(t) = sum_m S_{l,m} w_m exp(-i E_m t)` (1-based).
    pub fn amplitude_at(
        &self,
        site: usize,
        mode_weights: &[Complex64],
        phases: &[Complex64],
    ) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..self.n_sites {
            acc += self.sines[[site - 1, m]] * mode_weights[m] * phases[m];
        }
        acc
    }

    /// Full propagator matrix at time `t`.
    pub fn matrix(&self, t: f64) -> PropagatorMatrix {
        let n = self.n_sites;
        let phases = self.phases(t);
        let mut entries = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
        for j in 0..n {
            for l in j..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..n {
                    acc += self.sines[[j, m]] * self.sines[[l, m]] * phases[m];
                }
                entries[[j, l]] = acc;
                entries[[l, j]] = acc;
            }
        }
        PropagatorMatrix { time: t, entries }
    }
}

/// The propagator `f_{j,l}(t)` for the given chain.
pub fn propagator(params: &ChainParams, t: f64) -> PropagatorMatrix {
    ModeTable::new(params).matrix(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray_linalg::{Eigh, UPLO};

    #[test]
    fn mode_energies_match_stated_values() {
        let params = ChainParams::uniform(3).unwrap();
        let modes = magnon_modes(&params);
        assert_eq!(modes.len(), 3);
        // m=2 sits at the band center: q = pi/2, E = 2h
        assert_abs_diff_eq!(modes[1].momentum, std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(modes[1].energy, 2.0, epsilon = 1e-15);

        let single = magnon_modes(&ChainParams::uniform(1).unwrap());
        assert_abs_diff_eq!(single[0].momentum, std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(single[0].energy, 2.0, epsilon = 1e-15);

        let four = magnon_modes(&ChainParams::uniform(4).unwrap());
        let expected = 2.0 - 2.0 * (std::f64::consts::PI / 5.0).cos();
        assert_abs_diff_eq!(four[0].energy, expected, epsilon = 1e-14);
    }

    #[test]
    fn mode_spectrum_matches_tridiagonal_diagonalization() {
        // Independent route: the one-excitation block relative to the vacuum
        // is tridiagonal with diagonal 2h and off-diagonal -J.
        for n in [2usize, 4, 7] {
            let params = ChainParams::new(n, 1.0, 0.0, 1.3).unwrap();
            let mut block = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                block[[i, i]] = 2.0 * params.h_field;
                if i + 1 < n {
                    block[[i, i + 1]] = -params.j_xy;
                    block[[i + 1, i]] = -params.j_xy;
                }
            }
            let (evals, _) = block.eigh(UPLO::Lower).unwrap();
            let mut energies: Vec<f64> =
                magnon_modes(&params).iter().map(|m| m.energy).collect();
            energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in energies.iter().zip(evals.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        for n in [1usize, 5, 12] {
            let prop = propagator(&ChainParams::uniform(n).unwrap(), 0.0);
            for j in 1..=n {
                for l in 1..=n {
                    let expected = if j == l { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(prop.entry(j, l).re, expected, epsilon = 1e-13);
                    assert_abs_diff_eq!(prop.entry(j, l).im, 0.0, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn single_site_propagator_is_field_phase() {
        let params = ChainParams::new(1, 1.0, 0.0, 0.7).unwrap();
        for t in [0.3, 2.0, 17.5] {
            let f = propagator(&params, t).entry(1, 1);
            let expected = Complex64::from_polar(1.0, -2.0 * params.h_field * t);
            assert_abs_diff_eq!((f - expected).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn propagator_invariants_hold() {
        for (n, t) in [(6usize, 5.0), (20, 13.0), (48, 25.0)] {
            let prop = propagator(&ChainParams::uniform(n).unwrap(), t);
            assert!(prop.max_row_norm_defect() < 1e-12, "row norm {n} {t}");
            assert!(prop.max_symmetry_defect() < 1e-12, "symmetry {n} {t}");
            assert!(prop.max_mirror_defect() < 1e-12, "mirror {n} {t}");
        }
    }

    #[test]
    fn propagators_compose_in_time() {
        let params = ChainParams::uniform(9).unwrap();
        let (t1, t2) = (1.7, 4.2);
        let a = propagator(&params, t1);
        let b = propagator(&params, t2);
        let c = propagator(&params, t1 + t2);
        let prod = a.as_array().dot(b.as_array());
        let worst = prod
            .iter()
            .zip(c.as_array().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "composition defect {worst}");
    }

    #[test]
    fn field_only_rotates_the_global_phase() {
        let n = 8;
        let t = 3.25;
        let base = propagator(&ChainParams::uniform(n).unwrap(), t);
        let shifted = propagator(&ChainParams::uniform(n).unwrap().with_field(1.8), t);
        let rot = Complex64::from_polar(1.0, -2.0 * 0.8 * t);
        let worst = base
            .as_array()
            .iter()
            .zip(shifted.as_array().iter())
            .map(|(b, s)| (b * rot - s).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "field phase defect {worst}");
    }

    #[test]
    fn frozen_entry_regression() {
        // N=6, t=5, J=h=1; value pinned against the dense oracle.
        let f = propagator(&ChainParams::uniform(6).unwrap(), 5.0).entry(1, 6);
        assert_abs_diff_eq!(f.re, -0.2672051477455076, epsilon = 1e-12);
        assert_abs_diff_eq!(f.im, -0.4121241389500346, epsilon = 1e-12);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(matches!(ChainParams::new(0, 1.0, 0.0, 1.0), Err(Error::EmptyChain)));
        assert!(matches!(ChainParams::new(4, 0.0, 0.0, 1.0), Err(Error::ZeroCoupling)));
    }

    #[test]
    fn mode_table_entry_matches_matrix() {
        let params = ChainParams::uniform(11).unwrap();
        let table = ModeTable::new(&params);
        let t = 6.4;
        let phases = table.phases(t);
        let full = table.matrix(t);
        for (j, l) in [(1, 1), (2, 9), (11, 4)] {
            let d = (table.entry(j, l, &phases) - full.entry(j, l)).norm();
            assert!(d < 1e-14);
        }
    }
}

//! Dense ground truth: the full `2^N` Hamiltonian in the spin z-basis, exact
//! time evolution by spectral decomposition, and the dense partial trace.
//!
//! Every analytic path in this crate is validated against this module at
//! small `N`. Basis ordering: site 1 is the most significant bit of the basis
//! index and bit value 1 means spin up. The all-down vacuum is index 0 and is
//! the field ground state: each down spin contributes `-h` to the diagonal,
//! each up spin `+h`, adjacent equal spins `+J_z`, unequal `-J_z`, and the xy
//! exchange flips adjacent anti-aligned pairs with amplitude `-J`. Unlike the
//! magnon formulas, this construction accepts arbitrary `J_z`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::chain::ChainParams;
use crate::error::{Error, Result};
use crate::fidelity::ReducedBlockState;
use crate::state::{Configuration, ExcitationState};

/// Default cap on the exactly-diagonalized chain length (`2^14` basis states).
pub const DEFAULT_DIMENSION_CAP: usize = 14;

/// Basis index of the spin configuration with the given sites up (1-based).
pub fn basis_index(sites: &[usize], n_sites: usize) -> usize {
    sites.iter().fold(0usize, |acc, &l| acc | (1 << (n_sites - l)))
}

/// The dense spin-basis Hamiltonian of one chain.
#[derive(Debug, Clone)]
pub struct DenseHamiltonian {
    n_sites: usize,
    matrix: Array2<f64>,
}

/// Build the dense Hamiltonian, capped at [`DEFAULT_DIMENSION_CAP`] sites.
pub fn build_hamiltonian(params: &ChainParams) -> Result<DenseHamiltonian> {
    build_hamiltonian_capped(params, DEFAULT_DIMENSION_CAP)
}

/// Build the dense Hamiltonian with an explicit site cap.
pub fn build_hamiltonian_capped(params: &ChainParams, cap: usize) -> Result<DenseHamiltonian> {
    params.validate()?;
    let n = params.n_sites;
    if n > cap {
        return Err(Error::DimensionCap { n_sites: n, cap });
    }
    let dim = 1usize << n;
    let mut matrix = Array2::<f64>::zeros((dim, dim));
    for index in 0..dim {
        let bit = |site: usize| (index >> (n - site)) & 1; // 1-based site
        let mut diag = 0.0;
        for site in 1..=n {
            diag += if bit(site) == 1 { params.h_field } else { -params.h_field };
        }
        for site in 1..n {
            diag += if bit(site) == bit(site + 1) { params.j_z } else { -params.j_z };
        }
        matrix[[index, index]] = diag;
        for site in 1..n {
            if bit(site) != bit(site + 1) {
                let flipped = index ^ (1 << (n - site)) ^ (1 << (n - site - 1));
                matrix[[index, flipped]] = -params.j_xy;
            }
        }
    }
    Ok(DenseHamiltonian { n_sites: n, matrix })
}

impl DenseHamiltonian {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Largest matrix element connecting different excitation sectors.
    /// Exactly zero by construction; checked rather than trusted.
    pub fn sector_defect(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                if (i as u64).count_ones() != (j as u64).count_ones() {
                    worst = worst.max(self.matrix[[i, j]].abs());
                }
            }
        }
        worst
    }

    /// Energy expectation of a (complex) state vector.
    pub fn expectation(&self, psi: &Array1<Complex64>) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..self.dim() {
                let m = self.matrix[[i, j]];
                if m != 0.0 {
                    row += m * psi[j];
                }
            }
            acc += psi[i].conj() * row;
        }
        acc.re
    }
}

/// Spectral decomposition of a dense Hamiltonian, reusable across times.
#[derive(Debug, Clone)]
pub struct ExactEvolver {
    n_sites: usize,
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl ExactEvolver {
    pub fn new(hamiltonian: &DenseHamiltonian) -> Self {
        Self::from_matrix(hamiltonian.n_sites, &hamiltonian.matrix)
    }

    /// Decompose an arbitrary real-symmetric spin Hamiltonian on `n_sites`
    /// sites (e.g. two decoupled chains laid side by side).
    pub fn from_matrix(n_sites: usize, matrix: &Array2<f64>) -> Self {
        assert_eq!(matrix.nrows(), 1 << n_sites, "matrix dimension is not 2^n_sites");
        let (eigenvalues, eigenvectors) =
            matrix.eigh(UPLO::Lower).expect("symmetric eigensolve");
        ExactEvolver { n_sites, eigenvalues, eigenvectors }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `exp(-iHt) |psi>` through the eigenbasis.
    pub fn evolve(&self, psi: &Array1<Complex64>, t: f64) -> Array1<Complex64> {
        let dim = psi.len();
        let mut coeffs = Array1::from_elem(dim, Complex64::new(0.0, 0.0));
        for k in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..dim {
                acc += self.eigenvectors[[i, k]] * psi[i];
            }
            coeffs[k] = acc * Complex64::from_polar(1.0, -self.eigenvalues[k] * t);
        }
        let mut out = Array1::from_elem(dim, Complex64::new(0.0, 0.0));
        for i in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                acc += self.eigenvectors[[i, k]] * coeffs[k];
            }
            out[i] = acc;
        }
        out
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }
}

/// Exact partial trace of `|psi><psi|` onto the given (ascending, 1-based)
/// sites.
pub fn partial_trace_dense(
    psi: &Array1<Complex64>,
    n_sites: usize,
    keep_sites: &[usize],
) -> Result<ReducedBlockState> {
    validate_block(n_sites, keep_sites)?;
    if psi.len() != 1 << n_sites {
        return Err(Error::SizeMismatch { expected: 1 << n_sites, found: psi.len() });
    }
    let b = keep_sites.len();
    let env_sites: Vec<usize> = (1..=n_sites).filter(|s| !keep_sites.contains(s)).collect();
    let block_dim = 1usize << b;
    let mut rho = Array2::from_elem((block_dim, block_dim), Complex64::new(0.0, 0.0));
    let env_dim = 1usize << env_sites.len();
    for env in 0..env_dim {
        let mut env_index = 0usize;
        for (pos, &site) in env_sites.iter().enumerate() {
            if (env >> (env_sites.len() - 1 - pos)) & 1 == 1 {
                env_index |= 1 << (n_sites - site);
            }
        }
        for p in 0..block_dim {
            let ip = compose_index(env_index, p, keep_sites, n_sites);
            if psi[ip] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for q in 0..block_dim {
                let iq = compose_index(env_index, q, keep_sites, n_sites);
                rho[[p, q]] += psi[ip] * psi[iq].conj();
            }
        }
    }
    ReducedBlockState::new(keep_sites.to_vec(), rho)
}

fn compose_index(env_index: usize, block_pattern: usize, keep_sites: &[usize], n: usize) -> usize {
    let mut index = env_index;
    for (pos, &site) in keep_sites.iter().enumerate() {
        if (block_pattern >> (keep_sites.len() - 1 - pos)) & 1 == 1 {
            index |= 1 << (n - site);
        }
    }
    index
}

fn validate_block(n_sites: usize, sites: &[usize]) -> Result<()> {
    if sites.is_empty() {
        return Err(Error::InvalidBlock("block must contain at least one site".into()));
    }
    for w in sites.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidBlock("block sites must be strictly ascending".into()));
        }
    }
    if sites[0] == 0 || *sites.last().unwrap() > n_sites {
        return Err(Error::InvalidBlock(format!(
            "block sites must lie in 1..={n_sites}"
        )));
    }
    Ok(())
}

/// Embed a sparse excitation state into the dense `2^N` vector. The
/// canonical ascending-order configurations map to spin basis states with
/// sign `+1`.
pub fn embed(state: &ExcitationState) -> Array1<Complex64> {
    let n = state.n_sites();
    let mut psi = Array1::from_elem(1usize << n, Complex64::new(0.0, 0.0));
    for (config, amp) in state.iter() {
        psi[basis_index(&config.sites(), n)] += amp;
    }
    psi
}

/// Read a dense vector back into the sparse sector representation.
///
/// Errors with `SectorOverflow` if more than `1e-10` of the amplitude (in
/// magnitude) sits above the excitation cap.
pub fn extract(psi: &Array1<Complex64>, n_sites: usize, sector_cap: usize) -> Result<ExcitationState> {
    let dim = 1usize << n_sites;
    if psi.len() != dim {
        return Err(Error::SizeMismatch { expected: dim, found: psi.len() });
    }
    let cap = sector_cap.min(2);
    let mut amplitudes = Vec::new();
    let mut overflow = 0.0f64;
    for index in 0..dim {
        let amp = psi[index];
        if amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        let count = (index as u64).count_ones() as usize;
        if count > cap {
            overflow = overflow.max(amp.norm());
            continue;
        }
        let mut sites = Vec::with_capacity(count);
        for site in 1..=n_sites {
            if (index >> (n_sites - site)) & 1 == 1 {
                sites.push(site);
            }
        }
        let config = match sites.len() {
            0 => Configuration::Vacuum,
            1 => Configuration::Single(sites[0]),
            _ => Configuration::Pair(sites[0], sites[1]),
        };
        amplitudes.push((config, amp));
    }
    if overflow > 1e-10 {
        return Err(Error::SectorOverflow { cap, weight: overflow });
    }
    ExcitationState::new(n_sites, amplitudes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::propagator;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_site_hamiltonian_diagonal() {
        let params = ChainParams::new(1, 1.0, 0.0, 0.8).unwrap();
        let h = build_hamiltonian(&params).unwrap();
        // index 0 = |down> (vacuum, field ground state), index 1 = |up>
        assert_abs_diff_eq!(h.matrix()[[0, 0]], -0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(h.matrix()[[1, 1]], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn two_site_single_excitation_block() {
        let params = ChainParams::new(2, 1.0, 0.0, 0.0).unwrap();
        let h = build_hamiltonian(&params).unwrap();
        // |10> = index 2, |01> = index 1
        assert_abs_diff_eq!(h.matrix()[[2, 1]], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.matrix()[[1, 2]], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.matrix()[[1, 1]], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.matrix()[[2, 2]], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hamiltonian_is_sector_block_diagonal() {
        let params = ChainParams::new(6, 1.0, 0.4, 0.9).unwrap();
        let h = build_hamiltonian(&params).unwrap();
        assert_eq!(h.sector_defect(), 0.0);
    }

    #[test]
    fn dimension_cap_applies() {
        let params = ChainParams::uniform(15).unwrap();
        assert!(matches!(
            build_hamiltonian(&params),
            Err(Error::DimensionCap { n_sites: 15, cap: 14 })
        ));
        assert!(build_hamiltonian_capped(&ChainParams::uniform(4).unwrap(), 4).is_ok());
    }

    #[test]
    fn evolve_identity_at_zero_and_eigenvector_phase() {
        let params = ChainParams::new(4, 1.0, 0.2, 1.1).unwrap();
        let h = build_hamiltonian(&params).unwrap();
        let ev = ExactEvolver::new(&h);
        let mut psi = Array1::from_elem(h.dim(), Complex64::new(0.0, 0.0));
        psi[3] = Complex64::new(1.0, 0.0);
        let out = ev.evolve(&psi, 0.0);
        assert!((out[3] - Complex64::new(1.0, 0.0)).norm() < 1e-12);

        // an eigenvector only picks up its phase
        let k = 5;
        let vec: Array1<Complex64> =
            ev.eigenvectors.column(k).iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let t = 2.7;
        let evolved = ev.evolve(&vec, t);
        let phase = Complex64::from_polar(1.0, -ev.eigenvalues()[k] * t);
        let worst = evolved
            .iter()
            .zip(vec.iter())
            .map(|(a, b)| (a - phase * b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12);
    }

    #[test]
    fn single_magnon_evolution_reproduces_propagator() {
        // This is the check of the closed-form propagator itself.
        let n = 8;
        let params = ChainParams::uniform(n).unwrap();
        let h = build_hamiltonian(&params).unwrap();
        let ev = ExactEvolver::new(&h);
        let t = 7.0;
        let state = ExcitationState::basis(n, Configuration::Single(1)).unwrap();
        let evolved = ev.evolve(&embed(&state), t);
        let prop = propagator(&params, t);
        let global = Complex64::from_polar(1.0, -params.vacuum_energy() * t);
        for l in 1..=n {
            let dense = evolved[basis_index(&[l], n)];
            let analytic = global * prop.entry(1, l);
            assert!((dense - analytic).norm() < 1e-10, "site {l}");
        }
    }

    #[test]
    fn energy_is_conserved() {
        let params = ChainParams::new(6, 1.0, 0.3, 0.7).unwrap();
        let h = build_hamiltonian(&params).unwrap();
        let ev = ExactEvolver::new(&h);
        let mut psi = Array1::from_elem(h.dim(), Complex64::new(0.0, 0.0));
        psi[basis_index(&[1], 6)] = Complex64::new(0.6, 0.0);
        psi[basis_index(&[2, 5], 6)] = Complex64::new(0.0, 0.8);
        let before = h.expectation(&psi);
        let after = h.expectation(&ev.evolve(&psi, 11.0));
        assert_abs_diff_eq!(before, after, epsilon = 1e-10);
    }

    #[test]
    fn partial_trace_of_product_state_is_pure() {
        // |10> on two sites: tracing out site 2 leaves a pure |1><1|
        let mut psi = Array1::from_elem(4, Complex64::new(0.0, 0.0));
        psi[2] = Complex64::new(1.0, 0.0);
        let rho = partial_trace_dense(&psi, 2, &[1]).unwrap();
        assert!((rho.matrix()[[1, 1]] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(rho.matrix()[[0, 0]].norm() < 1e-14);
    }

    #[test]
    fn partial_trace_of_bell_pair_is_maximally_mixed() {
        let mut psi = Array1::from_elem(4, Complex64::new(0.0, 0.0));
        psi[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        psi[3] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let rho = partial_trace_dense(&psi, 2, &[2]).unwrap();
        assert!((rho.matrix()[[0, 0]] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((rho.matrix()[[1, 1]] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(rho.matrix()[[0, 1]].norm() < 1e-14);
    }

    #[test]
    fn embed_extract_round_trip() {
        let state = ExcitationState::normalized(
            4,
            [
                (Configuration::Vacuum, Complex64::new(0.5, 0.0)),
                (Configuration::Single(2), Complex64::new(0.0, 0.5)),
                (Configuration::Pair(1, 3), Complex64::new(-0.5, 0.5)),
            ],
        )
        .unwrap();
        let back = extract(&embed(&state), 4, 2).unwrap();
        for (config, amp) in state.iter() {
            assert!((back.amplitude(config) - amp).norm() < 1e-14);
        }
        // c1+ c3+ |0> on N=4 sits on |1010>
        let pair = ExcitationState::basis(4, Configuration::Pair(1, 3)).unwrap();
        let psi = embed(&pair);
        assert!((psi[basis_index(&[1, 3], 4)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(basis_index(&[1, 3], 4), 0b1010);
    }

    #[test]
    fn extract_flags_weight_above_the_cap() {
        let mut psi = Array1::from_elem(8, Complex64::new(0.0, 0.0));
        psi[0b111] = Complex64::new(1.0, 0.0); // three excitations on N=3
        assert!(matches!(extract(&psi, 3, 2), Err(Error::SectorOverflow { .. })));
    }
}

//! Received block states, transfer fidelities, the closed two-spin and
//! Bloch-averaged forms, and peak detection on fidelity traces.
//!
//! The transfer fidelity against an ideal state `|phi>` on a receiving block
//! is `F = sqrt(<phi| rho(t) |phi>)` with `rho(t)` the reduced density matrix
//! of the block. Because states live in sparse excitation sectors, the
//! partial trace groups amplitudes by their occupation pattern outside the
//! block; configurations agreeing there contribute coherences.

use std::collections::BTreeMap;
use std::io::{self, Write};

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{ChainParams, PropagatorMatrix};
use crate::encoding::{logical_state, target_state, BlochState, LogicalEncoding, Placement};
use crate::error::{Error, Result};
use crate::state::{evolve, Configuration, ExcitationState};

/// Default prominence threshold for peak detection.
pub const DEFAULT_PEAK_PROMINENCE: f64 = 0.02;

/// Reduced density matrix of a block of sites.
///
/// Block basis: ascending block sites, first block site = most significant
/// bit, bit 1 = spin up — the same ordering the dense oracle uses.
#[derive(Debug, Clone)]
pub struct ReducedBlockState {
    block_sites: Vec<usize>,
    matrix: Array2<Complex64>,
}

impl ReducedBlockState {
    pub(crate) fn new(block_sites: Vec<usize>, matrix: Array2<Complex64>) -> Result<Self> {
        let dim = 1usize << block_sites.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::SizeMismatch { expected: dim, found: matrix.nrows() });
        }
        Ok(ReducedBlockState { block_sites, matrix })
    }

    pub fn block_sites(&self) -> &[usize] {
        &self.block_sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.matrix[[i, i]]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                worst = worst.max((self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue; positive semidefiniteness up to rounding.
    pub fn min_eigenvalue(&self) -> f64 {
        let (evals, _) = self.matrix.eigh(UPLO::Lower).expect("hermitian eigensolve");
        evals.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `Re <v| rho |v>`, clipped into `[0, 1]`.
    pub fn expectation(&self, v: &Array1<Complex64>) -> f64 {
        assert_eq!(v.len(), self.dim(), "block vector dimension mismatch");
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..self.dim() {
                row += self.matrix[[i, j]] * v[j];
            }
            acc += v[i].conj() * row;
        }
        acc.re.clamp(0.0, 1.0)
    }
}

fn validate_block(n_sites: usize, block_sites: &[usize]) -> Result<()> {
    if block_sites.is_empty() {
        return Err(Error::InvalidBlock("block must contain at least one site".into()));
    }
    for w in block_sites.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidBlock("block sites must be strictly ascending".into()));
        }
    }
    if block_sites[0] == 0 || *block_sites.last().unwrap() > n_sites {
        return Err(Error::InvalidBlock(format!("block sites must lie in 1..={n_sites}")));
    }
    Ok(())
}

/// Occupation pattern of a configuration restricted to the block, or `None`
/// if any block membership is ambiguous (never: sites either belong or not).
fn split_config(
    config: &Configuration,
    block_sites: &[usize],
) -> (usize, Vec<usize>) {
    let mut pattern = 0usize;
    let mut env = Vec::new();
    for site in config.sites() {
        match block_sites.iter().position(|&b| b == site) {
            Some(pos) => pattern |= 1 << (block_sites.len() - 1 - pos),
            None => env.push(site),
        }
    }
    (pattern, env)
}

fn env_key(env: &[usize]) -> Configuration {
    match env.len() {
        0 => Configuration::Vacuum,
        1 => Configuration::Single(env[0]),
        _ => Configuration::Pair(env[0], env[1]),
    }
}

/// Partial trace of `|state><state|` over the complement of `block_sites`.
pub fn reduce_to_block(
    state: &ExcitationState,
    block_sites: &[usize],
) -> Result<ReducedBlockState> {
    validate_block(state.n_sites(), block_sites)?;
    let dim = 1usize << block_sites.len();
    let mut groups: BTreeMap<Configuration, Vec<(usize, Complex64)>> = BTreeMap::new();
    for (config, amp) in state.iter() {
        let (pattern, env) = split_config(config, block_sites);
        groups.entry(env_key(&env)).or_default().push((pattern, *amp));
    }
    let mut rho = Array2::from_elem((dim, dim), Complex64::new(0.0, 0.0));
    for group in groups.values() {
        for &(p, a) in group {
            for &(q, b) in group {
                rho[[p, q]] += a * b.conj();
            }
        }
    }
    ReducedBlockState::new(block_sites.to_vec(), rho)
}

/// Block-local vector of a state supported entirely on `block_sites`.
/// Errors with `BlockMismatch` naming the first stray site otherwise.
pub fn block_vector(state: &ExcitationState, block_sites: &[usize]) -> Result<Array1<Complex64>> {
    validate_block(state.n_sites(), block_sites)?;
    let dim = 1usize << block_sites.len();
    let mut v = Array1::from_elem(dim, Complex64::new(0.0, 0.0));
    for (config, amp) in state.iter() {
        let (pattern, env) = split_config(config, block_sites);
        if let Some(&site) = env.first() {
            return Err(Error::BlockMismatch { site });
        }
        v[pattern] += amp;
    }
    Ok(v)
}

/// Transfer fidelity `sqrt(<target| rho |target>)` of `state` read on
/// `block_sites` against a target supported on that block.
pub fn fidelity(
    state: &ExcitationState,
    target: &ExcitationState,
    block_sites: &[usize],
) -> Result<f64> {
    if state.n_sites() != target.n_sites() {
        return Err(Error::SizeMismatch {
            expected: state.n_sites(),
            found: target.n_sites(),
        });
    }
    let v = block_vector(target, block_sites)?;
    let rho = reduce_to_block(state, block_sites)?;
    Ok(rho.expectation(&v).sqrt())
}

/// Closed-form two-spin transfer fidelity `|conj(alpha) A_N + conj(beta) A_{N-1}|`
/// with `A_l = beta f_{1,l} + alpha f_{2,l}`.
pub fn two_spin_fidelity_closed_form(
    prop: &PropagatorMatrix,
    alpha: Complex64,
    beta: Complex64,
) -> f64 {
    let n = prop.n_sites();
    assert!(n >= 2, "two-spin encoding needs at least two sites");
    debug_assert!((alpha.norm_sqr() + beta.norm_sqr() - 1.0).abs() < 1e-10);
    let a = |l: usize| beta * prop.entry(1, l) + alpha * prop.entry(2, l);
    (alpha.conj() * a(n) + beta.conj() * a(n - 1)).norm()
}

/// The four-term Bloch-sphere average for the vacuum-singlet encoding, from
/// the three received-block amplitudes `g = [G_{N-2}, G_{N-1}, G_N]`:
///
/// ```text
/// F_av = 1/3 + Re[(G_N - G_{N-2})/sqrt2]/3 + |(G_N - G_{N-2})/sqrt2|^2/3
///      + (1 - |G_N|^2 - |G_{N-1}|^2 - |G_{N-2}|^2)/6
/// ```
pub fn vacuum_singlet_average_fidelity(g: [Complex64; 3]) -> f64 {
    let coherent = (g[2] - g[0]) * std::f64::consts::FRAC_1_SQRT_2;
    let leaked = 1.0 - g[0].norm_sqr() - g[1].norm_sqr() - g[2].norm_sqr();
    (1.0 / 3.0) + coherent.re / 3.0 + coherent.norm_sqr() / 3.0 + leaked / 6.0
}

/// Bloch-sphere average for the bare single-site encoding, from the received
/// amplitude `f_{1,N}`.
pub fn single_site_average_fidelity(f: Complex64) -> f64 {
    (1.0 / 3.0) + f.re / 3.0 + f.norm_sqr() / 3.0 + (1.0 - f.norm_sqr()) / 6.0
}

/// Bloch-sphere-averaged transfer fidelity of the vacuum-singlet encoding at
/// time `t`, from the propagator (closed form).
pub fn average_fidelity_closed_form(prop: &PropagatorMatrix) -> Result<f64> {
    let n = prop.n_sites();
    if n < 5 {
        return Err(Error::ChainTooShort { n_sites: n, block_size: 5 });
    }
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let g_at = |i: usize| (prop.entry(3, i) - prop.entry(1, i)) * s2;
    Ok(vacuum_singlet_average_fidelity([g_at(n - 2), g_at(n - 1), g_at(n)]))
}

/// Monte-Carlo Bloch-sphere average of the squared fidelity through the
/// general evolve/reduce path. Deterministic for a fixed seed; the
/// independent cross-check of the closed form above.
pub fn monte_carlo_average_fidelity(
    params: &ChainParams,
    encoding: &LogicalEncoding,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = params.n_sites;
    let block: Vec<usize> = ((n - encoding.block_size() + 1)..=n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let cos_theta: f64 = 1.0 - 2.0 * rng.gen::<f64>();
        let theta = cos_theta.acos();
        let phi = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        let bloch = BlochState::new(theta, phi)?;
        let initial = logical_state(encoding, &bloch, Placement::Start, n)?;
        let target = target_state(encoding, &bloch, n)?;
        let evolved = evolve(&initial, params, t)?;
        let f = fidelity(&evolved, &target, &block)?;
        total += f * f;
    }
    Ok(total / samples as f64)
}

/// One located maximum of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub time: f64,
    pub value: f64,
}

/// Local maxima of `values` over a uniform `times` grid with at least the
/// given prominence, refined by quadratic interpolation through the three
/// samples around each peak.
pub fn find_peaks(times: &[f64], values: &[f64], prominence: f64) -> Vec<Peak> {
    assert_eq!(times.len(), values.len());
    let n = values.len();
    let mut peaks = Vec::new();
    if n < 3 {
        return peaks;
    }
    for i in 1..n - 1 {
        if !(values[i] > values[i - 1] && values[i] >= values[i + 1]) {
            continue;
        }
        // prominence: drop to the lowest point before higher ground on each side
        let mut left_base = values[i];
        for k in (0..i).rev() {
            if values[k] > values[i] {
                break;
            }
            left_base = left_base.min(values[k]);
        }
        let mut right_base = values[i];
        for k in i + 1..n {
            if values[k] > values[i] {
                break;
            }
            right_base = right_base.min(values[k]);
        }
        if values[i] - left_base.max(right_base) < prominence {
            continue;
        }
        let (time, value) = refine_quadratic(times, values, i);
        peaks.push(Peak { time, value });
    }
    peaks
}

/// Vertex of the parabola through samples `i-1, i, i+1`.
pub(crate) fn refine_quadratic(times: &[f64], values: &[f64], i: usize) -> (f64, f64) {
    let step = times[1] - times[0];
    let denom = values[i - 1] - 2.0 * values[i] + values[i + 1];
    if denom.abs() < f64::EPSILON {
        return (times[i], values[i]);
    }
    let offset = 0.5 * (values[i - 1] - values[i + 1]) / denom;
    let time = times[i] + offset * step;
    let value = values[i] - 0.25 * (values[i - 1] - values[i + 1]) * offset;
    (time, value.clamp(values[i], 1.0))
}

/// A fidelity time series with its detected peaks.
#[derive(Debug, Clone)]
pub struct FidelityTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub peaks: Vec<Peak>,
}

impl FidelityTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>, prominence: f64) -> Self {
        let peaks = find_peaks(&times, &values, prominence);
        FidelityTrace { times, values, peaks }
    }

    /// CSV with full-precision scientific notation, columns `t,F`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,F")?;
        for (t, f) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t:.16e},{f:.16e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::propagator;
    use crate::encoding::EncodingName;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reduction_of_state_inside_block_is_pure() {
        let state = ExcitationState::normalized(
            6,
            [
                (Configuration::Single(4), c(0.6, 0.0)),
                (Configuration::Single(6), c(0.0, 0.8)),
            ],
        )
        .unwrap();
        let rho = reduce_to_block(&state, &[4, 5, 6]).unwrap();
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
        // purity: tr(rho^2) = 1
        let m = rho.matrix();
        let purity: f64 = m.dot(m).diag().iter().map(|z| z.re).sum();
        assert_abs_diff_eq!(purity, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn excitation_outside_block_reduces_to_block_vacuum() {
        let state = ExcitationState::basis(4, Configuration::Single(1)).unwrap();
        let rho = reduce_to_block(&state, &[3, 4]).unwrap();
        assert!((rho.matrix()[[0, 0]] - c(1.0, 0.0)).norm() < 1e-14);
        for i in 1..4 {
            assert!(rho.matrix()[[i, i]].norm() < 1e-14);
        }
    }

    #[test]
    fn density_matrix_invariants_hold_for_random_mixed_state() {
        let state = ExcitationState::normalized(
            8,
            [
                (Configuration::Vacuum, c(0.2, 0.1)),
                (Configuration::Single(2), c(-0.4, 0.3)),
                (Configuration::Pair(1, 5), c(0.5, 0.0)),
                (Configuration::Pair(6, 8), c(0.1, -0.6)),
            ],
        )
        .unwrap();
        let rho = reduce_to_block(&state, &[6, 7, 8]).unwrap();
        assert!(rho.hermiticity_defect() < 1e-12);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-10);
        assert!(rho.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn fidelity_is_one_at_the_sending_block() {
        let enc = LogicalEncoding::new(EncodingName::ThreeQubit1);
        let bloch = BlochState::new(0.8, 1.9).unwrap();
        let state = logical_state(&enc, &bloch, Placement::Start, 8).unwrap();
        let f = fidelity(&state, &state, &[1, 2, 3]).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn target_outside_block_is_rejected() {
        let state = ExcitationState::vacuum(6).unwrap();
        let target = ExcitationState::basis(6, Configuration::Single(2)).unwrap();
        let err = fidelity(&state, &target, &[4, 5, 6]);
        assert!(matches!(err, Err(Error::BlockMismatch { site: 2 })));
    }

    #[test]
    fn closed_form_matches_general_path_for_two_spin() {
        let n = 5;
        let params = ChainParams::uniform(n).unwrap();
        let enc = LogicalEncoding::new(EncodingName::TwoQubit);
        let bloch = BlochState::new(1.3, 0.7).unwrap();
        let initial = logical_state(&enc, &bloch, Placement::Start, n).unwrap();
        let target = target_state(&enc, &bloch, n).unwrap();
        for t in [0.0, 1.7, 6.1, 23.0] {
            let prop = propagator(&params, t);
            let closed = two_spin_fidelity_closed_form(&prop, bloch.alpha(), bloch.beta());
            let evolved = evolve(&initial, &params, t).unwrap();
            let general = fidelity(&evolved, &target, &[n - 1, n]).unwrap();
            assert_abs_diff_eq!(closed, general, epsilon = 1e-10);
        }
    }

    #[test]
    fn two_spin_closed_form_limits() {
        let params = ChainParams::uniform(7).unwrap();
        let prop0 = propagator(&params, 0.0);
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(
            two_spin_fidelity_closed_form(&prop0, c(s2, 0.0), c(s2, 0.0)),
            0.0,
            epsilon = 1e-12
        );
        let prop = propagator(&params, 4.0);
        let pure_zero = two_spin_fidelity_closed_form(&prop, c(1.0, 0.0), c(0.0, 0.0));
        assert_abs_diff_eq!(pure_zero, prop.entry(2, 7).norm(), epsilon = 1e-12);
    }

    #[test]
    fn average_fidelity_is_half_at_zero_time() {
        for n in [6usize, 10, 30] {
            let prop = propagator(&ChainParams::uniform(n).unwrap(), 0.0);
            assert_abs_diff_eq!(
                average_fidelity_closed_form(&prop).unwrap(),
                0.5,
                epsilon = 1e-12
            );
        }
        assert!(average_fidelity_closed_form(&propagator(
            &ChainParams::uniform(4).unwrap(),
            0.0
        ))
        .is_err());
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let n = 10;
        let params = ChainParams::new(n, 1.0, 0.0, 0.6).unwrap();
        let t = 3.7;
        let closed = average_fidelity_closed_form(&propagator(&params, t)).unwrap();
        let enc = LogicalEncoding::new(EncodingName::VacuumSinglet);
        let mc = monte_carlo_average_fidelity(&params, &enc, t, 10_000, 11).unwrap();
        assert!((closed - mc).abs() < 2e-3, "closed {closed} vs mc {mc}");
    }

    #[test]
    fn field_invariance_for_fixed_sector_encodings() {
        let n = 12;
        let t = 4.4;
        for name in [
            EncodingName::TwoQubit,
            EncodingName::ThreeQubit1,
            EncodingName::ThreeQubit2,
            EncodingName::FourQubit,
        ] {
            let enc = LogicalEncoding::new(name);
            let bloch = BlochState::new(1.9, 0.3).unwrap();
            let initial = logical_state(&enc, &bloch, Placement::Start, n).unwrap();
            let target = target_state(&enc, &bloch, n).unwrap();
            let block: Vec<usize> = ((n - enc.block_size() + 1)..=n).collect();
            let mut values = Vec::new();
            for h in [0.0, 2.0] {
                let params = ChainParams::new(n, 1.0, 0.0, h).unwrap();
                let evolved = evolve(&initial, &params, t).unwrap();
                values.push(fidelity(&evolved, &target, &block).unwrap());
            }
            assert!((values[0] - values[1]).abs() < 1e-10, "{name}");
        }
    }

    #[test]
    fn peaks_on_synthetic_traces() {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        let flat: Vec<f64> = times.iter().map(|_| 0.3).collect();
        assert!(find_peaks(&times, &flat, 0.02).is_empty());

        // sin^2(pi t / 4): interior maxima at t = 2, 6 (t = 10 is the edge)
        let wave: Vec<f64> =
            times.iter().map(|t| (std::f64::consts::PI * t / 4.0).sin().powi(2)).collect();
        let peaks = find_peaks(&times, &wave, 0.02);
        assert_eq!(peaks.len(), 2);
        for (peak, expected) in peaks.iter().zip([2.0, 6.0]) {
            assert_abs_diff_eq!(peak.time, expected, epsilon = 0.011);
            assert_abs_diff_eq!(peak.value, 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn trace_csv_round_trips_exactly() {
        let trace = FidelityTrace::new(
            vec![0.0, 0.05, 0.1],
            vec![0.0, 0.1234567890123456, 1.0],
            0.02,
        );
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for (line, (t, f)) in text.lines().skip(1).zip(trace.times.iter().zip(&trace.values)) {
            let mut cols = line.split(',');
            let tp: f64 = cols.next().unwrap().parse().unwrap();
            let fp: f64 = cols.next().unwrap().parse().unwrap();
            assert_eq!(tp.to_bits(), t.to_bits());
            assert_eq!(fp.to_bits(), f.to_bits());
        }
    }
}

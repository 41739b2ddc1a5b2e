//! The two reliability protocols: repeated swap-to-memory success
//! accumulation, and the dual-chain encode / CNOT-decode / measure
//! confirmation scheme.
//!
//! Memory protocol: at each swap time the receiver extracts the target
//! component of the chain state into a memory; the success probability of
//! swap `k` is the squared overlap with the ideal received state, the
//! remainder is renormalized and keeps evolving freely.
//!
//! Dual-chain protocol: the logical state is spread over two decoupled
//! chains as `alpha |0L>|1L> + beta |1L>|0L>` (vacuum-singlet encoding),
//! both chains evolve freely, a logical CNOT built from the two-site logical
//! X is undone on the receiving blocks, and measuring `|000>` on chain 2's
//! last three sites heralds the transfer on chain 1.

use ndarray::{linalg::kron, Array1, Array2};
use num_complex::Complex64;

use crate::chain::{ChainParams, ModeTable};
use crate::encoding::{logical_state, target_state, BlochState, LogicalEncoding, Placement};
use crate::error::{Error, Result};
use crate::state::evolve;

/// Success bookkeeping of the swap-to-memory protocol.
#[derive(Debug, Clone)]
pub struct MemoryProtocolResult {
    pub swap_times: Vec<f64>,
    /// Per-swap success probability `eta_k`.
    pub success_probabilities: Vec<f64>,
    /// Running failure probability `prod_k (1 - eta_k)` after each swap.
    pub cumulative_failure: Vec<f64>,
}

impl MemoryProtocolResult {
    /// Probability that at least one swap captured the state.
    pub fn cumulative_success(&self) -> f64 {
        1.0 - self.cumulative_failure.last().copied().unwrap_or(1.0)
    }
}

/// Run the swap-to-memory protocol at the given ascending swap times.
pub fn memory_protocol(
    params: &ChainParams,
    encoding: &LogicalEncoding,
    bloch: &BlochState,
    swap_times: &[f64],
) -> Result<MemoryProtocolResult> {
    params.validate()?;
    if swap_times.is_empty() {
        return Err(Error::InvalidGrid("memory protocol needs at least one swap time".into()));
    }
    if swap_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid("swap times must be strictly ascending".into()));
    }
    if swap_times[0] < 0.0 {
        return Err(Error::InvalidGrid("swap times must be nonnegative".into()));
    }
    let n = params.n_sites;
    let target = target_state(encoding, bloch, n)?;
    let mut current = logical_state(encoding, bloch, Placement::Start, n)?;
    let mut previous_time = 0.0;
    let mut etas = Vec::with_capacity(swap_times.len());
    let mut failures = Vec::with_capacity(swap_times.len());
    let mut failure = 1.0f64;
    for &t in swap_times {
        let arrived = evolve(&current, params, t - previous_time)?;
        let overlap = target.overlap(&arrived);
        let eta = overlap.norm_sqr().clamp(0.0, 1.0);
        etas.push(eta);
        failure *= 1.0 - eta;
        failures.push(failure);
        let remainder = arrived.subtract_scaled(overlap, &target);
        let remainder_norm = remainder.norm_sqr().sqrt();
        if remainder_norm < 1e-12 {
            // everything extracted; later swaps see an empty chain
            for _ in etas.len()..swap_times.len() {
                etas.push(0.0);
                failures.push(failure);
            }
            break;
        }
        current = remainder.rescaled(Complex64::new(1.0 / remainder_norm, 0.0));
        previous_time = t;
    }
    Ok(MemoryProtocolResult {
        swap_times: swap_times.to_vec(),
        success_probabilities: etas,
        cumulative_failure: failures,
    })
}

/// The printed logical X on the two singlet sites, in the ordered basis
/// `{|00>, |01>, |10>, |11>}`. Maps `|00>` to the singlet; unitary but not an
/// involution outside the logical subspace.
pub fn logical_x() -> Array2<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| Complex64::new(x, 0.0);
    let mut x = Array2::from_elem((4, 4), Complex64::new(0.0, 0.0));
    let rows = [
        [0.0, 1.0, 0.0, 0.0],
        [s, 0.0, 0.0, s],
        [-s, 0.0, 0.0, s],
        [0.0, 0.0, 1.0, 0.0],
    ];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = r(v);
        }
    }
    x
}

/// The logical X lifted to a three-site block: acts on block spins one and
/// three, identity on the middle spin. Block basis index is the bit pattern
/// `b1 b2 b3`.
pub fn logical_x_on_block() -> Array2<Complex64> {
    let x = logical_x();
    let mut out = Array2::from_elem((8, 8), Complex64::new(0.0, 0.0));
    for src in 0..8usize {
        let (b1, b2, b3) = ((src >> 2) & 1, (src >> 1) & 1, src & 1);
        let col = (b1 << 1) | b3;
        for outer in 0..4usize {
            let amp = x[[outer, col]];
            if amp != Complex64::new(0.0, 0.0) {
                let dst = ((outer >> 1) << 2) | (b2 << 1) | (outer & 1);
                out[[dst, src]] += amp;
            }
        }
    }
    out
}

/// The encode CNOT on the two blocks (chain-1 block major): apply the logical
/// X to chain 2's block when chain 1's block is `|000>`, identity otherwise.
pub fn logical_cnot() -> Array2<Complex64> {
    let dim = 8;
    let mut p0 = Array2::from_elem((dim, dim), Complex64::new(0.0, 0.0));
    p0[[0, 0]] = Complex64::new(1.0, 0.0);
    let mut rest = Array2::from_elem((dim, dim), Complex64::new(0.0, 0.0));
    for i in 1..dim {
        rest[[i, i]] = Complex64::new(1.0, 0.0);
    }
    let eye = Array2::from_diag(&Array1::from_elem(dim, Complex64::new(1.0, 0.0)));
    kron(&p0, &logical_x_on_block()) + kron(&rest, &eye)
}

fn dagger(m: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = Array2::from_elem((m.ncols(), m.nrows()), Complex64::new(0.0, 0.0));
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[[j, i]] = m[[i, j]].conj();
        }
    }
    out
}

/// Outcome of the dual-chain confirmation protocol.
#[derive(Debug, Clone)]
pub struct DualChainOutcome {
    /// Probability of reading `|000>` on chain 2's last three sites.
    pub confirm_probability: f64,
    /// Fidelity of chain 1's received block after a successful confirmation
    /// (zero if the confirmation probability vanishes).
    pub conditioned_fidelity: f64,
    /// Fidelity of chain 1's received block ignoring the measurement.
    pub unconditioned_fidelity: f64,
    /// Probability of each of the eight chain-2 block outcomes.
    pub outcome_probabilities: [f64; 8],
    /// Weight of the pre-decode block state outside the logical subspace of
    /// either chain.
    pub leakage_weight: f64,
}

/// Run the dual-chain protocol: encode `alpha |0L>|1L> + beta |1L>|0L>`
/// across two identical decoupled chains, evolve both freely for `t_wait`,
/// undo the logical CNOT on the receiving blocks, and measure chain 2's
/// block.
pub fn dual_chain_protocol(
    params: &ChainParams,
    bloch: &BlochState,
    t_wait: f64,
) -> Result<DualChainOutcome> {
    params.validate()?;
    let n = params.n_sites;
    if n < 6 {
        return Err(Error::BlockOverlap(n));
    }
    let alpha = bloch.alpha();
    let beta = bloch.beta();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;

    // the singlet wave on one chain; both chains evolve identically
    let table = ModeTable::new(params);
    let phases = table.phases(t_wait);
    let modes = table.project(&[
        (3, Complex64::new(s2, 0.0)),
        (1, Complex64::new(-s2, 0.0)),
    ]);
    let wave: Vec<Complex64> =
        (1..=n).map(|l| table.amplitude_at(l, &modes, &phases)).collect();
    let block_first = n - 2;
    // 8-dim block vector of the wave's in-block part: site N-2+k -> bit 2-k
    let mut block_wave = [Complex64::new(0.0, 0.0); 8];
    for k in 0..3usize {
        block_wave[1 << (2 - k)] = wave[block_first + k - 1];
    }
    let in_block: f64 = block_wave.iter().map(|a| a.norm_sqr()).sum();
    let wave_norm: f64 = wave.iter().map(|a| a.norm_sqr()).sum();
    let env_weight = (wave_norm - in_block).max(0.0);

    // joint block state over (chain-1 block) x (chain-2 block) for the
    // components whose excitation sits in a block; everything else shares
    // the |000,000> column with weight env_weight
    let mut joint = Array1::from_elem(64, Complex64::new(0.0, 0.0));
    for p in 0..8usize {
        joint[p] += alpha * block_wave[p]; // chain-1 block |000>
        joint[p * 8] += beta * block_wave[p]; // chain-2 block |000>
    }

    let decode = dagger(&logical_cnot());
    let decoded = decode.dot(&joint);
    let vac_column: Vec<Complex64> = (0..64).map(|i| decode[[i, 0]]).collect();

    let mut outcome_probabilities = [0.0f64; 8];
    for o in 0..8usize {
        let mut p = 0.0;
        for b1 in 0..8usize {
            p += decoded[b1 * 8 + o].norm_sqr() + env_weight * vac_column[b1 * 8 + o].norm_sqr();
        }
        outcome_probabilities[o] = p;
    }
    let confirm_probability = outcome_probabilities[0];

    // chain-1 block density matrices: conditioned on outcome |000>, and
    // unconditioned (chain 2 and both environments traced out)
    let mut rho_cond = Array2::from_elem((8, 8), Complex64::new(0.0, 0.0));
    let mut rho_unc = Array2::from_elem((8, 8), Complex64::new(0.0, 0.0));
    for b1 in 0..8usize {
        for b1p in 0..8usize {
            let cond = decoded[b1 * 8] * decoded[b1p * 8].conj()
                + env_weight * vac_column[b1 * 8] * vac_column[b1p * 8].conj();
            rho_cond[[b1, b1p]] += cond;
            for o in 0..8usize {
                rho_unc[[b1, b1p]] += decoded[b1 * 8 + o] * decoded[b1p * 8 + o].conj()
                    + env_weight * vac_column[b1 * 8 + o] * vac_column[b1p * 8 + o].conj();
            }
        }
    }

    // ideal chain-1 block state
    let mut target = Array1::from_elem(8, Complex64::new(0.0, 0.0));
    target[0] = alpha;
    target[0b001] = beta * s2;
    target[0b100] = -beta * s2;

    let quad = |rho: &Array2<Complex64>| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..8 {
            for j in 0..8 {
                acc += target[i].conj() * rho[[i, j]] * target[j];
            }
        }
        acc.re
    };
    let conditioned_fidelity = if confirm_probability > 1e-14 {
        (quad(&rho_cond) / confirm_probability).clamp(0.0, 1.0).sqrt()
    } else {
        0.0
    };
    let unconditioned_fidelity = quad(&rho_unc).clamp(0.0, 1.0).sqrt();

    // leakage of the pre-decode block state out of the logical subspaces
    let logical_project = |v: &Array1<Complex64>| -> f64 {
        // per chain: span{|000>, (|001>-|100>)/sqrt2}
        let proj_1d = [
            (0usize, Complex64::new(1.0, 0.0)),
        ];
        let singlet = [(0b001usize, s2), (0b100usize, -s2)];
        let mut weight = 0.0;
        // four logical x logical basis vectors
        let basis1: Vec<Vec<(usize, Complex64)>> = vec![
            proj_1d.iter().map(|&(i, a)| (i, a)).collect(),
            singlet.iter().map(|&(i, a)| (i, Complex64::new(a, 0.0))).collect(),
        ];
        for left in &basis1 {
            for right in &basis1 {
                let mut amp = Complex64::new(0.0, 0.0);
                for &(i, a) in left {
                    for &(j, b) in right {
                        amp += (a * b).conj() * v[i * 8 + j];
                    }
                }
                weight += amp.norm_sqr();
            }
        }
        weight
    };
    let logical_weight = logical_project(&joint) + env_weight;
    let leakage_weight = (1.0 - logical_weight).max(0.0);

    Ok(DualChainOutcome {
        confirm_probability,
        conditioned_fidelity,
        unconditioned_fidelity,
        outcome_probabilities,
        leakage_weight,
    })
}

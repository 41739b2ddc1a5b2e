//! The oracle-equivalence suite: randomized cross-checks of every analytic
//! path against dense exact evolution, reported as named checks with their
//! worst observed deviation.

use ndarray::Array1;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{propagator, ChainParams};
use crate::error::Result;
use crate::fidelity::reduce_to_block;
use crate::oracle::{build_hamiltonian, embed, partial_trace_dense, ExactEvolver};
use crate::state::{evolve, Configuration, ExcitationState};

/// One named check and its outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_deviation < self.tolerance
    }
}

/// Everything the suite measured for one chain length.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub n_sites: usize,
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

fn all_configurations(n: usize, sector: usize) -> Vec<Configuration> {
    match sector {
        0 => vec![Configuration::Vacuum],
        1 => (1..=n).map(Configuration::Single).collect(),
        _ => {
            let mut out = Vec::new();
            for a in 1..=n {
                for b in (a + 1)..=n {
                    out.push(Configuration::Pair(a, b));
                }
            }
            out
        }
    }
}

fn random_state(n: usize, sectors: &[usize], rng: &mut ChaCha8Rng) -> ExcitationState {
    let mut amplitudes = Vec::new();
    for &sector in sectors {
        for config in all_configurations(n, sector) {
            amplitudes.push((
                config,
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
            ));
        }
    }
    ExcitationState::normalized(n, amplitudes).expect("random state")
}

fn max_component_deviation(a: &Array1<Complex64>, b: &Array1<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Run the full suite at `J = h = 1`, `J_z = 0`, with random times in
/// `[0, 20]`. Deterministic for a fixed seed.
pub fn run_equivalence_suite(n_sites: usize, trials: usize, seed: u64) -> Result<VerificationReport> {
    let params = ChainParams::uniform(n_sites)?;
    let hamiltonian = build_hamiltonian(&params)?;
    let evolver = ExactEvolver::new(&hamiltonian);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // closed-form propagator entries against dense one-magnon evolution
    let mut worst = 0.0f64;
    for _ in 0..trials.min(8) {
        let t = 20.0 * rng.gen::<f64>();
        let prop = propagator(&params, t);
        let global = Complex64::from_polar(1.0, -params.vacuum_energy() * t);
        for j in 1..=n_sites {
            let state = ExcitationState::basis(n_sites, Configuration::Single(j))?;
            let dense = evolver.evolve(&embed(&state), t);
            for l in 1..=n_sites {
                let dense_amp = dense[crate::oracle::basis_index(&[l], n_sites)];
                worst = worst.max((dense_amp - global * prop.entry(j, l)).norm());
            }
        }
    }
    checks.push(CheckResult { name: "propagator-vs-oracle", max_deviation: worst, tolerance: 1e-9 });

    // per-sector and mixed-sector evolution
    for (name, sectors) in [
        ("one-magnon-evolution", vec![1usize]),
        ("two-magnon-evolution", vec![2usize]),
        ("mixed-sector-evolution", vec![0usize, 1, 2]),
    ] {
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let t = 20.0 * rng.gen::<f64>();
            let state = random_state(n_sites, &sectors, &mut rng);
            let analytic = embed(&evolve(&state, &params, t)?);
            let dense = evolver.evolve(&embed(&state), t);
            worst = worst.max(max_component_deviation(&analytic, &dense));
        }
        checks.push(CheckResult { name, max_deviation: worst, tolerance: 1e-9 });
    }

    // sparse partial trace against the dense one
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let t = 20.0 * rng.gen::<f64>();
        let state = evolve(&random_state(n_sites, &[0, 1, 2], &mut rng), &params, t)?;
        let block: Vec<usize> = match trial % 3 {
            0 => ((n_sites.saturating_sub(2).max(1))..=n_sites).collect(),
            1 => vec![1, n_sites],
            _ => vec![n_sites.div_ceil(2)],
        };
        let sparse = reduce_to_block(&state, &block)?;
        let dense = partial_trace_dense(&embed(&state), n_sites, &block)?;
        let defect = sparse
            .matrix()
            .iter()
            .zip(dense.matrix().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(defect);
    }
    checks.push(CheckResult { name: "partial-trace", max_deviation: worst, tolerance: 1e-10 });

    checks.push(CheckResult {
        name: "sector-block-diagonality",
        max_deviation: hamiltonian.sector_defect(),
        tolerance: 1e-12,
    });

    // energy conservation along dense evolution
    let mut worst = 0.0f64;
    for _ in 0..trials.min(10) {
        let t = 20.0 * rng.gen::<f64>();
        let psi = embed(&random_state(n_sites, &[0, 1, 2], &mut rng));
        let before = hamiltonian.expectation(&psi);
        let after = hamiltonian.expectation(&evolver.evolve(&psi, t));
        worst = worst.max((before - after).abs());
    }
    checks.push(CheckResult { name: "energy-conservation", max_deviation: worst, tolerance: 1e-10 });

    // embed/extract round trip
    let mut worst = 0.0f64;
    for _ in 0..trials.min(10) {
        let state = random_state(n_sites, &[0, 1, 2], &mut rng);
        let back = crate::oracle::extract(&embed(&state), n_sites, 2)?;
        for (config, amp) in state.iter() {
            worst = worst.max((back.amplitude(config) - amp).norm());
        }
    }
    checks.push(CheckResult { name: "embed-extract-roundtrip", max_deviation: worst, tolerance: 1e-12 });

    Ok(VerificationReport { n_sites, trials, seed, checks })
}

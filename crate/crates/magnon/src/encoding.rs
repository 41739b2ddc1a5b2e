//! DFS logical basis states and Bloch-parameterized logical qubits planted on
//! a block of chain sites.
//!
//! Bit strings read left to right as ascending sites within the block, with
//! `1` = spin up = one excitation. The logical vectors:
//!
//! * two-qubit: `|0L> = |01>`, `|1L> = |10>`
//! * three-qubit: `|0L> = a0 (|010>-|100>)/sqrt2 + b0 (|011>-|101>)/sqrt2`,
//!   `|1L> = a1 (2|001>-|010>-|100>)/sqrt6 + b1 (-2|110>+|011>+|101>)/sqrt6`;
//!   the one-excitation variant fixes `a=1, b=0`, the two-excitation variant
//!   `a=0, b=1`, and both accept a custom gauge
//! * four-qubit: `|0L> = (|0101>+|1010>-|0110>-|1001>)/2`,
//!   `|1L> = (2|0011>+2|1100>-|0110>-|1001>-|0101>-|1010>)/sqrt12`
//! * vacuum-singlet: `|0L> = |000>`, `|1L> = (|001>-|100>)/sqrt2` (sites one
//!   and three of the block form a singlet) — the encoding whose `|1L>`
//!   survives long chains
//!
//! End placement reads the same vectors left to right on the final block, so
//! the ideal received state is literally the sent vector relocated; that is
//! the convention under which the closed-form fidelities hold.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{Configuration, ExcitationState};

/// Gauge freedom of the three-qubit encoding: superposition coefficients for
/// the two invariant component pairs. Each pair must be normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauge {
    pub a0: Complex64,
    pub b0: Complex64,
    pub a1: Complex64,
    pub b1: Complex64,
}

impl Gauge {
    pub fn new(a0: Complex64, b0: Complex64, a1: Complex64, b1: Complex64) -> Result<Self> {
        let g = Gauge { a0, b0, a1, b1 };
        for (label, norm) in [
            ("(a0, b0)", a0.norm_sqr() + b0.norm_sqr()),
            ("(a1, b1)", a1.norm_sqr() + b1.norm_sqr()),
        ] {
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidGauge(format!(
                    "{label} has squared norm {norm}, expected 1"
                )));
            }
        }
        Ok(g)
    }

    /// One excitation in the chain: `a0 = a1 = 1`.
    pub fn one_excitation() -> Self {
        Gauge {
            a0: Complex64::new(1.0, 0.0),
            b0: Complex64::new(0.0, 0.0),
            a1: Complex64::new(1.0, 0.0),
            b1: Complex64::new(0.0, 0.0),
        }
    }

    /// Two excitations in the chain: `b0 = b1 = 1`.
    pub fn two_excitation() -> Self {
        Gauge {
            a0: Complex64::new(0.0, 0.0),
            b0: Complex64::new(1.0, 0.0),
            a1: Complex64::new(0.0, 0.0),
            b1: Complex64::new(1.0, 0.0),
        }
    }
}

/// The encoding families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingName {
    TwoQubit,
    ThreeQubit1,
    ThreeQubit2,
    FourQubit,
    VacuumSinglet,
}

impl EncodingName {
    pub const ALL: [EncodingName; 5] = [
        EncodingName::TwoQubit,
        EncodingName::ThreeQubit1,
        EncodingName::ThreeQubit2,
        EncodingName::FourQubit,
        EncodingName::VacuumSinglet,
    ];

    pub fn block_size(&self) -> usize {
        match self {
            EncodingName::TwoQubit => 2,
            EncodingName::ThreeQubit1 | EncodingName::ThreeQubit2 => 3,
            EncodingName::FourQubit => 4,
            EncodingName::VacuumSinglet => 3,
        }
    }
}

impl fmt::Display for EncodingName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EncodingName::TwoQubit => "two-qubit",
            EncodingName::ThreeQubit1 => "three-qubit-1",
            EncodingName::ThreeQubit2 => "three-qubit-2",
            EncodingName::FourQubit => "four-qubit",
            EncodingName::VacuumSinglet => "vacuum-singlet",
        };
        f.write_str(s)
    }
}

impl FromStr for EncodingName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-qubit" => Ok(EncodingName::TwoQubit),
            "three-qubit-1" => Ok(EncodingName::ThreeQubit1),
            "three-qubit-2" => Ok(EncodingName::ThreeQubit2),
            "four-qubit" => Ok(EncodingName::FourQubit),
            "vacuum-singlet" => Ok(EncodingName::VacuumSinglet),
            other => Err(Error::InvalidConfiguration(format!(
                "unknown encoding '{other}' (expected two-qubit | three-qubit-1 | \
                 three-qubit-2 | four-qubit | vacuum-singlet)"
            ))),
        }
    }
}

/// A named encoding plus (for the three-qubit family) its gauge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogicalEncoding {
    name: EncodingName,
    gauge: Option<Gauge>,
}

impl LogicalEncoding {
    /// Encoding with its default gauge.
    pub fn new(name: EncodingName) -> Self {
        let gauge = match name {
            EncodingName::ThreeQubit1 => Some(Gauge::one_excitation()),
            EncodingName::ThreeQubit2 => Some(Gauge::two_excitation()),
            _ => None,
        };
        LogicalEncoding { name, gauge }
    }

    /// Three-qubit encoding with a custom gauge.
    pub fn with_gauge(name: EncodingName, gauge: Gauge) -> Result<Self> {
        match name {
            EncodingName::ThreeQubit1 | EncodingName::ThreeQubit2 => {
                Ok(LogicalEncoding { name, gauge: Some(gauge) })
            }
            other => Err(Error::InvalidGauge(format!(
                "encoding {other} does not take a gauge"
            ))),
        }
    }

    pub fn name(&self) -> EncodingName {
        self.name
    }

    pub fn gauge(&self) -> Option<&Gauge> {
        self.gauge.as_ref()
    }

    pub fn block_size(&self) -> usize {
        self.name.block_size()
    }

    /// Logical `|0L>` in block coordinates (sites `1..=block_size`).
    pub fn logical_zero(&self) -> Vec<(Configuration, Complex64)> {
        self.logical_vector(false)
    }

    /// Logical `|1L>` in block coordinates.
    pub fn logical_one(&self) -> Vec<(Configuration, Complex64)> {
        self.logical_vector(true)
    }

    fn logical_vector(&self, one: bool) -> Vec<(Configuration, Complex64)> {
        let r = |x: f64| Complex64::new(x, 0.0);
        let single = |l: usize| Configuration::Single(l);
        let pair = |a: usize, b: usize| Configuration::Pair(a, b);
        match (self.name, one) {
            (EncodingName::TwoQubit, false) => vec![(single(2), r(1.0))],
            (EncodingName::TwoQubit, true) => vec![(single(1), r(1.0))],
            (EncodingName::ThreeQubit1 | EncodingName::ThreeQubit2, _) => {
                let g = self.gauge.expect("three-qubit encodings carry a gauge");
                let s2 = std::f64::consts::FRAC_1_SQRT_2;
                let s6 = 1.0 / 6f64.sqrt();
                if !one {
                    // a0 (|010> - |100>)/sqrt2 + b0 (|011> - |101>)/sqrt2
                    vec![
                        (single(2), g.a0 * s2),
                        (single(1), -g.a0 * s2),
                        (pair(2, 3), g.b0 * s2),
                        (pair(1, 3), -g.b0 * s2),
                    ]
                } else {
                    // a1 (2|001> - |010> - |100>)/sqrt6 + b1 (-2|110> + |011> + |101>)/sqrt6
                    vec![
                        (single(3), 2.0 * g.a1 * s6),
                        (single(2), -g.a1 * s6),
                        (single(1), -g.a1 * s6),
                        (pair(1, 2), -2.0 * g.b1 * s6),
                        (pair(2, 3), g.b1 * s6),
                        (pair(1, 3), g.b1 * s6),
                    ]
                }
            }
            (EncodingName::FourQubit, false) => vec![
                (pair(2, 4), r(0.5)),
                (pair(1, 3), r(0.5)),
                (pair(2, 3), r(-0.5)),
                (pair(1, 4), r(-0.5)),
            ],
            (EncodingName::FourQubit, true) => {
                let s12 = 1.0 / 12f64.sqrt();
                vec![
                    (pair(3, 4), r(2.0 * s12)),
                    (pair(1, 2), r(2.0 * s12)),
                    (pair(2, 3), r(-s12)),
                    (pair(1, 4), r(-s12)),
                    (pair(2, 4), r(-s12)),
                    (pair(1, 3), r(-s12)),
                ]
            }
            (EncodingName::VacuumSinglet, false) => vec![(Configuration::Vacuum, r(1.0))],
            (EncodingName::VacuumSinglet, true) => {
                let s2 = std::f64::consts::FRAC_1_SQRT_2;
                vec![(single(3), r(s2)), (single(1), r(-s2))]
            }
        }
    }
}

/// A point on the logical Bloch sphere: `cos(theta/2)|0L> + sin(theta/2) e^{i phi}|1L>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub theta: f64,
    pub phi: f64,
}

impl BlochState {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidBloch(format!("theta {theta} outside [0, pi]")));
        }
        if !(0.0..2.0 * std::f64::consts::PI).contains(&phi) && phi != 0.0 {
            return Err(Error::InvalidBloch(format!("phi {phi} outside [0, 2 pi)")));
        }
        Ok(BlochState { theta, phi })
    }

    /// The logical `|0L>` pole.
    pub fn zero() -> Self {
        BlochState { theta: 0.0, phi: 0.0 }
    }

    /// The logical `|1L>` pole.
    pub fn one() -> Self {
        BlochState { theta: std::f64::consts::PI, phi: 0.0 }
    }

    /// The equal superposition `(|0L> + |1L>)/sqrt2`.
    pub fn equator() -> Self {
        BlochState { theta: std::f64::consts::FRAC_PI_2, phi: 0.0 }
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::new((self.theta / 2.0).cos(), 0.0)
    }

    pub fn beta(&self) -> Complex64 {
        Complex64::from_polar((self.theta / 2.0).sin(), self.phi)
    }
}

/// Where the logical block sits on the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Start,
    End,
}

/// The encoded chain state with the logical block starting at `first_site`
/// and every other spin down.
pub fn logical_state_on_block(
    encoding: &LogicalEncoding,
    bloch: &BlochState,
    first_site: usize,
    n_sites: usize,
) -> Result<ExcitationState> {
    let b = encoding.block_size();
    if n_sites < b {
        return Err(Error::ChainTooShort { n_sites, block_size: b });
    }
    if first_site == 0 || first_site + b - 1 > n_sites {
        return Err(Error::InvalidBlock(format!(
            "block of {b} starting at {first_site} does not fit a chain of {n_sites}"
        )));
    }
    let alpha = bloch.alpha();
    let beta = bloch.beta();
    let mut amplitudes = Vec::new();
    for (config, amp) in encoding.logical_zero() {
        amplitudes.push((config.offset(first_site), alpha * amp));
    }
    for (config, amp) in encoding.logical_one() {
        amplitudes.push((config.offset(first_site), beta * amp));
    }
    ExcitationState::new(n_sites, amplitudes)
}

/// The encoded chain state at the start or the end of the chain.
pub fn logical_state(
    encoding: &LogicalEncoding,
    bloch: &BlochState,
    placement: Placement,
    n_sites: usize,
) -> Result<ExcitationState> {
    let b = encoding.block_size();
    if n_sites < b {
        return Err(Error::ChainTooShort { n_sites, block_size: b });
    }
    let first_site = match placement {
        Placement::Start => 1,
        Placement::End => n_sites - b + 1,
    };
    logical_state_on_block(encoding, bloch, first_site, n_sites)
}

/// The ideal received state: the same logical vector read on the final block.
pub fn target_state(
    encoding: &LogicalEncoding,
    bloch: &BlochState,
    n_sites: usize,
) -> Result<ExcitationState> {
    logical_state(encoding, bloch, Placement::End, n_sites)
}

/// The receiving block sites for an encoding placed at the chain end.
pub fn end_block(encoding: &LogicalEncoding, n_sites: usize) -> Result<Vec<usize>> {
    let b = encoding.block_size();
    if n_sites < b {
        return Err(Error::ChainTooShort { n_sites, block_size: b });
    }
    Ok(((n_sites - b + 1)..=n_sites).collect())
}

use thiserror::Error;

/// Errors surfaced by chain construction, state evolution, fidelity
/// computation, and the protocols.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("chain must have at least one site")]
    EmptyChain,
    #[error("xy exchange coupling must be nonzero")]
    ZeroCoupling,
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("state norm deviates from one by {0:.3e}")]
    NotNormalized(f64),
    #[error("state with zero norm cannot be normalized")]
    ZeroNorm,
    #[error("operation expects excitation number {expected}, found a configuration with {found}")]
    MixedSector { expected: usize, found: usize },
    #[error("size mismatch: expected {expected} sites, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("chain of {n_sites} sites is too short for a block of {block_size}")]
    ChainTooShort { n_sites: usize, block_size: usize },
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("target state occupies site {site} outside the receiving block")]
    BlockMismatch { site: usize },
    #[error("dense Hamiltonian dimension cap exceeded: {n_sites} sites > cap {cap}")]
    DimensionCap { n_sites: usize, cap: usize },
    #[error("state carries weight {weight:.3e} outside the {cap}-excitation sectors")]
    SectorOverflow { cap: usize, weight: f64 },
    #[error("chain of {0} sites cannot hold disjoint sending and receiving blocks")]
    BlockOverlap(usize),
    #[error("invalid gauge: {0}")]
    InvalidGauge(String),
    #[error("invalid Bloch angles: {0}")]
    InvalidBloch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

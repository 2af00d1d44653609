use thiserror::Error;

/// Errors shared across all simulation modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Requested Hilbert-space dimension exceeds the configured cap.
    #[error("dimension cap exceeded: requested {requested}, cap {cap}")]
    Capacity { requested: usize, cap: usize },

    /// Two values live on different bases, or a register is unknown.
    #[error("basis mismatch: {0}")]
    Basis(String),

    /// A numerical contract was violated (non-unitary operator marked
    /// unitary, non-Hermitian density matrix, off-shell momentum, ...).
    #[error("numerical contract violated: {0}")]
    Contract(String),

    /// Boundary states whose overlap is below the configured floor, or a
    /// post-selection that annihilates every pathway.
    #[error("incompatible boundary: {0}")]
    IncompatibleBoundary(String),

    /// An index lies outside a step decomposition or register range.
    #[error("index out of range: {0}")]
    Range(String),

    /// A guiding-field evaluation point is too close to a node.
    #[error("node region: |psi|^2 = {density:.3e} below floor {floor:.3e}")]
    Node { density: f64, floor: f64 },

    /// Invalid scenario configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

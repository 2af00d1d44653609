/// Central numerical tolerances and limits.
///
/// Every validation threshold used by the simulation lives here so that no
/// module carries its own ad-hoc magic numbers. Constructors and operations
/// use [`Tolerances::default`] unless an explicit override is passed.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Max-abs entrywise deviation allowed in U†U = I for operators marked unitary.
    pub unitary: f64,
    /// Max-abs entrywise deviation in P² = P and P† = P for marked projectors.
    pub projector: f64,
    /// Looser projector bound for operators produced by conjugation chains.
    pub projector_conjugated: f64,
    /// Max-abs entrywise deviation from Hermiticity for density matrices.
    pub hermitian: f64,
    /// Eigenvalues of a density matrix must exceed minus this value.
    pub psd: f64,
    /// |trace - 1| bound for density matrices flagged normalized.
    pub trace_one: f64,
    /// |norm - 1| bound for state vectors after normalization.
    pub norm: f64,
    /// Max-abs deviation of a projector family sum from the identity.
    pub completeness: f64,
    /// Boundary overlaps (and updated final traces) below this magnitude
    /// flag the boundary pair as incompatible.
    pub overlap_floor: f64,
    /// Dominance ratio lambda1/lambda2 above which the single-vector
    /// approximation of a density matrix is considered admissible.
    pub dominance_ratio: f64,
    /// Cap on the total Hilbert-space dimension.
    pub dim_cap: usize,
    /// Guiding-field node floor, relative to the coherent envelope.
    pub node_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unitary: 1e-10,
            projector: 1e-10,
            projector_conjugated: 1e-9,
            hermitian: 1e-10,
            psd: 1e-10,
            trace_one: 1e-10,
            norm: 1e-10,
            completeness: 1e-8,
            overlap_floor: 1e-30,
            dominance_ratio: 10.0,
            dim_cap: 1 << 14,
            node_floor: 1e-12,
        }
    }
}

impl Tolerances {
    /// Whether a dominance ratio admits the single-vector approximation.
    pub fn is_dominant(&self, ratio: f64) -> bool {
        ratio >= self.dominance_ratio
    }
}

//! Dense finite-dimensional Hilbert-space primitives.
//!
//! States, operators and density matrices live on a [`BasisLabel`], an
//! ordered list of named registers whose dimensions multiply to the total
//! dimension (capped, dense representation only). All values are immutable
//! after construction and every operation is a pure function, so shared
//! read-only data is safe to use from any number of workers.

mod basis;
mod density;
mod local;
mod operator;
pub mod random;
mod state;

pub use basis::{BasisLabel, Register};
pub use density::DensityMatrix;
pub(crate) use density::hermitian_eigen;
pub use local::{apply_local, apply_local_sequence, LocalOperator};
pub use operator::{qubit, Operator, OperatorKind};
pub use state::StateVector;

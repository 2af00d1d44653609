use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::basis::BasisLabel;
use crate::hilbert::operator::Operator;
use crate::tolerances::Tolerances;

/// A vector over a labeled tensor-product basis.
///
/// Amplitudes are not forced to unit norm on construction; `normalize`
/// guarantees unit norm within [`Tolerances::norm`]. Projected intermediates
/// are therefore representable.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: BasisLabel,
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(basis: BasisLabel, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::Basis(format!(
                "amplitude count {} does not match basis dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(StateVector {
            basis,
            amps: DVector::from_vec(amplitudes),
        })
    }

    pub(crate) fn from_dvector(basis: BasisLabel, amps: DVector<C64>) -> Self {
        debug_assert_eq!(basis.dim(), amps.len());
        StateVector { basis, amps }
    }

    /// Computational basis state |index>.
    pub fn basis_state(basis: BasisLabel, index: usize) -> Result<Self> {
        if index >= basis.dim() {
            return Err(Error::Range(format!(
                "basis index {index} out of range for dimension {}",
                basis.dim()
            )));
        }
        let mut amps = DVector::from_element(basis.dim(), C64::ZERO);
        amps[index] = C64::ONE;
        Ok(StateVector { basis, amps })
    }

    pub fn basis(&self) -> &BasisLabel {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub(crate) fn dvector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// Rescale to unit norm. Zero vectors cannot be normalized.
    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n <= 0.0 {
            return Err(Error::Contract("cannot normalize a zero vector".into()));
        }
        self.amps /= C64::new(n, 0.0);
        Ok(self)
    }

    pub fn is_normalized(&self, tol: &Tolerances) -> bool {
        (self.norm() - 1.0).abs() <= tol.norm
    }

    /// Inner product <self|other>, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.basis.require_match(&other.basis)?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Tensor product; register names must be disjoint.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let basis = self.basis.concat(&other.basis)?;
        Ok(StateVector {
            basis,
            amps: self.amps.kronecker(&other.amps),
        })
    }

    /// Apply a unitary. The operator must be marked unitary and share the basis.
    pub fn evolve(&self, u: &Operator) -> Result<StateVector> {
        if !u.is_unitary() {
            return Err(Error::Contract(
                "evolve requires an operator marked unitary".into(),
            ));
        }
        Ok(self.apply(u)?)
    }

    /// Apply any operator (projectors yield unnormalized results).
    pub fn apply(&self, op: &Operator) -> Result<StateVector> {
        self.basis.require_match(op.basis())?;
        Ok(StateVector {
            basis: self.basis.clone(),
            amps: op.matrix() * &self.amps,
        })
    }
}

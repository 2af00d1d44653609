use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::basis::BasisLabel;
use crate::tolerances::Tolerances;

/// Validated operator class. Marking happens at construction: an operator
/// marked `Unitary` satisfied U†U = I at build time, a `Projector` satisfied
/// P² = P and P† = P.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    General,
    Unitary,
    Projector,
}

/// A dense operator on a labeled tensor-product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    basis: BasisLabel,
    mat: DMatrix<C64>,
    kind: OperatorKind,
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl Operator {
    fn check_square(basis: &BasisLabel, mat: &DMatrix<C64>) -> Result<()> {
        if mat.nrows() != basis.dim() || mat.ncols() != basis.dim() {
            return Err(Error::Basis(format!(
                "matrix is {}x{}, basis dimension is {}",
                mat.nrows(),
                mat.ncols(),
                basis.dim()
            )));
        }
        Ok(())
    }

    pub fn general(basis: BasisLabel, mat: DMatrix<C64>) -> Result<Self> {
        Self::check_square(&basis, &mat)?;
        Ok(Operator {
            basis,
            mat,
            kind: OperatorKind::General,
        })
    }

    /// Build an operator marked unitary, validating U†U = I entrywise.
    pub fn unitary(basis: BasisLabel, mat: DMatrix<C64>) -> Result<Self> {
        Self::unitary_with(basis, mat, &Tolerances::default())
    }

    pub fn unitary_with(basis: BasisLabel, mat: DMatrix<C64>, tol: &Tolerances) -> Result<Self> {
        Self::check_square(&basis, &mat)?;
        let dim = basis.dim();
        let dev = max_abs(&(mat.adjoint() * &mat - DMatrix::identity(dim, dim)));
        if dev > tol.unitary {
            return Err(Error::Contract(format!(
                "operator marked unitary violates U†U = I by {dev:.3e} (tolerance {:.1e})",
                tol.unitary
            )));
        }
        Ok(Operator {
            basis,
            mat,
            kind: OperatorKind::Unitary,
        })
    }

    /// Build an operator marked projector, validating P² = P and P† = P.
    pub fn projector(basis: BasisLabel, mat: DMatrix<C64>) -> Result<Self> {
        Self::projector_with(basis, mat, Tolerances::default().projector)
    }

    pub fn projector_with(basis: BasisLabel, mat: DMatrix<C64>, tol: f64) -> Result<Self> {
        Self::check_square(&basis, &mat)?;
        let idem = max_abs(&(&mat * &mat - &mat));
        let herm = max_abs(&(mat.adjoint() - &mat));
        if idem > tol || herm > tol {
            return Err(Error::Contract(format!(
                "operator marked projector violates P²=P by {idem:.3e}, P†=P by {herm:.3e} (tolerance {tol:.1e})"
            )));
        }
        Ok(Operator {
            basis,
            mat,
            kind: OperatorKind::Projector,
        })
    }

    pub fn identity(basis: BasisLabel) -> Self {
        let dim = basis.dim();
        Operator {
            basis,
            mat: DMatrix::identity(dim, dim),
            kind: OperatorKind::Unitary,
        }
    }

    /// Embed a local operator on one register, identity elsewhere.
    pub fn embedded(
        basis: &BasisLabel,
        register: &str,
        local: &DMatrix<C64>,
        kind: OperatorKind,
    ) -> Result<Self> {
        let pos = basis
            .position(register)
            .ok_or_else(|| Error::Basis(format!("unknown register '{register}'")))?;
        let rdim = basis.registers()[pos].dim;
        if local.nrows() != rdim || local.ncols() != rdim {
            return Err(Error::Basis(format!(
                "local operator is {}x{}, register '{register}' has dimension {rdim}",
                local.nrows(),
                local.ncols()
            )));
        }
        let mut mat = DMatrix::identity(1, 1);
        for (i, reg) in basis.registers().iter().enumerate() {
            let factor = if i == pos {
                local.clone()
            } else {
                DMatrix::identity(reg.dim, reg.dim)
            };
            mat = mat.kronecker(&factor);
        }
        let out = Operator {
            basis: basis.clone(),
            mat,
            kind: OperatorKind::General,
        };
        match kind {
            OperatorKind::General => Ok(out),
            OperatorKind::Unitary => Operator::unitary(out.basis, out.mat),
            OperatorKind::Projector => Operator::projector(out.basis, out.mat),
        }
    }

    pub fn basis(&self) -> &BasisLabel {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn is_unitary(&self) -> bool {
        self.kind == OperatorKind::Unitary
    }

    pub fn is_projector(&self) -> bool {
        self.kind == OperatorKind::Projector
    }

    /// Matrix product `self · other`. Unitarity survives composition;
    /// anything else degrades to a general operator.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        self.basis.require_match(&other.basis)?;
        let kind = if self.is_unitary() && other.is_unitary() {
            OperatorKind::Unitary
        } else {
            OperatorKind::General
        };
        Ok(Operator {
            basis: self.basis.clone(),
            mat: &self.mat * &other.mat,
            kind,
        })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.basis.require_match(&other.basis)?;
        Ok(Operator {
            basis: self.basis.clone(),
            mat: &self.mat + &other.mat,
            kind: OperatorKind::General,
        })
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            basis: self.basis.clone(),
            mat: self.mat.adjoint(),
            kind: self.kind,
        }
    }

    /// Entrywise complex conjugate (the bookkeeping form of the reversed leg).
    pub fn conjugate(&self) -> Operator {
        Operator {
            basis: self.basis.clone(),
            mat: self.mat.map(|z| z.conj()),
            kind: self.kind,
        }
    }

    /// Tensor product; preserves unitary/projector marks.
    pub fn tensor(&self, other: &Operator) -> Result<Operator> {
        let basis = self.basis.concat(&other.basis)?;
        let kind = match (self.kind, other.kind) {
            (OperatorKind::Unitary, OperatorKind::Unitary) => OperatorKind::Unitary,
            (OperatorKind::Projector, OperatorKind::Projector) => OperatorKind::Projector,
            _ => OperatorKind::General,
        };
        Ok(Operator {
            basis,
            mat: self.mat.kronecker(&other.mat),
            kind,
        })
    }

    /// Conjugation `U · self · U†`, preserving the projector mark when `self`
    /// carries one (validated against the looser conjugated-projector bound).
    pub fn conjugated_by(&self, u: &Operator, tol: &Tolerances) -> Result<Operator> {
        if !u.is_unitary() {
            return Err(Error::Contract(
                "conjugation requires an operator marked unitary".into(),
            ));
        }
        self.basis.require_match(&u.basis)?;
        let mat = u.matrix() * &self.mat * u.matrix().adjoint();
        if self.is_projector() {
            Operator::projector_with(self.basis.clone(), mat, tol.projector_conjugated)
        } else {
            Ok(Operator {
                basis: self.basis.clone(),
                mat,
                kind: self.kind,
            })
        }
    }
}

/// Local 2x2 building blocks used throughout the scenarios.
pub mod qubit {
    use super::*;

    pub fn pauli_x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[C64::ZERO, C64::ONE, C64::ONE, C64::ZERO])
    }

    pub fn hadamard() -> DMatrix<C64> {
        let s = C64::new(1.0 / 2f64.sqrt(), 0.0);
        DMatrix::from_row_slice(2, 2, &[s, s, s, -s])
    }

    pub fn phase(phi: f64) -> DMatrix<C64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::ONE,
            C64::from_polar(1.0, phi),
        ]))
    }

    /// Real rotation with first column (cos θ, sin θ).
    pub fn rotation(theta: f64) -> DMatrix<C64> {
        let (s, c) = theta.sin_cos();
        DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(c, 0.0),
                C64::new(-s, 0.0),
                C64::new(s, 0.0),
                C64::new(c, 0.0),
            ],
        )
    }

    /// Projector onto basis state `k` of a dimension-2 register.
    pub fn level_projector(k: usize) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(2, 2, C64::ZERO);
        m[(k, k)] = C64::ONE;
        m
    }
}

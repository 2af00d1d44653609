//! Small operators applied to named register subsets of a large state.
//!
//! A [`LocalOperator`] stores only its own dense matrix (dimension = product
//! of its target registers) and is applied to a full state vector by index
//! arithmetic, so deep witness chains never materialize full-space matrices.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::basis::BasisLabel;
use crate::hilbert::operator::OperatorKind;
use crate::hilbert::state::StateVector;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone)]
pub struct LocalOperator {
    registers: Vec<String>,
    mat: DMatrix<C64>,
    kind: OperatorKind,
}

impl LocalOperator {
    pub fn new(registers: Vec<String>, mat: DMatrix<C64>, kind: OperatorKind) -> Result<Self> {
        if registers.is_empty() {
            return Err(Error::Basis("local operator needs target registers".into()));
        }
        if mat.nrows() != mat.ncols() {
            return Err(Error::Basis("local operator matrix must be square".into()));
        }
        let tol = Tolerances::default();
        match kind {
            OperatorKind::General => {}
            OperatorKind::Unitary => {
                let dim = mat.nrows();
                let dev = (mat.adjoint() * &mat - DMatrix::identity(dim, dim))
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                if dev > tol.unitary {
                    return Err(Error::Contract(format!(
                        "local operator marked unitary violates U†U = I by {dev:.3e}"
                    )));
                }
            }
            OperatorKind::Projector => {
                let idem = (&mat * &mat - &mat)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                let herm = (mat.adjoint() - &mat)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                if idem > tol.projector || herm > tol.projector {
                    return Err(Error::Contract(format!(
                        "local operator marked projector violates P²=P by {idem:.3e}, P†=P by {herm:.3e}"
                    )));
                }
            }
        }
        Ok(LocalOperator {
            registers,
            mat,
            kind,
        })
    }

    pub fn unitary(registers: Vec<String>, mat: DMatrix<C64>) -> Result<Self> {
        Self::new(registers, mat, OperatorKind::Unitary)
    }

    pub fn projector(registers: Vec<String>, mat: DMatrix<C64>) -> Result<Self> {
        Self::new(registers, mat, OperatorKind::Projector)
    }

    pub fn registers(&self) -> &[String] {
        &self.registers
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn is_unitary(&self) -> bool {
        self.kind == OperatorKind::Unitary
    }

    /// Controlled bit-flip: flips `target` when `control` is 1 (both qubits).
    pub fn cnot(control: &str, target: &str) -> Self {
        let mut m = DMatrix::from_element(4, 4, C64::ZERO);
        m[(0, 0)] = C64::ONE;
        m[(1, 1)] = C64::ONE;
        m[(2, 3)] = C64::ONE;
        m[(3, 2)] = C64::ONE;
        LocalOperator {
            registers: vec![control.into(), target.into()],
            mat: m,
            kind: OperatorKind::Unitary,
        }
    }

    /// Offsets of the local index positions within the full flat index, plus
    /// a precomputed enumeration stride plan.
    fn plan(&self, basis: &BasisLabel) -> Result<LocalPlan> {
        let mut positions = Vec::with_capacity(self.registers.len());
        for name in &self.registers {
            let pos = basis
                .position(name)
                .ok_or_else(|| Error::Basis(format!("unknown register '{name}'")))?;
            if positions.contains(&pos) {
                return Err(Error::Basis(format!("register '{name}' listed twice")));
            }
            positions.push(pos);
        }
        let strides = basis.strides();
        let dims: Vec<usize> = positions
            .iter()
            .map(|&p| basis.registers()[p].dim)
            .collect();
        let local_dim: usize = dims.iter().product();
        if local_dim != self.mat.nrows() {
            return Err(Error::Basis(format!(
                "local matrix dimension {} does not match target registers ({} states)",
                self.mat.nrows(),
                local_dim
            )));
        }
        let mut offsets = vec![0usize; local_dim];
        for (l, off) in offsets.iter_mut().enumerate() {
            let mut rem = l;
            // local index is mixed-radix over the target registers, first
            // listed register most significant
            for (slot, &p) in positions.iter().enumerate().rev() {
                let d = dims[slot];
                *off += (rem % d) * strides[p];
                rem /= d;
            }
        }
        Ok(LocalPlan {
            positions,
            offsets,
            strides,
            dims,
        })
    }
}

struct LocalPlan {
    positions: Vec<usize>,
    offsets: Vec<usize>,
    strides: Vec<usize>,
    dims: Vec<usize>,
}

/// Apply a local operator to a state without forming the full-space matrix.
pub fn apply_local(state: &StateVector, op: &LocalOperator) -> Result<StateVector> {
    let basis = state.basis();
    let plan = op.plan(basis)?;
    let dim = basis.dim();
    let local_dim = plan.offsets.len();
    let mut out = state.dvector().clone();
    let amps = state.dvector();
    let mut gathered = vec![C64::ZERO; local_dim];
    for base in 0..dim {
        // visit each coset once: all target digits zero
        let mut is_base = true;
        for (slot, &p) in plan.positions.iter().enumerate() {
            if (base / plan.strides[p]) % plan.dims[slot] != 0 {
                is_base = false;
                break;
            }
        }
        if !is_base {
            continue;
        }
        for (l, g) in gathered.iter_mut().enumerate() {
            *g = amps[base + plan.offsets[l]];
        }
        for (r, off) in plan.offsets.iter().enumerate() {
            let mut acc = C64::ZERO;
            for (c, g) in gathered.iter().enumerate() {
                acc += op.mat[(r, c)] * g;
            }
            out[base + off] = acc;
        }
    }
    Ok(StateVector::from_dvector(basis.clone(), out))
}

/// Apply a sequence of local operators in order.
pub fn apply_local_sequence(state: &StateVector, ops: &[LocalOperator]) -> Result<StateVector> {
    let mut s = state.clone();
    for op in ops {
        s = apply_local(&s, op)?;
    }
    Ok(s)
}

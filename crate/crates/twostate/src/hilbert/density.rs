use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::basis::BasisLabel;
use crate::hilbert::operator::{max_abs, Operator};
use crate::hilbert::state::StateVector;
use crate::tolerances::Tolerances;

/// Hermitian positive-semidefinite matrix over a labeled basis.
///
/// The `normalized` flag records whether the matrix represents a trace-one
/// object. Boundary updates clear it and track the true trace separately.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    basis: BasisLabel,
    mat: DMatrix<C64>,
    normalized: bool,
}

impl DensityMatrix {
    /// Validating constructor: Hermiticity and positive semidefiniteness are
    /// checked (the latter through a full eigendecomposition).
    pub fn try_new(basis: BasisLabel, mat: DMatrix<C64>) -> Result<Self> {
        Self::try_new_with(basis, mat, &Tolerances::default())
    }

    pub fn try_new_with(basis: BasisLabel, mat: DMatrix<C64>, tol: &Tolerances) -> Result<Self> {
        if mat.nrows() != basis.dim() || mat.ncols() != basis.dim() {
            return Err(Error::Basis(format!(
                "matrix is {}x{}, basis dimension is {}",
                mat.nrows(),
                mat.ncols(),
                basis.dim()
            )));
        }
        let herm = max_abs(&(mat.adjoint() - &mat));
        if herm > tol.hermitian {
            return Err(Error::Contract(format!(
                "density matrix violates Hermiticity by {herm:.3e}"
            )));
        }
        let eigs = hermitian_eigenvalues(&mat);
        if let Some(min) = eigs.iter().cloned().reduce(f64::min) {
            if min < -tol.psd {
                return Err(Error::Contract(format!(
                    "density matrix has negative eigenvalue {min:.3e}"
                )));
            }
        }
        let trace = mat.trace().re;
        Ok(DensityMatrix {
            basis,
            mat,
            normalized: (trace - 1.0).abs() <= tol.trace_one,
        })
    }

    /// Rank-one density matrix |s><s| of a state. Normalized when the input is.
    pub fn from_pure(state: &StateVector) -> Self {
        let v = state.dvector();
        let mat = v * v.adjoint();
        let trace = mat.trace().re;
        DensityMatrix {
            basis: state.basis().clone(),
            mat,
            normalized: (trace - 1.0).abs() <= Tolerances::default().trace_one,
        }
    }

    pub fn maximally_mixed(basis: BasisLabel) -> Self {
        let dim = basis.dim();
        let mat = DMatrix::from_diagonal(&DVector::from_element(
            dim,
            C64::new(1.0 / dim as f64, 0.0),
        ));
        DensityMatrix {
            basis,
            mat,
            normalized: true,
        }
    }

    pub(crate) fn new_unchecked(basis: BasisLabel, mat: DMatrix<C64>, normalized: bool) -> Self {
        DensityMatrix {
            basis,
            mat,
            normalized,
        }
    }

    pub fn basis(&self) -> &BasisLabel {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let basis = self.basis.concat(&other.basis)?;
        Ok(DensityMatrix {
            basis,
            mat: self.mat.kronecker(&other.mat),
            normalized: self.normalized && other.normalized,
        })
    }

    /// Spectral decomposition, eigenvalues descending.
    ///
    /// Output is deterministic: every eigenvector has its first
    /// non-negligible component phase-fixed to the positive real axis, and
    /// exactly equal eigenvalues are ordered lexicographically by amplitude.
    pub fn spectral(&self) -> Result<Vec<(f64, StateVector)>> {
        self.spectral_with(&Tolerances::default())
    }

    pub fn spectral_with(&self, tol: &Tolerances) -> Result<Vec<(f64, StateVector)>> {
        let herm = max_abs(&(self.mat.adjoint() - &self.mat));
        if herm > tol.hermitian {
            return Err(Error::Contract(format!(
                "spectral decomposition needs a Hermitian matrix (deviation {herm:.3e})"
            )));
        }
        let pairs = hermitian_eigen(&self.mat);
        Ok(pairs
            .into_iter()
            .map(|(val, vec)| (val, StateVector::from_dvector(self.basis.clone(), vec)))
            .collect())
    }

    /// Trace out every register not listed in `keep`. Register order of the
    /// result follows the original basis order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        for name in keep {
            if self.basis.position(name).is_none() {
                return Err(Error::Basis(format!("unknown register '{name}'")));
            }
        }
        let kept: Vec<usize> = self
            .basis
            .registers()
            .iter()
            .enumerate()
            .filter(|(_, r)| keep.contains(&r.name.as_str()))
            .map(|(i, _)| i)
            .collect();
        if kept.len() == self.basis.registers().len() {
            return Ok(self.clone());
        }
        let traced: Vec<usize> = (0..self.basis.registers().len())
            .filter(|i| !kept.contains(i))
            .collect();
        let out_basis = BasisLabel::new(
            kept.iter()
                .map(|&i| self.basis.registers()[i].clone())
                .collect(),
        )?;
        let strides = self.basis.strides();
        let kept_dims: Vec<usize> = kept.iter().map(|&i| self.basis.registers()[i].dim).collect();
        let traced_dims: Vec<usize> = traced
            .iter()
            .map(|&i| self.basis.registers()[i].dim)
            .collect();
        let out_dim: usize = kept_dims.iter().product();
        let traced_dim: usize = traced_dims.iter().product();

        // Map a flat index of the kept (resp. traced) subsystem onto its
        // contribution to the full-space flat index.
        let expand = |positions: &[usize], dims: &[usize], mut flat: usize| -> usize {
            let mut full = 0usize;
            for (slot, &pos) in positions.iter().enumerate().rev() {
                let d = dims[slot];
                full += (flat % d) * strides[pos];
                flat /= d;
            }
            full
        };

        let mut out = DMatrix::from_element(out_dim, out_dim, C64::ZERO);
        for i in 0..out_dim {
            let fi = expand(&kept, &kept_dims, i);
            for j in 0..out_dim {
                let fj = expand(&kept, &kept_dims, j);
                let mut acc = C64::ZERO;
                for t in 0..traced_dim {
                    let ft = expand(&traced, &traced_dims, t);
                    acc += self.mat[(fi + ft, fj + ft)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(DensityMatrix {
            basis: out_basis,
            mat: out,
            normalized: self.normalized,
        })
    }

    /// Sandwich `op · self · op†`, the boundary-update primitive.
    pub(crate) fn sandwiched(&self, op: &Operator) -> Result<DensityMatrix> {
        self.basis.require_match(op.basis())?;
        let mat = op.matrix() * &self.mat * op.matrix().adjoint();
        Ok(DensityMatrix {
            basis: self.basis.clone(),
            mat,
            normalized: false,
        })
    }

    pub(crate) fn scaled(&self, factor: f64) -> DensityMatrix {
        DensityMatrix {
            basis: self.basis.clone(),
            mat: &self.mat * C64::new(factor, 0.0),
            normalized: false,
        }
    }
}

/// Eigendecomposition of a Hermitian (not necessarily positive) matrix,
/// sorted by descending eigenvalue with deterministic phase fixing and
/// lexicographic tie-breaking.
pub(crate) fn hermitian_eigen(mat: &DMatrix<C64>) -> Vec<(f64, DVector<C64>)> {
    let se = mat.clone().symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<C64>)> = se
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &val)| (val, phase_fixed(se.eigenvectors.column(k).into_owned())))
        .collect();
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| lex_cmp(&a.1, &b.1))
    });
    pairs
}

pub(crate) fn hermitian_eigenvalues(mat: &DMatrix<C64>) -> Vec<f64> {
    let se = mat.clone().symmetric_eigen();
    se.eigenvalues.iter().cloned().collect()
}

/// Rotate the global phase so the first non-negligible component is real
/// and positive.
fn phase_fixed(mut v: DVector<C64>) -> DVector<C64> {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return v;
    }
    if let Some(lead) = v.iter().find(|z| z.norm() > 1e-12 * scale) {
        let phase = lead.conj() / lead.norm();
        v *= phase;
    }
    v
}

fn lex_cmp(a: &DVector<C64>, b: &DVector<C64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.re.partial_cmp(&y.re).unwrap() {
            std::cmp::Ordering::Equal => {}
            ord => return ord,
        }
        match x.im.partial_cmp(&y.im).unwrap() {
            std::cmp::Ordering::Equal => {}
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

//! Seeded Haar-random states, unitaries and projector families.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::hilbert::basis::BasisLabel;
use crate::hilbert::operator::Operator;
use crate::hilbert::state::StateVector;

fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Haar-uniform pure state: normalized complex Gaussian vector.
pub fn haar_state<R: Rng>(basis: &BasisLabel, rng: &mut R) -> StateVector {
    let dim = basis.dim();
    let amps = DVector::from_fn(dim, |_, _| complex_gaussian(rng));
    StateVector::from_dvector(basis.clone(), amps)
        .normalized()
        .expect("Gaussian vector is nonzero almost surely")
}

/// Product of independent per-register Haar states.
pub fn product_haar_state<R: Rng>(basis: &BasisLabel, mut rng_for: impl FnMut(usize) -> R) -> StateVector
where
    R: Rng,
{
    let mut out: Option<StateVector> = None;
    for (i, reg) in basis.registers().iter().enumerate() {
        let single = BasisLabel::single(&reg.name, reg.dim).expect("valid register");
        let factor = haar_state(&single, &mut rng_for(i));
        out = Some(match out {
            None => factor,
            Some(acc) => acc.tensor(&factor).expect("disjoint registers"),
        });
    }
    out.expect("basis has at least one register")
}

/// Haar-uniform unitary via QR of a complex Gaussian matrix with the phases
/// of the R diagonal absorbed into Q, so the distribution is exactly Haar
/// and the output deterministic for a given stream.
pub fn haar_unitary<R: Rng>(basis: &BasisLabel, rng: &mut R) -> Operator {
    let dim = basis.dim();
    let g = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::ONE };
        for i in 0..dim {
            q[(i, k)] *= phase;
        }
    }
    Operator::unitary(basis.clone(), q).expect("QR with phase fix is unitary")
}

/// Haar-rotated complete binary projector family of ranks (rank, dim-rank).
pub fn haar_split_projectors<R: Rng>(
    basis: &BasisLabel,
    rank: usize,
    rng: &mut R,
) -> Result<(Operator, Operator)> {
    let dim = basis.dim();
    assert!(rank > 0 && rank < dim, "rank must split the space");
    let u = haar_unitary(basis, rng);
    let mut d0 = DMatrix::from_element(dim, dim, C64::ZERO);
    for k in 0..rank {
        d0[(k, k)] = C64::ONE;
    }
    let d1 = DMatrix::identity(dim, dim) - &d0;
    let p0 = u.matrix() * d0 * u.matrix().adjoint();
    let p1 = u.matrix() * d1 * u.matrix().adjoint();
    Ok((
        Operator::projector(basis.clone(), p0)?,
        Operator::projector(basis.clone(), p1)?,
    ))
}

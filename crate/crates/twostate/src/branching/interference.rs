//! Two-path interferometer with an optional witness register.
//!
//! Without a witness no single path is selected: the detection probability
//! depends on both path amplitudes through an interference term of full
//! visibility. A witness register recording the path suppresses the
//! interference term down to the overlap of its two record states.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{apply_local, qubit, BasisLabel, LocalOperator, StateVector};

#[derive(Debug, Clone, Serialize)]
pub struct VisibilityReport {
    /// Overlap of the two witness record states (1.0 when no witness).
    pub witness_overlap: f64,
    /// Fringe visibility (p_max - p_min)/(p_max + p_min) of the detection
    /// probability over the phase sweep.
    pub visibility: f64,
    pub max_probability: f64,
    pub min_probability: f64,
    /// Largest residual of the sampled fringe against its first-harmonic
    /// model p(phi) = a + b cos(phi) + c sin(phi).
    pub model_residual: f64,
    pub witnessed: bool,
}

/// Detection probability at the bright port for interferometer phase `phi`.
fn detection_probability(witness_overlap: Option<f64>, phi: f64) -> Result<f64> {
    let basis = match witness_overlap {
        None => BasisLabel::single("path", 2)?,
        Some(_) => BasisLabel::single("path", 2)?.concat(&BasisLabel::single("witness", 2)?)?,
    };
    let mut state = StateVector::basis_state(basis.clone(), 0)?;
    let split = LocalOperator::unitary(vec!["path".into()], qubit::hadamard())?;
    state = apply_local(&state, &split)?;
    if let Some(overlap) = witness_overlap {
        if !(0.0..=1.0).contains(&overlap) {
            return Err(Error::Config(format!(
                "witness overlap must lie in [0,1], got {overlap}"
            )));
        }
        // record the path: |path=1> rotates the witness to
        // cos(alpha)|0> + sin(alpha)|1> with cos(alpha) = overlap
        let alpha = overlap.clamp(0.0, 1.0).acos();
        let rot = qubit::rotation(alpha);
        let mut coupling = DMatrix::from_element(4, 4, C64::ZERO);
        coupling[(0, 0)] = C64::ONE;
        coupling[(1, 1)] = C64::ONE;
        for r in 0..2 {
            for c in 0..2 {
                coupling[(2 + r, 2 + c)] = rot[(r, c)];
            }
        }
        let couple = LocalOperator::unitary(vec!["path".into(), "witness".into()], coupling)?;
        state = apply_local(&state, &couple)?;
    }
    let phase = LocalOperator::unitary(vec!["path".into()], qubit::phase(phi))?;
    state = apply_local(&state, &phase)?;
    state = apply_local(&state, &split)?;
    let project = LocalOperator::projector(vec!["path".into()], qubit::level_projector(0))?;
    let detected = apply_local(&state, &project)?;
    Ok(detected.norm().powi(2))
}

/// Sweep the interferometer phase and extract the fringe visibility.
///
/// `witness_overlap = None` runs the bare two-path interferometer (no
/// witness register anywhere); `Some(c)` couples a witness whose two record
/// states have overlap `c`.
pub fn coexisting_paths_check(witness_overlap: Option<f64>) -> Result<VisibilityReport> {
    // first-harmonic extraction from four quadrature phases
    let p0 = detection_probability(witness_overlap, 0.0)?;
    let p1 = detection_probability(witness_overlap, std::f64::consts::FRAC_PI_2)?;
    let p2 = detection_probability(witness_overlap, std::f64::consts::PI)?;
    let p3 = detection_probability(witness_overlap, 3.0 * std::f64::consts::FRAC_PI_2)?;
    let a = 0.25 * (p0 + p1 + p2 + p3);
    let b = 0.5 * (p0 - p2);
    let c = 0.5 * (p1 - p3);
    let amplitude = (b * b + c * c).sqrt();

    // the fringe of a two-path interferometer is exactly first harmonic;
    // verify on extra sample points
    let mut residual: f64 = 0.0;
    for k in 0..8 {
        let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / 8.0;
        let p = detection_probability(witness_overlap, phi)?;
        let model = a + b * phi.cos() + c * phi.sin();
        residual = residual.max((p - model).abs());
    }

    Ok(VisibilityReport {
        witness_overlap: witness_overlap.unwrap_or(1.0),
        visibility: amplitude / a,
        max_probability: a + amplitude,
        min_probability: a - amplitude,
        model_residual: residual,
        witnessed: witness_overlap.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_interferometer_has_full_visibility() {
        // oracle: 2x2 algebra gives p(phi) = (1 + cos phi)/2
        let report = coexisting_paths_check(None).unwrap();
        assert!((report.visibility - 1.0).abs() < 1e-10);
        assert!(report.model_residual < 1e-12);
        for phi in [0.0, 0.7, 2.1] {
            let p = detection_probability(None, phi).unwrap();
            assert!((p - 0.5 * (1.0 + phi.cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_witness_kills_interference() {
        let report = coexisting_paths_check(Some(0.0)).unwrap();
        assert!(report.visibility.abs() < 1e-10);
        assert!((report.max_probability - 0.5).abs() < 1e-10);
    }

    #[test]
    fn visibility_equals_witness_overlap() {
        for overlap in [0.0, 0.25, 0.5, 0.8, 1.0] {
            let report = coexisting_paths_check(Some(overlap)).unwrap();
            assert!(
                (report.visibility - overlap).abs() < 1e-10,
                "overlap {overlap}: visibility {}",
                report.visibility
            );
            assert!(report.model_residual < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_overlap() {
        assert!(coexisting_paths_check(Some(1.5)).is_err());
    }
}

//! Two-boundary measurement calculus.
//!
//! A [`BoundaryPair`] holds an initial density matrix, a final density
//! matrix and the evolution between them. Intermediate measurements are
//! postponed to the final boundary by unitary conjugation and their outcome
//! probabilities are trace ratios; the normalization factor of the
//! projection never appears because every probability is a ratio.
//!
//! Conventions: `forward` maps initial-time kets to final-time kets and
//! `backward` is the return leg (defaults to `forward†`). The outcome weight
//! of a postponed projector `M` is
//!
//! ```text
//! numerator(M)  = Tr(rho_i · backward · M · rho_f · M · forward)
//! denominator   = Tr(rho_i · backward · rho_f · forward)
//! ```
//!
//! which for pure boundaries and `backward = forward†` is
//! `|<f| M U |i>|² / |<f| U |i>|²`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{random, BasisLabel, DensityMatrix, Operator, StateVector};
use crate::par;
use crate::rng::substream;
use crate::tolerances::Tolerances;

/// Pre- and post-selection boundary with the evolution connecting them.
///
/// `log2_final_trace` tracks the true trace of the (unnormalized) effective
/// final matrix in the log domain; the stored matrix is rescaled to unit
/// trace after every update so that thousand-step decision chains never
/// underflow.
#[derive(Debug, Clone)]
pub struct BoundaryPair {
    initial: DensityMatrix,
    final_state: DensityMatrix,
    forward: Operator,
    backward: Operator,
    log2_final_trace: f64,
}

impl BoundaryPair {
    pub fn new(
        initial: DensityMatrix,
        final_state: DensityMatrix,
        forward: Operator,
        backward: Operator,
    ) -> Result<Self> {
        initial.basis().require_match(final_state.basis())?;
        initial.basis().require_match(forward.basis())?;
        initial.basis().require_match(backward.basis())?;
        if !forward.is_unitary() || !backward.is_unitary() {
            return Err(Error::Contract(
                "boundary evolutions must be marked unitary".into(),
            ));
        }
        Ok(BoundaryPair {
            initial,
            final_state,
            forward,
            backward,
            log2_final_trace: 0.0,
        })
    }

    /// Pure boundaries |i>, |f> with `backward = forward†`.
    pub fn from_pure(initial: &StateVector, final_state: &StateVector, forward: Operator) -> Result<Self> {
        let backward = forward.adjoint();
        Self::new(
            DensityMatrix::from_pure(initial),
            DensityMatrix::from_pure(final_state),
            forward,
            backward,
        )
    }

    pub fn initial(&self) -> &DensityMatrix {
        &self.initial
    }

    /// The effective final matrix, stored rescaled to unit trace.
    pub fn final_state(&self) -> &DensityMatrix {
        &self.final_state
    }

    /// log2 of the true trace of the effective final matrix.
    pub fn log2_final_trace(&self) -> f64 {
        self.log2_final_trace
    }

    pub fn forward(&self) -> &Operator {
        &self.forward
    }

    pub fn backward(&self) -> &Operator {
        &self.backward
    }

    fn trace_of(&self, middle: Option<&Operator>) -> C64 {
        // Tr(rho_i · B · [M ·] rho_f [· M] · F)
        let mut m: DMatrix<C64> = self.backward.matrix().clone();
        if let Some(op) = middle {
            m *= op.matrix();
        }
        m *= self.final_state.matrix();
        if let Some(op) = middle {
            m *= op.matrix();
        }
        m *= self.forward.matrix();
        (self.initial.matrix() * m).trace()
    }

    pub fn denominator(&self) -> C64 {
        self.trace_of(None)
    }

    /// A pair is incompatible when the unconditioned boundary trace falls
    /// below the overlap floor.
    pub fn is_incompatible(&self, tol: &Tolerances) -> bool {
        self.denominator().norm() < tol.overlap_floor
    }
}

/// An ordered complete family of mutually orthogonal projectors tied to a
/// labeled insertion time.
#[derive(Debug, Clone)]
pub struct MeasurementContext {
    projectors: Vec<Operator>,
    insertion_label: String,
}

impl MeasurementContext {
    pub fn new(projectors: Vec<Operator>, insertion_label: &str) -> Result<Self> {
        Self::new_with(projectors, insertion_label, &Tolerances::default())
    }

    pub fn new_with(
        projectors: Vec<Operator>,
        insertion_label: &str,
        tol: &Tolerances,
    ) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::Contract("empty projector family".into()));
        }
        let basis = projectors[0].basis().clone();
        let dim = basis.dim();
        for p in &projectors {
            basis.require_match(p.basis())?;
            if !p.is_projector() {
                return Err(Error::Contract(
                    "measurement family members must be marked projectors".into(),
                ));
            }
        }
        let mut sum = DMatrix::from_element(dim, dim, C64::ZERO);
        for p in &projectors {
            sum += p.matrix();
        }
        let dev = (sum - DMatrix::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > tol.completeness {
            return Err(Error::Contract(format!(
                "projector family sums to identity only within {dev:.3e} (tolerance {:.1e})",
                tol.completeness
            )));
        }
        for (i, p) in projectors.iter().enumerate() {
            for q in &projectors[i + 1..] {
                let cross = (p.matrix() * q.matrix())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                if cross > tol.completeness {
                    return Err(Error::Contract(format!(
                        "projector family not mutually orthogonal (cross term {cross:.3e})"
                    )));
                }
            }
        }
        Ok(MeasurementContext {
            projectors,
            insertion_label: insertion_label.into(),
        })
    }

    pub fn projectors(&self) -> &[Operator] {
        &self.projectors
    }

    pub fn insertion_label(&self) -> &str {
        &self.insertion_label
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }
}

/// Conjugate every family member to the final boundary: `M' = U M U†`.
///
/// Applying `M` and then evolving by `u_after` equals evolving first and
/// applying `M'`; completeness and orthogonality survive conjugation.
pub fn postpone(ctx: &MeasurementContext, u_after: &Operator) -> Result<Vec<Operator>> {
    postpone_with(ctx, u_after, &Tolerances::default())
}

pub fn postpone_with(
    ctx: &MeasurementContext,
    u_after: &Operator,
    tol: &Tolerances,
) -> Result<Vec<Operator>> {
    if !u_after.is_unitary() {
        return Err(Error::Contract(
            "postponement requires an operator marked unitary".into(),
        ));
    }
    ctx.projectors
        .iter()
        .map(|p| p.conjugated_by(u_after, tol))
        .collect()
}

/// Boundary-conditioned weight of an arbitrary operator chain inserted at
/// the final boundary: `numerator(m) / denominator`.
///
/// This is the raw trace-ratio form. For a single projector from a family
/// that has not decohered it may exceed 1; only the family-normalized form
/// [`probability_m_family`] is guaranteed to be a distribution.
pub fn boundary_weight(pair: &BoundaryPair, m: &Operator) -> Result<f64> {
    boundary_weight_with(pair, m, &Tolerances::default())
}

pub fn boundary_weight_with(pair: &BoundaryPair, m: &Operator, tol: &Tolerances) -> Result<f64> {
    pair.initial.basis().require_match(m.basis())?;
    let den = pair.denominator();
    if den.norm() < tol.overlap_floor {
        return Err(Error::IncompatibleBoundary(format!(
            "boundary trace {:.3e} below floor {:.1e}",
            den.norm(),
            tol.overlap_floor
        )));
    }
    let num = pair.trace_of(Some(m));
    let ratio = num / den;
    debug_assert!(
        ratio.im.abs() <= 1e-7 * (1.0 + ratio.re.abs()),
        "boundary weight should be real, got {ratio}"
    );
    Ok(ratio.re)
}

/// Outcome probability of a single postponed projector (raw trace-ratio
/// form, clamped to [0, 1] only against numerical slack).
pub fn probability_m(pair: &BoundaryPair, m_evolved: &Operator) -> Result<f64> {
    probability_m_with(pair, m_evolved, &Tolerances::default())
}

pub fn probability_m_with(
    pair: &BoundaryPair,
    m_evolved: &Operator,
    tol: &Tolerances,
) -> Result<f64> {
    if !m_evolved.is_projector() {
        return Err(Error::Contract(
            "probability_m requires an operator marked projector".into(),
        ));
    }
    let p = boundary_weight_with(pair, m_evolved, tol)?;
    Ok(clamp_probability(p))
}

/// Family-normalized outcome distribution over a complete projector family.
///
/// Unlike [`probability_m`] this stays well defined when the unconditioned
/// boundary trace vanishes (orthogonal pure boundaries); only the family
/// numerator sum must stay above the floor.
pub fn probability_m_family(pair: &BoundaryPair, family: &[Operator]) -> Result<Vec<f64>> {
    probability_m_family_with(pair, family, &Tolerances::default())
}

pub fn probability_m_family_with(
    pair: &BoundaryPair,
    family: &[Operator],
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    if family.is_empty() {
        return Err(Error::Contract("empty projector family".into()));
    }
    let mut nums = Vec::with_capacity(family.len());
    for m in family {
        if !m.is_projector() {
            return Err(Error::Contract(
                "probability_m_family requires operators marked projectors".into(),
            ));
        }
        pair.initial.basis().require_match(m.basis())?;
        nums.push(pair.trace_of(Some(m)).re.max(0.0));
    }
    let total: f64 = nums.iter().sum();
    if total < tol.overlap_floor {
        return Err(Error::IncompatibleBoundary(
            "every outcome weight vanishes for this boundary pair".into(),
        ));
    }
    Ok(nums.into_iter().map(|n| n / total).collect())
}

fn clamp_probability(p: f64) -> f64 {
    if (-1e-9..0.0).contains(&p) {
        0.0
    } else if (1.0..1.0 + 1e-9).contains(&p) {
        1.0
    } else {
        p
    }
}

/// Record a measurement outcome in the effective final matrix:
/// `rho_f <- M' rho_f M'`, without renormalization.
///
/// The returned pair stores the updated matrix rescaled to unit trace and
/// accounts for the true (shrinking) trace in `log2_final_trace`.
pub fn update_final(pair: &BoundaryPair, m_evolved: &Operator) -> Result<BoundaryPair> {
    update_final_with(pair, m_evolved, &Tolerances::default())
}

pub fn update_final_with(
    pair: &BoundaryPair,
    m_evolved: &Operator,
    tol: &Tolerances,
) -> Result<BoundaryPair> {
    if !m_evolved.is_projector() {
        return Err(Error::Contract(
            "update_final requires an operator marked projector".into(),
        ));
    }
    let updated = pair.final_state.sandwiched(m_evolved)?;
    let trace = updated.trace();
    let log2_total = pair.log2_final_trace + trace.log2();
    if !(trace > 0.0) || log2_total < tol.overlap_floor.log2() {
        return Err(Error::IncompatibleBoundary(format!(
            "updated final trace 2^{log2_total:.1} below floor {:.1e}",
            tol.overlap_floor
        )));
    }
    Ok(BoundaryPair {
        initial: pair.initial.clone(),
        final_state: updated.scaled(1.0 / trace),
        forward: pair.forward.clone(),
        backward: pair.backward.clone(),
        log2_final_trace: log2_total,
    })
}

/// Top spectral component of a density matrix with its dominance ratio
/// `lambda1 / lambda2` (infinite for rank one). Whether the ratio admits the
/// single-vector approximation is the caller's decision via
/// [`Tolerances::is_dominant`].
pub fn dominant_vector(d: &DensityMatrix) -> Result<(f64, StateVector, f64)> {
    dominant_vector_with(d, &Tolerances::default())
}

pub fn dominant_vector_with(
    d: &DensityMatrix,
    tol: &Tolerances,
) -> Result<(f64, StateVector, f64)> {
    let spec = d.spectral_with(tol)?;
    let (l1, v1) = spec[0].clone();
    if !(l1 > 0.0) {
        return Err(Error::Contract("density matrix has no positive weight".into()));
    }
    let ratio = match spec.get(1) {
        Some((l2, _)) if *l2 > tol.psd * l1.max(1.0) => l1 / l2,
        _ => f64::INFINITY,
    };
    Ok((l1, v1, ratio))
}

/// Outcome distribution of an intermediate measurement between pure
/// boundaries, with the raw unconditioned-overlap ratios alongside.
#[derive(Debug, Clone, Serialize)]
pub struct AblReport {
    /// Family-normalized probabilities (the default reading: they always
    /// form a distribution).
    pub probabilities: Vec<f64>,
    /// Raw ratios against the unconditioned overlap |<i|U_b U_a|f>|²; absent
    /// when that overlap is below the floor. These need not sum to one.
    pub unconditioned_ratios: Option<Vec<f64>>,
}

/// Aharonov-Bergmann-Lebowitz outcome distribution
/// `p_k ∝ |<i| U_before M_k U_after |f>|²`.
pub fn abl_probability(
    initial: &StateVector,
    final_state: &StateVector,
    u_before: &Operator,
    u_after: &Operator,
    family: &MeasurementContext,
) -> Result<AblReport> {
    abl_probability_with(
        initial,
        final_state,
        u_before,
        u_after,
        family,
        &Tolerances::default(),
    )
}

pub fn abl_probability_with(
    initial: &StateVector,
    final_state: &StateVector,
    u_before: &Operator,
    u_after: &Operator,
    family: &MeasurementContext,
    tol: &Tolerances,
) -> Result<AblReport> {
    if !u_before.is_unitary() || !u_after.is_unitary() {
        return Err(Error::Contract("evolutions must be marked unitary".into()));
    }
    let evolved_final = final_state.apply(u_after)?;
    let mut weights = Vec::with_capacity(family.len());
    for p in family.projectors() {
        let projected = evolved_final.apply(p)?;
        let amp = initial.inner(&projected.apply(u_before)?)?;
        weights.push(amp.norm_sqr());
    }
    let total: f64 = weights.iter().sum();
    if total < tol.overlap_floor {
        return Err(Error::IncompatibleBoundary(
            "every ABL numerator vanishes".into(),
        ));
    }
    let overlap = initial
        .inner(&evolved_final.apply(u_before)?)?
        .norm_sqr();
    let unconditioned_ratios = if overlap >= tol.overlap_floor {
        Some(weights.iter().map(|w| w / overlap).collect())
    } else {
        None
    };
    Ok(AblReport {
        probabilities: weights.iter().map(|w| w / total).collect(),
        unconditioned_ratios,
    })
}

/// Born-rule comparison for a preparation measured against a family.
#[derive(Debug, Clone, Serialize)]
pub struct BornReport {
    /// Born weights `<i|P_k|i>`.
    pub born: Vec<f64>,
    /// Family distribution with the final boundary proportional to the
    /// identity. Equals `born` up to numerical error — the completely mixed
    /// final boundary erases post-selection.
    pub mixed_final: Vec<f64>,
    /// Frequency of each outcome dominating over Haar-random final states.
    pub empirical: Vec<f64>,
    pub trials: usize,
    /// max_k |mixed_final_k - born_k|
    pub max_mixed_deviation: f64,
}

/// Tally which outcome dominates when the final boundary is Haar random,
/// and verify the exact identity with a completely mixed final boundary.
///
/// The realized outcome per trial is the maximum-weight one: a dominance
/// selection, not an extra random draw. For complete two-outcome families
/// the dominance frequencies reproduce the Born weights exactly in
/// distribution; for larger families they track them only approximately.
pub fn born_limit_check(
    initial: &StateVector,
    family: &MeasurementContext,
    trials: usize,
    seed: u64,
) -> Result<BornReport> {
    if trials == 0 {
        return Err(Error::Config("born_limit_check needs trials >= 1".into()));
    }
    let basis = initial.basis().clone();
    let born: Vec<f64> = family
        .projectors()
        .iter()
        .map(|p| {
            let projected = initial.apply(p).expect("family basis checked");
            initial.inner(&projected).expect("same basis").re
        })
        .collect();

    let identity = Operator::identity(basis.clone());
    let mixed_pair = BoundaryPair::new(
        DensityMatrix::from_pure(initial),
        DensityMatrix::maximally_mixed(basis.clone()),
        identity.clone(),
        identity,
    )?;
    let mixed_final = probability_m_family(&mixed_pair, family.projectors())?;
    let max_mixed_deviation = born
        .iter()
        .zip(&mixed_final)
        .map(|(b, m)| (b - m).abs())
        .fold(0.0, f64::max);

    let outcomes = par::map_indexed(trials, |t| {
        let mut rng = substream(seed, "born-final", t as u64);
        let f = random::haar_state(&basis, &mut rng);
        let mut best = 0usize;
        let mut best_w = f64::NEG_INFINITY;
        for (k, p) in family.projectors().iter().enumerate() {
            let projected = f.apply(p).expect("family basis checked");
            let w = initial.inner(&projected).expect("same basis").norm_sqr();
            if w > best_w {
                best_w = w;
                best = k;
            }
        }
        best
    });
    let mut counts = vec![0usize; family.len()];
    for o in outcomes {
        counts[o] += 1;
    }
    Ok(BornReport {
        born,
        mixed_final,
        empirical: counts
            .iter()
            .map(|&c| c as f64 / trials as f64)
            .collect(),
        trials,
        max_mixed_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::qubit;

    fn qubit_basis() -> BasisLabel {
        BasisLabel::single("q", 2).unwrap()
    }

    fn ket(amps: [f64; 2]) -> StateVector {
        StateVector::new(
            qubit_basis(),
            vec![C64::new(amps[0], 0.0), C64::new(amps[1], 0.0)],
        )
        .unwrap()
        .normalized()
        .unwrap()
    }

    fn level_family() -> MeasurementContext {
        let basis = qubit_basis();
        let p0 = Operator::projector(basis.clone(), qubit::level_projector(0)).unwrap();
        let p1 = Operator::projector(basis.clone(), qubit::level_projector(1)).unwrap();
        MeasurementContext::new(vec![p0, p1], "t").unwrap()
    }

    #[test]
    fn postpone_identity_and_flip() {
        let basis = qubit_basis();
        let family = level_family();
        let id = Operator::identity(basis.clone());
        let kept = postpone(&family, &id).unwrap();
        for (a, b) in kept.iter().zip(family.projectors()) {
            assert_eq!(a.matrix(), b.matrix());
        }
        let x = Operator::unitary(basis.clone(), qubit::pauli_x()).unwrap();
        let flipped = postpone(&family, &x).unwrap();
        assert_eq!(flipped[0].matrix(), family.projectors()[1].matrix());
        // completeness preserved
        let sum = flipped[0].add(&flipped[1]).unwrap();
        let dev = (sum.matrix() - Operator::identity(basis).matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }

    #[test]
    fn consistent_selection_gives_unit_probability() {
        let basis = qubit_basis();
        let zero = ket([1.0, 0.0]);
        let pair = BoundaryPair::from_pure(&zero, &zero, Operator::identity(basis)).unwrap();
        let p = probability_m(&pair, &level_family().projectors()[0]).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plusx_to_zero_selects_level_zero() {
        // numerator of the level-1 outcome contains <1|0> = 0
        let basis = qubit_basis();
        let plus = ket([1.0, 1.0]);
        let zero = ket([1.0, 0.0]);
        let pair = BoundaryPair::from_pure(&plus, &zero, Operator::identity(basis)).unwrap();
        let p = probability_m_family(&pair, level_family().projectors()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1].abs() < 1e-12);
        // paper-form single ratio agrees here
        let raw = probability_m(&pair, &level_family().projectors()[0]).unwrap();
        assert!((raw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_boundaries_split_evenly() {
        // both numerators equal 1/4; the unconditioned overlap vanishes
        let plus = ket([1.0, 1.0]);
        let minus = ket([1.0, -1.0]);
        let pair =
            BoundaryPair::from_pure(&plus, &minus, Operator::identity(qubit_basis())).unwrap();
        let p = probability_m_family(&pair, level_family().projectors()).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
        // the raw paper-form ratio is undefined: incompatible pair
        assert!(matches!(
            probability_m(&pair, &level_family().projectors()[0]),
            Err(Error::IncompatibleBoundary(_))
        ));
        assert!(pair.is_incompatible(&Tolerances::default()));
    }

    #[test]
    fn update_final_shrinks_trace_and_clears_flag() {
        let basis = qubit_basis();
        let plus = ket([1.0, 1.0]);
        let pair = BoundaryPair::from_pure(&plus, &plus, Operator::identity(basis)).unwrap();
        let family = level_family();
        let p0 = &family.projectors()[0];
        let updated = update_final(&pair, p0).unwrap();
        assert!((updated.log2_final_trace() - (-1.0)).abs() < 1e-12);
        assert!(!updated.final_state().is_normalized());
        // identity projector leaves the boundary unchanged
        let id_proj = Operator::projector(
            qubit_basis(),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let same = update_final(&pair, &id_proj).unwrap();
        assert!(same.log2_final_trace().abs() < 1e-12);
        // two orthogonal updates annihilate the boundary
        let p1 = &family.projectors()[1];
        assert!(matches!(
            update_final(&updated, p1),
            Err(Error::IncompatibleBoundary(_))
        ));
    }

    #[test]
    fn dominant_vector_cases() {
        let basis = qubit_basis();
        let zero = ket([1.0, 0.0]);
        let rank1 = DensityMatrix::from_pure(&zero);
        let (l, v, ratio) = dominant_vector(&rank1).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        assert!((v.inner(&zero).unwrap().norm() - 1.0).abs() < 1e-10);
        assert!(ratio.is_infinite());

        let mat = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.9, 0.0),
            C64::new(0.1, 0.0),
        ]));
        let d = DensityMatrix::try_new(basis, mat).unwrap();
        let (l, _, ratio) = dominant_vector(&d).unwrap();
        assert!((l - 0.9).abs() < 1e-12);
        assert!((ratio - 9.0).abs() < 1e-9);
        assert!(!Tolerances::default().is_dominant(ratio));
    }

    #[test]
    fn abl_hand_cases() {
        let id = Operator::identity(qubit_basis());
        let family = level_family();
        let plus = ket([1.0, 1.0]);
        let zero = ket([1.0, 0.0]);
        let minus = ket([1.0, -1.0]);

        let r = abl_probability(&zero, &zero, &id, &id, &family).unwrap();
        assert_eq!(r.probabilities, vec![1.0, 0.0]);

        let r = abl_probability(&plus, &zero, &id, &id, &family).unwrap();
        assert!((r.probabilities[0] - 1.0).abs() < 1e-12);
        assert!(r.probabilities[1].abs() < 1e-12);

        let r = abl_probability(&plus, &minus, &id, &id, &family).unwrap();
        assert!((r.probabilities[0] - 0.5).abs() < 1e-12);
        assert!((r.probabilities[1] - 0.5).abs() < 1e-12);
        // unconditioned overlap vanishes for orthogonal boundaries
        assert!(r.unconditioned_ratios.is_none());
    }

    #[test]
    fn born_check_identity_and_eigenstate() {
        let family = level_family();
        let zero = ket([1.0, 0.0]);
        let report = born_limit_check(&zero, &family, 64, 5).unwrap();
        assert!(report.max_mixed_deviation < 1e-10);
        assert!((report.mixed_final[0] - 1.0).abs() < 1e-10);
        // eigenstate: level zero dominates in every trial
        assert_eq!(report.empirical[0], 1.0);
    }
}

//! Bidirectional boundary matching: two boundary states evolved toward a
//! meeting point, the effective matrix connecting them, its dominant
//! component, and agent insertions spliced symmetrically into both legs.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigen, random, BasisLabel, Operator, StateVector};
use crate::par;
use crate::rng::{derive_seed, substream};
use crate::tolerances::Tolerances;

/// Two boundary states with step-decomposed evolutions toward the midpoint.
#[derive(Debug, Clone)]
pub struct BidirectionalScenario {
    pub bang: StateVector,
    pub crunch: StateVector,
    /// Steps carrying the bang forward to the meeting point, applied in order.
    pub forward: Vec<Operator>,
    /// Steps carrying the crunch back to the meeting point, applied in order.
    pub backward: Vec<Operator>,
    /// Number of macroscopic decisions the scenario stands for (bookkeeping
    /// for scaling experiments; the dimension plays that role numerically).
    pub n_decisions: usize,
}

impl BidirectionalScenario {
    pub fn new(
        bang: StateVector,
        crunch: StateVector,
        forward: Vec<Operator>,
        backward: Vec<Operator>,
        n_decisions: usize,
    ) -> Result<Self> {
        bang.basis().require_match(crunch.basis())?;
        let tol = Tolerances::default();
        if !bang.is_normalized(&tol) || !crunch.is_normalized(&tol) {
            return Err(Error::Contract("boundary states must be normalized".into()));
        }
        for op in forward.iter().chain(backward.iter()) {
            bang.basis().require_match(op.basis())?;
            if !op.is_unitary() {
                return Err(Error::Contract(
                    "evolution steps must be marked unitary".into(),
                ));
            }
        }
        Ok(BidirectionalScenario {
            bang,
            crunch,
            forward,
            backward,
            n_decisions,
        })
    }

    /// Both boundary states carried to the meeting point.
    pub fn evolved(&self) -> Result<(StateVector, StateVector)> {
        let mut b = self.bang.clone();
        for op in &self.forward {
            b = b.evolve(op)?;
        }
        let mut c = self.crunch.clone();
        for op in &self.backward {
            c = c.evolve(op)?;
        }
        Ok((b, c))
    }

    /// Forward states after each prefix of the (possibly spliced) forward
    /// evolution; index k holds the state after k steps.
    pub fn forward_prefix_states(&self) -> Result<Vec<StateVector>> {
        let mut states = Vec::with_capacity(self.forward.len() + 1);
        states.push(self.bang.clone());
        for op in &self.forward {
            let next = states.last().unwrap().evolve(op)?;
            states.push(next);
        }
        Ok(states)
    }
}

/// Outcome of matching the two evolved boundary states.
#[derive(Debug, Clone, Serialize)]
pub struct BorderReport {
    /// Exact overlap <evolved bang | evolved crunch>.
    pub overlap: C64,
    /// Dominant component of the symmetrized connecting matrix.
    #[serde(skip)]
    pub border: StateVector,
    /// |lambda1| / |lambda2| for the Hermitian-part construction.
    pub dominance_ratio: f64,
    /// Same ratio for the projector-product construction.
    pub dominance_ratio_product: f64,
    /// |<border_herm | border_prod>|; None when either construction is
    /// degenerate (ratio at 1) and the dominant components are not unique.
    pub construction_agreement: Option<f64>,
    /// Factorized evolution <bang'|border><border|crunch'>, to compare with
    /// the exact overlap.
    pub overlap_factorized: C64,
}

/// Match the evolved boundary states at the meeting point.
///
/// The connecting matrix is assembled in two ways, both Hermitian and
/// normalized by trace norm: the Hermitian part of |b><c| and the Hermitian
/// part of the projector product |b><b|c><c|. Both live in span{b, c}, so
/// the eigenproblem reduces to two dimensions exactly. The dominant
/// component is the eigenvector of largest magnitude.
pub fn match_border(scenario: &BidirectionalScenario) -> Result<BorderReport> {
    match_border_with(scenario, &Tolerances::default())
}

pub fn match_border_with(
    scenario: &BidirectionalScenario,
    tol: &Tolerances,
) -> Result<BorderReport> {
    let (b, c) = scenario.evolved()?;
    let overlap = b.inner(&c)?;
    if overlap.norm() < tol.overlap_floor {
        return Err(Error::IncompatibleBoundary(format!(
            "boundary overlap {:.3e} below floor {:.1e}",
            overlap.norm(),
            tol.overlap_floor
        )));
    }

    // Orthonormal frame of span{b, c}: e1 = b, e2 ∝ c - <b|c> b. The
    // e2-coefficient of c is real and non-negative by construction.
    let s = overlap;
    let perp_norm_sq = (1.0 - s.norm_sqr()).max(0.0);
    let perp_norm = perp_norm_sq.sqrt();
    let degenerate_span = perp_norm < 1e-12;

    // 2x2 representations in the frame, with c = s e1 + n e2. The
    // Hermitian-part construction is taken in the phase gauge where the
    // overlap is real positive — a global phase on either boundary state is
    // unphysical and must not move the border. The projector-product
    // construction is gauge invariant as it stands.
    let n = perp_norm;
    let phase = s / C64::new(s.norm(), 0.0);
    let h_herm = [
        [C64::new(s.norm(), 0.0), phase * (n / 2.0)],
        [phase.conj() * (n / 2.0), C64::ZERO],
    ];
    let h_prod = [
        [C64::new(s.norm_sqr(), 0.0), s * (n / 2.0)],
        [s.conj() * (n / 2.0), C64::ZERO],
    ];

    let solve = |h: [[C64; 2]; 2]| -> (f64, f64, [C64; 2]) {
        if degenerate_span {
            // rank one: border is b itself
            return (1.0, f64::INFINITY, [C64::ONE, C64::ZERO]);
        }
        let mat = DMatrix::from_row_slice(2, 2, &[h[0][0], h[0][1], h[1][0], h[1][1]]);
        let eig = hermitian_eigen(&mat);
        let trace_norm: f64 = eig.iter().map(|(l, _)| l.abs()).sum();
        let mut sorted = eig;
        sorted.sort_by(|a, b| b.0.abs().partial_cmp(&a.0.abs()).unwrap());
        let top = sorted[0].0.abs() / trace_norm;
        let second = sorted[1].0.abs() / trace_norm;
        let ratio = if second > 1e-15 { top / second } else { f64::INFINITY };
        let v = &sorted[0].1;
        (top, ratio, [v[0], v[1]])
    };

    let (_, ratio_herm, coeff_herm) = solve(h_herm);
    let (_, ratio_prod, coeff_prod) = solve(h_prod);

    let frame_to_state = |coeff: [C64; 2]| -> Result<StateVector> {
        // e2 reconstructed only when the span is two-dimensional
        let amps: Vec<C64> = if degenerate_span {
            b.amplitudes().to_vec()
        } else {
            b.amplitudes()
                .iter()
                .zip(c.amplitudes())
                .map(|(bi, ci)| {
                    let e2 = (ci - s * bi) / C64::new(perp_norm, 0.0);
                    coeff[0] * bi + coeff[1] * e2
                })
                .collect()
        };
        StateVector::new(b.basis().clone(), amps)?.normalized()
    };

    let border = frame_to_state(coeff_herm)?;
    let border_prod = frame_to_state(coeff_prod)?;
    let construction_agreement = if ratio_herm > 1.0 + 1e-9 && ratio_prod > 1.0 + 1e-9 {
        Some(border.inner(&border_prod)?.norm())
    } else {
        None
    };

    let overlap_factorized = b.inner(&border)? * border.inner(&c)?;

    Ok(BorderReport {
        overlap,
        border,
        dominance_ratio: ratio_herm,
        dominance_ratio_product: ratio_prod,
        construction_agreement,
        overlap_factorized,
    })
}

/// Splice an operation into both legs: `op` after `at_step` forward steps
/// and its complex conjugate at the mirrored backward position, so the
/// manipulation acts at the same meeting-relative time on both sides.
/// The forward evolution before `at_step` is untouched.
pub fn agent_insert(
    scenario: &BidirectionalScenario,
    at_step: usize,
    op: &Operator,
) -> Result<BidirectionalScenario> {
    if !(op.is_unitary() || op.is_projector()) {
        return Err(Error::Contract(
            "agent insertion must be marked unitary or projector".into(),
        ));
    }
    scenario.bang.basis().require_match(op.basis())?;
    if at_step > scenario.forward.len() {
        return Err(Error::Range(format!(
            "insertion step {at_step} exceeds forward decomposition length {}",
            scenario.forward.len()
        )));
    }
    if scenario.backward.len() != scenario.forward.len() {
        return Err(Error::Range(
            "mirrored insertion needs equally decomposed legs".into(),
        ));
    }
    let mirror = scenario.backward.len() - at_step;
    let mut forward = scenario.forward.clone();
    forward.insert(at_step, op.clone());
    let mut backward = scenario.backward.clone();
    backward.insert(mirror, op.conjugate());
    Ok(BidirectionalScenario {
        bang: scenario.bang.clone(),
        crunch: scenario.crunch.clone(),
        forward,
        backward,
        n_decisions: scenario.n_decisions,
    })
}

/// Mean log2 |<bang|crunch>|² for independent Haar boundary pairs, per
/// dimension, with the least-squares slope against log2(dim).
#[derive(Debug, Clone, Serialize)]
pub struct OverlapScaling {
    pub points: Vec<OverlapScalingPoint>,
    pub slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapScalingPoint {
    pub log2_dim: u32,
    pub mean_log2_overlap_sq: f64,
}

pub fn overlap_scaling_experiment(
    dim_exponents: &[u32],
    n_seeds: usize,
    base_seed: u64,
) -> Result<OverlapScaling> {
    let mut points = Vec::with_capacity(dim_exponents.len());
    for &e in dim_exponents {
        let basis = BasisLabel::single("u", 1usize << e)?;
        let values = par::map_indexed(n_seeds, |r| {
            let seed = derive_seed(base_seed, "overlap", ((e as usize) * n_seeds + r) as u64);
            let bang = random::haar_state(&basis, &mut substream(seed, "bang", 0));
            let crunch = random::haar_state(&basis, &mut substream(seed, "crunch", 0));
            let scenario =
                BidirectionalScenario::new(bang, crunch, Vec::new(), Vec::new(), e as usize)
                    .expect("normalized Haar states");
            let report = match_border(&scenario).expect("Haar pairs never orthogonal exactly");
            report.overlap.norm_sqr().log2()
        });
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        points.push(OverlapScalingPoint {
            log2_dim: e,
            mean_log2_overlap_sq: mean,
        });
    }
    // least-squares slope of mean vs log2(dim)
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.log2_dim as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.mean_log2_overlap_sq).sum::<f64>() / n;
    let num: f64 = points
        .iter()
        .map(|p| (p.log2_dim as f64 - mx) * (p.mean_log2_overlap_sq - my))
        .sum();
    let den: f64 = points
        .iter()
        .map(|p| (p.log2_dim as f64 - mx).powi(2))
        .sum();
    Ok(OverlapScaling {
        points,
        slope: num / den,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::qubit;

    fn haar(basis: &BasisLabel, seed: u64) -> StateVector {
        random::haar_state(basis, &mut substream(seed, "test", 0))
    }

    #[test]
    fn self_match_is_rank_one() {
        let basis = BasisLabel::single("u", 8).unwrap();
        let bang = haar(&basis, 1);
        let u = random::haar_unitary(&basis, &mut substream(1, "u", 0));
        // crunch = forward-evolved bang, no backward steps
        let crunch = bang.evolve(&u).unwrap();
        let scenario =
            BidirectionalScenario::new(bang, crunch, vec![u], vec![], 0).unwrap();
        let report = match_border(&scenario).unwrap();
        assert!((report.overlap.norm() - 1.0).abs() < 1e-10);
        assert!(report.dominance_ratio.is_infinite());
        let (b, _) = scenario.evolved().unwrap();
        assert!((report.border.inner(&b).unwrap().norm() - 1.0).abs() < 1e-10);
        // factorized evolution equals the exact overlap for a rank-one border
        assert!((report.overlap_factorized - report.overlap).norm() < 1e-10);
    }

    #[test]
    fn orthogonal_boundaries_rejected() {
        let basis = BasisLabel::single("u", 2).unwrap();
        let zero = StateVector::basis_state(basis.clone(), 0).unwrap();
        let one = StateVector::basis_state(basis, 1).unwrap();
        let scenario = BidirectionalScenario::new(zero, one, vec![], vec![], 0).unwrap();
        assert!(matches!(
            match_border(&scenario),
            Err(Error::IncompatibleBoundary(_))
        ));
    }

    #[test]
    fn constructions_agree_and_match_full_eigen() {
        let basis = BasisLabel::single("u", 6).unwrap();
        let bang = haar(&basis, 7);
        let crunch = haar(&basis, 8);
        let scenario = BidirectionalScenario::new(bang, crunch, vec![], vec![], 0).unwrap();
        let report = match_border(&scenario).unwrap();
        assert!(report.dominance_ratio >= 1.0);
        if let Some(agreement) = report.construction_agreement {
            assert!(agreement > 1.0 - 1e-9, "constructions disagree: {agreement}");
        }

        // oracle: full-space eigendecomposition of herm(|b><c|) in the
        // gauge where the overlap is real positive
        let (b, c) = scenario.evolved().unwrap();
        let s = b.inner(&c).unwrap();
        let gauge = (s / C64::new(s.norm(), 0.0)).conj();
        let bv = nalgebra::DVector::from_vec(b.amplitudes().to_vec());
        let cv = nalgebra::DVector::from_vec(c.amplitudes().to_vec()).map(|z| z * gauge);
        let outer = &bv * cv.adjoint();
        let herm = (&outer + outer.adjoint()) * C64::new(0.5, 0.0);
        let eig = hermitian_eigen(&herm);
        let mut sorted = eig;
        sorted.sort_by(|x, y| y.0.abs().partial_cmp(&x.0.abs()).unwrap());
        let top = StateVector::new(basis, sorted[0].1.iter().cloned().collect()).unwrap();
        let align = top.inner(&report.border).unwrap().norm();
        assert!(
            align > 1.0 - 1e-9,
            "span-reduced border disagrees with full eigen: {align}"
        );
        let full_ratio = sorted[0].0.abs() / sorted[1].0.abs();
        assert!((full_ratio - report.dominance_ratio).abs() < 1e-6);
    }

    #[test]
    fn identity_insertion_preserves_border() {
        let basis = BasisLabel::single("u", 4).unwrap();
        let u1 = random::haar_unitary(&basis, &mut substream(5, "s", 0));
        let u2 = random::haar_unitary(&basis, &mut substream(5, "s", 1));
        let bang = haar(&basis, 2);
        let crunch = haar(&basis, 3);
        let scenario = BidirectionalScenario::new(
            bang,
            crunch,
            vec![u1.clone(), u2.clone()],
            vec![u2.conjugate(), u1.conjugate()],
            2,
        )
        .unwrap();
        let base = match_border(&scenario).unwrap();
        let inserted = agent_insert(&scenario, 1, &Operator::identity(scenario.bang.basis().clone())).unwrap();
        let after = match_border(&inserted).unwrap();
        assert!((base.overlap - after.overlap).norm() < 1e-10);
        let align = base.border.inner(&after.border).unwrap().norm();
        assert!(align > 1.0 - 1e-10);
    }

    #[test]
    fn insertion_leaves_prefix_untouched() {
        let basis = BasisLabel::uniform("q", 2, 2).unwrap();
        let steps: Vec<Operator> = (0..3)
            .map(|k| random::haar_unitary(&basis, &mut substream(9, "s", k)))
            .collect();
        let bang = haar(&basis, 4);
        let crunch = haar(&basis, 5);
        let scenario = BidirectionalScenario::new(
            bang,
            crunch,
            steps.clone(),
            steps.iter().rev().map(|u| u.conjugate()).collect(),
            3,
        )
        .unwrap();
        let x_on_q0 = Operator::embedded(
            &basis,
            "q0",
            &qubit::pauli_x(),
            crate::hilbert::OperatorKind::Unitary,
        )
        .unwrap();
        let inserted = agent_insert(&scenario, 2, &x_on_q0).unwrap();
        let before = scenario.forward_prefix_states().unwrap();
        let after = inserted.forward_prefix_states().unwrap();
        // identical operations in identical order: bit-identical prefix
        for k in 0..=2 {
            assert_eq!(before[k].amplitudes(), after[k].amplitudes());
        }
        assert!(matches!(
            agent_insert(&scenario, 4, &x_on_q0),
            Err(Error::Range(_))
        ));
    }
}

//! Witnessed decision trees and boundary-conditioned pathway selection.
//!
//! A decision is a binary projector pair whose outcome gets copied into a
//! dedicated witness register. Given both boundary states, every root-to-leaf
//! projector chain carries a two-state weight; the selected macroscopic
//! pathway is the maximum-weight leaf. With orthogonal witness records the
//! cross-leaf interference terms vanish and the leaf weights are additive.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    apply_local_sequence, qubit, random, BasisLabel, LocalOperator, Operator, StateVector,
};
use crate::rng::{derive_seed, substream};
use crate::tolerances::Tolerances;

/// Binding of a decision to the environment register recording its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessBinding {
    pub decision_id: String,
    pub register: String,
    /// outcome index -> witness basis state recording it. Distinct outcomes
    /// must map to distinct (hence orthogonal) basis states.
    pub record_map: Vec<(usize, usize)>,
}

impl WitnessBinding {
    fn validate(&self, basis: &BasisLabel) -> Result<()> {
        let pos = self.register_position(basis)?;
        let dim = basis.registers()[pos].dim;
        for (i, &(_, rec)) in self.record_map.iter().enumerate() {
            if rec >= dim {
                return Err(Error::Range(format!(
                    "witness record state {rec} out of range for register '{}'",
                    self.register
                )));
            }
            if self.record_map[..i].iter().any(|&(_, r)| r == rec) {
                return Err(Error::Contract(format!(
                    "witness records for decision '{}' are not orthogonal",
                    self.decision_id
                )));
            }
        }
        Ok(())
    }

    fn register_position(&self, basis: &BasisLabel) -> Result<usize> {
        basis
            .position(&self.register)
            .ok_or_else(|| Error::Basis(format!("unknown witness register '{}'", self.register)))
    }
}

/// One decision point of a binary tree. Projector pairs act on the full
/// basis at the final boundary (already postponed).
#[derive(Debug, Clone)]
pub struct DecisionNode {
    pub decision_id: String,
    pub projectors: [Operator; 2],
    pub children: Option<Box<[DecisionNode; 2]>>,
}

/// Rooted binary decision tree with its witness bindings.
#[derive(Debug, Clone)]
pub struct DecisionTree {
    pub root: DecisionNode,
    pub bindings: Vec<WitnessBinding>,
}

impl DecisionTree {
    pub fn validate(&self, basis: &BasisLabel, tol: &Tolerances) -> Result<()> {
        for b in &self.bindings {
            b.validate(basis)?;
        }
        validate_node(&self.root, basis, tol)
    }
}

fn validate_node(node: &DecisionNode, basis: &BasisLabel, tol: &Tolerances) -> Result<()> {
    for p in &node.projectors {
        basis.require_match(p.basis())?;
        if !p.is_projector() {
            return Err(Error::Contract(format!(
                "decision '{}' carries an operator not marked projector",
                node.decision_id
            )));
        }
    }
    let dim = basis.dim();
    let sum = node.projectors[0].matrix() + node.projectors[1].matrix();
    let dev = (sum - DMatrix::identity(dim, dim))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > tol.completeness {
        return Err(Error::Contract(format!(
            "decision '{}' projectors sum to identity only within {dev:.3e}",
            node.decision_id
        )));
    }
    let cross = (node.projectors[0].matrix() * node.projectors[1].matrix())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if cross > tol.completeness {
        return Err(Error::Contract(format!(
            "decision '{}' projectors are not orthogonal (cross term {cross:.3e})",
            node.decision_id
        )));
    }
    if let Some(children) = &node.children {
        for c in children.iter() {
            validate_node(c, basis, tol)?;
        }
    }
    Ok(())
}

/// Weight record of one root-to-leaf pathway.
#[derive(Debug, Clone, Serialize)]
pub struct LeafRecord {
    /// Branch choices from the root (0 = left, 1 = right).
    pub path: Vec<u8>,
    pub decisions: Vec<String>,
    /// log2 of the leaf numerator |<f| M_chain U |i>|².
    pub log2_numerator: f64,
    /// Leaf numerator normalized over all leaves.
    pub weight: f64,
}

/// Outcome of evaluating a decision tree between two boundary states.
#[derive(Debug, Clone, Serialize)]
pub struct PathwayReport {
    pub leaves: Vec<LeafRecord>,
    /// Index of the selected (maximum-weight) leaf in `leaves`.
    pub selected: usize,
    /// |log2 w1 - log2 w2| between the two top-weight leaves.
    pub gap_log2: f64,
    /// Top two weights agree within relative 1e-12; selection fell back to
    /// the lexicographically smallest path.
    pub tie: bool,
    /// Coherent boundary numerator |<f|U|i>|², with every cross-pattern
    /// interference term still present.
    pub denominator: f64,
    /// Sum of leaf numerators. Against the witness-dephased boundary this
    /// IS the total overlap: orthogonal records kill all cross terms there.
    /// Against the coherent pure boundary the difference to `denominator`
    /// is the residual interference, which averages to zero.
    pub weight_sum: f64,
    /// (denominator - weight_sum) / weight_sum, the residual cross-pattern
    /// interference fraction relative to the decohered overlap.
    pub cross_fraction: f64,
}

fn finish_report(
    mut leaves: Vec<LeafRecord>,
    denominator: f64,
    tol: &Tolerances,
) -> Result<PathwayReport> {
    let numerators: Vec<f64> = leaves
        .iter()
        .map(|l| l.log2_numerator.exp2())
        .collect();
    let total: f64 = numerators.iter().sum();
    if !(total > tol.overlap_floor) {
        return Err(Error::IncompatibleBoundary(
            "every pathway weight vanishes for the given boundaries".into(),
        ));
    }
    for (leaf, num) in leaves.iter_mut().zip(&numerators) {
        leaf.weight = num / total;
    }
    let mut order: Vec<usize> = (0..leaves.len()).collect();
    order.sort_by(|&a, &b| {
        numerators[b]
            .partial_cmp(&numerators[a])
            .unwrap()
            .then_with(|| leaves[a].path.cmp(&leaves[b].path))
    });
    let selected = order[0];
    let (gap_log2, tie) = if order.len() > 1 {
        let top = numerators[order[0]];
        let second = numerators[order[1]];
        let gap = if second > 0.0 {
            (top.log2() - second.log2()).abs()
        } else {
            f64::INFINITY
        };
        (gap, (top - second).abs() <= 1e-12 * top.abs())
    } else {
        (f64::INFINITY, false)
    };
    Ok(PathwayReport {
        leaves,
        selected,
        gap_log2,
        tie,
        denominator,
        weight_sum: total,
        cross_fraction: (denominator - total) / total,
    })
}

/// Evaluate a decision tree whose node projectors are postponed to the
/// final boundary: leaf numerators are |<f| M_leaf ... M_root U |i>|².
pub fn run_tree(
    initial: &StateVector,
    tree: &DecisionTree,
    final_state: &StateVector,
    evolution: &Operator,
) -> Result<PathwayReport> {
    run_tree_with(initial, tree, final_state, evolution, &Tolerances::default())
}

pub fn run_tree_with(
    initial: &StateVector,
    tree: &DecisionTree,
    final_state: &StateVector,
    evolution: &Operator,
    tol: &Tolerances,
) -> Result<PathwayReport> {
    let basis = initial.basis();
    basis.require_match(final_state.basis())?;
    tree.validate(basis, tol)?;
    let evolved = initial.evolve(evolution)?;
    let denominator = final_state.inner(&evolved)?.norm_sqr();

    let mut leaves = Vec::new();
    descend_tree(
        &tree.root,
        &evolved,
        final_state,
        &mut Vec::new(),
        &mut Vec::new(),
        &mut leaves,
    )?;
    finish_report(leaves, denominator, tol)
}

fn descend_tree(
    node: &DecisionNode,
    state: &StateVector,
    final_state: &StateVector,
    path: &mut Vec<u8>,
    decisions: &mut Vec<String>,
    leaves: &mut Vec<LeafRecord>,
) -> Result<()> {
    decisions.push(node.decision_id.clone());
    for branch in 0..2u8 {
        let projected = state.apply(&node.projectors[branch as usize])?;
        path.push(branch);
        match &node.children {
            Some(children) => {
                descend_tree(
                    &children[branch as usize],
                    &projected,
                    final_state,
                    path,
                    decisions,
                    leaves,
                )?;
            }
            None => {
                let amp = final_state.inner(&projected)?;
                leaves.push(LeafRecord {
                    path: path.clone(),
                    decisions: decisions.clone(),
                    log2_numerator: amp.norm_sqr().log2(),
                    weight: 0.0,
                });
            }
        }
        path.pop();
    }
    decisions.pop();
    Ok(())
}

/// One stage of a witnessed decision chain: an evolution segment followed by
/// a binary decision on one register. Stored as local operators so deep
/// chains stay cheap.
#[derive(Debug, Clone)]
pub struct DecisionStage {
    pub decision_id: String,
    /// Evolution applied before the decision (witness couplings, rotations).
    pub pre_evolution: Vec<LocalOperator>,
    /// Register the decision projects on.
    pub register: String,
    /// Local projector pair on that register.
    pub projectors: [DMatrix<C64>; 2],
}

/// Evaluate a decision chain in the interleaved picture
/// `<f| P_n S_n ... P_1 S_1 |i>`, which equals the postponed-projector chain
/// of [`run_tree`] with `M'_k = (S_n…S_{k+1}) P_k (S_n…S_{k+1})†`.
pub fn run_chain(
    initial: &StateVector,
    stages: &[DecisionStage],
    final_state: &StateVector,
) -> Result<PathwayReport> {
    run_chain_with(initial, stages, final_state, &Tolerances::default())
}

pub fn run_chain_with(
    initial: &StateVector,
    stages: &[DecisionStage],
    final_state: &StateVector,
    tol: &Tolerances,
) -> Result<PathwayReport> {
    if stages.is_empty() {
        return Err(Error::Config("decision chain needs at least one stage".into()));
    }
    let basis = initial.basis();
    basis.require_match(final_state.basis())?;
    for stage in stages {
        for op in &stage.pre_evolution {
            if !op.is_unitary() {
                return Err(Error::Contract(format!(
                    "stage '{}' evolution must be marked unitary",
                    stage.decision_id
                )));
            }
        }
    }

    // unconditioned evolution for the denominator
    let mut free = initial.clone();
    for stage in stages {
        free = apply_local_sequence(&free, &stage.pre_evolution)?;
    }
    let denominator = final_state.inner(&free)?.norm_sqr();

    let mut leaves = Vec::new();
    let mut path = Vec::new();
    descend_chain(initial, stages, final_state, &mut path, &mut leaves)?;
    let ids: Vec<String> = stages.iter().map(|s| s.decision_id.clone()).collect();
    for leaf in &mut leaves {
        leaf.decisions = ids.clone();
    }
    finish_report(leaves, denominator, tol)
}

fn descend_chain(
    state: &StateVector,
    stages: &[DecisionStage],
    final_state: &StateVector,
    path: &mut Vec<u8>,
    leaves: &mut Vec<LeafRecord>,
) -> Result<()> {
    let stage = &stages[0];
    let evolved = apply_local_sequence(state, &stage.pre_evolution)?;
    for branch in 0..2u8 {
        let projector = LocalOperator::projector(
            vec![stage.register.clone()],
            stage.projectors[branch as usize].clone(),
        )?;
        let projected = crate::hilbert::apply_local(&evolved, &projector)?;
        path.push(branch);
        if stages.len() > 1 {
            descend_chain(&projected, &stages[1..], final_state, path, leaves)?;
        } else {
            let amp = final_state.inner(&projected)?;
            leaves.push(LeafRecord {
                path: path.clone(),
                decisions: Vec::new(),
                log2_numerator: amp.norm_sqr().log2(),
                weight: 0.0,
            });
        }
        path.pop();
    }
    Ok(())
}

/// Preparation of the split register.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Preparation {
    /// Eigenstate of the decision basis: the branch is deterministic.
    Up,
    /// Symmetric superposition (|0> + |1>)/sqrt2.
    PlusX,
    /// cos(theta/2)|0> + sin(theta/2)|1>.
    Angle(f64),
}

impl Preparation {
    pub fn amplitudes(&self) -> [C64; 2] {
        match self {
            Preparation::Up => [C64::ONE, C64::ZERO],
            Preparation::PlusX => {
                let s = 1.0 / 2f64.sqrt();
                [C64::new(s, 0.0), C64::new(s, 0.0)]
            }
            Preparation::Angle(theta) => [
                C64::new((theta / 2.0).cos(), 0.0),
                C64::new((theta / 2.0).sin(), 0.0),
            ],
        }
    }
}

/// Report of one seeded two-branch amplification run.
#[derive(Debug, Clone, Serialize)]
pub struct SternGerlachReport {
    pub witness_count: usize,
    pub selected_up: bool,
    pub gap_log2: f64,
    pub log2_weight_up: f64,
    pub log2_weight_down: f64,
    pub tie: bool,
}

/// Basis of a system qubit plus `witness_count` witness qubits.
fn sg_basis(witness_count: usize) -> Result<BasisLabel> {
    let mut regs = vec![crate::hilbert::Register {
        name: "sys".into(),
        dim: 2,
    }];
    for k in 0..witness_count {
        regs.push(crate::hilbert::Register {
            name: format!("w{k}"),
            dim: 2,
        });
    }
    BasisLabel::new(regs)
}

/// Two-branch splitter: the system qubit is copied into `witness_count`
/// witness registers, the final boundary is a product of independent
/// Haar-random single-register states (witnesses scattered into independent
/// environment corners factorize the final boundary), and the pathway is
/// the maximum-weight branch.
pub fn stern_gerlach_scenario(
    seed: u64,
    witness_count: usize,
    prep: Preparation,
) -> Result<SternGerlachReport> {
    if witness_count == 0 {
        return Err(Error::Config(
            "a macroscopic decision needs at least one witness register".into(),
        ));
    }
    let basis = sg_basis(witness_count)?;
    let prep_amps = prep.amplitudes();
    let mut initial = StateVector::new(
        BasisLabel::single("sys", 2)?,
        vec![prep_amps[0], prep_amps[1]],
    )?;
    for k in 0..witness_count {
        let w = StateVector::basis_state(BasisLabel::single(&format!("w{k}"), 2)?, 0)?;
        initial = initial.tensor(&w)?;
    }

    let copies: Vec<LocalOperator> = (0..witness_count)
        .map(|k| LocalOperator::cnot("sys", &format!("w{k}")))
        .collect();
    let stages = vec![DecisionStage {
        decision_id: "split".into(),
        pre_evolution: copies,
        register: "sys".into(),
        projectors: [qubit::level_projector(0), qubit::level_projector(1)],
    }];

    let final_state = random::product_haar_state(&basis, |r| substream(seed, "sg-final", r as u64));
    let report = run_chain(&initial, &stages, &final_state)?;
    // leaf order: path [0] = up, path [1] = down
    let up = &report.leaves[0];
    let down = &report.leaves[1];
    Ok(SternGerlachReport {
        witness_count,
        selected_up: report.selected == 0,
        gap_log2: report.gap_log2,
        log2_weight_up: up.log2_numerator,
        log2_weight_down: down.log2_numerator,
        tie: report.tie,
    })
}

/// The same branch weights as [`stern_gerlach_scenario`], accumulated
/// factor-by-factor in the log domain. The product boundary makes the leaf
/// numerator a product of per-register overlaps, so the weights of both
/// branches (and the gap) can be chained without building the composite
/// space — this is what makes thousand-decision gap statistics tractable.
pub fn stern_gerlach_gap_chained(seed: u64, witness_count: usize, prep: Preparation) -> Result<f64> {
    if witness_count == 0 {
        return Err(Error::Config(
            "a macroscopic decision needs at least one witness register".into(),
        ));
    }
    let qubit_basis = BasisLabel::single("sys", 2)?;
    let prep_amps = prep.amplitudes();
    let mut log2_up = (prep_amps[0].norm_sqr()).log2();
    let mut log2_down = (prep_amps[1].norm_sqr()).log2();
    for r in 0..=witness_count {
        let f = random::haar_state(&qubit_basis, &mut substream(seed, "sg-final", r as u64));
        let u = f.amplitudes()[0].norm_sqr();
        // register r records up as |0> (and the system itself stays aligned)
        log2_up += u.log2();
        log2_down += (1.0 - u).log2();
    }
    Ok((log2_up - log2_down).abs())
}

/// Median gap statistic across seeds for each decision count.
#[derive(Debug, Clone, Serialize)]
pub struct GapScalingPoint {
    pub decisions: usize,
    pub median_gap_log2: f64,
}

pub fn gap_scaling_experiment(
    decision_counts: &[usize],
    n_seeds: usize,
    base_seed: u64,
) -> Result<Vec<GapScalingPoint>> {
    let mut points = Vec::with_capacity(decision_counts.len());
    for (i, &n) in decision_counts.iter().enumerate() {
        let gaps = crate::par::map_indexed(n_seeds, |s| {
            let seed = derive_seed(base_seed, "gap-scaling", (i * n_seeds + s) as u64);
            stern_gerlach_gap_chained(seed, n, Preparation::PlusX).expect("witness_count > 0")
        });
        points.push(GapScalingPoint {
            decisions: n,
            median_gap_log2: median(gaps),
        });
    }
    Ok(points)
}

pub(crate) fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// A seeded chain of `n` rotated, witnessed decisions on one system qubit,
/// for pathway enumeration tests and demos.
pub struct ChainScenario {
    pub basis: BasisLabel,
    pub initial: StateVector,
    pub stages: Vec<DecisionStage>,
}

pub fn witnessed_chain_scenario(n: usize, seed: u64, prep: Preparation) -> Result<ChainScenario> {
    if n == 0 {
        return Err(Error::Config("chain needs at least one decision".into()));
    }
    let basis = sg_basis(n)?;
    let prep_amps = prep.amplitudes();
    let mut initial = StateVector::new(
        BasisLabel::single("sys", 2)?,
        vec![prep_amps[0], prep_amps[1]],
    )?;
    for k in 0..n {
        let w = StateVector::basis_state(BasisLabel::single(&format!("w{k}"), 2)?, 0)?;
        initial = initial.tensor(&w)?;
    }
    let stages = (0..n)
        .map(|k| {
            let rot = random::haar_unitary(
                &BasisLabel::single("sys", 2).expect("valid"),
                &mut substream(seed, "chain-rot", k as u64),
            );
            Ok(DecisionStage {
                decision_id: format!("d{k}"),
                pre_evolution: vec![
                    LocalOperator::unitary(vec!["sys".into()], rot.matrix().clone())?,
                    LocalOperator::cnot("sys", &format!("w{k}")),
                ],
                register: "sys".into(),
                projectors: [qubit::level_projector(0), qubit::level_projector(1)],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainScenario {
        basis,
        initial,
        stages,
    })
}

/// Haar-random final state over the full chain basis.
pub fn chain_final_state<R: Rng>(scenario: &ChainScenario, rng: &mut R) -> StateVector {
    random::haar_state(&scenario.basis, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::OperatorKind;

    #[test]
    fn single_decision_forced_by_post_selection() {
        // initial (|0>+|1>)/sqrt2 ⊗ |w=0>, final fully witnessing up
        let report = {
            let basis = sg_basis(1).unwrap();
            let s = 1.0 / 2f64.sqrt();
            let sys = StateVector::new(
                BasisLabel::single("sys", 2).unwrap(),
                vec![C64::new(s, 0.0), C64::new(s, 0.0)],
            )
            .unwrap();
            let w = StateVector::basis_state(BasisLabel::single("w0", 2).unwrap(), 0).unwrap();
            let initial = sys.tensor(&w).unwrap();
            let final_state = StateVector::basis_state(basis, 0).unwrap(); // |sys=0, w=0>
            let stages = vec![DecisionStage {
                decision_id: "split".into(),
                pre_evolution: vec![LocalOperator::cnot("sys", "w0")],
                register: "sys".into(),
                projectors: [qubit::level_projector(0), qubit::level_projector(1)],
            }];
            run_chain(&initial, &stages, &final_state).unwrap()
        };
        assert_eq!(report.selected, 0);
        assert!((report.leaves[0].weight - 1.0).abs() < 1e-12);
        // single-pattern final state: no residual interference at all
        assert!(report.cross_fraction.abs() < 1e-9);
    }

    #[test]
    fn chain_weights_are_additive_and_match_tree() {
        // 3 witnessed rotated decisions: chain == general tree with densely
        // postponed projectors, and the decohered weights are additive.
        let n = 3;
        let scenario = witnessed_chain_scenario(n, 11, Preparation::PlusX).unwrap();
        let final_state = chain_final_state(&scenario, &mut substream(11, "chain-final", 0));
        let chain_report = run_chain(&scenario.initial, &scenario.stages, &final_state).unwrap();
        assert_eq!(chain_report.leaves.len(), 8);
        let total: f64 = chain_report.leaves.iter().map(|l| l.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);

        // dense route: build full-space stage unitaries, postpone the
        // decision projectors to the final boundary, chain them as a tree
        let basis = &scenario.basis;
        let dim = basis.dim();
        let mut stage_ops = Vec::new();
        for stage in &scenario.stages {
            let mut u = Operator::identity(basis.clone());
            for local in &stage.pre_evolution {
                let embedded = embed_local(basis, local);
                u = embedded.compose(&u).unwrap();
            }
            stage_ops.push(u);
        }
        // A_k = S_n ... S_{k+1}
        let mut after = vec![Operator::identity(basis.clone()); n];
        for k in (0..n - 1).rev() {
            after[k] = after[k + 1].compose(&stage_ops[k + 1]).unwrap();
        }
        let mut evolution = Operator::identity(basis.clone());
        for op in &stage_ops {
            evolution = op.compose(&evolution).unwrap();
        }
        let tol = Tolerances::default();
        let postponed: Vec<[Operator; 2]> = (0..n)
            .map(|k| {
                let mk = |level: usize| {
                    let local = Operator::embedded(
                        basis,
                        "sys",
                        &qubit::level_projector(level),
                        OperatorKind::Projector,
                    )
                    .unwrap();
                    local.conjugated_by(&after[k], &tol).unwrap()
                };
                [mk(0), mk(1)]
            })
            .collect();
        // depth-first construction of the uniform tree
        fn build(postponed: &[[Operator; 2]], k: usize) -> DecisionNode {
            let children = if k + 1 < postponed.len() {
                Some(Box::new([
                    build(postponed, k + 1),
                    build(postponed, k + 1),
                ]))
            } else {
                None
            };
            DecisionNode {
                decision_id: format!("d{k}"),
                projectors: postponed[k].clone(),
                children,
            }
        }
        let tree = DecisionTree {
            root: build(&postponed, 0),
            bindings: (0..n)
                .map(|k| WitnessBinding {
                    decision_id: format!("d{k}"),
                    register: format!("w{k}"),
                    record_map: vec![(0, 0), (1, 1)],
                })
                .collect(),
        };
        let tree_report = run_tree(&scenario.initial, &tree, &final_state, &evolution).unwrap();
        assert_eq!(tree_report.leaves.len(), chain_report.leaves.len());
        for (a, b) in tree_report.leaves.iter().zip(&chain_report.leaves) {
            assert_eq!(a.path, b.path);
            assert!(
                (a.log2_numerator - b.log2_numerator).abs() < 1e-9,
                "postponed tree and interleaved chain disagree: {} vs {}",
                a.log2_numerator,
                b.log2_numerator
            );
        }
        assert_eq!(tree_report.selected, chain_report.selected);
        assert_eq!(dim, 16);

        // decoherence additivity against the witness-dephased boundary:
        // record projectors kill every cross term, so pattern weights sum
        // to exactly 1 in the trace form
        let patterns: Vec<Operator> = (0..8usize)
            .map(|l| {
                let mut p = Operator::embedded(
                    basis,
                    "w0",
                    &qubit::level_projector((l >> 2) & 1),
                    OperatorKind::Projector,
                )
                .unwrap();
                for (k, reg) in ["w1", "w2"].iter().enumerate() {
                    let bit = (l >> (1 - k)) & 1;
                    let factor = Operator::embedded(
                        basis,
                        reg,
                        &qubit::level_projector(bit),
                        OperatorKind::Projector,
                    )
                    .unwrap();
                    p = Operator::projector(basis.clone(), p.matrix() * factor.matrix()).unwrap();
                }
                p
            })
            .collect();
        let mut dephased = DMatrix::from_element(dim, dim, C64::ZERO);
        let fmat = {
            let fv = nalgebra::DVector::from_vec(final_state.amplitudes().to_vec());
            &fv * fv.adjoint()
        };
        for p in &patterns {
            dephased += p.matrix() * &fmat * p.matrix();
        }
        let d = crate::hilbert::DensityMatrix::try_new(basis.clone(), dephased).unwrap();
        let pair = crate::tsvf::BoundaryPair::new(
            crate::hilbert::DensityMatrix::from_pure(&scenario.initial),
            d,
            evolution.clone(),
            evolution.adjoint(),
        )
        .unwrap();
        let total_weight: f64 = patterns
            .iter()
            .map(|p| crate::tsvf::boundary_weight(&pair, p).unwrap())
            .sum();
        assert!(
            (total_weight - 1.0).abs() < 1e-9,
            "dephased-boundary pattern weights must be additive, sum = {total_weight}"
        );
    }

    fn embed_local(basis: &BasisLabel, local: &LocalOperator) -> Operator {
        // dense embedding of a local operator, for cross-checking only
        let dim = basis.dim();
        let mut mat = DMatrix::from_element(dim, dim, C64::ZERO);
        for col in 0..dim {
            let basis_state = StateVector::basis_state(basis.clone(), col).unwrap();
            let image = crate::hilbert::apply_local(&basis_state, local).unwrap();
            for row in 0..dim {
                mat[(row, col)] = image.amplitudes()[row];
            }
        }
        Operator::unitary_with(basis.clone(), mat, &Tolerances::default()).unwrap()
    }

    #[test]
    fn orthogonal_final_state_is_incompatible() {
        // no rotations: only records 00.. and 11.. are reachable; a final
        // state supported on an unreachable record annihilates every leaf
        let basis = sg_basis(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let sys = StateVector::new(
            BasisLabel::single("sys", 2).unwrap(),
            vec![C64::new(s, 0.0), C64::new(s, 0.0)],
        )
        .unwrap();
        let w0 = StateVector::basis_state(BasisLabel::single("w0", 2).unwrap(), 0).unwrap();
        let w1 = StateVector::basis_state(BasisLabel::single("w1", 2).unwrap(), 0).unwrap();
        let initial = sys.tensor(&w0).unwrap().tensor(&w1).unwrap();
        let stages: Vec<DecisionStage> = (0..2)
            .map(|k| DecisionStage {
                decision_id: format!("d{k}"),
                pre_evolution: vec![LocalOperator::cnot("sys", &format!("w{k}"))],
                register: "sys".into(),
                projectors: [qubit::level_projector(0), qubit::level_projector(1)],
            })
            .collect();
        // |sys=0, w0=0, w1=1> is unreachable
        let final_state = StateVector::basis_state(basis, 1).unwrap();
        assert!(matches!(
            run_chain(&initial, &stages, &final_state),
            Err(Error::IncompatibleBoundary(_))
        ));
    }

    #[test]
    fn sg_deterministic_branch_for_eigenstate_prep() {
        for seed in 0..20 {
            let r = stern_gerlach_scenario(seed, 4, Preparation::Up).unwrap();
            assert!(r.selected_up, "seed {seed} selected down for pure-up prep");
        }
    }

    #[test]
    fn sg_rejects_zero_witnesses() {
        assert!(matches!(
            stern_gerlach_scenario(1, 0, Preparation::PlusX),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn chained_gap_matches_full_run() {
        for seed in [3u64, 17, 99] {
            let full = stern_gerlach_scenario(seed, 6, Preparation::PlusX).unwrap();
            let chained = stern_gerlach_gap_chained(seed, 6, Preparation::PlusX).unwrap();
            assert!(
                (full.gap_log2 - chained).abs() < 1e-9,
                "seed {seed}: full {} vs chained {}",
                full.gap_log2,
                chained
            );
        }
    }
}

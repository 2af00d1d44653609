//! Macroscopic branching: equivalence classes of microstates, witnessed
//! decision trees, bidirectional boundary matching and agent insertions.
//!
//! Macroscopic states are declared, never inferred: a [`MacroState`] lists
//! the basis indices its class contains, and a [`MacroPartition`] covers the
//! basis with disjoint classes. Summing a class over all relative phases of
//! its members phase-averages every cross term away, so class-to-class
//! transition weights are incoherent sums of squared matrix elements.

mod bidirectional;
mod interference;
mod tree;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{BasisLabel, Operator};

pub use bidirectional::{
    agent_insert, match_border, match_border_with, overlap_scaling_experiment,
    BidirectionalScenario, BorderReport, OverlapScaling, OverlapScalingPoint,
};
pub use interference::{coexisting_paths_check, VisibilityReport};
pub use tree::{
    chain_final_state, gap_scaling_experiment, run_chain, run_chain_with, run_tree, run_tree_with,
    stern_gerlach_gap_chained, stern_gerlach_scenario, witnessed_chain_scenario, ChainScenario,
    DecisionNode, DecisionStage, DecisionTree, GapScalingPoint, LeafRecord, PathwayReport,
    Preparation, SternGerlachReport, WitnessBinding,
};

/// Phase bookkeeping of a macroscopic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhasePolicy {
    /// The class stands for the sum of its members over every relative
    /// phase; cross terms average away in any derived weight.
    SumAllPhases,
}

/// An equivalence class of basis states that are macroscopically the same.
#[derive(Debug, Clone, Serialize)]
pub struct MacroState {
    pub class_id: String,
    pub members: Vec<usize>,
    pub phase_policy: PhasePolicy,
}

/// Disjoint macroscopic classes covering the whole basis.
#[derive(Debug, Clone)]
pub struct MacroPartition {
    basis: BasisLabel,
    classes: Vec<MacroState>,
}

impl MacroPartition {
    pub fn new(basis: BasisLabel, classes: Vec<MacroState>) -> Result<Self> {
        let dim = basis.dim();
        let mut seen = vec![false; dim];
        for class in &classes {
            if class.members.is_empty() {
                return Err(Error::Contract(format!(
                    "macroscopic class '{}' has no members",
                    class.class_id
                )));
            }
            for &m in &class.members {
                if m >= dim {
                    return Err(Error::Range(format!(
                        "class '{}' member {m} out of range for dimension {dim}",
                        class.class_id
                    )));
                }
                if seen[m] {
                    return Err(Error::Contract(format!(
                        "basis index {m} belongs to more than one class"
                    )));
                }
                seen[m] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Contract(format!(
                "basis index {missing} belongs to no class"
            )));
        }
        Ok(MacroPartition { basis, classes })
    }

    /// Every basis index its own class.
    pub fn fine_grained(basis: BasisLabel) -> Self {
        let classes = (0..basis.dim())
            .map(|i| MacroState {
                class_id: format!("c{i}"),
                members: vec![i],
                phase_policy: PhasePolicy::SumAllPhases,
            })
            .collect();
        MacroPartition { basis, classes }
    }

    pub fn basis(&self) -> &BasisLabel {
        &self.basis
    }

    pub fn classes(&self) -> &[MacroState] {
        &self.classes
    }
}

/// Phase-averaged transition weight from class `a` to class `b` under `u`:
/// the mean over `a`'s members of the total probability landing in `b`.
pub fn class_transition_weight(
    initial: &MacroState,
    final_class: &MacroState,
    u: &Operator,
) -> f64 {
    let m = u.matrix();
    let mut acc = 0.0;
    for &i in &initial.members {
        for &j in &final_class.members {
            acc += m[(j, i)].norm_sqr();
        }
    }
    acc / initial.members.len() as f64
}

/// Count macroscopic pathways: (initial class, final class) pairs whose
/// transition weight exceeds `threshold`.
pub fn pathway_multiplicity(
    initial: &MacroPartition,
    final_partition: &MacroPartition,
    u: &Operator,
    threshold: f64,
) -> Result<usize> {
    initial.basis.require_match(&final_partition.basis)?;
    initial.basis.require_match(u.basis())?;
    let mut count = 0;
    for a in &initial.classes {
        for b in &final_partition.classes {
            if class_transition_weight(a, b, u) > threshold {
                count += 1;
            }
        }
    }
    Ok(count)
}

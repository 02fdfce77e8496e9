//! Serializable report structures for validation and consistency checks.
//!
//! Reports carry symbolic names rather than dense indices so they stay
//! meaningful without the model in hand, and every check embeds the
//! tolerance and scale it compared against.

use serde::{Deserialize, Serialize};

use crate::model::{Cmp, Trajectory, Transition};

/// A trajectory rendered with symbolic names: a start state and a chain of
/// `(action, to)` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub start: String,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub action: String,
    pub to: String,
}

impl TrajectoryRecord {
    pub fn from_trajectory(cmp: &Cmp, t: &Trajectory) -> Self {
        TrajectoryRecord {
            start: cmp.state_name(t.start()).to_owned(),
            steps: t
                .transitions()
                .iter()
                .map(|tr| StepRecord {
                    action: cmp.action_name(tr.action).to_owned(),
                    to: cmp.state_name(tr.to).to_owned(),
                })
                .collect(),
        }
    }
}

/// A transition rendered with symbolic names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub from: String,
    pub action: String,
    pub to: String,
}

impl TransitionRecord {
    pub fn from_transition(cmp: &Cmp, t: Transition) -> Self {
        TransitionRecord {
            from: cmp.state_name(t.from).to_owned(),
            action: cmp.action_name(t.action).to_owned(),
            to: cmp.state_name(t.to).to_owned(),
        }
    }
}

/// One model-invariant finding from `Cmp::validate` or table validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValidationIssue {
    /// Next-state probabilities of a legal pair do not sum to 1.
    SimplexSum { state: String, action: String, sum: f64 },
    /// A probability is negative or not finite.
    InvalidProbability {
        from: String,
        action: String,
        to: String,
        prob: f64,
    },
    /// A termination probability lies outside `[0, 1]`.
    TerminationRange {
        from: String,
        action: String,
        to: String,
        term: f64,
    },
    /// A state with no legal action that can be entered non-terminally.
    DeadEndState { state: String },
    /// A table key that is not a valid trajectory of the model.
    InvalidTableKey {
        trajectory: TrajectoryRecord,
        detail: String,
    },
    /// A utility magnitude beyond which ordinal comparisons lose fidelity.
    ExtremeUtility {
        trajectory: TrajectoryRecord,
        utility: f64,
    },
}

/// Validation findings, split into hard errors and allowed-but-flagged
/// warnings. Validation never aborts; it reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
    pub warnings: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    pub fn violated(&self) -> bool {
        !self.errors.is_empty()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.errors.extend(other.errors);
        self.warnings.extend(other.warnings);
    }
}

/// Verdict of a consistency check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Consistent,
    Violated,
}

/// Which check produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Validate,
    ExtractAffine,
    Memorylessness,
    Additivity,
    Dominance,
    Potential,
    PathObliviousness,
    Completion,
    Ordinal,
}

/// One refutation record. Each variant names the trajectories or
/// transitions involved and the numeric residual that exceeded tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// `u(t·follow_up)` is not the extracted affine image of `u(follow_up)`.
    AffineResidual {
        transition: TransitionRecord,
        follow_up: TrajectoryRecord,
        residual: f64,
    },
    /// An extracted reward multiplier is zero or negative.
    NonpositiveMultiplier {
        transition: TransitionRecord,
        multiplier: f64,
    },
    /// Prepending `prefix` flips the comparison of `left` and `right`.
    OrdinalFlip {
        prefix: TrajectoryRecord,
        left: TrajectoryRecord,
        right: TrajectoryRecord,
        bare_delta: f64,
        prefixed_delta: f64,
    },
    /// A determined multiplier differs from 1.
    MultiplierNotUnit {
        transition: TransitionRecord,
        multiplier: f64,
    },
    /// `u(p1·s1) + u(p2·s2) != u(p1·s2) + u(p2·s1)` beyond tolerance.
    ExchangeResidual {
        first_prefix: TrajectoryRecord,
        second_prefix: TrajectoryRecord,
        first_suffix: TrajectoryRecord,
        second_suffix: TrajectoryRecord,
        residual: f64,
    },
    /// Componentwise-preferred parts composed into a dispreferred whole.
    DominanceCounterexample {
        preferred_prefix: TrajectoryRecord,
        other_prefix: TrajectoryRecord,
        preferred_suffix: TrajectoryRecord,
        other_suffix: TrajectoryRecord,
        composed_gap: f64,
    },
    /// A transition whose reward disagrees with the potential difference of
    /// its endpoints; equivalently, a cycle with nonzero additive return.
    CycleResidual {
        transition: TransitionRecord,
        residual: f64,
    },
    /// Two connectors to the same state assign different utilities to a
    /// follow-up trajectory.
    ConnectorMismatch {
        state: String,
        connector: TrajectoryRecord,
        baseline_connector: TrajectoryRecord,
        trajectory: TrajectoryRecord,
        residual: f64,
    },
    /// A strict-preference cycle in raw pairwise comparisons.
    PreferenceCycle { trajectories: Vec<TrajectoryRecord> },
    /// A pair of trajectories the given comparisons leave unordered.
    IncomparablePair {
        left: TrajectoryRecord,
        right: TrajectoryRecord,
    },
}

/// Outcome of one consistency check: a verdict, the refuting witnesses (in
/// canonical enumeration order, capped at [`ConsistencyReport::WITNESS_CAP`]),
/// transitions whose multiplier the data leaves arbitrary, and the tolerance
/// and scale the residuals were compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub check: CheckKind,
    pub status: CheckStatus,
    pub witnesses: Vec<Witness>,
    pub undetermined: Vec<TransitionRecord>,
    pub tolerance: f64,
    pub scale: f64,
    pub horizon: Option<usize>,
}

impl ConsistencyReport {
    /// Upper bound on stored witnesses; scans stop once it is reached.
    pub const WITNESS_CAP: usize = 1000;

    pub fn new(check: CheckKind, tolerance: f64, scale: f64, horizon: Option<usize>) -> Self {
        ConsistencyReport {
            check,
            status: CheckStatus::Consistent,
            witnesses: Vec::new(),
            undetermined: Vec::new(),
            tolerance,
            scale,
            horizon,
        }
    }

    /// Records a witness (dropped past the cap) and marks the report violated.
    pub fn add_witness(&mut self, w: Witness) {
        self.status = CheckStatus::Violated;
        if self.witnesses.len() < Self::WITNESS_CAP {
            self.witnesses.push(w);
        }
    }

    pub fn witness_cap_reached(&self) -> bool {
        self.witnesses.len() >= Self::WITNESS_CAP
    }

    pub fn is_consistent(&self) -> bool {
        self.status == CheckStatus::Consistent
    }
}

//! Controlled Markov processes and the trajectory/lottery algebra over them.
//!
//! A [`Cmp`] is the world model: finite state and action sets, per-pair
//! transition distributions, and per-transition termination probabilities.
//! Rewards live elsewhere; this module only knows which trajectories exist.
//!
//! Identifiers are symbolic at the file boundary and mapped to dense indices
//! ([`StateId`], [`ActionId`]) at build time; canonical order is declaration
//! order, which makes enumeration and reports deterministic.

use std::cmp::Ordering;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::planning::MemorylessPolicy;
use crate::report::{ValidationIssue, ValidationReport};
use crate::PROB_SUM_TOL;

/// Dense index of a state in its owning [`Cmp`] (declaration order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(usize);

impl StateId {
    /// Wraps a raw index. Only meaningful relative to a specific [`Cmp`].
    pub fn new(index: usize) -> Self {
        StateId(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

/// Dense index of an action in its owning [`Cmp`] (declaration order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(usize);

impl ActionId {
    pub fn new(index: usize) -> Self {
        ActionId(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

/// One support entry of a transition distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: StateId,
    pub prob: f64,
    pub term: f64,
}

/// A single step `(from, action, to)`.
///
/// Field order gives the canonical `Ord` used everywhere transitions are
/// enumerated or reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub from: StateId,
    pub action: ActionId,
    pub to: StateId,
}

impl Transition {
    pub fn new(from: StateId, action: ActionId, to: StateId) -> Self {
        Transition { from, action, to }
    }
}

/// Errors from model construction and the trajectory/lottery algebra.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("duplicate action `{0}`")]
    DuplicateAction(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("duplicate transition record ({from}, {action}, {to})")]
    DuplicateTransition {
        from: String,
        action: String,
        to: String,
    },
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("trajectory breaks adjacency at step {step}: previous step ends in state #{expected} but next starts in state #{found}")]
    AdjacencyBroken {
        step: usize,
        expected: usize,
        found: usize,
    },
    #[error("trajectory anchor is state #{anchor} but the first transition starts in state #{first_from}")]
    AnchorIncoherent { anchor: usize, first_from: usize },
    #[error("cannot concatenate: prefix ends in state #{prefix_end} but suffix starts in state #{suffix_start}")]
    ConcatMismatch {
        prefix_end: usize,
        suffix_start: usize,
    },
    #[error("lottery is empty")]
    EmptyLottery,
    #[error("lottery probability {0} is negative or not finite")]
    BadLotteryProbability(f64),
    #[error("lottery probabilities sum to {0}, not 1")]
    LotteryNotNormalized(f64),
    #[error("lottery mixes trajectories with different start states")]
    MixedStartLottery,
}

/// Incremental constructor for [`Cmp`].
///
/// Zero-probability records are dropped from the support (they never occur,
/// so they contribute no outcomes), but the `(from, action)` pair they name
/// stays legal. Duplicate `(from, action, to)` records are rejected.
#[derive(Debug, Default, Clone)]
pub struct CmpBuilder {
    states: Vec<String>,
    actions: Vec<String>,
    records: Vec<(String, String, String, f64, f64)>,
}

impl CmpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn states<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.states.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn actions<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.actions.extend(names.into_iter().map(Into::into));
        self
    }

    /// Adds one `(from, action, to, prob, term)` record.
    pub fn transition(
        mut self,
        from: impl Into<String>,
        action: impl Into<String>,
        to: impl Into<String>,
        prob: f64,
        term: f64,
    ) -> Self {
        self.records
            .push((from.into(), action.into(), to.into(), prob, term));
        self
    }

    pub fn build(self) -> Result<Cmp, ModelError> {
        let mut states: Vec<String> = Vec::with_capacity(self.states.len());
        for name in self.states {
            if states.contains(&name) {
                return Err(ModelError::DuplicateState(name));
            }
            states.push(name);
        }
        let mut actions: Vec<String> = Vec::with_capacity(self.actions.len());
        for name in self.actions {
            if actions.contains(&name) {
                return Err(ModelError::DuplicateAction(name));
            }
            actions.push(name);
        }

        let find_state = |name: &str| -> Result<usize, ModelError> {
            states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| ModelError::UnknownState(name.to_owned()))
        };
        let find_action = |name: &str| -> Result<usize, ModelError> {
            actions
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| ModelError::UnknownAction(name.to_owned()))
        };

        let mut transitions: Vec<Vec<Option<Vec<Edge>>>> =
            vec![vec![None; actions.len()]; states.len()];
        let mut seen: Vec<(usize, usize, usize)> = Vec::with_capacity(self.records.len());
        for (from, action, to, prob, term) in self.records {
            let f = find_state(&from)?;
            let a = find_action(&action)?;
            let t = find_state(&to)?;
            if seen.contains(&(f, a, t)) {
                return Err(ModelError::DuplicateTransition { from, action, to });
            }
            seen.push((f, a, t));
            let cell = transitions[f][a].get_or_insert_with(Vec::new);
            if prob != 0.0 {
                cell.push(Edge {
                    to: StateId(t),
                    prob,
                    term,
                });
            }
        }
        for row in &mut transitions {
            for cell in row.iter_mut().flatten() {
                cell.sort_by_key(|e| e.to);
            }
        }
        Ok(Cmp {
            states,
            actions,
            transitions,
        })
    }
}

/// A controlled Markov process: states, actions, transition distributions,
/// and termination probabilities. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Cmp {
    states: Vec<String>,
    actions: Vec<String>,
    /// `transitions[s][a]` is `None` when the pair is illegal, otherwise the
    /// support of the next-state distribution sorted by target state.
    transitions: Vec<Vec<Option<Vec<Edge>>>>,
}

impl Cmp {
    pub fn builder() -> CmpBuilder {
        CmpBuilder::new()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(StateId)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name).map(ActionId)
    }

    pub fn state_name(&self, id: StateId) -> &str {
        &self.states[id.0]
    }

    pub fn action_name(&self, id: ActionId) -> &str {
        &self.actions[id.0]
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len()).map(StateId)
    }

    pub fn is_legal(&self, state: StateId, action: ActionId) -> bool {
        self.transitions[state.0][action.0].is_some()
    }

    /// Support of the next-state distribution, sorted by target state.
    /// `None` when the pair is illegal.
    pub fn edges(&self, state: StateId, action: ActionId) -> Option<&[Edge]> {
        self.transitions[state.0][action.0].as_deref()
    }

    pub fn legal_actions(&self, state: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.transitions[state.0]
            .iter()
            .enumerate()
            .filter_map(|(a, cell)| cell.as_ref().map(|_| ActionId(a)))
    }

    pub fn has_legal_action(&self, state: StateId) -> bool {
        self.legal_actions(state).next().is_some()
    }

    /// All transitions in the support, in canonical `(from, action, to)` order.
    pub fn legal_transitions(&self) -> Vec<Transition> {
        let mut out = Vec::new();
        for s in self.state_ids() {
            for a in self.legal_actions(s) {
                for e in self.edges(s, a).unwrap() {
                    if e.prob > 0.0 {
                        out.push(Transition::new(s, a, e.to));
                    }
                }
            }
        }
        out
    }

    fn edge(&self, t: Transition) -> Option<&Edge> {
        self.edges(t.from, t.action)?.iter().find(|e| e.to == t.to)
    }

    /// True iff the transition occurs with positive probability.
    pub fn contains_transition(&self, t: Transition) -> bool {
        t.from.0 < self.states.len()
            && t.action.0 < self.actions.len()
            && t.to.0 < self.states.len()
            && self.edge(t).map(|e| e.prob > 0.0).unwrap_or(false)
    }

    pub fn transition_prob(&self, t: Transition) -> Option<f64> {
        self.edge(t).map(|e| e.prob)
    }

    pub fn transition_term(&self, t: Transition) -> Option<f64> {
        self.edge(t).map(|e| e.term)
    }

    /// Renders a transition with symbolic names, for reports and errors.
    pub fn describe_transition(&self, t: Transition) -> String {
        format!(
            "({}, {}, {})",
            self.state_name(t.from),
            self.action_name(t.action),
            self.state_name(t.to)
        )
    }

    /// Rebuilds the model with every edge mapped through `f`.
    pub(crate) fn map_edges(&self, mut f: impl FnMut(StateId, ActionId, &Edge) -> Edge) -> Cmp {
        let mut out = self.clone();
        for (s, row) in out.transitions.iter_mut().enumerate() {
            for (a, cell) in row.iter_mut().enumerate() {
                if let Some(edges) = cell {
                    for e in edges.iter_mut() {
                        *e = f(StateId(s), ActionId(a), e);
                    }
                }
            }
        }
        out
    }

    /// Checks every model invariant and reports violations without aborting.
    ///
    /// Errors: per-pair probability sums off the simplex (tolerance 1e-12),
    /// negative or non-finite probabilities, termination outside `[0, 1]`.
    /// Warnings: dead-end states, i.e. states with no legal action that can
    /// be entered non-terminally (a state only ever reached by transitions
    /// with termination probability 1 needs no action and is not flagged).
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for s in self.state_ids() {
            for a in self.legal_actions(s) {
                let edges = self.edges(s, a).unwrap();
                let mut sum = 0.0;
                for e in edges {
                    sum += e.prob;
                    if !(e.prob >= 0.0) || !e.prob.is_finite() {
                        report.errors.push(ValidationIssue::InvalidProbability {
                            from: self.state_name(s).into(),
                            action: self.action_name(a).into(),
                            to: self.state_name(e.to).into(),
                            prob: e.prob,
                        });
                    }
                    if !(0.0..=1.0).contains(&e.term) {
                        report.errors.push(ValidationIssue::TerminationRange {
                            from: self.state_name(s).into(),
                            action: self.action_name(a).into(),
                            to: self.state_name(e.to).into(),
                            term: e.term,
                        });
                    }
                }
                if (sum - 1.0).abs() > PROB_SUM_TOL {
                    report.errors.push(ValidationIssue::SimplexSum {
                        state: self.state_name(s).into(),
                        action: self.action_name(a).into(),
                        sum,
                    });
                }
            }
        }
        for s in self.state_ids() {
            if self.has_legal_action(s) {
                continue;
            }
            let enterable = self.legal_transitions().iter().any(|t| {
                t.to == s && self.transition_term(*t).map(|x| x < 1.0).unwrap_or(false)
            });
            if enterable {
                report.warnings.push(ValidationIssue::DeadEndState {
                    state: self.state_name(s).into(),
                });
            }
        }
        report
    }
}

/// A finite sequence of adjacent transitions, anchored at its start state.
///
/// The empty trajectory at state `s` carries only the anchor. Ordering is
/// length-lexicographic by state/action indices, the canonical order used by
/// enumeration, tables, and reports.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory {
    anchor: StateId,
    transitions: Vec<Transition>,
}

impl Trajectory {
    /// The empty trajectory at `state`.
    pub fn empty(state: StateId) -> Self {
        Trajectory {
            anchor: state,
            transitions: Vec::new(),
        }
    }

    pub fn new(anchor: StateId, transitions: Vec<Transition>) -> Result<Self, ModelError> {
        if let Some(first) = transitions.first() {
            if first.from != anchor {
                return Err(ModelError::AnchorIncoherent {
                    anchor: anchor.0,
                    first_from: first.from.0,
                });
            }
        }
        for (i, pair) in transitions.windows(2).enumerate() {
            if pair[0].to != pair[1].from {
                return Err(ModelError::AdjacencyBroken {
                    step: i + 1,
                    expected: pair[0].to.0,
                    found: pair[1].from.0,
                });
            }
        }
        Ok(Trajectory {
            anchor,
            transitions,
        })
    }

    pub fn from_transitions(transitions: Vec<Transition>) -> Result<Self, ModelError> {
        let anchor = transitions
            .first()
            .map(|t| t.from)
            .ok_or(ModelError::EmptyLottery)?;
        Self::new(anchor, transitions)
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn start(&self) -> StateId {
        self.anchor
    }

    pub fn end(&self) -> StateId {
        self.transitions.last().map(|t| t.to).unwrap_or(self.anchor)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// This trajectory extended by one more transition.
    pub fn extended(&self, t: Transition) -> Result<Self, ModelError> {
        if t.from != self.end() {
            return Err(ModelError::ConcatMismatch {
                prefix_end: self.end().0,
                suffix_start: t.from.0,
            });
        }
        let mut transitions = self.transitions.clone();
        transitions.push(t);
        Ok(Trajectory {
            anchor: self.anchor,
            transitions,
        })
    }

    /// Concatenation `self · suffix`; the suffix must start where this ends.
    pub fn concat(&self, suffix: &Trajectory) -> Result<Self, ModelError> {
        if self.end() != suffix.start() {
            return Err(ModelError::ConcatMismatch {
                prefix_end: self.end().0,
                suffix_start: suffix.start().0,
            });
        }
        let mut transitions = self.transitions.clone();
        transitions.extend_from_slice(&suffix.transitions);
        Ok(Trajectory {
            anchor: self.anchor,
            transitions,
        })
    }

    /// Renders the trajectory with symbolic names.
    pub fn describe(&self, cmp: &Cmp) -> String {
        if self.is_empty() {
            return format!("<empty@{}>", cmp.state_name(self.anchor));
        }
        let mut out = format!("<{}", cmp.state_name(self.anchor));
        for t in &self.transitions {
            out.push_str(&format!(
                " -{}-> {}",
                cmp.action_name(t.action),
                cmp.state_name(t.to)
            ));
        }
        out.push('>');
        out
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "<empty@#{}>", self.anchor.0);
        }
        write!(f, "<#{}", self.anchor.0)?;
        for t in &self.transitions {
            write!(f, " -#{}-> #{}", t.action.0, t.to.0)?;
        }
        write!(f, ">")
    }
}

impl PartialOrd for Trajectory {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Trajectory {
    fn cmp(&self, other: &Self) -> Ordering {
        self.transitions
            .len()
            .cmp(&other.transitions.len())
            .then_with(|| self.anchor.cmp(&other.anchor))
            .then_with(|| self.transitions.cmp(&other.transitions))
    }
}

/// One entry of a [`Lottery`]: either an outcome or a nested lottery.
#[derive(Debug, Clone, PartialEq)]
pub enum LotteryItem {
    Trajectory(Trajectory),
    Nested(Lottery),
}

/// A finite probability mixture over trajectories, possibly compound.
#[derive(Debug, Clone, PartialEq)]
pub struct Lottery {
    entries: Vec<(f64, LotteryItem)>,
}

impl Lottery {
    /// Builds a lottery, checking that probabilities are non-negative and
    /// sum to 1 within 1e-12.
    pub fn new(entries: Vec<(f64, LotteryItem)>) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::EmptyLottery);
        }
        let mut sum = 0.0;
        for (p, _) in &entries {
            if !p.is_finite() || *p < 0.0 {
                return Err(ModelError::BadLotteryProbability(*p));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::LotteryNotNormalized(sum));
        }
        Ok(Lottery { entries })
    }

    /// The degenerate lottery `1·t`.
    pub fn degenerate(t: Trajectory) -> Self {
        Lottery {
            entries: vec![(1.0, LotteryItem::Trajectory(t))],
        }
    }

    pub fn from_weighted_trajectories(
        items: Vec<(f64, Trajectory)>,
    ) -> Result<Self, ModelError> {
        Self::new(
            items
                .into_iter()
                .map(|(p, t)| (p, LotteryItem::Trajectory(t)))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(f64, LotteryItem)] {
        &self.entries
    }

    /// The common start state of every trajectory in the (flattened)
    /// lottery, or `None` if starts differ.
    pub fn start_state(&self) -> Option<StateId> {
        let mut found: Option<StateId> = None;
        let mut stack: Vec<&Lottery> = vec![self];
        while let Some(l) = stack.pop() {
            for (_, item) in &l.entries {
                match item {
                    LotteryItem::Trajectory(t) => match found {
                        None => found = Some(t.start()),
                        Some(s) if s == t.start() => {}
                        Some(_) => return None,
                    },
                    LotteryItem::Nested(inner) => stack.push(inner),
                }
            }
        }
        found
    }

    /// Simplifies to a non-compound lottery: nested entries are expanded
    /// with multiplied probabilities, duplicate trajectories merged, and
    /// entries sorted canonically. Per-trajectory contributions are summed
    /// in ascending order so equal inputs flatten to identical bytes.
    pub fn flatten(&self) -> Lottery {
        let mut acc: std::collections::BTreeMap<Trajectory, Vec<f64>> =
            std::collections::BTreeMap::new();
        fn walk(
            l: &Lottery,
            weight: f64,
            acc: &mut std::collections::BTreeMap<Trajectory, Vec<f64>>,
        ) {
            for (p, item) in &l.entries {
                match item {
                    LotteryItem::Trajectory(t) => {
                        acc.entry(t.clone()).or_default().push(weight * p)
                    }
                    LotteryItem::Nested(inner) => walk(inner, weight * p, acc),
                }
            }
        }
        walk(self, 1.0, &mut acc);
        let entries = acc
            .into_iter()
            .map(|(t, mut parts)| {
                parts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                (parts.iter().sum::<f64>(), LotteryItem::Trajectory(t))
            })
            .collect();
        Lottery { entries }
    }

    /// `prefix · L`: prefixes every trajectory, leaving probabilities
    /// untouched. The prefix must end at the lottery's common start state.
    pub fn prefix_with(&self, prefix: &Trajectory) -> Result<Lottery, ModelError> {
        let start = self.start_state().ok_or(ModelError::MixedStartLottery)?;
        if prefix.end() != start {
            return Err(ModelError::ConcatMismatch {
                prefix_end: prefix.end().index(),
                suffix_start: start.index(),
            });
        }
        fn rebuild(l: &Lottery, prefix: &Trajectory) -> Lottery {
            let entries = l
                .entries
                .iter()
                .map(|(p, item)| {
                    let item = match item {
                        LotteryItem::Trajectory(t) => LotteryItem::Trajectory(
                            prefix.concat(t).expect("start state already checked"),
                        ),
                        LotteryItem::Nested(inner) => LotteryItem::Nested(rebuild(inner, prefix)),
                    };
                    (*p, item)
                })
                .collect();
            Lottery { entries }
        }
        Ok(rebuild(self, prefix))
    }
}

/// All trajectories of length at most `max_len` starting at `start` whose
/// transitions are legal with positive probability, including the empty
/// trajectory, in length-lexicographic order.
pub fn enumerate_trajectories(
    cmp: &Cmp,
    start: StateId,
    max_len: usize,
) -> Result<Vec<Trajectory>, ModelError> {
    if start.index() >= cmp.num_states() {
        return Err(ModelError::StateOutOfRange(start.index()));
    }
    let mut out = vec![Trajectory::empty(start)];
    let mut frontier = 0usize;
    for _ in 0..max_len {
        let next_frontier = out.len();
        for i in frontier..next_frontier {
            let end = out[i].end();
            let mut extensions = Vec::new();
            for a in cmp.legal_actions(end) {
                for e in cmp.edges(end, a).unwrap() {
                    if e.prob > 0.0 {
                        extensions.push(Transition::new(end, a, e.to));
                    }
                }
            }
            // legal_actions ascends and edges are sorted by target, so
            // extensions are already in canonical order
            for t in extensions {
                let extended = out[i].extended(t).expect("extension starts at end state");
                out.push(extended);
            }
        }
        if out.len() == next_frontier {
            break;
        }
        frontier = next_frontier;
    }
    Ok(out)
}

/// Samples one episode by iterating the policy, the transition distribution,
/// and the termination probability. Stops on sampled termination, at a
/// dead-end state, or after `max_len` steps. Identical inputs and seed give
/// an identical trajectory.
pub fn sample_trajectory(
    cmp: &Cmp,
    start: StateId,
    policy: &MemorylessPolicy,
    seed: u64,
    max_len: usize,
) -> Result<Trajectory, ModelError> {
    if start.index() >= cmp.num_states() {
        return Err(ModelError::StateOutOfRange(start.index()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectory = Trajectory::empty(start);
    let mut state = start;
    for _ in 0..max_len {
        let Some(dist) = policy.action_distribution(state) else {
            break;
        };
        if dist.is_empty() {
            break;
        }
        let draw: f64 = rng.random();
        let mut cum = 0.0;
        let mut action = dist.last().unwrap().0;
        for (a, p) in dist {
            cum += p;
            if draw < cum {
                action = *a;
                break;
            }
        }
        let edges = cmp.edges(state, action).unwrap_or(&[]);
        if edges.is_empty() {
            break;
        }
        let draw: f64 = rng.random();
        let mut cum = 0.0;
        let mut edge = edges.last().unwrap();
        for e in edges {
            if e.prob <= 0.0 {
                continue;
            }
            cum += e.prob;
            if draw < cum {
                edge = e;
                break;
            }
        }
        trajectory = trajectory.extended(Transition::new(state, action, edge.to))?;
        state = edge.to;
        let draw: f64 = rng.random();
        if draw < edge.term {
            break;
        }
    }
    Ok(trajectory)
}

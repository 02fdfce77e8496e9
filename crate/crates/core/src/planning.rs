//! Optimal control for affine-reward MDPs.
//!
//! The backup for a transition `t` is `r(t) + m(t)·(1 − T(t))·v(s')`: a
//! terminated episode accrues no further utility, so the continuation is
//! weighted by the survival probability. Infinite-horizon solves require the
//! contraction factor `β = max m(t)(1 − T(t)) < 1`; the stopping rule
//! `Δ ≤ tol·(1−β)/β` certifies a sup-norm optimality gap of at most `tol`.
//! Without contraction, callers get exact finite-horizon backward induction
//! instead.

use thiserror::Error;

use crate::model::{ActionId, Cmp, Edge, ModelError, StateId, Trajectory, Transition};
use crate::returns::{MultiplierSpec, RewardSpec, TableError};

/// Hard cap on evaluated decision histories in [`brute_force_optimal`].
pub const HISTORY_BUDGET: usize = 1_000_000;

/// Iteration cap for fixed-point solves that were not given one.
const SWEEP_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("reward for {0:?} is not finite")]
    NonFiniteReward(Transition),
    #[error("contraction factor is {beta}; the infinite-horizon value may diverge (use a finite horizon)")]
    NonContractive { beta: f64 },
    #[error("no fixed point within {iterations} sweeps; last iterate attached")]
    MaxIterationsExceeded {
        iterations: usize,
        last: Box<ValueFunction>,
    },
    #[error("history tree exceeds the budget of {budget} decision histories")]
    HistoryBudgetExceeded { budget: usize },
    #[error("discount factor {0} is outside (0, 1]")]
    InvalidGamma(f64),
    #[error("tolerance {0} must be positive and finite")]
    InvalidTolerance(f64),
    #[error("policy assigns probability to illegal action `{action}` in state `{state}`")]
    IllegalPolicyAction { state: String, action: String },
    #[error("policy distribution at state `{state}` is invalid: {detail}")]
    BadPolicyDistribution { state: String, detail: String },
}

/// A per-state distribution over legal actions. Dead-end states carry no
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorylessPolicy {
    choice: Vec<Option<Vec<(ActionId, f64)>>>,
}

impl MemorylessPolicy {
    /// Uniform over the legal actions of every state.
    pub fn uniform(cmp: &Cmp) -> Self {
        let choice = cmp
            .state_ids()
            .map(|s| {
                let legal: Vec<ActionId> = cmp.legal_actions(s).collect();
                if legal.is_empty() {
                    None
                } else {
                    let p = 1.0 / legal.len() as f64;
                    Some(legal.into_iter().map(|a| (a, p)).collect())
                }
            })
            .collect();
        MemorylessPolicy { choice }
    }

    /// A deterministic policy from a per-state choice. Every chosen action
    /// must be legal; `None` leaves the state without a distribution.
    pub fn deterministic(
        cmp: &Cmp,
        mut choose: impl FnMut(StateId) -> Option<ActionId>,
    ) -> Result<Self, PlanError> {
        let mut choice = Vec::with_capacity(cmp.num_states());
        for s in cmp.state_ids() {
            match choose(s) {
                None => choice.push(None),
                Some(a) => {
                    if !cmp.is_legal(s, a) {
                        return Err(PlanError::IllegalPolicyAction {
                            state: cmp.state_name(s).into(),
                            action: cmp.action_name(a).into(),
                        });
                    }
                    choice.push(Some(vec![(a, 1.0)]));
                }
            }
        }
        Ok(MemorylessPolicy { choice })
    }

    /// A stochastic policy from explicit distributions. States not listed
    /// get no distribution.
    pub fn from_distributions(
        cmp: &Cmp,
        dists: impl IntoIterator<Item = (StateId, Vec<(ActionId, f64)>)>,
    ) -> Result<Self, PlanError> {
        let mut choice: Vec<Option<Vec<(ActionId, f64)>>> = vec![None; cmp.num_states()];
        for (s, mut dist) in dists {
            let state = cmp.state_name(s).to_owned();
            let mut sum = 0.0;
            for (a, p) in &dist {
                if !cmp.is_legal(s, *a) {
                    return Err(PlanError::IllegalPolicyAction {
                        state,
                        action: cmp.action_name(*a).into(),
                    });
                }
                if !p.is_finite() || *p < 0.0 {
                    return Err(PlanError::BadPolicyDistribution {
                        state,
                        detail: format!("probability {p} is negative or not finite"),
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > crate::PROB_SUM_TOL {
                return Err(PlanError::BadPolicyDistribution {
                    state,
                    detail: format!("probabilities sum to {sum}"),
                });
            }
            dist.sort_by_key(|(a, _)| *a);
            choice[s.index()] = Some(dist);
        }
        Ok(MemorylessPolicy { choice })
    }

    /// The action distribution at `state`, sorted by action index.
    pub fn action_distribution(&self, state: StateId) -> Option<&[(ActionId, f64)]> {
        self.choice
            .get(state.index())
            .and_then(|d| d.as_deref())
    }

    /// The single chosen action, when the distribution is degenerate.
    pub fn chosen_action(&self, state: StateId) -> Option<ActionId> {
        match self.action_distribution(state) {
            Some([(a, _)]) => Some(*a),
            _ => None,
        }
    }

    pub fn validate_for(&self, cmp: &Cmp) -> Result<(), PlanError> {
        if self.choice.len() != cmp.num_states() {
            return Err(PlanError::BadPolicyDistribution {
                state: String::new(),
                detail: format!(
                    "policy covers {} states, model has {}",
                    self.choice.len(),
                    cmp.num_states()
                ),
            });
        }
        for s in cmp.state_ids() {
            if let Some(dist) = self.action_distribution(s) {
                for (a, _) in dist {
                    if !cmp.is_legal(s, *a) {
                        return Err(PlanError::IllegalPolicyAction {
                            state: cmp.state_name(s).into(),
                            action: cmp.action_name(*a).into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-state expected utility.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl From<Vec<f64>> for ValueFunction {
    fn from(values: Vec<f64>) -> Self {
        ValueFunction { values }
    }
}

impl ValueFunction {
    pub(crate) fn from_vec(values: Vec<f64>) -> Self {
        ValueFunction { values }
    }

    pub fn get(&self, s: StateId) -> f64 {
        self.values[s.index()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (StateId::new(i), *v))
    }
}

#[derive(Debug, Clone, Copy)]
struct CompiledEdge {
    to: usize,
    prob: f64,
    /// `1 − T(t)`: probability the episode continues past this transition.
    survive: f64,
    reward: f64,
    multiplier: f64,
}

#[derive(Debug, Clone)]
struct CompiledAction {
    action: ActionId,
    edges: Vec<CompiledEdge>,
}

/// A controlled Markov process together with total rewards and strictly
/// positive reward multipliers. A plain MDP is the `m ≡ 1` special case.
#[derive(Debug, Clone)]
pub struct Armdp {
    cmp: Cmp,
    rewards: RewardSpec,
    multipliers: MultiplierSpec,
    /// Per-state legal actions with all lookups resolved.
    compiled: Vec<Vec<CompiledAction>>,
}

impl Armdp {
    pub fn new(
        cmp: Cmp,
        rewards: RewardSpec,
        multipliers: MultiplierSpec,
    ) -> Result<Self, PlanError> {
        rewards.validate_total(&cmp)?;
        multipliers.validate_total(&cmp)?;
        multipliers.validate_positive()?;
        for (t, r) in rewards.iter() {
            if !r.is_finite() {
                return Err(PlanError::NonFiniteReward(t));
            }
        }
        let compiled = cmp
            .state_ids()
            .map(|s| {
                cmp.legal_actions(s)
                    .map(|a| CompiledAction {
                        action: a,
                        edges: cmp
                            .edges(s, a)
                            .unwrap()
                            .iter()
                            .filter(|e| e.prob > 0.0)
                            .map(|e| {
                                let t = Transition::new(s, a, e.to);
                                CompiledEdge {
                                    to: e.to.index(),
                                    prob: e.prob,
                                    survive: 1.0 - e.term,
                                    reward: rewards.get(t).unwrap(),
                                    multiplier: multipliers.get(t).unwrap(),
                                }
                            })
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        Ok(Armdp {
            cmp,
            rewards,
            multipliers,
            compiled,
        })
    }

    /// An ordinary MDP: unit multipliers everywhere.
    pub fn mdp(cmp: Cmp, rewards: RewardSpec) -> Result<Self, PlanError> {
        let multipliers = MultiplierSpec::ones(&cmp);
        Self::new(cmp, rewards, multipliers)
    }

    pub fn cmp(&self) -> &Cmp {
        &self.cmp
    }

    pub fn rewards(&self) -> &RewardSpec {
        &self.rewards
    }

    pub fn multipliers(&self) -> &MultiplierSpec {
        &self.multipliers
    }

    fn q_value(&self, action: &CompiledAction, v: &[f64]) -> f64 {
        action
            .edges
            .iter()
            .map(|e| e.prob * (e.reward + e.multiplier * e.survive * v[e.to]))
            .sum()
    }
}

/// `β = max over legal transitions of m(t)·(1 − T(t))`; 0 for a model with
/// no legal transitions. Values below 1 certify that every infinite-horizon
/// value exists and that value iteration contracts.
pub fn contraction_factor(a: &Armdp) -> f64 {
    a.compiled
        .iter()
        .flatten()
        .flat_map(|ca| ca.edges.iter())
        .map(|e| e.multiplier * e.survive)
        .fold(0.0f64, f64::max)
}

/// Result of a planning solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub values: ValueFunction,
    pub policy: MemorylessPolicy,
    pub iterations: usize,
    pub beta: f64,
    /// Certified sup-norm bound on the optimality gap of `values`.
    pub certified_gap: f64,
}

/// One synchronous sweep of the optimal backup. Dead-end states stay at 0.
fn sweep(a: &Armdp, v: &[f64], out: &mut [f64]) {
    for (s, actions) in a.compiled.iter().enumerate() {
        out[s] = actions
            .iter()
            .map(|ca| a.q_value(ca, v))
            .fold(f64::NEG_INFINITY, f64::max);
        if actions.is_empty() {
            out[s] = 0.0;
        }
    }
}

fn greedy_policy(a: &Armdp, v: &[f64]) -> MemorylessPolicy {
    MemorylessPolicy::deterministic(&a.cmp, |s| {
        let actions = &a.compiled[s.index()];
        let mut best: Option<(ActionId, f64)> = None;
        for ca in actions {
            let q = a.q_value(ca, v);
            if best.map(|(_, bq)| q > bq).unwrap_or(true) {
                best = Some((ca.action, q));
            }
        }
        best.map(|(a, _)| a)
    })
    .expect("greedy actions are legal by construction")
}

/// Contraction-based value iteration from `v ≡ 0`.
///
/// Requires `β < 1`; iterates until the sup-norm sweep delta is at most
/// `tol·(1−β)/β`, which certifies an optimality gap of at most `tol`. The
/// policy is greedy with ties broken by action declaration order.
pub fn value_iteration(a: &Armdp, tol: f64, max_iter: usize) -> Result<Solution, PlanError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(PlanError::InvalidTolerance(tol));
    }
    let beta = contraction_factor(a);
    if beta >= 1.0 {
        return Err(PlanError::NonContractive { beta });
    }
    let threshold = if beta > 0.0 {
        tol * (1.0 - beta) / beta
    } else {
        f64::INFINITY
    };
    let n = a.cmp.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    loop {
        sweep(a, &v, &mut next);
        iterations += 1;
        let delta = v
            .iter()
            .zip(&next)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut v, &mut next);
        if delta <= threshold {
            let certified_gap = if beta > 0.0 {
                delta * beta / (1.0 - beta)
            } else {
                0.0
            };
            let policy = greedy_policy(a, &v);
            return Ok(Solution {
                values: ValueFunction::from_vec(v),
                policy,
                iterations,
                beta,
                certified_gap,
            });
        }
        if iterations >= max_iter {
            return Err(PlanError::MaxIterationsExceeded {
                iterations,
                last: Box::new(ValueFunction::from_vec(v)),
            });
        }
    }
}

/// Exact backward induction for the `horizon`-step truncated problem.
///
/// `values` are the optimal truncated values; `policy` is the optimal first
/// action for that budget, i.e. the greedy action against the
/// `horizon − 1`-step continuation (myopic at horizon 0). The gap is 0 for
/// the truncated objective.
pub fn finite_horizon_plan(a: &Armdp, horizon: usize) -> Solution {
    let n = a.cmp.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..horizon {
        sweep(a, &v, &mut next);
        std::mem::swap(&mut v, &mut next);
    }
    // after the swaps `v` holds the horizon-step values and `next` the
    // continuation they were backed up from
    let continuation = if horizon == 0 { &v } else { &next };
    let policy = greedy_policy(a, continuation);
    Solution {
        values: ValueFunction::from_vec(v),
        policy,
        iterations: horizon,
        beta: contraction_factor(a),
        certified_gap: 0.0,
    }
}

/// Expected utility of following `pi`, by fixed-point iteration of the
/// policy-restricted backup. Requires contraction under the policy's
/// support.
pub fn policy_value(
    a: &Armdp,
    pi: &MemorylessPolicy,
    tol: f64,
) -> Result<ValueFunction, PlanError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(PlanError::InvalidTolerance(tol));
    }
    pi.validate_for(&a.cmp)?;
    let mut beta = 0.0f64;
    for (s, actions) in a.compiled.iter().enumerate() {
        if let Some(dist) = pi.action_distribution(StateId::new(s)) {
            for (act, p) in dist {
                if *p <= 0.0 {
                    continue;
                }
                let ca = actions
                    .iter()
                    .find(|ca| ca.action == *act)
                    .expect("validated legal");
                for e in &ca.edges {
                    beta = beta.max(e.multiplier * e.survive);
                }
            }
        }
    }
    if beta >= 1.0 {
        return Err(PlanError::NonContractive { beta });
    }
    let threshold = if beta > 0.0 {
        tol * (1.0 - beta) / beta
    } else {
        f64::INFINITY
    };
    let n = a.cmp.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    loop {
        for (s, actions) in a.compiled.iter().enumerate() {
            next[s] = match pi.action_distribution(StateId::new(s)) {
                None => 0.0,
                Some(dist) => dist
                    .iter()
                    .map(|(act, p)| {
                        let ca = actions.iter().find(|ca| ca.action == *act).unwrap();
                        p * a.q_value(ca, &v)
                    })
                    .sum(),
            };
        }
        iterations += 1;
        let delta = v
            .iter()
            .zip(&next)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut v, &mut next);
        if delta <= threshold {
            return Ok(ValueFunction::from_vec(v));
        }
        if iterations >= SWEEP_CAP {
            return Err(PlanError::MaxIterationsExceeded {
                iterations,
                last: Box::new(ValueFunction::from_vec(v)),
            });
        }
    }
}

/// One decision point of the exhaustive history tree.
#[derive(Debug, Clone)]
pub struct HistoryNode {
    pub parent: Option<usize>,
    /// Transition taken from the parent; `None` at the root.
    pub via: Option<Transition>,
    pub state: StateId,
    pub depth: usize,
    /// Optimal expected future utility given this history.
    pub value: f64,
    /// Optimal action; `None` at the horizon or in dead-end states.
    pub action: Option<ActionId>,
}

/// The history-dependent action table built by [`brute_force_optimal`]:
/// every non-terminated history reachable with positive probability within
/// the horizon, with its exact optimal continuation value and action.
#[derive(Debug, Clone)]
pub struct HistoryPlan {
    pub start: StateId,
    pub horizon: usize,
    nodes: Vec<HistoryNode>,
}

impl HistoryPlan {
    pub fn nodes(&self) -> &[HistoryNode] {
        &self.nodes
    }

    pub fn root_value(&self) -> f64 {
        self.nodes[0].value
    }

    /// Reconstructs the trajectory leading to a node.
    pub fn trajectory_of(&self, index: usize) -> Trajectory {
        let mut steps = Vec::new();
        let mut cursor = index;
        while let Some(via) = self.nodes[cursor].via {
            steps.push(via);
            cursor = self.nodes[cursor].parent.expect("via implies parent");
        }
        steps.reverse();
        Trajectory::new(self.start, steps).expect("tree steps are adjacent")
    }
}

/// Exact backward induction over full histories rather than states.
///
/// Returns the optimal expected utility of the `horizon`-truncated problem
/// from `start`, and the per-history optimal action table (ties broken by
/// action declaration order). Histories are materialized only where a
/// decision is evaluated: continuation stops at the horizon and beyond
/// certainly-terminating transitions. Errors once the tree exceeds
/// [`HISTORY_BUDGET`] decision histories.
pub fn brute_force_optimal(
    a: &Armdp,
    start: StateId,
    horizon: usize,
) -> Result<(f64, HistoryPlan), PlanError> {
    if start.index() >= a.cmp.num_states() {
        return Err(ModelError::StateOutOfRange(start.index()).into());
    }
    struct Builder<'a> {
        a: &'a Armdp,
        horizon: usize,
        nodes: Vec<HistoryNode>,
    }
    impl Builder<'_> {
        fn eval(
            &mut self,
            state: usize,
            depth: usize,
            parent: Option<usize>,
            via: Option<Transition>,
        ) -> Result<(usize, f64), PlanError> {
            if self.nodes.len() >= HISTORY_BUDGET {
                return Err(PlanError::HistoryBudgetExceeded {
                    budget: HISTORY_BUDGET,
                });
            }
            let index = self.nodes.len();
            self.nodes.push(HistoryNode {
                parent,
                via,
                state: StateId::new(state),
                depth,
                value: 0.0,
                action: None,
            });
            if depth == self.horizon {
                return Ok((index, 0.0));
            }
            let actions = self.a.compiled[state].clone();
            let mut best: Option<(ActionId, f64)> = None;
            for ca in &actions {
                let mut q = 0.0;
                for e in &ca.edges {
                    let continuation = if e.survive > 0.0 && depth + 1 < self.horizon {
                        let t = Transition::new(
                            StateId::new(state),
                            ca.action,
                            StateId::new(e.to),
                        );
                        let (_, w) = self.eval(e.to, depth + 1, Some(index), Some(t))?;
                        w
                    } else {
                        0.0
                    };
                    q += e.prob * (e.reward + e.multiplier * e.survive * continuation);
                }
                if best.map(|(_, bq)| q > bq).unwrap_or(true) {
                    best = Some((ca.action, q));
                }
            }
            let value = best.map(|(_, q)| q).unwrap_or(0.0);
            self.nodes[index].value = value;
            self.nodes[index].action = best.map(|(a, _)| a);
            Ok((index, value))
        }
    }
    let mut builder = Builder {
        a,
        horizon,
        nodes: Vec::new(),
    };
    let (_, value) = builder.eval(start.index(), 0, None, None)?;
    Ok((
        value,
        HistoryPlan {
            start,
            horizon,
            nodes: builder.nodes,
        },
    ))
}

/// Q-values of every legal action at `s` against a value function, in
/// action declaration order.
pub fn action_values(a: &Armdp, s: StateId, v: &ValueFunction) -> Vec<(ActionId, f64)> {
    a.compiled[s.index()]
        .iter()
        .map(|ca| {
            let q = ca
                .edges
                .iter()
                .map(|e| e.prob * (e.reward + e.multiplier * e.survive * v.get(StateId::new(e.to))))
                .sum();
            (ca.action, q)
        })
        .collect()
}

/// Simulates a discount factor by raising termination probabilities:
/// `T_new = 1 − γ(1 − T_old)`, computed as `(1 − γ) + γ·T_old` so that
/// `γ = 1` is an exact identity.
pub fn discount_to_termination(cmp: &Cmp, gamma: f64) -> Result<Cmp, PlanError> {
    if !gamma.is_finite() || gamma <= 0.0 || gamma > 1.0 {
        return Err(PlanError::InvalidGamma(gamma));
    }
    Ok(cmp.map_edges(|_, _, e| Edge {
        term: (1.0 - gamma) + gamma * e.term,
        ..*e
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;

    /// Single state, two self-loop actions with different affine profiles.
    fn two_action_loop() -> Armdp {
        let cmp = Cmp::builder()
            .states(["X"])
            .actions(["a1", "a2"])
            .transition("X", "a1", "X", 1.0, 0.0)
            .transition("X", "a2", "X", 1.0, 0.0)
            .build()
            .unwrap();
        let x = cmp.state_id("X").unwrap();
        let a1 = cmp.action_id("a1").unwrap();
        let rewards = RewardSpec::from_fn(&cmp, |t| if t.action == a1 { 1.0 } else { 0.9 });
        let multipliers =
            MultiplierSpec::from_fn(&cmp, |t| if t.action == a1 { 0.5 } else { 0.6 });
        let _ = x;
        Armdp::new(cmp, rewards, multipliers).unwrap()
    }

    #[test]
    fn contraction_factor_uniform_case() {
        let cmp = sample::triangle().map_edges(|_, _, e| Edge { term: 0.1, ..*e });
        let a = Armdp::mdp(cmp, RewardSpec::from_fn(&sample::triangle(), |_| 0.0)).unwrap();
        assert!((contraction_factor(&a) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn contraction_factor_flags_undiscounted() {
        let a = Armdp::mdp(
            sample::triangle(),
            RewardSpec::from_fn(&sample::triangle(), |_| 1.0),
        )
        .unwrap();
        assert_eq!(contraction_factor(&a), 1.0);
        let err = value_iteration(&a, 1e-6, 1000).unwrap_err();
        assert!(matches!(err, PlanError::NonContractive { beta } if beta == 1.0));
    }

    #[test]
    fn contraction_factor_takes_per_transition_max() {
        let cmp = Cmp::builder()
            .states(["X", "Y"])
            .actions(["a"])
            .transition("X", "a", "Y", 1.0, 0.8)
            .transition("Y", "a", "X", 1.0, 0.0)
            .build()
            .unwrap();
        let x = cmp.state_id("X").unwrap();
        let rewards = RewardSpec::from_fn(&cmp, |_| 0.0);
        let multipliers =
            MultiplierSpec::from_fn(&cmp, |t| if t.from == x { 2.0 } else { 0.5 });
        let a = Armdp::new(cmp, rewards, multipliers).unwrap();
        assert!((contraction_factor(&a) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_reward_solves_to_zero_with_first_action() {
        let a = two_action_loop();
        let zeroed = Armdp::new(
            a.cmp().clone(),
            RewardSpec::from_fn(a.cmp(), |_| 0.0),
            a.multipliers().clone(),
        )
        .unwrap();
        let sol = value_iteration(&zeroed, 1e-10, 10_000).unwrap();
        let x = zeroed.cmp().state_id("X").unwrap();
        assert_eq!(sol.values.get(x), 0.0);
        assert_eq!(
            sol.policy.chosen_action(x),
            Some(zeroed.cmp().action_id("a1").unwrap()),
            "ties break toward the first declared action"
        );
    }

    #[test]
    fn closed_form_fixed_points_pick_the_slower_compounder() {
        // v_a1 = 1 + 0.5 v  -> 2;  v_a2 = 0.9 + 0.6 v -> 2.25
        let a = two_action_loop();
        let x = a.cmp().state_id("X").unwrap();
        let sol = value_iteration(&a, 1e-10, 100_000).unwrap();
        assert!((sol.values.get(x) - 2.25).abs() < 1e-9, "{}", sol.values.get(x));
        assert_eq!(sol.policy.chosen_action(x), Some(a.cmp().action_id("a2").unwrap()));
        assert!(sol.certified_gap <= 1e-10);
    }

    #[test]
    fn matches_textbook_discounted_value_iteration() {
        let gamma = 0.9;
        let mut rng = sample::rng(11);
        for _ in 0..10 {
            let cfg = sample::GenConfig {
                term_range: (0.0, 0.0),
                ..Default::default()
            };
            let cmp = sample::random_cmp(&mut rng, &cfg);
            let rewards = sample::random_rewards(&mut rng, &cmp, (-5.0, 5.0));
            let discounted = discount_to_termination(&cmp, gamma).unwrap();
            let a = Armdp::mdp(discounted, rewards.clone()).unwrap();
            let sol = value_iteration(&a, 1e-10, 1_000_000).unwrap();

            // direct discounted backup oracle on the undiscounted model
            let plain = Armdp::mdp(cmp.clone(), rewards).unwrap();
            let n = cmp.num_states();
            let mut v = vec![0.0; n];
            for _ in 0..2000 {
                let mut next = vec![0.0; n];
                for s in cmp.state_ids() {
                    let qs: Vec<f64> = action_values(&plain, s, &ValueFunction::from_vec(v.clone()))
                        .iter()
                        .map(|(act, _)| {
                            // recompute with explicit gamma weighting
                            let ca: Vec<_> = cmp
                                .edges(s, *act)
                                .unwrap()
                                .iter()
                                .map(|e| {
                                    e.prob
                                        * (plain
                                            .rewards()
                                            .get(Transition::new(s, *act, e.to))
                                            .unwrap()
                                            + gamma * v[e.to.index()])
                                })
                                .collect();
                            ca.iter().sum()
                        })
                        .collect();
                    next[s.index()] = qs.iter().fold(f64::NEG_INFINITY, |x, y| x.max(*y));
                    if qs.is_empty() {
                        next[s.index()] = 0.0;
                    }
                }
                v = next;
            }
            for s in cmp.state_ids() {
                assert!(
                    (sol.values.get(s) - v[s.index()]).abs() < 1e-7,
                    "state {}: {} vs {}",
                    cmp.state_name(s),
                    sol.values.get(s),
                    v[s.index()]
                );
            }
        }
    }

    #[test]
    fn policy_value_terminal_only_is_one_step_reward() {
        let cmp = Cmp::builder()
            .states(["A", "B"])
            .actions(["x"])
            .transition("A", "x", "B", 0.5, 1.0)
            .transition("A", "x", "A", 0.5, 1.0)
            .build()
            .unwrap();
        let b = cmp.state_id("B").unwrap();
        let rewards = RewardSpec::from_fn(&cmp, |t| if t.to == b { 2.0 } else { -1.0 });
        let a = Armdp::mdp(cmp, rewards).unwrap();
        let pi = MemorylessPolicy::uniform(a.cmp());
        let v = policy_value(&a, &pi, 1e-12).unwrap();
        assert!((v.get(a.cmp().state_id("A").unwrap()) - 0.5).abs() < 1e-12);
        assert_eq!(v.get(b), 0.0, "dead-end state evaluates to 0");
    }

    #[test]
    fn policy_value_of_fixed_action_matches_closed_form() {
        let a = two_action_loop();
        let a1 = a.cmp().action_id("a1").unwrap();
        let pi = MemorylessPolicy::deterministic(a.cmp(), |_| Some(a1)).unwrap();
        let v = policy_value(&a, &pi, 1e-10).unwrap();
        assert!((v.get(a.cmp().state_id("X").unwrap()) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn policy_value_agrees_with_solver_on_optimal_policy() {
        let a = two_action_loop();
        let tol = 1e-9;
        let sol = value_iteration(&a, tol, 1_000_000).unwrap();
        let v = policy_value(&a, &sol.policy, tol).unwrap();
        let x = a.cmp().state_id("X").unwrap();
        assert!((v.get(x) - sol.values.get(x)).abs() <= 2.0 * tol);
    }

    #[test]
    fn brute_force_horizon_zero_is_zero() {
        let a = two_action_loop();
        let x = a.cmp().state_id("X").unwrap();
        let (value, plan) = brute_force_optimal(&a, x, 0).unwrap();
        assert_eq!(value, 0.0);
        assert_eq!(plan.nodes().len(), 1);
        assert_eq!(plan.nodes()[0].action, None);
    }

    #[test]
    fn brute_force_horizon_one_is_myopic() {
        let a = two_action_loop();
        let x = a.cmp().state_id("X").unwrap();
        let (value, plan) = brute_force_optimal(&a, x, 1).unwrap();
        assert_eq!(value, 1.0, "max one-step expected reward");
        assert_eq!(
            plan.nodes()[0].action,
            Some(a.cmp().action_id("a1").unwrap())
        );
    }

    #[test]
    fn brute_force_approaches_the_infinite_horizon_value() {
        let mut rng = sample::rng(23);
        for _ in 0..5 {
            let (cmp, r, m) = sample::random_low_branching_armdp(&mut rng, 0.35);
            let a = Armdp::new(cmp, r, m).unwrap();
            let tol = 1e-9;
            let sol = value_iteration(&a, tol, 1_000_000).unwrap();
            let beta = sol.beta;
            let horizon = 16;
            let r_max = a.rewards().max_abs();
            let bound = beta.powi(horizon as i32) * r_max / (1.0 - beta);
            let start = a.cmp().state_id("s0").unwrap();
            let (value, _) = brute_force_optimal(&a, start, horizon).unwrap();
            assert!(
                (value - sol.values.get(start)).abs() <= bound + tol,
                "{} vs {} (bound {})",
                value,
                sol.values.get(start),
                bound
            );
        }
    }

    #[test]
    fn brute_force_respects_history_budget() {
        let cfg = sample::GenConfig {
            min_states: 6,
            max_states: 6,
            min_actions: 3,
            max_actions: 3,
            legality: 1.0,
            max_support: 2,
            term_range: (0.0, 0.1),
            ..Default::default()
        };
        let mut rng = sample::rng(5);
        let cmp = sample::random_cmp(&mut rng, &cfg);
        let rewards = sample::random_rewards(&mut rng, &cmp, (-1.0, 1.0));
        let a = Armdp::mdp(cmp, rewards).unwrap();
        let start = a.cmp().state_id("s0").unwrap();
        let err = brute_force_optimal(&a, start, 30).unwrap_err();
        assert!(matches!(err, PlanError::HistoryBudgetExceeded { .. }));
    }

    #[test]
    fn discount_rewrites_termination_per_transition() {
        let cmp = sample::triangle();
        let discounted = discount_to_termination(&cmp, 0.9).unwrap();
        for t in discounted.legal_transitions() {
            assert!((discounted.transition_term(t).unwrap() - 0.1).abs() < 1e-15);
        }
        let half = Cmp::builder()
            .states(["A"])
            .actions(["x"])
            .transition("A", "x", "A", 1.0, 0.5)
            .build()
            .unwrap();
        let d = discount_to_termination(&half, 0.5).unwrap();
        let t = d.legal_transitions()[0];
        assert_eq!(d.transition_term(t).unwrap(), 0.75);
    }

    #[test]
    fn unit_discount_is_the_identity() {
        let cmp = sample::running_example();
        assert_eq!(discount_to_termination(&cmp, 1.0).unwrap(), cmp);
        assert!(matches!(
            discount_to_termination(&cmp, 0.0),
            Err(PlanError::InvalidGamma(_))
        ));
        assert!(matches!(
            discount_to_termination(&cmp, 1.5),
            Err(PlanError::InvalidGamma(_))
        ));
    }

    #[test]
    fn max_iterations_error_carries_last_iterate() {
        let a = two_action_loop();
        let err = value_iteration(&a, 1e-12, 3).unwrap_err();
        match err {
            PlanError::MaxIterationsExceeded { iterations, last } => {
                assert_eq!(iterations, 3);
                assert!(last.get(a.cmp().state_id("X").unwrap()) > 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}

//! Numeric utility structures and trajectory-return evaluation.
//!
//! A [`UtilityTable`] is the raw encoding of a preference relation: a map
//! from trajectories to utilities with the empty trajectory pinned at 0.
//! [`RewardSpec`], [`MultiplierSpec`], and [`Potential`] are the three
//! structured representations; the evaluators here turn each of them back
//! into per-trajectory returns.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{Cmp, StateId, Trajectory, Transition};
use crate::report::{TrajectoryRecord, ValidationIssue, ValidationReport};
use crate::{enumerate_trajectories, EXTREME_UTILITY_LIMIT};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TableError {
    #[error("trajectory {0} is not in the utility table")]
    MissingTrajectory(Trajectory),
    #[error("the empty trajectory must have utility 0, got {0}")]
    NonzeroEmptyUtility(f64),
    #[error("utility for {0} is not finite")]
    NonFiniteUtility(Trajectory),
    #[error("duplicate table entry for {0}")]
    DuplicateEntry(Trajectory),
    #[error("transition {0:?} is outside the reward/multiplier domain")]
    TransitionOutsideDomain(Transition),
    #[error("state #{0} is outside the potential's domain")]
    StateOutsidePotential(usize),
    #[error("multiplier for {0:?} is {1}, must be positive")]
    NonpositiveMultiplier(Transition, f64),
    #[error("{0} is not a reward/multiplier over a legal transition of the model")]
    ForeignTransition(String),
}

/// A partial map from trajectories to utilities, declared complete up to a
/// horizon. Empty trajectories are implicit zeros and are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    entries: BTreeMap<Trajectory, f64>,
    horizon: usize,
}

impl UtilityTable {
    pub fn new(horizon: usize) -> Self {
        UtilityTable {
            entries: BTreeMap::new(),
            horizon,
        }
    }

    pub fn with_entries(
        horizon: usize,
        entries: impl IntoIterator<Item = (Trajectory, f64)>,
    ) -> Result<Self, TableError> {
        let mut table = Self::new(horizon);
        for (t, u) in entries {
            table.insert(t, u)?;
        }
        Ok(table)
    }

    /// Inserts one entry. Empty trajectories are accepted only with utility
    /// exactly 0 and are dropped rather than stored.
    pub fn insert(&mut self, t: Trajectory, u: f64) -> Result<(), TableError> {
        if !u.is_finite() {
            return Err(TableError::NonFiniteUtility(t));
        }
        if t.is_empty() {
            if u != 0.0 {
                return Err(TableError::NonzeroEmptyUtility(u));
            }
            return Ok(());
        }
        if self.entries.insert(t.clone(), u).is_some() {
            return Err(TableError::DuplicateEntry(t));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Utility of a trajectory, if known. Empty trajectories are 0.
    pub fn get(&self, t: &Trajectory) -> Option<f64> {
        if t.is_empty() {
            return Some(0.0);
        }
        self.entries.get(t).copied()
    }

    pub fn utility(&self, t: &Trajectory) -> Result<f64, TableError> {
        self.get(t)
            .ok_or_else(|| TableError::MissingTrajectory(t.clone()))
    }

    /// Entries in canonical trajectory order (empty trajectories excluded).
    pub fn iter(&self) -> impl Iterator<Item = (&Trajectory, f64)> {
        self.entries.iter().map(|(t, u)| (t, *u))
    }

    /// Comparison scale for residual checks: `max(1, max |u|)`.
    pub fn scale(&self) -> f64 {
        self.entries
            .values()
            .fold(1.0f64, |acc, u| acc.max(u.abs()))
    }

    /// The same table with every utility multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> UtilityTable {
        UtilityTable {
            entries: self
                .entries
                .iter()
                .map(|(t, u)| (t.clone(), alpha * u))
                .collect(),
            horizon: self.horizon,
        }
    }

    /// Errors with the first trajectory of length `<= horizon` (from any
    /// state) that the table does not key.
    pub fn check_complete(&self, cmp: &Cmp) -> Result<(), TableError> {
        for s in cmp.state_ids() {
            for t in enumerate_trajectories(cmp, s, self.horizon).expect("state id from cmp") {
                if self.get(&t).is_none() {
                    return Err(TableError::MissingTrajectory(t));
                }
            }
        }
        Ok(())
    }

    /// Structural validation against the owning model: every key must be a
    /// trajectory of the model's support; extreme magnitudes are flagged as
    /// warnings because ordinal comparisons at the strictness threshold lose
    /// meaning beyond them.
    pub fn validate(&self, cmp: &Cmp) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (t, u) in self.iter() {
            if let Some(bad) = t
                .transitions()
                .iter()
                .find(|tr| !cmp.contains_transition(**tr))
            {
                report.errors.push(ValidationIssue::InvalidTableKey {
                    trajectory: TrajectoryRecord::from_trajectory(cmp, t),
                    detail: format!(
                        "step {} does not occur with positive probability",
                        cmp.describe_transition(*bad)
                    ),
                });
                continue;
            }
            if u.abs() > EXTREME_UTILITY_LIMIT {
                report.warnings.push(ValidationIssue::ExtremeUtility {
                    trajectory: TrajectoryRecord::from_trajectory(cmp, t),
                    utility: u,
                });
            }
        }
        report
    }
}

/// Per-transition rewards; total on the legal transitions of its model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardSpec {
    rewards: BTreeMap<Transition, f64>,
}

impl RewardSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fn(cmp: &Cmp, mut f: impl FnMut(Transition) -> f64) -> Self {
        let mut spec = Self::new();
        for t in cmp.legal_transitions() {
            spec.insert(t, f(t));
        }
        spec
    }

    pub fn insert(&mut self, t: Transition, value: f64) {
        self.rewards.insert(t, value);
    }

    pub fn get(&self, t: Transition) -> Option<f64> {
        self.rewards.get(&t).copied()
    }

    pub fn reward(&self, t: Transition) -> Result<f64, TableError> {
        self.get(t).ok_or(TableError::TransitionOutsideDomain(t))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Transition, f64)> + '_ {
        self.rewards.iter().map(|(t, v)| (*t, *v))
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.rewards.values().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Checks the spec is defined on exactly the legal transitions.
    pub fn validate_total(&self, cmp: &Cmp) -> Result<(), TableError> {
        let legal = cmp.legal_transitions();
        for t in &legal {
            if !self.rewards.contains_key(t) {
                return Err(TableError::TransitionOutsideDomain(*t));
            }
        }
        if self.rewards.len() != legal.len() {
            let legal: BTreeSet<_> = legal.into_iter().collect();
            let extra = self.rewards.keys().find(|t| !legal.contains(t)).unwrap();
            return Err(TableError::ForeignTransition(format!("{extra:?}")));
        }
        Ok(())
    }
}

/// Per-transition reward multipliers (the affine slope on future return),
/// with the set of transitions where the data left the value arbitrary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultiplierSpec {
    multipliers: BTreeMap<Transition, f64>,
    undetermined: BTreeSet<Transition>,
}

impl MultiplierSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// The constant multiplier `m ≡ value` over all legal transitions.
    pub fn uniform(cmp: &Cmp, value: f64) -> Self {
        let mut spec = Self::new();
        for t in cmp.legal_transitions() {
            spec.insert(t, value);
        }
        spec
    }

    /// `m ≡ 1`: the multiplier of a plain additive-reward process.
    pub fn ones(cmp: &Cmp) -> Self {
        Self::uniform(cmp, 1.0)
    }

    pub fn from_fn(cmp: &Cmp, mut f: impl FnMut(Transition) -> f64) -> Self {
        let mut spec = Self::new();
        for t in cmp.legal_transitions() {
            spec.insert(t, f(t));
        }
        spec
    }

    pub fn insert(&mut self, t: Transition, value: f64) {
        self.multipliers.insert(t, value);
    }

    pub fn mark_undetermined(&mut self, t: Transition) {
        self.undetermined.insert(t);
    }

    pub fn get(&self, t: Transition) -> Option<f64> {
        self.multipliers.get(&t).copied()
    }

    pub fn multiplier(&self, t: Transition) -> Result<f64, TableError> {
        self.get(t).ok_or(TableError::TransitionOutsideDomain(t))
    }

    pub fn is_undetermined(&self, t: Transition) -> bool {
        self.undetermined.contains(&t)
    }

    pub fn undetermined(&self) -> impl Iterator<Item = Transition> + '_ {
        self.undetermined.iter().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Transition, f64)> + '_ {
        self.multipliers.iter().map(|(t, v)| (*t, *v))
    }

    pub fn len(&self) -> usize {
        self.multipliers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multipliers.is_empty()
    }

    /// Checks every multiplier is finite and strictly positive.
    pub fn validate_positive(&self) -> Result<(), TableError> {
        for (t, m) in self.iter() {
            if !m.is_finite() || m <= 0.0 {
                return Err(TableError::NonpositiveMultiplier(t, m));
            }
        }
        Ok(())
    }

    pub fn validate_total(&self, cmp: &Cmp) -> Result<(), TableError> {
        let legal = cmp.legal_transitions();
        for t in &legal {
            if !self.multipliers.contains_key(t) {
                return Err(TableError::TransitionOutsideDomain(*t));
            }
        }
        if self.multipliers.len() != legal.len() {
            let legal: BTreeSet<_> = legal.into_iter().collect();
            let extra = self.multipliers.keys().find(|t| !legal.contains(t)).unwrap();
            return Err(TableError::ForeignTransition(format!("{extra:?}")));
        }
        Ok(())
    }
}

/// A per-state scalar whose differences give trajectory utilities for
/// goal-seeking (path-oblivious) preferences.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    values: BTreeMap<StateId, f64>,
    root: StateId,
}

impl Potential {
    pub fn new(root: StateId, values: impl IntoIterator<Item = (StateId, f64)>) -> Self {
        Potential {
            values: values.into_iter().collect(),
            root,
        }
    }

    pub fn root(&self) -> StateId {
        self.root
    }

    pub fn get(&self, s: StateId) -> Option<f64> {
        self.values.get(&s).copied()
    }

    pub fn value(&self, s: StateId) -> Result<f64, TableError> {
        self.get(s).ok_or(TableError::StateOutsidePotential(s.index()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, f64)> + '_ {
        self.values.iter().map(|(s, v)| (*s, *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// Probability-weighted utility of a lottery under a table: the lottery is
/// flattened and every outcome's utility must be keyed.
pub fn lottery_utility(
    table: &UtilityTable,
    lottery: &crate::model::Lottery,
) -> Result<f64, TableError> {
    let flat = lottery.flatten();
    let mut total = 0.0;
    for (p, item) in flat.entries() {
        let crate::model::LotteryItem::Trajectory(t) = item else {
            unreachable!("flattened lotteries contain only trajectories");
        };
        total += p * table.utility(t)?;
    }
    Ok(total)
}

/// Affine-reward return: `u(empty) = 0`, `u(t·rest) = r(t) + m(t)·u(rest)`,
/// evaluated back to front.
pub fn ar_return(
    rewards: &RewardSpec,
    multipliers: &MultiplierSpec,
    tau: &Trajectory,
) -> Result<f64, TableError> {
    let mut u = 0.0;
    for t in tau.transitions().iter().rev() {
        u = rewards.reward(*t)? + multipliers.multiplier(*t)? * u;
    }
    Ok(u)
}

/// Cumulative additive return: the sum of per-transition rewards.
pub fn additive_return(rewards: &RewardSpec, tau: &Trajectory) -> Result<f64, TableError> {
    let mut u = 0.0;
    for t in tau.transitions().iter().rev() {
        u += rewards.reward(*t)?;
    }
    Ok(u)
}

/// Potential-difference return: `phi(end) − phi(start)`; 0 for the empty
/// trajectory.
pub fn potential_return(phi: &Potential, tau: &Trajectory) -> Result<f64, TableError> {
    if tau.is_empty() {
        return Ok(0.0);
    }
    Ok(phi.value(tau.end())? - phi.value(tau.start())?)
}

/// Product of per-transition multipliers along a trajectory; 1 when empty.
pub fn trajectory_multiplier(
    multipliers: &MultiplierSpec,
    tau: &Trajectory,
) -> Result<f64, TableError> {
    let mut prod = 1.0;
    for t in tau.transitions() {
        prod *= multipliers.multiplier(*t)?;
    }
    Ok(prod)
}

/// Forward generator: tabulates the affine-reward return of every trajectory
/// up to `horizon` from every state. The inverse of affine extraction.
pub fn table_from_armdp(
    cmp: &Cmp,
    rewards: &RewardSpec,
    multipliers: &MultiplierSpec,
    horizon: usize,
) -> Result<UtilityTable, TableError> {
    rewards.validate_total(cmp)?;
    multipliers.validate_total(cmp)?;
    let mut table = UtilityTable::new(horizon);
    for s in cmp.state_ids() {
        for tau in enumerate_trajectories(cmp, s, horizon).expect("state id from cmp") {
            let u = ar_return(rewards, multipliers, &tau)?;
            table.insert(tau, u)?;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Lottery;
    use crate::sample;

    /// A -go-> B -go-> C -go-> D with rewards (1, -1, 4), multipliers (2, 0.5, 1).
    fn chain_fixture() -> (Cmp, RewardSpec, MultiplierSpec) {
        let cmp = sample::chain(&["A", "B", "C", "D"]);
        let r_values = [1.0, -1.0, 4.0];
        let m_values = [2.0, 0.5, 1.0];
        let rewards = RewardSpec::from_fn(&cmp, |t| r_values[t.from.index()]);
        let multipliers = MultiplierSpec::from_fn(&cmp, |t| m_values[t.from.index()]);
        (cmp, rewards, multipliers)
    }

    fn full_chain(cmp: &Cmp) -> Trajectory {
        sample::state_path(cmp, "go", &["A", "B", "C", "D"])
    }

    #[test]
    fn degenerate_lottery_utility_is_the_outcome_utility() {
        let cmp = sample::chain(&["A", "B"]);
        let t = sample::state_path(&cmp, "go", &["A", "B"]);
        let table = UtilityTable::with_entries(1, [(t.clone(), 3.5)]).unwrap();
        let u = lottery_utility(&table, &Lottery::degenerate(t)).unwrap();
        assert_eq!(u, 3.5);
    }

    #[test]
    fn lottery_utility_is_probability_weighted() {
        let cmp = sample::chain(&["A", "B", "C"]);
        let t1 = sample::state_path(&cmp, "go", &["A", "B"]);
        let t2 = sample::state_path(&cmp, "go", &["A", "B", "C"]);
        let table =
            UtilityTable::with_entries(2, [(t1.clone(), 2.0), (t2.clone(), 0.0)]).unwrap();
        let l =
            Lottery::from_weighted_trajectories(vec![(0.5, t1.clone()), (0.5, t2.clone())])
                .unwrap();
        assert_eq!(lottery_utility(&table, &l).unwrap(), 1.0);

        let table =
            UtilityTable::with_entries(2, [(t1.clone(), 4.0), (t2.clone(), -4.0)]).unwrap();
        let l = Lottery::from_weighted_trajectories(vec![(0.75, t1), (0.25, t2)]).unwrap();
        assert_eq!(lottery_utility(&table, &l).unwrap(), 2.0);
    }

    #[test]
    fn lottery_utility_names_missing_trajectory() {
        let cmp = sample::chain(&["A", "B"]);
        let t = sample::state_path(&cmp, "go", &["A", "B"]);
        let table = UtilityTable::new(1);
        let err = lottery_utility(&table, &Lottery::degenerate(t.clone())).unwrap_err();
        assert_eq!(err, TableError::MissingTrajectory(t));
    }

    #[test]
    fn ar_return_base_case_is_zero() {
        let (cmp, r, m) = chain_fixture();
        let eps = Trajectory::empty(cmp.state_id("A").unwrap());
        assert_eq!(ar_return(&r, &m, &eps).unwrap(), 0.0);
    }

    #[test]
    fn ar_return_single_transition_is_the_reward() {
        let (cmp, r, m) = chain_fixture();
        let ab = sample::state_path(&cmp, "go", &["A", "B"]);
        assert_eq!(ar_return(&r, &m, &ab).unwrap(), 1.0);
    }

    #[test]
    fn ar_return_recurses_back_to_front() {
        let (cmp, r, m) = chain_fixture();
        // 1 + 2·(−1 + 0.5·4) = 3
        assert_eq!(ar_return(&r, &m, &full_chain(&cmp)).unwrap(), 3.0);
    }

    #[test]
    fn additive_return_sums_rewards() {
        let (cmp, r, _) = chain_fixture();
        assert_eq!(additive_return(&r, &full_chain(&cmp)).unwrap(), 4.0);
        let eps = Trajectory::empty(cmp.state_id("B").unwrap());
        assert_eq!(additive_return(&r, &eps).unwrap(), 0.0);
    }

    #[test]
    fn unit_multipliers_reduce_ar_to_additive() {
        let mut rng = sample::rng(42);
        for _ in 0..50 {
            let (cmp, r, _) = sample::random_armdp_parts(&mut rng, &sample::GenConfig::default());
            let ones = MultiplierSpec::ones(&cmp);
            for s in cmp.state_ids() {
                for tau in enumerate_trajectories(&cmp, s, 3).unwrap() {
                    let a = ar_return(&r, &ones, &tau).unwrap();
                    let b = additive_return(&r, &tau).unwrap();
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn potential_return_is_endpoint_difference() {
        let cmp = sample::chain(&["A", "B", "C"]);
        let phi = Potential::new(
            cmp.state_id("A").unwrap(),
            [
                (cmp.state_id("A").unwrap(), 0.0),
                (cmp.state_id("B").unwrap(), 7.0),
                (cmp.state_id("C").unwrap(), 3.0),
            ],
        );
        let t = sample::state_path(&cmp, "go", &["A", "B", "C"]);
        assert_eq!(potential_return(&phi, &t).unwrap(), 3.0);
        let eps = Trajectory::empty(cmp.state_id("B").unwrap());
        assert_eq!(potential_return(&phi, &eps).unwrap(), 0.0);
    }

    #[test]
    fn potential_return_vanishes_on_cycles() {
        let cmp = sample::triangle();
        let phi = Potential::new(
            cmp.state_id("A").unwrap(),
            cmp.state_ids().map(|s| (s, 1.5 * s.index() as f64)),
        );
        let cycle = sample::state_path(&cmp, "go", &["A", "B", "C", "A"]);
        assert_eq!(potential_return(&phi, &cycle).unwrap(), 0.0);
    }

    #[test]
    fn trajectory_multiplier_is_a_product() {
        let (cmp, _, m) = chain_fixture();
        let eps = Trajectory::empty(cmp.state_id("C").unwrap());
        assert_eq!(trajectory_multiplier(&m, &eps).unwrap(), 1.0);
        let ab_bc = sample::state_path(&cmp, "go", &["A", "B", "C"]);
        assert_eq!(trajectory_multiplier(&m, &ab_bc).unwrap(), 1.0); // 2·0.5
        let ones = MultiplierSpec::ones(&cmp);
        assert_eq!(trajectory_multiplier(&ones, &full_chain(&cmp)).unwrap(), 1.0);
    }

    #[test]
    fn table_from_armdp_horizon_zero_is_all_zeros() {
        let (cmp, r, m) = chain_fixture();
        let table = table_from_armdp(&cmp, &r, &m, 0).unwrap();
        assert!(table.is_empty(), "empty trajectories are implicit zeros");
        let eps = Trajectory::empty(cmp.state_id("A").unwrap());
        assert_eq!(table.utility(&eps).unwrap(), 0.0);
    }

    #[test]
    fn table_from_armdp_matches_hand_recursion() {
        let (cmp, r, m) = chain_fixture();
        let table = table_from_armdp(&cmp, &r, &m, 3).unwrap();
        assert_eq!(table.utility(&full_chain(&cmp)).unwrap(), 3.0);
    }

    #[test]
    fn additive_tables_decompose_over_concatenation() {
        let cmp = sample::running_example();
        let r = RewardSpec::from_fn(&cmp, |t| (t.to.index() as f64) - 1.5);
        let ones = MultiplierSpec::ones(&cmp);
        let table = table_from_armdp(&cmp, &r, &ones, 3).unwrap();
        let prefix = sample::state_path(&cmp, "go", &["s0", "s1h", "s2"]);
        let suffix = sample::state_path(&cmp, "go", &["s2", "s3h"]);
        let whole = prefix.concat(&suffix).unwrap();
        let lhs = table.utility(&whole).unwrap();
        let rhs = table.utility(&prefix).unwrap() + table.utility(&suffix).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn table_rejects_nonzero_empty_and_duplicates() {
        let cmp = sample::chain(&["A", "B"]);
        let eps = Trajectory::empty(cmp.state_id("A").unwrap());
        let mut table = UtilityTable::new(1);
        assert!(matches!(
            table.insert(eps.clone(), 0.5),
            Err(TableError::NonzeroEmptyUtility(_))
        ));
        table.insert(eps, 0.0).unwrap();
        let t = sample::state_path(&cmp, "go", &["A", "B"]);
        table.insert(t.clone(), 1.0).unwrap();
        assert!(matches!(
            table.insert(t, 2.0),
            Err(TableError::DuplicateEntry(_))
        ));
    }

    #[test]
    fn returns_reject_transitions_outside_the_domain() {
        let (cmp, r, m) = chain_fixture();
        let other = sample::chain(&["A", "B", "C", "D", "E"]);
        let foreign = sample::state_path(&other, "go", &["D", "E"]);
        assert!(matches!(
            ar_return(&r, &m, &foreign),
            Err(TableError::TransitionOutsideDomain(_))
        ));
        assert!(matches!(
            additive_return(&r, &foreign),
            Err(TableError::TransitionOutsideDomain(_))
        ));
        let phi = Potential::new(cmp.state_id("A").unwrap(), []);
        let ab = sample::state_path(&cmp, "go", &["A", "B"]);
        assert!(matches!(
            potential_return(&phi, &ab),
            Err(TableError::StateOutsidePotential(_))
        ));
    }

    #[test]
    fn extreme_utilities_are_flagged() {
        let cmp = sample::chain(&["A", "B"]);
        let t = sample::state_path(&cmp, "go", &["A", "B"]);
        let table = UtilityTable::with_entries(1, [(t, 5e12)]).unwrap();
        let report = table.validate(&cmp);
        assert!(!report.violated());
        assert!(matches!(
            report.warnings[0],
            ValidationIssue::ExtremeUtility { .. }
        ));
    }
}

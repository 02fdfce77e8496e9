//! Structure extraction and axiom consistency checks.
//!
//! Utility tables are finite, so each axiom is checked as a finite family of
//! residual conditions at a declared tolerance: verdicts mean "consistent up
//! to the table's horizon", never a proof over all lotteries.
//!
//! Residuals are compared against `rel_tol · scale` where scale is
//! `max(1, max |u|)` over the data; the strictness threshold for ordinal
//! comparisons ([`crate::STRICT_PREFERENCE_EPS`]) is absolute.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::model::{Cmp, ModelError, StateId, Trajectory, Transition};
use crate::report::{
    CheckKind, ConsistencyReport, TrajectoryRecord, TransitionRecord, Witness,
};
use crate::returns::{MultiplierSpec, Potential, RewardSpec, TableError, UtilityTable};
use crate::{enumerate_trajectories, STRICT_PREFERENCE_EPS};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExtractError {
    #[error("utility table horizon {horizon} is too small: this operation needs completeness to horizon {required}")]
    HorizonTooSmall { horizon: usize, required: usize },
    #[error("utility table is incomplete: missing {trajectory}")]
    IncompleteTable { trajectory: String },
    #[error("states unreachable from `{root}`: {unreachable:?}")]
    Unreachable {
        root: String,
        unreachable: Vec<String>,
    },
    #[error("partial table keys {trajectory}, which is not anchored at `{expected}`")]
    NotAnchored {
        trajectory: String,
        expected: String,
    },
    #[error("state `{state}` is reachable but has no connector within horizon {horizon}; the horizon is too small")]
    NoConnector { state: String, horizon: usize },
    #[error("relative tolerance {0} must be positive and finite")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Result of affine extraction: per-transition rewards and multipliers plus
/// the consistency report over every residual the table determines.
#[derive(Debug, Clone)]
pub struct AffineExtraction {
    pub rewards: RewardSpec,
    pub multipliers: MultiplierSpec,
    pub report: ConsistencyReport,
}

fn check_tol(rel_tol: f64) -> Result<(), ExtractError> {
    if !rel_tol.is_finite() || rel_tol <= 0.0 {
        return Err(ExtractError::InvalidTolerance(rel_tol));
    }
    Ok(())
}

fn require_complete(
    cmp: &Cmp,
    table: &UtilityTable,
    required_horizon: usize,
) -> Result<(), ExtractError> {
    if table.horizon() < required_horizon {
        return Err(ExtractError::HorizonTooSmall {
            horizon: table.horizon(),
            required: required_horizon,
        });
    }
    for s in cmp.state_ids() {
        for t in enumerate_trajectories(cmp, s, table.horizon()).expect("state id from cmp") {
            if table.get(&t).is_none() {
                return Err(ExtractError::IncompleteTable {
                    trajectory: t.describe(cmp),
                });
            }
        }
    }
    Ok(())
}

/// Every trajectory of length at most `horizon`, from every state, in global
/// canonical order.
fn all_in_horizon(cmp: &Cmp, horizon: usize) -> Vec<Trajectory> {
    let mut all: Vec<Trajectory> = cmp
        .state_ids()
        .flat_map(|s| enumerate_trajectories(cmp, s, horizon).expect("state id from cmp"))
        .collect();
    all.sort();
    all
}

/// Sign of a utility difference at the strict-preference threshold:
/// `1` strictly preferred, `-1` strictly dispreferred, `0` indifferent.
fn preference_sign(delta: f64) -> i8 {
    if delta > STRICT_PREFERENCE_EPS {
        1
    } else if delta < -STRICT_PREFERENCE_EPS {
        -1
    } else {
        0
    }
}

/// Recovers rewards and multipliers from a complete utility table.
///
/// For each legal transition `t`, the reward is the utility of the
/// single-step trajectory, and the multiplier is the affine slope solved
/// against the first enumerated follow-up whose utility clears the
/// strictness threshold. Transitions whose in-horizon follow-ups are all
/// indifferent to the empty trajectory leave the slope arbitrary: they get
/// `m = 1` and are listed as undetermined. Every other follow-up becomes a
/// residual check, and a non-positive solved slope is itself a violation.
pub fn extract_affine(
    cmp: &Cmp,
    table: &UtilityTable,
    rel_tol: f64,
) -> Result<AffineExtraction, ExtractError> {
    check_tol(rel_tol)?;
    require_complete(cmp, table, 2)?;
    let scale = table.scale();
    let tol = rel_tol * scale;
    let mut report = ConsistencyReport::new(
        CheckKind::ExtractAffine,
        rel_tol,
        scale,
        Some(table.horizon()),
    );

    let follow_ups: Vec<Vec<Trajectory>> = cmp
        .state_ids()
        .map(|s| {
            enumerate_trajectories(cmp, s, table.horizon() - 1).expect("state id from cmp")
        })
        .collect();

    let mut rewards = RewardSpec::new();
    let mut multipliers = MultiplierSpec::new();
    for t in cmp.legal_transitions() {
        let single = Trajectory::new(t.from, vec![t]).expect("transition is self-adjacent");
        let r = table.utility(&single)?;
        rewards.insert(t, r);

        let candidates = &follow_ups[t.to.index()];
        let pivot = candidates
            .iter()
            .find(|tau| !tau.is_empty() && table.get(tau).unwrap().abs() > STRICT_PREFERENCE_EPS);
        let m = match pivot {
            None => {
                multipliers.mark_undetermined(t);
                report
                    .undetermined
                    .push(TransitionRecord::from_transition(cmp, t));
                1.0
            }
            Some(tau) => {
                let u_tau = table.utility(tau)?;
                let u_comp = table.utility(&single.concat(tau).expect("adjacent"))?;
                let m = (u_comp - r) / u_tau;
                if !(m > 0.0) {
                    report.add_witness(Witness::NonpositiveMultiplier {
                        transition: TransitionRecord::from_transition(cmp, t),
                        multiplier: m,
                    });
                }
                m
            }
        };
        multipliers.insert(t, m);

        for sigma in candidates {
            if sigma.is_empty() || Some(sigma) == pivot {
                continue;
            }
            let u_sigma = table.utility(sigma)?;
            let u_comp = table.utility(&single.concat(sigma).expect("adjacent"))?;
            let residual = (u_comp - (r + m * u_sigma)).abs();
            if residual > tol {
                report.add_witness(Witness::AffineResidual {
                    transition: TransitionRecord::from_transition(cmp, t),
                    follow_up: TrajectoryRecord::from_trajectory(cmp, sigma),
                    residual,
                });
            }
        }
    }
    Ok(AffineExtraction {
        rewards,
        multipliers,
        report,
    })
}

/// Checks the memorylessness axiom: the table is consistent iff affine
/// extraction succeeds with strictly positive multipliers. On violation the
/// witnesses are ordinal counterexamples — a prefix that flips the
/// comparison of two continuations — with the extraction residuals as a
/// fallback when no flip clears the strictness threshold.
pub fn check_memorylessness(
    cmp: &Cmp,
    table: &UtilityTable,
    rel_tol: f64,
) -> Result<ConsistencyReport, ExtractError> {
    let extraction = extract_affine(cmp, table, rel_tol)?;
    let mut report = ConsistencyReport::new(
        CheckKind::Memorylessness,
        rel_tol,
        extraction.report.scale,
        Some(table.horizon()),
    );
    report.undetermined = extraction.report.undetermined.clone();
    if extraction.report.is_consistent() {
        return Ok(report);
    }

    let horizon = table.horizon();
    let all = all_in_horizon(cmp, horizon);
    'scan: for prefix in all.iter().filter(|t| !t.is_empty()) {
        let budget = horizon - prefix.len();
        let continuations =
            enumerate_trajectories(cmp, prefix.end(), budget).expect("state id from cmp");
        for (i, left) in continuations.iter().enumerate() {
            for right in continuations.iter().skip(i + 1) {
                let bare = table.utility(left)? - table.utility(right)?;
                let prefixed = table.utility(&prefix.concat(left).expect("adjacent"))?
                    - table.utility(&prefix.concat(right).expect("adjacent"))?;
                if preference_sign(bare) != preference_sign(prefixed) {
                    report.add_witness(Witness::OrdinalFlip {
                        prefix: TrajectoryRecord::from_trajectory(cmp, prefix),
                        left: TrajectoryRecord::from_trajectory(cmp, left),
                        right: TrajectoryRecord::from_trajectory(cmp, right),
                        bare_delta: bare,
                        prefixed_delta: prefixed,
                    });
                    if report.witness_cap_reached() {
                        break 'scan;
                    }
                }
            }
        }
    }
    if report.witnesses.is_empty() {
        // residual-level violation too small to flip any strict comparison
        for w in extraction.report.witnesses {
            report.add_witness(w);
        }
    }
    report.status = crate::report::CheckStatus::Violated;
    Ok(report)
}

/// Internal: affine extraction plus the additivity verdict over it.
fn additivity_inner(
    cmp: &Cmp,
    table: &UtilityTable,
    rel_tol: f64,
) -> Result<(AffineExtraction, ConsistencyReport), ExtractError> {
    let extraction = extract_affine(cmp, table, rel_tol)?;
    let mut report = ConsistencyReport::new(
        CheckKind::Additivity,
        rel_tol,
        extraction.report.scale,
        Some(table.horizon()),
    );
    report.undetermined = extraction.report.undetermined.clone();
    for w in &extraction.report.witnesses {
        report.add_witness(w.clone());
    }
    for (t, m) in extraction.multipliers.iter() {
        if extraction.multipliers.is_undetermined(t) {
            continue;
        }
        if (m - 1.0).abs() > STRICT_PREFERENCE_EPS {
            report.add_witness(Witness::MultiplierNotUnit {
                transition: TransitionRecord::from_transition(cmp, t),
                multiplier: m,
            });
        }
    }
    exchange_scan(cmp, table, rel_tol * extraction.report.scale, &mut report)?;
    Ok((extraction, report))
}

/// The exchange identity `u(p1·s1) + u(p2·s2) = u(p1·s2) + u(p2·s1)` over
/// all in-horizon quadruples sharing a middle state.
fn exchange_scan(
    cmp: &Cmp,
    table: &UtilityTable,
    tol: f64,
    report: &mut ConsistencyReport,
) -> Result<(), ExtractError> {
    let horizon = table.horizon();
    let all = all_in_horizon(cmp, horizon);
    for mid in cmp.state_ids() {
        let endings: Vec<&Trajectory> = all.iter().filter(|t| t.end() == mid).collect();
        let startings =
            enumerate_trajectories(cmp, mid, horizon).expect("state id from cmp");
        // cache compositions that fit in the horizon
        let mut comp: HashMap<(usize, usize), f64> = HashMap::new();
        for (i, e) in endings.iter().enumerate() {
            for (k, f) in startings.iter().enumerate() {
                if e.len() + f.len() <= horizon {
                    comp.insert((i, k), table.utility(&e.concat(f).expect("adjacent"))?);
                }
            }
        }
        for i in 0..endings.len() {
            for j in (i + 1)..endings.len() {
                // endings are sorted by length; once the longer prefix
                // cannot host any suffix pair, later j only grow
                if endings[j].len() >= horizon {
                    break;
                }
                for k in 0..startings.len() {
                    let Some(&u_ik) = comp.get(&(i, k)) else { continue };
                    let Some(&u_jk) = comp.get(&(j, k)) else { continue };
                    for l in (k + 1)..startings.len() {
                        let Some(&u_il) = comp.get(&(i, l)) else { continue };
                        let Some(&u_jl) = comp.get(&(j, l)) else { break };
                        let residual = ((u_ik + u_jl) - (u_il + u_jk)).abs();
                        if residual > tol {
                            report.add_witness(Witness::ExchangeResidual {
                                first_prefix: TrajectoryRecord::from_trajectory(cmp, endings[i]),
                                second_prefix: TrajectoryRecord::from_trajectory(cmp, endings[j]),
                                first_suffix: TrajectoryRecord::from_trajectory(cmp, &startings[k]),
                                second_suffix: TrajectoryRecord::from_trajectory(cmp, &startings[l]),
                                residual,
                            });
                            if report.witness_cap_reached() {
                                return Ok(());
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Checks the additivity axiom: affine-consistent with every determined
/// multiplier equal to 1, and the exchange identity holding on all
/// in-horizon quadruples.
pub fn check_additivity(
    cmp: &Cmp,
    table: &UtilityTable,
    rel_tol: f64,
) -> Result<ConsistencyReport, ExtractError> {
    additivity_inner(cmp, table, rel_tol).map(|(_, report)| report)
}

/// Checks the dominance implication of additivity on all composable
/// in-horizon quadruples: componentwise weakly preferred parts must compose
/// into a weakly preferred whole. Quadratic in the table size per side;
/// intended for desk-scale tables.
pub fn check_dominance(cmp: &Cmp, table: &UtilityTable, rel_tol: f64) -> ConsistencyReport {
    let scale = table.scale();
    let tol = rel_tol * scale;
    let mut report =
        ConsistencyReport::new(CheckKind::Dominance, rel_tol, scale, Some(table.horizon()));

    // rebuild the trajectory universe from the table itself, plus the empty
    // trajectory at every mentioned state
    let mut universe: Vec<Trajectory> = table.iter().map(|(t, _)| t.clone()).collect();
    let mut anchors: Vec<StateId> = universe
        .iter()
        .flat_map(|t| [t.start(), t.end()])
        .collect();
    anchors.sort();
    anchors.dedup();
    universe.extend(anchors.iter().map(|s| Trajectory::empty(*s)));
    universe.sort();

    let by_start: BTreeMap<StateId, Vec<&Trajectory>> = {
        let mut m: BTreeMap<StateId, Vec<&Trajectory>> = BTreeMap::new();
        for t in &universe {
            m.entry(t.start()).or_default().push(t);
        }
        m
    };

    let u = |t: &Trajectory| table.get(t);
    for hat1 in &universe {
        let Some(u_hat1) = u(hat1) else { continue };
        for t1 in &universe {
            if std::ptr::eq(hat1, t1) {
                continue;
            }
            let Some(u_t1) = u(t1) else { continue };
            if u_hat1 < u_t1 {
                continue;
            }
            let hat2s = by_start.get(&hat1.end());
            let t2s = by_start.get(&t1.end());
            let (Some(hat2s), Some(t2s)) = (hat2s, t2s) else {
                continue;
            };
            for hat2 in hat2s {
                let Some(u_hat2) = u(hat2) else { continue };
                let Some(u_hat) = hat1
                    .concat(hat2)
                    .ok()
                    .and_then(|w| table.get(&w))
                else {
                    continue;
                };
                for t2 in t2s {
                    let Some(u_t2) = u(t2) else { continue };
                    if u_hat2 < u_t2 {
                        continue;
                    }
                    let Some(u_whole) = t1.concat(t2).ok().and_then(|w| table.get(&w)) else {
                        continue;
                    };
                    if u_hat < u_whole - tol {
                        report.add_witness(Witness::DominanceCounterexample {
                            preferred_prefix: TrajectoryRecord::from_trajectory(cmp, hat1),
                            other_prefix: TrajectoryRecord::from_trajectory(cmp, t1),
                            preferred_suffix: TrajectoryRecord::from_trajectory(cmp, hat2),
                            other_suffix: TrajectoryRecord::from_trajectory(cmp, t2),
                            composed_gap: u_whole - u_hat,
                        });
                        if report.witness_cap_reached() {
                            return report;
                        }
                    }
                }
            }
        }
    }
    report
}

/// Recovers a per-state potential from rewards by breadth-first spanning
/// tree from `root` (canonical neighbor order), then checks every legal
/// transition's reward against the potential difference of its endpoints.
/// A residual is exactly a cycle with nonzero additive return.
pub fn extract_potential(
    cmp: &Cmp,
    rewards: &RewardSpec,
    root: StateId,
    rel_tol: f64,
) -> Result<(Potential, ConsistencyReport), ExtractError> {
    check_tol(rel_tol)?;
    if root.index() >= cmp.num_states() {
        return Err(ModelError::StateOutOfRange(root.index()).into());
    }
    rewards.validate_total(cmp)?;

    let n = cmp.num_states();
    let mut phi = vec![f64::NAN; n];
    phi[root.index()] = 0.0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(s) = queue.pop_front() {
        for a in cmp.legal_actions(s) {
            for e in cmp.edges(s, a).unwrap() {
                if e.prob > 0.0 && phi[e.to.index()].is_nan() {
                    let t = Transition::new(s, a, e.to);
                    phi[e.to.index()] = phi[s.index()] + rewards.reward(t)?;
                    queue.push_back(e.to);
                }
            }
        }
    }
    let unreachable: Vec<String> = (0..n)
        .filter(|i| phi[*i].is_nan())
        .map(|i| cmp.state_name(StateId::new(i)).to_owned())
        .collect();
    if !unreachable.is_empty() {
        return Err(ExtractError::Unreachable {
            root: cmp.state_name(root).to_owned(),
            unreachable,
        });
    }

    let potential = Potential::new(
        root,
        (0..n).map(|i| (StateId::new(i), phi[i])),
    );
    let scale = 1.0f64.max(rewards.max_abs()).max(potential.max_abs());
    let tol = rel_tol * scale;
    let mut report = ConsistencyReport::new(CheckKind::Potential, rel_tol, scale, None);
    for t in cmp.legal_transitions() {
        let residual = (phi[t.to.index()] - phi[t.from.index()] - rewards.reward(t)?).abs();
        if residual > tol {
            report.add_witness(Witness::CycleResidual {
                transition: TransitionRecord::from_transition(cmp, t),
                residual,
            });
            if report.witness_cap_reached() {
                break;
            }
        }
    }
    Ok((potential, report))
}

/// Checks path-obliviousness, the strongest of the three axioms: additivity
/// must hold, and the extracted rewards must come from a potential. Witnesses
/// of the failing stage are forwarded.
pub fn check_path_obliviousness(
    cmp: &Cmp,
    table: &UtilityTable,
    root: StateId,
    rel_tol: f64,
) -> Result<ConsistencyReport, ExtractError> {
    let (extraction, additivity) = additivity_inner(cmp, table, rel_tol)?;
    let mut report = ConsistencyReport::new(
        CheckKind::PathObliviousness,
        rel_tol,
        additivity.scale,
        Some(table.horizon()),
    );
    report.undetermined = additivity.undetermined.clone();
    if !additivity.is_consistent() {
        for w in additivity.witnesses {
            report.add_witness(w);
        }
        return Ok(report);
    }
    let (_, potential_report) = extract_potential(cmp, &extraction.rewards, root, rel_tol)?;
    for w in potential_report.witnesses {
        report.add_witness(w);
    }
    Ok(report)
}

/// Outcome of completing a partially specified table.
#[derive(Debug, Clone)]
pub enum CompletionOutcome {
    Completed(UtilityTable),
    Violated(ConsistencyReport),
}

/// Completes a table known only on trajectories from `s0`, assuming
/// additivity: for a state `s` reached by connector `c`, a trajectory `t`
/// from `s` gets `u(t) = u(c·t) − u(c)`. The first enumerated connector
/// defines the value; every other in-horizon connector is checked for
/// well-definedness. The returned table declares the horizon to which it is
/// complete for every reachable state; entries beyond it are kept.
pub fn complete_partial(
    cmp: &Cmp,
    partial: &UtilityTable,
    s0: StateId,
    rel_tol: f64,
) -> Result<CompletionOutcome, ExtractError> {
    check_tol(rel_tol)?;
    if s0.index() >= cmp.num_states() {
        return Err(ModelError::StateOutOfRange(s0.index()).into());
    }
    for (t, _) in partial.iter() {
        if t.start() != s0 {
            return Err(ExtractError::NotAnchored {
                trajectory: t.describe(cmp),
                expected: cmp.state_name(s0).to_owned(),
            });
        }
    }
    let horizon = partial.horizon();
    let from_s0 = enumerate_trajectories(cmp, s0, horizon).expect("state id from cmp");
    for t in &from_s0 {
        if partial.get(t).is_none() {
            return Err(ExtractError::IncompleteTable {
                trajectory: t.describe(cmp),
            });
        }
    }

    // connectors per state, in enumeration order (shortest first)
    let mut connectors: BTreeMap<StateId, Vec<&Trajectory>> = BTreeMap::new();
    for t in &from_s0 {
        connectors.entry(t.end()).or_default().push(t);
    }

    // reachability beyond the horizon means the horizon cannot complete it
    let mut reachable = vec![false; cmp.num_states()];
    reachable[s0.index()] = true;
    let mut queue = std::collections::VecDeque::from([s0]);
    while let Some(s) = queue.pop_front() {
        for t in cmp.legal_transitions().into_iter().filter(|t| t.from == s) {
            if !reachable[t.to.index()] {
                reachable[t.to.index()] = true;
                queue.push_back(t.to);
            }
        }
    }
    for s in cmp.state_ids() {
        if reachable[s.index()] && !connectors.contains_key(&s) {
            return Err(ExtractError::NoConnector {
                state: cmp.state_name(s).to_owned(),
                horizon,
            });
        }
    }

    let scale = partial.scale();
    let tol = rel_tol * scale;
    let mut report = ConsistencyReport::new(CheckKind::Completion, rel_tol, scale, Some(horizon));

    let mut out_horizon = horizon;
    let mut entries: BTreeMap<Trajectory, f64> = BTreeMap::new();
    for (&s, conns) in &connectors {
        let baseline = conns[0];
        let budget = horizon - baseline.len();
        out_horizon = out_horizon.min(budget);
        let u_baseline = partial.utility(baseline)?;
        let locals = enumerate_trajectories(cmp, s, budget).expect("state id from cmp");
        for tau in &locals {
            if tau.is_empty() {
                continue;
            }
            let u = partial.utility(&baseline.concat(tau).expect("adjacent"))? - u_baseline;
            entries.insert(tau.clone(), u);
        }
        // well-definedness across every other in-horizon connector
        for conn in conns.iter().skip(1) {
            let u_conn = partial.utility(conn)?;
            let conn_budget = horizon - conn.len();
            for tau in &locals {
                if tau.is_empty() || tau.len() > conn_budget {
                    continue;
                }
                let via_conn = partial.utility(&conn.concat(tau).expect("adjacent"))? - u_conn;
                let residual = (via_conn - entries[tau]).abs();
                if residual > tol {
                    report.add_witness(Witness::ConnectorMismatch {
                        state: cmp.state_name(s).to_owned(),
                        connector: TrajectoryRecord::from_trajectory(cmp, conn),
                        baseline_connector: TrajectoryRecord::from_trajectory(cmp, baseline),
                        trajectory: TrajectoryRecord::from_trajectory(cmp, tau),
                        residual,
                    });
                    if report.witness_cap_reached() {
                        return Ok(CompletionOutcome::Violated(report));
                    }
                }
            }
        }
    }
    if !report.is_consistent() {
        return Ok(CompletionOutcome::Violated(report));
    }
    let table = UtilityTable::with_entries(out_horizon, entries)?;
    Ok(CompletionOutcome::Completed(table))
}

/// Canonical form of extracted structure: rewards scaled so `max |r| = 1`
/// (all-zero rewards unchanged), multipliers untouched (the slope is
/// scale-invariant), and the potential shifted to 0 at its root and scaled
/// with the rewards.
pub fn canonicalize(
    rewards: &RewardSpec,
    multipliers: Option<&MultiplierSpec>,
    phi: Option<&Potential>,
) -> (RewardSpec, Option<MultiplierSpec>, Option<Potential>) {
    let magnitude = rewards.max_abs();
    let scale = if magnitude > 0.0 { magnitude } else { 1.0 };
    let mut r_out = RewardSpec::new();
    for (t, r) in rewards.iter() {
        r_out.insert(t, r / scale);
    }
    let phi_out = phi.map(|p| {
        let shift = p.get(p.root()).unwrap_or(0.0);
        Potential::new(p.root(), p.iter().map(|(s, v)| (s, (v - shift) / scale)))
    });
    (r_out, multipliers.cloned(), phi_out)
}

/// A raw pairwise preference statement over trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub left: Trajectory,
    pub relation: Relation,
    pub right: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `left` is strictly preferred to `right`.
    Strict,
    /// `left` and `right` are equivalent.
    Indifferent,
}

/// Necessary-condition check on raw pairwise comparisons: the data must
/// describe a total preorder on the trajectories it mentions. Strict cycles
/// refute transitivity; pairs the (transitively closed) data leaves
/// unordered refute totality. Passing here does not establish the full
/// axioms — continuity and independence quantify over all lotteries and are
/// not finitely refutable from ordinal data.
pub fn check_ordinal(cmp: &Cmp, comparisons: &[Comparison]) -> ConsistencyReport {
    let mut report = ConsistencyReport::new(CheckKind::Ordinal, 0.0, 1.0, None);

    let mut items: Vec<Trajectory> = comparisons
        .iter()
        .flat_map(|c| [c.left.clone(), c.right.clone()])
        .collect();
    items.sort();
    items.dedup();
    let index_of = |t: &Trajectory| items.binary_search(t).expect("collected above");

    // indifference classes via union-find
    let mut parent: Vec<usize> = (0..items.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in comparisons {
        if c.relation == Relation::Indifferent {
            let a = find(&mut parent, index_of(&c.left));
            let b = find(&mut parent, index_of(&c.right));
            parent[a.max(b)] = a.min(b);
        }
    }
    let class: Vec<usize> = (0..items.len())
        .map(|i| find(&mut parent, i))
        .collect();

    // strict edges between classes
    let mut strict: Vec<(usize, usize)> = comparisons
        .iter()
        .filter(|c| c.relation == Relation::Strict)
        .map(|c| (class[index_of(&c.left)], class[index_of(&c.right)]))
        .collect();
    strict.sort();
    strict.dedup();

    // reachability over classes through strict edges
    let n = items.len();
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in &strict {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }

    let representative = |cls: usize| {
        items
            .iter()
            .enumerate()
            .find(|(i, _)| class[*i] == cls)
            .map(|(_, t)| t)
            .expect("class has a member")
    };

    // strict edge inside a class, or mutual strict reachability: a cycle
    let mut cycle_pairs: Vec<(usize, usize)> = Vec::new();
    for &(a, b) in &strict {
        if a == b {
            cycle_pairs.push((a, b));
        }
    }
    let mut classes: Vec<usize> = class.clone();
    classes.sort();
    classes.dedup();
    for (i, &a) in classes.iter().enumerate() {
        for &b in classes.iter().skip(i + 1) {
            if reach[a][b] && reach[b][a] {
                cycle_pairs.push((a, b));
            }
        }
    }
    for (a, b) in cycle_pairs {
        let mut trajectories = vec![TrajectoryRecord::from_trajectory(cmp, representative(a))];
        if a != b {
            trajectories.push(TrajectoryRecord::from_trajectory(cmp, representative(b)));
        }
        report.add_witness(Witness::PreferenceCycle { trajectories });
    }

    // totality over the mentioned items
    for (i, &a) in classes.iter().enumerate() {
        for &b in classes.iter().skip(i + 1) {
            if !reach[a][b] && !reach[b][a] {
                report.add_witness(Witness::IncomparablePair {
                    left: TrajectoryRecord::from_trajectory(cmp, representative(a)),
                    right: TrajectoryRecord::from_trajectory(cmp, representative(b)),
                });
                if report.witness_cap_reached() {
                    return report;
                }
            }
        }
    }
    report
}

//! JSON file formats and their loaders.
//!
//! Every emitted file carries `"schema": 1`; loaders accept a missing field
//! as version 1 and reject anything else. Maps are keyed by symbolic names
//! and serialized through ordered containers, so equal inputs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Cmp, StateId, Trajectory, Transition};
use crate::planning::{Armdp, MemorylessPolicy, Solution};
use crate::report::{
    CheckStatus, ConsistencyReport, StepRecord, TrajectoryRecord, TransitionRecord,
    ValidationIssue, ValidationReport,
};
use crate::represent::{Comparison, Relation};
use crate::returns::{MultiplierSpec, Potential, RewardSpec, UtilityTable};
use crate::PROB_SUM_TOL;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_default() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: unsupported schema version {found} (this build reads {expected})")]
    Schema {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("{path}: {detail}")]
    Invalid { path: String, detail: String },
}

fn read_file(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, FileError> {
    serde_json::from_str(text).map_err(|source| FileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

fn check_schema(path: &Path, found: u32) -> Result<(), FileError> {
    if found != SCHEMA_VERSION {
        return Err(FileError::Schema {
            path: path.display().to_string(),
            found,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(())
}

fn invalid(path: &Path, detail: impl Into<String>) -> FileError {
    FileError::Invalid {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Serializes a value as pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    fs::write(path, to_json_string(value)).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// model files

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub from: String,
    pub action: String,
    pub to: String,
    pub prob: f64,
    #[serde(default)]
    pub term: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValuedTransition {
    pub from: String,
    pub action: String,
    pub to: String,
    pub value: f64,
}

/// A model file: a plain CMP, optionally extended with per-transition
/// rewards and multipliers (an AR-MDP file). Omitted `(from, action)` pairs
/// are illegal; omitted multipliers mean `m ≡ 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub transitions: Vec<TransitionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<ValuedTransition>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<ValuedTransition>>,
}

/// A parsed model file with its optional reward structure resolved.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub cmp: Cmp,
    pub rewards: Option<RewardSpec>,
    pub multipliers: Option<MultiplierSpec>,
}

fn resolve_valued(
    path: &Path,
    cmp: &Cmp,
    entries: &[ValuedTransition],
    what: &str,
) -> Result<BTreeMap<Transition, f64>, FileError> {
    let mut out = BTreeMap::new();
    for e in entries {
        let from = cmp
            .state_id(&e.from)
            .ok_or_else(|| invalid(path, format!("unknown state `{}`", e.from)))?;
        let action = cmp
            .action_id(&e.action)
            .ok_or_else(|| invalid(path, format!("unknown action `{}`", e.action)))?;
        let to = cmp
            .state_id(&e.to)
            .ok_or_else(|| invalid(path, format!("unknown state `{}`", e.to)))?;
        if !e.value.is_finite() {
            return Err(invalid(
                path,
                format!("{what} for ({}, {}, {}) is not finite", e.from, e.action, e.to),
            ));
        }
        let t = Transition::new(from, action, to);
        if out.insert(t, e.value).is_some() {
            return Err(invalid(
                path,
                format!("duplicate {what} for ({}, {}, {})", e.from, e.action, e.to),
            ));
        }
    }
    Ok(out)
}

pub fn load_model(path: &Path) -> Result<LoadedModel, FileError> {
    let text = read_file(path)?;
    let file: ModelFile = parse(path, &text)?;
    check_schema(path, file.schema)?;
    let mut b = Cmp::builder()
        .states(file.states.iter().cloned())
        .actions(file.actions.iter().cloned());
    for t in &file.transitions {
        b = b.transition(&t.from, &t.action, &t.to, t.prob, t.term);
    }
    let cmp = b.build().map_err(|e| invalid(path, e.to_string()))?;
    let rewards = match &file.rewards {
        None => None,
        Some(entries) => {
            let resolved = resolve_valued(path, &cmp, entries, "reward")?;
            let mut spec = RewardSpec::new();
            for (t, v) in resolved {
                spec.insert(t, v);
            }
            Some(spec)
        }
    };
    let multipliers = match &file.multipliers {
        None => None,
        Some(entries) => {
            let resolved = resolve_valued(path, &cmp, entries, "multiplier")?;
            let mut spec = MultiplierSpec::new();
            for (t, v) in resolved {
                spec.insert(t, v);
            }
            Some(spec)
        }
    };
    Ok(LoadedModel {
        cmp,
        rewards,
        multipliers,
    })
}

pub fn load_cmp(path: &Path) -> Result<Cmp, FileError> {
    Ok(load_model(path)?.cmp)
}

/// Loads an AR-MDP file: requires `rewards`; missing `multipliers` default
/// to `m ≡ 1`.
pub fn load_armdp(path: &Path) -> Result<Armdp, FileError> {
    let loaded = load_model(path)?;
    let rewards = loaded
        .rewards
        .ok_or_else(|| invalid(path, "model file has no `rewards`; not an AR-MDP file"))?;
    let multipliers = loaded
        .multipliers
        .unwrap_or_else(|| MultiplierSpec::ones(&loaded.cmp));
    Armdp::new(loaded.cmp, rewards, multipliers).map_err(|e| invalid(path, e.to_string()))
}

pub fn model_file_from_parts(
    cmp: &Cmp,
    rewards: Option<&RewardSpec>,
    multipliers: Option<&MultiplierSpec>,
) -> ModelFile {
    let transitions = cmp
        .legal_transitions()
        .into_iter()
        .map(|t| TransitionEntry {
            from: cmp.state_name(t.from).into(),
            action: cmp.action_name(t.action).into(),
            to: cmp.state_name(t.to).into(),
            prob: cmp.transition_prob(t).unwrap(),
            term: cmp.transition_term(t).unwrap(),
        })
        .collect();
    let valued = |spec: &BTreeMap<Transition, f64>| -> Vec<ValuedTransition> {
        spec.iter()
            .map(|(t, v)| ValuedTransition {
                from: cmp.state_name(t.from).into(),
                action: cmp.action_name(t.action).into(),
                to: cmp.state_name(t.to).into(),
                value: *v,
            })
            .collect()
    };
    ModelFile {
        schema: SCHEMA_VERSION,
        states: cmp.state_names().to_vec(),
        actions: cmp.action_names().to_vec(),
        transitions,
        rewards: rewards.map(|r| valued(&r.iter().collect())),
        multipliers: multipliers.map(|m| valued(&m.iter().collect())),
    }
}

// ---------------------------------------------------------------------------
// trajectory resolution

/// Resolves a name-based trajectory record against a model, checking that
/// every step occurs with positive probability.
pub fn resolve_trajectory(
    cmp: &Cmp,
    rec: &TrajectoryRecord,
) -> Result<Trajectory, String> {
    let start = cmp
        .state_id(&rec.start)
        .ok_or_else(|| format!("unknown state `{}`", rec.start))?;
    let mut transitions = Vec::with_capacity(rec.steps.len());
    let mut cursor = start;
    for step in &rec.steps {
        let action = cmp
            .action_id(&step.action)
            .ok_or_else(|| format!("unknown action `{}`", step.action))?;
        let to = cmp
            .state_id(&step.to)
            .ok_or_else(|| format!("unknown state `{}`", step.to))?;
        let t = Transition::new(cursor, action, to);
        if !cmp.contains_transition(t) {
            return Err(format!(
                "transition {} does not occur with positive probability",
                cmp.describe_transition(t)
            ));
        }
        transitions.push(t);
        cursor = to;
    }
    Ok(Trajectory::new(start, transitions).expect("steps chain by construction"))
}

// ---------------------------------------------------------------------------
// utility table files

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    pub start: String,
    pub steps: Vec<StepRecord>,
    pub utility: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub horizon: usize,
    pub entries: Vec<TableEntry>,
}

pub fn load_table(path: &Path, cmp: &Cmp) -> Result<UtilityTable, FileError> {
    let text = read_file(path)?;
    let file: TableFile = parse(path, &text)?;
    check_schema(path, file.schema)?;
    let mut table = UtilityTable::new(file.horizon);
    for entry in &file.entries {
        let rec = TrajectoryRecord {
            start: entry.start.clone(),
            steps: entry.steps.clone(),
        };
        let trajectory =
            resolve_trajectory(cmp, &rec).map_err(|detail| invalid(path, detail))?;
        table
            .insert(trajectory, entry.utility)
            .map_err(|e| invalid(path, e.to_string()))?;
    }
    Ok(table)
}

pub fn table_file_from(cmp: &Cmp, table: &UtilityTable) -> TableFile {
    TableFile {
        schema: SCHEMA_VERSION,
        horizon: table.horizon(),
        entries: table
            .iter()
            .map(|(t, u)| {
                let rec = TrajectoryRecord::from_trajectory(cmp, t);
                TableEntry {
                    start: rec.start,
                    steps: rec.steps,
                    utility: u,
                }
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// extracted-structure files

/// Canonicalized affine structure, with the extraction report embedded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub rewards: Vec<ValuedTransition>,
    pub multipliers: Vec<ValuedTransition>,
    pub undetermined: Vec<TransitionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ConsistencyReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub rewards: Vec<ValuedTransition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ConsistencyReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub root: String,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ConsistencyReport>,
}

fn valued_from_spec(cmp: &Cmp, iter: impl Iterator<Item = (Transition, f64)>) -> Vec<ValuedTransition> {
    iter.map(|(t, v)| ValuedTransition {
        from: cmp.state_name(t.from).into(),
        action: cmp.action_name(t.action).into(),
        to: cmp.state_name(t.to).into(),
        value: v,
    })
    .collect()
}

pub fn affine_file_from(
    cmp: &Cmp,
    rewards: &RewardSpec,
    multipliers: &MultiplierSpec,
    report: Option<ConsistencyReport>,
) -> AffineFile {
    AffineFile {
        schema: SCHEMA_VERSION,
        rewards: valued_from_spec(cmp, rewards.iter()),
        multipliers: valued_from_spec(cmp, multipliers.iter()),
        undetermined: multipliers
            .undetermined()
            .map(|t| TransitionRecord::from_transition(cmp, t))
            .collect(),
        report,
    }
}

pub fn reward_file_from(
    cmp: &Cmp,
    rewards: &RewardSpec,
    report: Option<ConsistencyReport>,
) -> RewardFile {
    RewardFile {
        schema: SCHEMA_VERSION,
        rewards: valued_from_spec(cmp, rewards.iter()),
        report,
    }
}

pub fn potential_file_from(
    cmp: &Cmp,
    phi: &Potential,
    report: Option<ConsistencyReport>,
) -> PotentialFile {
    PotentialFile {
        schema: SCHEMA_VERSION,
        root: cmp.state_name(phi.root()).into(),
        values: phi
            .iter()
            .map(|(s, v)| (cmp.state_name(s).to_owned(), v))
            .collect(),
        report,
    }
}

pub fn load_affine_spec(
    path: &Path,
    cmp: &Cmp,
) -> Result<(RewardSpec, MultiplierSpec), FileError> {
    let text = read_file(path)?;
    let file: AffineFile = parse(path, &text)?;
    check_schema(path, file.schema)?;
    let rewards_map = resolve_valued(path, cmp, &file.rewards, "reward")?;
    let mut rewards = RewardSpec::new();
    for (t, v) in rewards_map {
        rewards.insert(t, v);
    }
    let mult_map = resolve_valued(path, cmp, &file.multipliers, "multiplier")?;
    let mut multipliers = MultiplierSpec::new();
    for (t, v) in mult_map {
        multipliers.insert(t, v);
    }
    for rec in &file.undetermined {
        let from = cmp
            .state_id(&rec.from)
            .ok_or_else(|| invalid(path, format!("unknown state `{}`", rec.from)))?;
        let action = cmp
            .action_id(&rec.action)
            .ok_or_else(|| invalid(path, format!("unknown action `{}`", rec.action)))?;
        let to = cmp
            .state_id(&rec.to)
            .ok_or_else(|| invalid(path, format!("unknown state `{}`", rec.to)))?;
        multipliers.mark_undetermined(Transition::new(from, action, to));
    }
    Ok((rewards, multipliers))
}

pub fn load_potential(path: &Path, cmp: &Cmp) -> Result<Potential, FileError> {
    let text = read_file(path)?;
    let file: PotentialFile = parse(path, &text)?;
    check_schema(path, file.schema)?;
    let root = cmp
        .state_id(&file.root)
        .ok_or_else(|| invalid(path, format!("unknown state `{}`", file.root)))?;
    let mut values = Vec::new();
    for (name, v) in &file.values {
        let s = cmp
            .state_id(name)
            .ok_or_else(|| invalid(path, format!("unknown state `{name}`")))?;
        values.push((s, *v));
    }
    Ok(Potential::new(root, values))
}

// ---------------------------------------------------------------------------
// policies and solver output

/// A policy entry: a single action name or an action distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyChoice {
    Action(String),
    Distribution(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub policy: BTreeMap<String, PolicyChoice>,
}

pub fn load_policy(path: &Path, cmp: &Cmp) -> Result<MemorylessPolicy, FileError> {
    let text = read_file(path)?;
    let file: PolicyFile = parse(path, &text)?;
    check_schema(path, file.schema)?;
    let mut dists: Vec<(StateId, Vec<(crate::model::ActionId, f64)>)> = Vec::new();
    for (state_name, choice) in &file.policy {
        let s = cmp
            .state_id(state_name)
            .ok_or_else(|| invalid(path, format!("unknown state `{state_name}`")))?;
        let dist = match choice {
            PolicyChoice::Action(name) => {
                let a = cmp
                    .action_id(name)
                    .ok_or_else(|| invalid(path, format!("unknown action `{name}`")))?;
                vec![(a, 1.0)]
            }
            PolicyChoice::Distribution(map) => {
                let mut dist = Vec::new();
                for (name, p) in map {
                    let a = cmp
                        .action_id(name)
                        .ok_or_else(|| invalid(path, format!("unknown action `{name}`")))?;
                    dist.push((a, *p));
                }
                dist
            }
        };
        dists.push((s, dist));
    }
    MemorylessPolicy::from_distributions(cmp, dists).map_err(|e| invalid(path, e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub values: BTreeMap<String, f64>,
    pub policy: BTreeMap<String, String>,
    pub iterations: usize,
    pub beta: f64,
    pub certified_gap: f64,
}

pub fn solution_file_from(cmp: &Cmp, solution: &Solution) -> SolutionFile {
    let values = solution
        .values
        .iter()
        .map(|(s, v)| (cmp.state_name(s).to_owned(), v))
        .collect();
    let policy = cmp
        .state_ids()
        .filter_map(|s| {
            solution
                .policy
                .chosen_action(s)
                .map(|a| (cmp.state_name(s).to_owned(), cmp.action_name(a).to_owned()))
        })
        .collect();
    SolutionFile {
        schema: SCHEMA_VERSION,
        values,
        policy,
        iterations: solution.iterations,
        beta: solution.beta,
        certified_gap: solution.certified_gap,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValuesFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryListFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub trajectories: Vec<TrajectoryRecord>,
}

// ---------------------------------------------------------------------------
// pairwise comparisons

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub left: TrajectoryRecord,
    pub relation: String,
    pub right: TrajectoryRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonsFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub comparisons: Vec<ComparisonEntry>,
}

pub fn load_comparisons(path: &Path, cmp: &Cmp) -> Result<Vec<Comparison>, FileError> {
    let text = read_file(path)?;
    let file: ComparisonsFile = parse(path, &text)?;
    check_schema(path, file.schema)?;
    let mut out = Vec::with_capacity(file.comparisons.len());
    for entry in &file.comparisons {
        let relation = match entry.relation.as_str() {
            ">" => Relation::Strict,
            "~" => Relation::Indifferent,
            other => {
                return Err(invalid(
                    path,
                    format!("relation must be \">\" or \"~\", got `{other}`"),
                ))
            }
        };
        let left =
            resolve_trajectory(cmp, &entry.left).map_err(|d| invalid(path, d))?;
        let right =
            resolve_trajectory(cmp, &entry.right).map_err(|d| invalid(path, d))?;
        out.push(Comparison {
            left,
            relation,
            right,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// report files

/// The on-disk shape of a consistency report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    #[serde(flatten)]
    pub report: ConsistencyReport,
}

impl ReportFile {
    pub fn new(report: ConsistencyReport) -> Self {
        ReportFile {
            schema: SCHEMA_VERSION,
            report,
        }
    }
}

/// The on-disk shape of a validation report. Warnings (dead ends, extreme
/// utilities) do not make the status violated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationFile {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub check: String,
    pub status: CheckStatus,
    pub witnesses: Vec<ValidationIssue>,
    pub warnings: Vec<ValidationIssue>,
    pub undetermined: Vec<TransitionRecord>,
    pub tolerance: f64,
    pub scale: f64,
}

impl ValidationFile {
    pub fn new(report: &ValidationReport) -> Self {
        ValidationFile {
            schema: SCHEMA_VERSION,
            check: "validate".into(),
            status: if report.violated() {
                CheckStatus::Violated
            } else {
                CheckStatus::Consistent
            },
            witnesses: report.errors.clone(),
            warnings: report.warnings.clone(),
            undetermined: Vec::new(),
            tolerance: PROB_SUM_TOL,
            scale: 1.0,
        }
    }
}

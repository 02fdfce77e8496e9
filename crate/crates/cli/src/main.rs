//! `armdp`: batch analyses over controlled Markov processes and utility
//! tables — validation, axiom checks, structure extraction, partial-table
//! completion, planning, policy evaluation, and simulation.
//!
//! Every command reads JSON files, writes one JSON artifact to `--out` (or
//! stdout), and exits 0 on success/consistent, 2 when a check found a
//! violation, and 1 on usage or input errors. Identical inputs produce
//! byte-identical output.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use armdp::{
    check_additivity, check_memorylessness, check_ordinal, check_path_obliviousness,
    complete_partial, discount_to_termination, extract_affine, extract_potential,
    finite_horizon_plan, io, policy_value, sample_trajectory, value_iteration, Armdp, Cmp,
    CompletionOutcome, ConsistencyReport, MemorylessPolicy, StateId, TrajectoryRecord,
    UtilityTable, DEFAULT_REL_TOL,
};

#[derive(Parser)]
#[command(name = "armdp", version, about = "Utility-structure analysis and planning for controlled Markov processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    /// Affine consistency with positive multipliers.
    Memoryless,
    /// Memoryless plus unit multipliers and the exchange identity.
    Additive,
    /// Additive plus potential (cycle) consistency; needs --root.
    PathOblivious,
    /// Total-preorder necessary conditions on raw pairwise comparisons.
    Ordinal,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    /// Rewards and multipliers (canonicalized).
    Affine,
    /// Rewards only, assuming additivity.
    Reward,
    /// A per-state potential; needs --root.
    Potential,
}

#[derive(Subcommand)]
enum Command {
    /// Check model invariants (and table structure, when given).
    Validate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an axiom level against a utility table (or comparisons file).
    CheckAxioms {
        #[arg(long)]
        input: PathBuf,
        /// Utility table, or a comparisons file for --level ordinal.
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum)]
        level: Level,
        /// Root state for reachability (path-oblivious level only).
        #[arg(long)]
        root: Option<String>,
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract canonicalized structure from a table or an AR-MDP file.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long)]
        root: Option<String>,
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Complete a table known only on trajectories from a root state.
    Complete {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        root: String,
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an AR-MDP for an optimal memoryless policy.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Exact backward induction for this horizon instead of the
        /// contraction-based infinite-horizon solve.
        #[arg(long)]
        horizon: Option<usize>,
        /// Simulate a discount factor by raising termination probabilities
        /// before solving.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a memoryless policy on an AR-MDP.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample one episode under a policy (uniform over legal actions when
    /// no policy file is given).
    Simulate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        root: String,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Outcome {
    Clean,
    Violated,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Violated) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn emit<T: serde::Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    match out {
        Some(path) => io::write_json(path, value)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", io::to_json_string(value)),
    }
    Ok(())
}

fn resolve_state(cmp: &Cmp, name: &str) -> Result<StateId> {
    cmp.state_id(name)
        .ok_or_else(|| anyhow!("unknown state `{name}`"))
}

fn load_table(path: &Path, cmp: &Cmp) -> Result<UtilityTable> {
    Ok(io::load_table(path, cmp)?)
}

fn report_outcome(report: &ConsistencyReport) -> Outcome {
    if report.is_consistent() {
        Outcome::Clean
    } else {
        Outcome::Violated
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Validate { input, table, out } => {
            let loaded = io::load_model(&input)?;
            let mut report = loaded.cmp.validate();
            if let Some(table_path) = table {
                let table = load_table(&table_path, &loaded.cmp)?;
                report.merge(table.validate(&loaded.cmp));
            }
            let file = io::ValidationFile::new(&report);
            emit(&out, &file)?;
            Ok(if report.violated() {
                Outcome::Violated
            } else {
                Outcome::Clean
            })
        }

        Command::CheckAxioms {
            input,
            table,
            level,
            root,
            tol,
            out,
        } => {
            let cmp = io::load_cmp(&input)?;
            if level == Level::Ordinal {
                let comparisons = io::load_comparisons(&table, &cmp)?;
                let report = check_ordinal(&cmp, &comparisons);
                emit(&out, &io::ReportFile::new(report.clone()))?;
                return Ok(report_outcome(&report));
            }
            let table = load_table(&table, &cmp)?;
            // stronger levels run the weaker checks first and report the
            // first violation at its own level
            let mut report = check_memorylessness(&cmp, &table, tol)?;
            if report.is_consistent() && level != Level::Memoryless {
                report = check_additivity(&cmp, &table, tol)?;
            }
            if report.is_consistent() && level == Level::PathOblivious {
                let root = root.ok_or_else(|| anyhow!("--level path-oblivious needs --root"))?;
                let root = resolve_state(&cmp, &root)?;
                report = check_path_obliviousness(&cmp, &table, root, tol)?;
            }
            emit(&out, &io::ReportFile::new(report.clone()))?;
            Ok(report_outcome(&report))
        }

        Command::Extract {
            input,
            table,
            target,
            root,
            tol,
            out,
        } => {
            let loaded = io::load_model(&input)?;
            let cmp = &loaded.cmp;
            match target {
                Target::Affine => {
                    let table_path = table.ok_or_else(|| anyhow!("--target affine needs --table"))?;
                    let table = load_table(&table_path, cmp)?;
                    let ext = extract_affine(cmp, &table, tol)?;
                    let (rewards, multipliers, _) =
                        armdp::canonicalize(&ext.rewards, Some(&ext.multipliers), None);
                    let file = io::affine_file_from(
                        cmp,
                        &rewards,
                        &multipliers.expect("passed in"),
                        Some(ext.report.clone()),
                    );
                    emit(&out, &file)?;
                    Ok(report_outcome(&ext.report))
                }
                Target::Reward => {
                    let table_path = table.ok_or_else(|| anyhow!("--target reward needs --table"))?;
                    let table = load_table(&table_path, cmp)?;
                    let report = check_additivity(cmp, &table, tol)?;
                    let ext = extract_affine(cmp, &table, tol)?;
                    let (rewards, _, _) = armdp::canonicalize(&ext.rewards, None, None);
                    let file = io::reward_file_from(cmp, &rewards, Some(report.clone()));
                    emit(&out, &file)?;
                    Ok(report_outcome(&report))
                }
                Target::Potential => {
                    let root = root.ok_or_else(|| anyhow!("--target potential needs --root"))?;
                    let root = resolve_state(cmp, &root)?;
                    let rewards = match (&table, &loaded.rewards) {
                        (Some(table_path), _) => {
                            let table = load_table(table_path, cmp)?;
                            extract_affine(cmp, &table, tol)?.rewards
                        }
                        (None, Some(rewards)) => rewards.clone(),
                        (None, None) => {
                            bail!("--target potential needs --table or rewards in the model file")
                        }
                    };
                    // the extracted potential is already root-anchored at 0;
                    // joint scaling only applies when rewards ship alongside
                    let (phi, report) = extract_potential(cmp, &rewards, root, tol)?;
                    let file = io::potential_file_from(cmp, &phi, Some(report.clone()));
                    emit(&out, &file)?;
                    Ok(report_outcome(&report))
                }
            }
        }

        Command::Complete {
            input,
            table,
            root,
            tol,
            out,
        } => {
            let cmp = io::load_cmp(&input)?;
            let root = resolve_state(&cmp, &root)?;
            let partial = load_table(&table, &cmp)?;
            match complete_partial(&cmp, &partial, root, tol)? {
                CompletionOutcome::Completed(full) => {
                    emit(&out, &io::table_file_from(&cmp, &full))?;
                    Ok(Outcome::Clean)
                }
                CompletionOutcome::Violated(report) => {
                    emit(&out, &io::ReportFile::new(report))?;
                    Ok(Outcome::Violated)
                }
            }
        }

        Command::Solve {
            input,
            tol,
            horizon,
            gamma,
            max_iter,
            out,
        } => {
            let armdp = if let Some(gamma) = gamma {
                let loaded = io::load_model(&input)?;
                let rewards = loaded
                    .rewards
                    .ok_or_else(|| anyhow!("model file has no `rewards`; not an AR-MDP file"))?;
                let multipliers = loaded
                    .multipliers
                    .unwrap_or_else(|| armdp::MultiplierSpec::ones(&loaded.cmp));
                let discounted = discount_to_termination(&loaded.cmp, gamma)?;
                Armdp::new(discounted, rewards, multipliers)?
            } else {
                io::load_armdp(&input)?
            };
            let solution = match horizon {
                Some(h) => finite_horizon_plan(&armdp, h),
                None => value_iteration(&armdp, tol, max_iter)?,
            };
            emit(&out, &io::solution_file_from(armdp.cmp(), &solution))?;
            Ok(Outcome::Clean)
        }

        Command::Eval {
            input,
            policy,
            tol,
            out,
        } => {
            let armdp = io::load_armdp(&input)?;
            let policy = io::load_policy(&policy, armdp.cmp())?;
            let values = policy_value(&armdp, &policy, tol)?;
            let file = io::ValuesFile {
                schema: io::SCHEMA_VERSION,
                values: values
                    .iter()
                    .map(|(s, v)| (armdp.cmp().state_name(s).to_owned(), v))
                    .collect(),
            };
            emit(&out, &file)?;
            Ok(Outcome::Clean)
        }

        Command::Simulate {
            input,
            policy,
            root,
            horizon,
            seed,
            out,
        } => {
            let cmp = io::load_cmp(&input)?;
            let root = resolve_state(&cmp, &root)?;
            let policy = match policy {
                Some(path) => {
                    let p = io::load_policy(&path, &cmp)?;
                    p.validate_for(&cmp)?;
                    p
                }
                None => MemorylessPolicy::uniform(&cmp),
            };
            let trajectory = sample_trajectory(&cmp, root, &policy, seed, horizon)?;
            let file = io::TrajectoryListFile {
                schema: io::SCHEMA_VERSION,
                trajectories: vec![TrajectoryRecord::from_trajectory(&cmp, &trajectory)],
            };
            emit(&out, &file)?;
            Ok(Outcome::Clean)
        }
    }
}

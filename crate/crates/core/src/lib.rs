//! Utility structures for sequential decision making over controlled Markov
//! processes.
//!
//! The toolkit has four layers:
//!
//! - [`model`]: the world model ([`Cmp`]) with its trajectory and lottery
//!   algebra — enumeration, concatenation, flattening, sampling.
//! - [`returns`]: numeric utility structures ([`UtilityTable`],
//!   [`RewardSpec`], [`MultiplierSpec`], [`Potential`]) and the return
//!   evaluators for the affine, additive, and potential-difference forms.
//! - [`represent`]: extraction of those structures from utility tables and
//!   finite consistency checks for the memorylessness, additivity, and
//!   path-obliviousness axioms, plus partial-preference completion.
//! - [`planning`]: contraction-based value iteration for affine-reward
//!   MDPs, exact finite-horizon induction, policy evaluation, a brute-force
//!   history-tree oracle, and discount-to-termination conversion.
//!
//! File formats and reports live in [`io`] and [`report`]; [`sample`] has
//! ready-made fixtures and seeded generators.

pub mod io;
pub mod model;
pub mod planning;
pub mod report;
pub mod represent;
pub mod returns;
pub mod sample;

pub use model::{
    enumerate_trajectories, sample_trajectory, ActionId, Cmp, CmpBuilder, Edge, Lottery,
    LotteryItem, ModelError, StateId, Trajectory, Transition,
};
pub use planning::{
    action_values, brute_force_optimal, contraction_factor, discount_to_termination,
    finite_horizon_plan, policy_value, value_iteration, Armdp, HistoryNode, HistoryPlan,
    MemorylessPolicy, PlanError, Solution, ValueFunction, HISTORY_BUDGET,
};
pub use report::{
    CheckKind, CheckStatus, ConsistencyReport, StepRecord, TrajectoryRecord, TransitionRecord,
    ValidationIssue, ValidationReport, Witness,
};
pub use represent::{
    canonicalize, check_additivity, check_dominance, check_memorylessness, check_ordinal,
    check_path_obliviousness, complete_partial, extract_affine, extract_potential,
    AffineExtraction, Comparison, CompletionOutcome, ExtractError, Relation,
};
pub use returns::{
    additive_return, ar_return, lottery_utility, potential_return, table_from_armdp,
    trajectory_multiplier, MultiplierSpec, Potential, RewardSpec, TableError, UtilityTable,
};

/// Tolerance for probability simplex sums in models, lotteries, and
/// policies.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Default relative tolerance for consistency residuals; checks compare
/// residuals against `rel_tol · max(1, max |u|)`.
pub const DEFAULT_REL_TOL: f64 = 1e-9;

/// Absolute utility gap above which one item counts as strictly preferred;
/// smaller gaps are indifference. Finite-precision tables cannot express
/// exact indifference.
pub const STRICT_PREFERENCE_EPS: f64 = 1e-9;

/// Utility magnitude past which tables are flagged: ordinal distinctions at
/// the strictness threshold are no longer trustworthy in double precision.
pub const EXTREME_UTILITY_LIMIT: f64 = 1e12;

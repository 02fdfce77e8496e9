//! Shared instance builders for the benchmark targets.

use armdp::{sample, Armdp, Cmp, MultiplierSpec, RewardSpec, UtilityTable};

/// A mid-size contractive AR-MDP: 20 states, 4 actions, dense legality.
pub fn solver_instance() -> Armdp {
    let mut rng = sample::rng(2024);
    let cfg = sample::GenConfig {
        min_states: 20,
        max_states: 20,
        min_actions: 4,
        max_actions: 4,
        legality: 0.9,
        max_support: 3,
        term_range: (0.1, 0.6),
        reward_range: (-5.0, 5.0),
        multiplier_range: (0.2, 1.2),
    };
    let (cmp, r, m) = sample::random_armdp_parts(&mut rng, &cfg);
    Armdp::new(cmp, r, m).expect("generated instance is well-formed")
}

/// A small low-branching instance for the exhaustive history-tree planner.
pub fn history_instance() -> Armdp {
    let mut rng = sample::rng(7);
    let (cmp, r, m) = sample::random_low_branching_armdp(&mut rng, 0.35);
    Armdp::new(cmp, r, m).expect("generated instance is well-formed")
}

/// A horizon-4 table over a 6-state model, plus its ground truth.
pub fn extraction_instance() -> (Cmp, RewardSpec, MultiplierSpec, UtilityTable) {
    let mut rng = sample::rng(99);
    let cfg = sample::GenConfig {
        min_states: 6,
        max_states: 6,
        min_actions: 3,
        max_actions: 3,
        ..Default::default()
    };
    let (cmp, r, m) = sample::random_armdp_parts(&mut rng, &cfg);
    let table = armdp::table_from_armdp(&cmp, &r, &m, 4).expect("total structure");
    (cmp, r, m, table)
}

//! Ready-made models and random instance generators.
//!
//! Small named fixtures used throughout the documentation and test suites,
//! plus seeded generators for property-style checks and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Cmp, Trajectory, Transition};
use crate::returns::{MultiplierSpec, RewardSpec};

/// A deterministic RNG for reproducible instance generation.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The six-state diamond: `s0` branches to `s1h` or `s1`, both rejoin at
/// `s2`, which branches to the terminal states `s3h` or `s3`. One action,
/// uniform branch probabilities, termination 1 on the final edges.
pub fn running_example() -> Cmp {
    Cmp::builder()
        .states(["s0", "s1h", "s1", "s2", "s3h", "s3"])
        .actions(["go"])
        .transition("s0", "go", "s1h", 0.5, 0.0)
        .transition("s0", "go", "s1", 0.5, 0.0)
        .transition("s1h", "go", "s2", 1.0, 0.0)
        .transition("s1", "go", "s2", 1.0, 0.0)
        .transition("s2", "go", "s3h", 0.5, 1.0)
        .transition("s2", "go", "s3", 0.5, 1.0)
        .build()
        .expect("static model")
}

/// A deterministic chain through `names` with a single action `go`.
pub fn chain(names: &[&str]) -> Cmp {
    let mut b = Cmp::builder().states(names.iter().copied()).actions(["go"]);
    for pair in names.windows(2) {
        b = b.transition(pair[0], "go", pair[1], 1.0, 0.0);
    }
    b.build().expect("static model")
}

/// The deterministic 3-cycle `A -> B -> C -> A` with a single action `go`.
pub fn triangle() -> Cmp {
    Cmp::builder()
        .states(["A", "B", "C"])
        .actions(["go"])
        .transition("A", "go", "B", 1.0, 0.0)
        .transition("B", "go", "C", 1.0, 0.0)
        .transition("C", "go", "A", 1.0, 0.0)
        .build()
        .expect("static model")
}

/// Builds the trajectory visiting `states` in order via `action`.
///
/// Panics on unknown names; fixtures are expected to be well-formed.
pub fn state_path(cmp: &Cmp, action: &str, states: &[&str]) -> Trajectory {
    let a = cmp
        .action_id(action)
        .unwrap_or_else(|| panic!("unknown action {action}"));
    let ids: Vec<_> = states
        .iter()
        .map(|s| {
            cmp.state_id(s)
                .unwrap_or_else(|| panic!("unknown state {s}"))
        })
        .collect();
    let transitions = ids
        .windows(2)
        .map(|w| Transition::new(w[0], a, w[1]))
        .collect();
    Trajectory::new(ids[0], transitions).expect("consecutive states are adjacent")
}

/// Shape parameters for [`random_cmp`] and [`random_armdp_parts`].
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub min_states: usize,
    pub max_states: usize,
    pub min_actions: usize,
    pub max_actions: usize,
    /// Probability that a given (state, action) pair is legal.
    pub legality: f64,
    /// Maximum support size of a transition distribution.
    pub max_support: usize,
    pub term_range: (f64, f64),
    pub reward_range: (f64, f64),
    pub multiplier_range: (f64, f64),
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            min_states: 2,
            max_states: 6,
            min_actions: 1,
            max_actions: 3,
            legality: 0.7,
            max_support: 2,
            term_range: (0.0, 0.9),
            reward_range: (-5.0, 5.0),
            multiplier_range: (0.2, 3.0),
        }
    }
}

fn uniform(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    rng.random_range(range.0..=range.1)
}

/// A random model drawn from `cfg`. Distributions are normalized exactly;
/// the model always has at least one legal transition.
pub fn random_cmp(rng: &mut impl Rng, cfg: &GenConfig) -> Cmp {
    let n = rng.random_range(cfg.min_states..=cfg.max_states);
    let k = rng.random_range(cfg.min_actions..=cfg.max_actions);
    let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let actions: Vec<String> = (0..k).map(|i| format!("a{i}")).collect();

    let mut records: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
    for s in 0..n {
        for a in 0..k {
            if !rng.random_bool(cfg.legality) {
                continue;
            }
            let support = rng.random_range(1..=cfg.max_support.min(n));
            let mut targets: Vec<usize> = Vec::new();
            while targets.len() < support {
                let t = rng.random_range(0..n);
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            let mut probs: Vec<f64> = (0..support).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = probs.iter().sum();
            for p in &mut probs {
                *p /= total;
            }
            // pin the last component so the simplex sum is exactly 1
            let head: f64 = probs[..support - 1].iter().sum();
            probs[support - 1] = 1.0 - head;
            for (t, p) in targets.into_iter().zip(probs) {
                records.push((s, a, t, p, uniform(rng, cfg.term_range)));
            }
        }
    }
    if records.is_empty() {
        records.push((0, 0, 0, 1.0, uniform(rng, cfg.term_range)));
    }

    let mut b = Cmp::builder().states(states.clone()).actions(actions.clone());
    for (s, a, t, p, term) in records {
        b = b.transition(&states[s], &actions[a], &states[t], p, term);
    }
    b.build().expect("generated identifiers are consistent")
}

pub fn random_rewards(rng: &mut impl Rng, cmp: &Cmp, range: (f64, f64)) -> RewardSpec {
    RewardSpec::from_fn(cmp, |_| uniform(rng, range))
}

pub fn random_multipliers(rng: &mut impl Rng, cmp: &Cmp, range: (f64, f64)) -> MultiplierSpec {
    MultiplierSpec::from_fn(cmp, |_| uniform(rng, range))
}

/// A random model with total random rewards and multipliers.
pub fn random_armdp_parts(
    rng: &mut impl Rng,
    cfg: &GenConfig,
) -> (Cmp, RewardSpec, MultiplierSpec) {
    let cmp = random_cmp(rng, cfg);
    let rewards = random_rewards(rng, &cmp, cfg.reward_range);
    let multipliers = random_multipliers(rng, &cmp, cfg.multiplier_range);
    (cmp, rewards, multipliers)
}

/// A random strongly connected deterministic model: a ring under action
/// `a0` plus random extra deterministic actions.
pub fn random_strongly_connected(rng: &mut impl Rng, max_states: usize) -> Cmp {
    let n = rng.random_range(3..=max_states.max(3));
    let extra = rng.random_range(1..=2usize);
    let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let actions: Vec<String> = (0..=extra).map(|i| format!("a{i}")).collect();
    let mut b = Cmp::builder().states(states.clone()).actions(actions.clone());
    for s in 0..n {
        b = b.transition(&states[s], &actions[0], &states[(s + 1) % n], 1.0, 0.0);
    }
    for s in 0..n {
        for a in 1..=extra {
            if rng.random_bool(0.6) {
                let t = rng.random_range(0..n);
                b = b.transition(&states[s], &actions[a], &states[t], 1.0, 0.0);
            }
        }
    }
    b.build().expect("generated identifiers are consistent")
}

/// A random instance with per-state branching at most 2 and contraction
/// factor rescaled to exactly `beta_target`, suitable for exhaustive
/// history-tree planning at double-digit horizons.
pub fn random_low_branching_armdp(
    rng: &mut impl Rng,
    beta_target: f64,
) -> (Cmp, RewardSpec, MultiplierSpec) {
    let n = rng.random_range(2..=4usize);
    let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let actions = ["a0".to_string(), "a1".to_string()];
    let mut b = Cmp::builder().states(states.clone()).actions(actions.clone());
    for s in 0..n {
        if rng.random_bool(0.5) {
            // two deterministic actions
            for a in 0..2 {
                let t = rng.random_range(0..n);
                let term = rng.random_range(0.3..0.8);
                b = b.transition(&states[s], &actions[a], &states[t], 1.0, term);
            }
        } else {
            // one action with a two-state support
            let t1 = rng.random_range(0..n);
            let mut t2 = rng.random_range(0..n);
            while t2 == t1 {
                t2 = rng.random_range(0..n);
            }
            let p = rng.random_range(0.2..0.8);
            let term1 = rng.random_range(0.3..0.8);
            let term2 = rng.random_range(0.3..0.8);
            b = b.transition(&states[s], &actions[0], &states[t1], p, term1);
            b = b.transition(&states[s], &actions[0], &states[t2], 1.0 - p, term2);
        }
    }
    let cmp = b.build().expect("generated identifiers are consistent");
    let rewards = random_rewards(rng, &cmp, (-2.0, 2.0));
    let mut multipliers = random_multipliers(rng, &cmp, (0.2, 1.5));
    let beta_raw = cmp
        .legal_transitions()
        .iter()
        .map(|t| multipliers.get(*t).unwrap() * (1.0 - cmp.transition_term(*t).unwrap()))
        .fold(0.0f64, f64::max);
    let scale = beta_target / beta_raw;
    multipliers = MultiplierSpec::from_fn(&cmp, |t| multipliers.get(t).unwrap() * scale);
    (cmp, rewards, multipliers)
}

//! Environments used by the experiments and test suites.
//!
//! * [`build_counterexample`]: a four-state chain with a near goal and a far
//!   goal, engineered so that multi-step evaluation applied to the raw value
//!   estimate (instead of the backed-up one) achieves error ratio exactly
//!   `gamma^m + gamma^h` (m-step) or
//!   `gamma^h + gamma (1 - lambda) / (1 - gamma lambda)` (lambda-weighted),
//!   i.e. the worst case the non-contracting schemes allow.
//! * [`build_gridworld`]: a deterministic N x N room with a single rewarding
//!   goal state and small uniform background rewards, the workhorse of the
//!   query-budget sweeps.
//! * [`random_mdp`]: dense random instances for property tests.
//! * [`initial_value`]: seeded standard-normal starting values.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Mdp, MdpError, Policy, ValueFunction};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

// ── Worst-case chain ────────────────────────────────────────────────────────

/// Action indices of the chain MDP.
pub const CX_RIGHT: usize = 0;
pub const CX_UP: usize = 1;
pub const CX_STAY: usize = 2;

/// Parameters of the worst-case chain. The lookahead depth `h` is baked
/// into the reward of the start state's `right` action.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    pub gamma: f64,
    pub h: usize,
}

/// Builds the four-state chain together with the value vector and lookahead
/// policy that realize the worst-case ratios.
///
/// Layout (states 0..3):
///
/// ```text
///   0 --right, r=(1-g^h)/(1-g)--> 1 --right, r=0--> 2 (stay, r=0)
///   |                             |
///   up, r=1                       stay, r=0 (self-loop)
///   v
///   3 (stay, r=1)
/// ```
///
/// The returned value vector is zero except `v(1) = -1/(1-gamma)`, and the
/// returned policy moves right at the start then stays put, which ties with
/// the up move under h-step lookahead and keeps the trap state's poor value
/// in play. Actions missing from a state are padded with self-loops whose
/// reward `-10/(1-gamma)` sits far below every reachable return, so no
/// greedy step under the values arising here ever selects them; a unit test
/// pins that down.
pub fn build_counterexample(
    spec: &CounterexampleSpec,
) -> Result<(Mdp, ValueFunction, Policy), EnvError> {
    if !(spec.gamma > 0.0 && spec.gamma < 1.0) {
        return Err(EnvError::BadSpec(format!("gamma = {} not in (0, 1)", spec.gamma)));
    }
    if spec.h < 2 {
        return Err(EnvError::BadSpec(format!(
            "chain needs lookahead h >= 2, got {}",
            spec.h
        )));
    }
    let gamma = spec.gamma;
    let near_goal_reward = (1.0 - gamma.powi(spec.h as i32)) / (1.0 - gamma);

    // (state, action, next_state, reward) for the real edges; everything
    // else is a padded self-loop.
    let edges = [
        (0, CX_RIGHT, 1, near_goal_reward),
        (0, CX_UP, 3, 1.0),
        (1, CX_RIGHT, 2, 0.0),
        (1, CX_STAY, 1, 0.0),
        (2, CX_STAY, 2, 0.0),
        (3, CX_STAY, 3, 1.0),
    ];
    let real_r_min = edges.iter().map(|e| e.3).fold(f64::INFINITY, f64::min);
    let pad_reward = real_r_min - 10.0 / (1.0 - gamma);

    let mut transitions = Array3::zeros((4, 3, 4));
    let mut rewards = Array2::from_elem((4, 3), pad_reward);
    for s in 0..4 {
        for a in 0..3 {
            transitions[[s, a, s]] = 1.0; // padded self-loop by default
        }
    }
    for (s, a, next, reward) in edges {
        transitions[[s, a, s]] = 0.0;
        transitions[[s, a, next]] = 1.0;
        rewards[[s, a]] = reward;
    }

    let mdp = Mdp::new(transitions, rewards, gamma)?;
    let v = ValueFunction::from_vec(vec![0.0, -1.0 / (1.0 - gamma), 0.0, 0.0])
        .expect("finite chain values");
    let pi = Policy::new(vec![CX_RIGHT, CX_STAY, CX_STAY, CX_STAY]);
    Ok((mdp, v, pi))
}

/// The actions actually available in the chain MDP, per state. Useful for
/// asserting that padded actions are never selected.
pub fn counterexample_real_actions() -> [Vec<usize>; 4] {
    [
        vec![CX_RIGHT, CX_UP],
        vec![CX_RIGHT, CX_STAY],
        vec![CX_STAY],
        vec![CX_STAY],
    ]
}

// ── Grid world ──────────────────────────────────────────────────────────────

/// Action indices of the grid world.
pub const GRID_UP: usize = 0;
pub const GRID_DOWN: usize = 1;
pub const GRID_RIGHT: usize = 2;
pub const GRID_LEFT: usize = 3;
pub const GRID_STAY: usize = 4;

/// Parameters of the deterministic N x N grid room.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridWorldSpec {
    /// Side length; the MDP has `n * n` states.
    pub n: usize,
    pub gamma: f64,
    /// Reward of the goal state (placed uniformly at random by `rng_seed`).
    pub goal_reward: f64,
    /// Background state rewards are drawn uniformly from this range.
    pub noise_reward_range: (f64, f64),
    pub rng_seed: u64,
}

impl Default for GridWorldSpec {
    fn default() -> Self {
        GridWorldSpec {
            n: 10,
            gamma: 0.97,
            goal_reward: 1.0,
            noise_reward_range: (-0.1, 0.1),
            rng_seed: 0,
        }
    }
}

/// Builds the grid room. Moves that would leave the grid stay in place, the
/// reward depends on the state only (every action from a state pays the
/// same), and there is no terminal state. The declared reward bounds come
/// from the construction (`noise_reward_range` joined with `goal_reward`)
/// rather than the realized samples.
pub fn build_gridworld(spec: &GridWorldSpec) -> Result<Mdp, EnvError> {
    if spec.n < 2 {
        return Err(EnvError::BadSpec(format!("grid side {} too small", spec.n)));
    }
    if !(spec.gamma > 0.0 && spec.gamma < 1.0) {
        return Err(EnvError::BadSpec(format!("gamma = {} not in (0, 1)", spec.gamma)));
    }
    let (lo, hi) = spec.noise_reward_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(EnvError::BadSpec(format!("bad reward range [{lo}, {hi}]")));
    }
    if !spec.goal_reward.is_finite() {
        return Err(EnvError::BadSpec("goal reward must be finite".into()));
    }

    let n = spec.n;
    let n_states = n * n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let goal = rng.gen_range(0..n_states);
    let mut state_rewards: Vec<f64> = (0..n_states).map(|_| rng.gen_range(lo..=hi)).collect();
    state_rewards[goal] = spec.goal_reward;

    let mut transitions = Array3::zeros((n_states, 5, n_states));
    let mut rewards = Array2::zeros((n_states, 5));
    for row in 0..n {
        for col in 0..n {
            let s = row * n + col;
            let dest = |r: usize, c: usize| r * n + c;
            let next = [
                dest(row.saturating_sub(1), col),                // up
                dest((row + 1).min(n - 1), col),                 // down
                dest(row, (col + 1).min(n - 1)),                 // right
                dest(row, col.saturating_sub(1)),                // left
                s,                                               // stay
            ];
            for (a, &s2) in next.iter().enumerate() {
                transitions[[s, a, s2]] = 1.0;
                rewards[[s, a]] = state_rewards[s];
            }
        }
    }

    Ok(Mdp::with_bounds(
        transitions,
        rewards,
        spec.gamma,
        lo.min(spec.goal_reward),
        hi.max(spec.goal_reward),
    )?)
}

/// The goal state a given spec produces (first seeded draw), exposed so
/// tests and experiment summaries can refer to it without re-deriving the
/// sampling order.
pub fn gridworld_goal(spec: &GridWorldSpec) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    rng.gen_range(0..spec.n * spec.n)
}

// ── Random dense instances ──────────────────────────────────────────────────

/// Parameters for dense random test instances.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub rng_seed: u64,
}

/// A dense random MDP: every transition row is a normalized vector of
/// uniform draws bounded away from zero, rewards are uniform on `[0, 1]`.
pub fn random_mdp(spec: &RandomMdpSpec) -> Mdp {
    assert!(spec.n_states >= 1 && spec.n_actions >= 1, "need at least one state and action");
    assert!(spec.gamma > 0.0 && spec.gamma < 1.0, "gamma must be in (0, 1)");
    let n = spec.n_states;
    let a = spec.n_actions;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut transitions = Array3::zeros((n, a, n));
    let mut rewards = Array2::zeros((n, a));
    for s in 0..n {
        for act in 0..a {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.05)).collect();
            let total: f64 = raw.iter().sum();
            for (s2, x) in raw.iter().enumerate() {
                transitions[[s, act, s2]] = x / total;
            }
            rewards[[s, act]] = rng.gen_range(0.0..1.0);
        }
    }
    Mdp::new(transitions, rewards, spec.gamma).expect("random construction is valid")
}

/// A seeded standard-normal starting value vector.
pub fn initial_value(n_states: usize, rng_seed: u64) -> ValueFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    ValueFunction::from_vec((0..n_states).map(|_| rng.sample(StandardNormal)).collect())
        .expect("normal draws are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{greedy_policy, lambda_return, m_return, LambdaParams};
    use crate::lookahead::tree_backup;
    use crate::mdp::optimal_value;

    #[test]
    fn chain_rejects_shallow_lookahead() {
        assert!(build_counterexample(&CounterexampleSpec { gamma: 0.9, h: 1 }).is_err());
        assert!(build_counterexample(&CounterexampleSpec { gamma: 1.0, h: 2 }).is_err());
    }

    #[test]
    fn chain_baseline_distance_is_one_over_one_minus_gamma() {
        let (mdp, v, _) = build_counterexample(&CounterexampleSpec { gamma: 0.9, h: 2 }).unwrap();
        let (v_star, _) = optimal_value(&mdp);
        assert!((v_star.max_norm_dist(&v) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn chain_m_step_ratio_attains_its_bound() {
        for (gamma, h, m) in [(0.9, 2, 1), (0.9, 3, 2), (0.97, 5, 10)] {
            let spec = CounterexampleSpec { gamma, h };
            let (mdp, v, pi) = build_counterexample(&spec).unwrap();
            let (v_star, _) = optimal_value(&mdp);
            // The non-contracting route evaluates the raw v, not the
            // backed-up value, which is exactly what this instance punishes.
            let evaluated = m_return(&mdp, &pi, &v, m);
            let ratio = v_star.max_norm_dist(&evaluated) / v_star.max_norm_dist(&v);
            let bound = gamma.powi(m as i32) + gamma.powi(h as i32);
            assert!((ratio - bound).abs() < 1e-10, "gamma={gamma} h={h} m={m}: {ratio} vs {bound}");
        }
    }

    #[test]
    fn chain_lambda_ratio_attains_its_bound() {
        for (gamma, h, lambda) in [(0.9, 2, 0.5), (0.97, 3, 0.7), (0.99, 5, 0.95)] {
            let spec = CounterexampleSpec { gamma, h };
            let (mdp, v, pi) = build_counterexample(&spec).unwrap();
            let (v_star, _) = optimal_value(&mdp);
            let lp = LambdaParams::new(lambda).unwrap();
            let evaluated = lambda_return(&mdp, &pi, &v, &lp).unwrap();
            let ratio = v_star.max_norm_dist(&evaluated) / v_star.max_norm_dist(&v);
            let bound = gamma.powi(h as i32)
                + gamma * (1.0 - lambda) / (1.0 - gamma * lambda);
            assert!(
                (ratio - bound).abs() < 1e-10,
                "gamma={gamma} h={h} lambda={lambda}: {ratio} vs {bound}"
            );
        }
    }

    #[test]
    fn chain_padding_is_never_selected() {
        let (mdp, v, _) = build_counterexample(&CounterexampleSpec { gamma: 0.9, h: 3 }).unwrap();
        let (v_star, _) = optimal_value(&mdp);
        let real = counterexample_real_actions();
        let mut candidates = vec![greedy_policy(&mdp, &v), greedy_policy(&mdp, &v_star)];
        for h in 1..=4 {
            candidates.push(tree_backup(&mdp, &v, h).policy);
            candidates.push(tree_backup(&mdp, &v_star, h).policy);
        }
        let pessimistic = ValueFunction::constant(4, mdp.r_min() / (1.0 - mdp.gamma()));
        candidates.push(greedy_policy(&mdp, &pessimistic));
        for pi in candidates {
            for (s, allowed) in real.iter().enumerate() {
                assert!(
                    allowed.contains(&pi.action(s)),
                    "padded action {} selected at state {s}",
                    pi.action(s)
                );
            }
        }
    }

    #[test]
    fn grid_transitions_clamp_at_walls() {
        let spec = GridWorldSpec { n: 2, rng_seed: 1, ..GridWorldSpec::default() };
        let mdp = build_gridworld(&spec).unwrap();
        // State 0 is the top-left corner: up and left stay, down goes to
        // (1,0) = state 2, right goes to (0,1) = state 1.
        assert_eq!(mdp.transitions()[[0, GRID_UP, 0]], 1.0);
        assert_eq!(mdp.transitions()[[0, GRID_LEFT, 0]], 1.0);
        assert_eq!(mdp.transitions()[[0, GRID_DOWN, 2]], 1.0);
        assert_eq!(mdp.transitions()[[0, GRID_RIGHT, 1]], 1.0);
        assert_eq!(mdp.transitions()[[0, GRID_STAY, 0]], 1.0);
        // Bottom-right corner clamps the other way.
        assert_eq!(mdp.transitions()[[3, GRID_DOWN, 3]], 1.0);
        assert_eq!(mdp.transitions()[[3, GRID_RIGHT, 3]], 1.0);
        assert_eq!(mdp.transitions()[[3, GRID_UP, 1]], 1.0);
        assert_eq!(mdp.transitions()[[3, GRID_LEFT, 2]], 1.0);
    }

    #[test]
    fn grid_rewards_are_state_based_and_in_range() {
        let spec = GridWorldSpec { rng_seed: 7, ..GridWorldSpec::default() };
        let mdp = build_gridworld(&spec).unwrap();
        let goal = gridworld_goal(&spec);
        let mut goal_count = 0;
        for s in 0..mdp.n_states() {
            let r0 = mdp.reward(s, 0);
            for a in 1..5 {
                assert_eq!(mdp.reward(s, a), r0, "reward differs across actions at {s}");
            }
            if r0 == 1.0 {
                goal_count += 1;
                assert_eq!(s, goal);
            } else {
                assert!((-0.1..=0.1).contains(&r0), "background reward {r0} out of range");
            }
        }
        assert_eq!(goal_count, 1);
        assert_eq!(mdp.r_min(), -0.1);
        assert_eq!(mdp.r_max(), 1.0);
    }

    #[test]
    fn grid_same_seed_reproduces_identically() {
        let spec = GridWorldSpec { rng_seed: 42, ..GridWorldSpec::default() };
        let one = build_gridworld(&spec).unwrap();
        let two = build_gridworld(&spec).unwrap();
        assert_eq!(one.transitions(), two.transitions());
        assert_eq!(one.rewards(), two.rewards());
        let other = build_gridworld(&GridWorldSpec { rng_seed: 43, ..spec }).unwrap();
        assert!(one.rewards() != other.rewards());
    }

    #[test]
    fn grid_optimal_policy_reaches_the_goal_from_everywhere() {
        let spec = GridWorldSpec { n: 5, rng_seed: 3, ..GridWorldSpec::default() };
        let mdp = build_gridworld(&spec).unwrap();
        let goal = gridworld_goal(&spec);
        let (_, pi_star) = optimal_value(&mdp);
        let step = |s: usize| -> usize {
            let row = mdp.transitions().slice(ndarray::s![s, pi_star.action(s), ..]);
            row.iter().position(|&p| p == 1.0).expect("deterministic row")
        };
        for start in 0..mdp.n_states() {
            let mut s = start;
            for _ in 0..2 * spec.n {
                s = step(s);
            }
            assert_eq!(s, goal, "walk from {start} did not settle on the goal");
            assert_eq!(step(goal), goal, "optimal policy leaves the goal");
        }
    }

    #[test]
    fn grid_serializes_through_the_json_format() {
        let spec = GridWorldSpec { n: 3, rng_seed: 11, ..GridWorldSpec::default() };
        let mdp = build_gridworld(&spec).unwrap();
        let restored = Mdp::from_json(&mdp.to_json()).unwrap();
        assert_eq!(restored.transitions(), mdp.transitions());
        assert_eq!(restored.rewards(), mdp.rewards());
    }

    #[test]
    fn random_mdp_is_valid_and_deterministic() {
        let spec = RandomMdpSpec { n_states: 8, n_actions: 4, gamma: 0.9, rng_seed: 123 };
        let one = random_mdp(&spec);
        let two = random_mdp(&spec);
        assert!(one.validate().is_ok());
        assert_eq!(one.transitions(), two.transitions());
        assert_eq!(one.rewards(), two.rewards());
    }

    #[test]
    fn initial_value_is_seeded_standard_normal() {
        let v = initial_value(10_000, 0);
        let mean: f64 = v.values().iter().sum::<f64>() / 10_000.0;
        let var: f64 = v.values().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
        assert_eq!(initial_value(5, 9), initial_value(5, 9));
        assert!(initial_value(5, 9) != initial_value(5, 10));
    }
}

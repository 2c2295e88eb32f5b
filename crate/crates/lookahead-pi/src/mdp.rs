//! Core tabular MDP types: the model itself, value functions, deterministic
//! policies, exact policy evaluation, and optimal values.
//!
//! An [`Mdp`] is immutable after construction and every constructor runs the
//! full validation pass, so downstream operators may assume stochastic rows,
//! bounded rewards, and a discount in `(0, 1)`.

use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::linalg::SolveError;
use crate::linalg::solve_discounted_system;

/// Tolerance on `|row sum - 1|` for transition rows.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Value-iteration stopping scale: iteration ends once successive iterates
/// differ by at most `VALUE_ITERATION_TOL * (1 - gamma)` in max norm, which
/// bounds the distance to the fixed point by about `VALUE_ITERATION_TOL`.
pub const VALUE_ITERATION_TOL: f64 = 1e-12;

// ── Errors ──────────────────────────────────────────────────────────────────

/// A single validation failure. Collected so a report can list every bad
/// row or entry instead of stopping at the first.
#[derive(Debug, Clone, PartialEq)]
pub enum MdpViolation {
    /// Transition row is not a probability distribution (bad sum or a
    /// negative/non-finite entry).
    NonStochasticRow { state: usize, action: usize, sum: f64 },
    /// Reward entry is non-finite or falls outside `[r_min, r_max]`.
    RewardOutOfBounds { state: usize, action: usize, reward: f64 },
    /// Discount factor outside the open interval `(0, 1)`.
    BadDiscount { gamma: f64 },
    /// Declared reward bounds are non-finite or inverted.
    BadRewardBounds { r_min: f64, r_max: f64 },
}

impl fmt::Display for MdpViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MdpViolation::NonStochasticRow { state, action, sum } => write!(
                f,
                "transitions[{state},{action},:] is not a probability row (sum = {sum})"
            ),
            MdpViolation::RewardOutOfBounds { state, action, reward } => write!(
                f,
                "rewards[{state},{action}] = {reward} outside declared bounds"
            ),
            MdpViolation::BadDiscount { gamma } => {
                write!(f, "discount gamma = {gamma} not in (0, 1)")
            }
            MdpViolation::BadRewardBounds { r_min, r_max } => {
                write!(f, "reward bounds [{r_min}, {r_max}] are not a finite interval")
            }
        }
    }
}

fn render_violations(violations: &[MdpViolation]) -> String {
    violations
        .iter()
        .map(MdpViolation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("mdp validation failed: {}", render_violations(violations))]
    Invalid { violations: Vec<MdpViolation> },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("value function entry {index} is not finite ({value})")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MdpError {
    /// The individual violations behind an `Invalid` error, empty otherwise.
    pub fn violations(&self) -> &[MdpViolation] {
        match self {
            MdpError::Invalid { violations } => violations,
            _ => &[],
        }
    }
}

// ── Value functions and policies ────────────────────────────────────────────

/// A state-value vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct ValueFunction(Array1<f64>);

impl ValueFunction {
    pub fn new(values: Array1<f64>) -> Result<Self, MdpError> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(MdpError::NonFiniteValue { index, value });
            }
        }
        Ok(ValueFunction(values))
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self, MdpError> {
        Self::new(Array1::from(values))
    }

    pub fn constant(n: usize, value: f64) -> Self {
        ValueFunction(Array1::from_elem(n, value))
    }

    pub fn zeros(n: usize) -> Self {
        ValueFunction(Array1::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("value storage is contiguous")
    }

    /// `max_s |self(s) - other(s)|`.
    pub fn max_norm_dist(&self, other: &ValueFunction) -> f64 {
        assert_eq!(self.len(), other.len(), "value function lengths differ");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `max_s |self(s)|`.
    pub fn max_norm(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// `max_s self(s) - min_s self(s)`.
    pub fn span(&self) -> f64 {
        let max = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.0.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// The vector `self + alpha * e` where `e` is all ones.
    pub fn shifted(&self, alpha: f64) -> Self {
        ValueFunction(&self.0 + alpha)
    }

    /// Componentwise `self(s) <= other(s) + tol` everywhere.
    pub fn le_within(&self, other: &ValueFunction, tol: f64) -> bool {
        assert_eq!(self.len(), other.len(), "value function lengths differ");
        self.0.iter().zip(other.0.iter()).all(|(a, b)| *a <= *b + tol)
    }

    pub(crate) fn from_array_unchecked(values: Array1<f64>) -> Self {
        debug_assert!(values.iter().all(|x| x.is_finite()));
        ValueFunction(values)
    }
}

impl std::ops::Index<usize> for ValueFunction {
    type Output = f64;
    fn index(&self, s: usize) -> &f64 {
        &self.0[s]
    }
}

impl From<ValueFunction> for Vec<f64> {
    fn from(v: ValueFunction) -> Vec<f64> {
        v.0.to_vec()
    }
}

impl TryFrom<Vec<f64>> for ValueFunction {
    type Error = String;
    fn try_from(values: Vec<f64>) -> Result<Self, String> {
        ValueFunction::from_vec(values).map_err(|e| e.to_string())
    }
}

/// A deterministic stationary policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Policy(actions)
    }

    pub fn constant(n_states: usize, action: usize) -> Self {
        Policy(vec![action; n_states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    /// Panics unless the policy has one in-range action per state of `mdp`.
    pub fn assert_valid_for(&self, mdp: &Mdp) {
        assert_eq!(self.len(), mdp.n_states(), "policy length != n_states");
        for (s, &a) in self.0.iter().enumerate() {
            assert!(a < mdp.n_actions(), "policy action {a} at state {s} out of range");
        }
    }
}

// ── The MDP itself ──────────────────────────────────────────────────────────

/// A finite discounted MDP with dense tables.
///
/// `transitions` has shape `(n_states, n_actions, n_states)` with stochastic
/// rows, `rewards` has shape `(n_states, n_actions)` with entries inside
/// `[r_min, r_max]`, and `gamma` lies in `(0, 1)`. Instances are immutable,
/// so sharing one across threads is safe.
#[derive(Debug, Clone)]
pub struct Mdp {
    transitions: Array3<f64>,
    rewards: Array2<f64>,
    gamma: f64,
    r_min: f64,
    r_max: f64,
}

impl Mdp {
    /// Builds an MDP, deriving the reward bounds from the reward table.
    pub fn new(transitions: Array3<f64>, rewards: Array2<f64>, gamma: f64) -> Result<Self, MdpError> {
        let r_min = rewards.iter().copied().fold(f64::INFINITY, f64::min);
        let r_max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::with_bounds(transitions, rewards, gamma, r_min, r_max)
    }

    /// Builds an MDP with explicitly declared reward bounds. Useful when the
    /// construction guarantees a range wider than the realized rewards, e.g.
    /// sampled rewards whose distribution support is known.
    pub fn with_bounds(
        transitions: Array3<f64>,
        rewards: Array2<f64>,
        gamma: f64,
        r_min: f64,
        r_max: f64,
    ) -> Result<Self, MdpError> {
        let (s_t, a_t, s2_t) = transitions.dim();
        let (s_r, a_r) = rewards.dim();
        if s_t == 0 || a_t == 0 {
            return Err(MdpError::ShapeMismatch(format!(
                "need at least one state and one action, got ({s_t}, {a_t})"
            )));
        }
        if s_t != s2_t || s_t != s_r || a_t != a_r {
            return Err(MdpError::ShapeMismatch(format!(
                "transitions {s_t}x{a_t}x{s2_t} inconsistent with rewards {s_r}x{a_r}"
            )));
        }
        let mdp = Mdp { transitions, rewards, gamma, r_min, r_max };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Re-runs the full validation pass, reporting every violation at once.
    pub fn validate(&self) -> Result<(), MdpError> {
        let mut violations = Vec::new();
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            violations.push(MdpViolation::BadDiscount { gamma: self.gamma });
        }
        if !(self.r_min.is_finite() && self.r_max.is_finite() && self.r_min <= self.r_max) {
            violations.push(MdpViolation::BadRewardBounds { r_min: self.r_min, r_max: self.r_max });
        }
        for s in 0..self.n_states() {
            for a in 0..self.n_actions() {
                let row = self.transitions.slice(ndarray::s![s, a, ..]);
                let sum: f64 = row.sum();
                let entries_ok = row.iter().all(|p| p.is_finite() && *p >= 0.0);
                if !entries_ok || (sum - 1.0).abs() > ROW_SUM_TOL {
                    violations.push(MdpViolation::NonStochasticRow { state: s, action: a, sum });
                }
                let reward = self.rewards[[s, a]];
                if !(reward >= self.r_min && reward <= self.r_max) {
                    violations.push(MdpViolation::RewardOutOfBounds { state: s, action: a, reward });
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(MdpError::Invalid { violations })
        }
    }

    pub fn n_states(&self) -> usize {
        self.transitions.dim().0
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.dim().1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn transitions(&self) -> &Array3<f64> {
        &self.transitions
    }

    pub fn rewards(&self) -> &Array2<f64> {
        &self.rewards
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[[state, action]]
    }

    // ── Serialization ───────────────────────────────────────────────────

    /// Parses the JSON interchange format (see [`MdpFile`]) and validates.
    pub fn from_json(text: &str) -> Result<Self, MdpError> {
        let file: MdpFile = serde_json::from_str(text)?;
        file.into_mdp()
    }

    /// Renders the JSON interchange format. Reward bounds are re-derived
    /// from the table on load, so explicitly widened bounds do not survive
    /// a round trip.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MdpFile::from_mdp(self)).expect("mdp serialization")
    }

    pub fn load(path: &Path) -> Result<Self, MdpError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), MdpError> {
        Ok(std::fs::write(path, self.to_json())?)
    }
}

/// JSON interchange format for MDPs:
/// `{ n_states, n_actions, gamma, rewards[s][a], transitions[s][a][s'] }`.
#[derive(Debug, Serialize, Deserialize)]
pub struct MdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub rewards: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &Mdp) -> Self {
        let n = mdp.n_states();
        let a = mdp.n_actions();
        MdpFile {
            n_states: n,
            n_actions: a,
            gamma: mdp.gamma(),
            rewards: (0..n)
                .map(|s| (0..a).map(|act| mdp.rewards[[s, act]]).collect())
                .collect(),
            transitions: (0..n)
                .map(|s| {
                    (0..a)
                        .map(|act| (0..n).map(|s2| mdp.transitions[[s, act, s2]]).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn into_mdp(self) -> Result<Mdp, MdpError> {
        let n = self.n_states;
        let a = self.n_actions;
        let mut rewards = Array2::zeros((n, a));
        let mut transitions = Array3::zeros((n, a, n));
        if self.rewards.len() != n || self.transitions.len() != n {
            return Err(MdpError::ShapeMismatch(format!(
                "outer table lengths do not match n_states = {n}"
            )));
        }
        for (s, (reward_row, transition_row)) in
            self.rewards.iter().zip(self.transitions.iter()).enumerate()
        {
            if reward_row.len() != a || transition_row.len() != a {
                return Err(MdpError::ShapeMismatch(format!(
                    "state {s} does not have n_actions = {a} entries"
                )));
            }
            for act in 0..a {
                rewards[[s, act]] = reward_row[act];
                if transition_row[act].len() != n {
                    return Err(MdpError::ShapeMismatch(format!(
                        "transitions[{s}][{act}] does not have n_states = {n} entries"
                    )));
                }
                for s2 in 0..n {
                    transitions[[s, act, s2]] = transition_row[act][s2];
                }
            }
        }
        Mdp::new(transitions, rewards, self.gamma)
    }
}

// ── Exact evaluation and optimal values ─────────────────────────────────────

/// Exact value of a deterministic policy: solves `(I - gamma P_pi) v = r_pi`.
pub fn evaluate_policy_exact(mdp: &Mdp, pi: &Policy) -> Result<ValueFunction, SolveError> {
    pi.assert_valid_for(mdp);
    let r_pi = Array1::from_iter((0..mdp.n_states()).map(|s| mdp.reward(s, pi.action(s))));
    let v = solve_discounted_system(mdp, pi, mdp.gamma(), &r_pi)?;
    Ok(ValueFunction::from_array_unchecked(v))
}

/// Optimal value function and a one-step greedy optimal policy.
///
/// Runs value iteration from zero until successive iterates differ by at
/// most `1e-12 * (1 - gamma)` (or an analytic iteration cap certifies the
/// same accuracy), then polishes by exactly evaluating the greedy policy.
/// The polish is kept only when it stays within `1e-11` of the iterate, so
/// the result is never worse than plain value iteration and is exact to
/// solver precision whenever the greedy policy is optimal (the generic
/// case).
pub fn optimal_value(mdp: &Mdp) -> (ValueFunction, Policy) {
    let gamma = mdp.gamma();
    let tol = VALUE_ITERATION_TOL * (1.0 - gamma);
    // ||v_0 - v*|| <= max(|r_min|, |r_max|) / (1 - gamma) from v_0 = 0, and
    // the error contracts by gamma per sweep.
    let span0 = (mdp.r_min().abs().max(mdp.r_max().abs()) / (1.0 - gamma)).max(1e-300);
    let cap = if span0 <= VALUE_ITERATION_TOL {
        1
    } else {
        ((VALUE_ITERATION_TOL / span0).ln() / gamma.ln()).ceil() as u64 + 1
    };

    let mut v = ValueFunction::zeros(mdp.n_states());
    for _ in 0..cap {
        let next = crate::bellman::apply_t_opt(mdp, &v);
        let delta = next.max_norm_dist(&v);
        v = next;
        if delta <= tol {
            break;
        }
    }

    let pi = crate::bellman::greedy_policy(mdp, &v);
    if let Ok(polished) = evaluate_policy_exact(mdp, &pi) {
        if polished.max_norm_dist(&v) <= 1e-11 {
            let pi_polished = crate::bellman::greedy_policy(mdp, &polished);
            return (polished, pi_polished);
        }
    }
    (v, pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{self, CounterexampleSpec};
    use ndarray::{Array2, Array3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_state_loop(reward: f64, gamma: f64) -> Mdp {
        let mut t = Array3::zeros((1, 1, 1));
        t[[0, 0, 0]] = 1.0;
        let mut r = Array2::zeros((1, 1));
        r[[0, 0]] = reward;
        Mdp::new(t, r, gamma).unwrap()
    }

    #[test]
    fn validate_rejects_short_row() {
        let mut t = Array3::zeros((2, 1, 2));
        t[[0, 0, 0]] = 0.9; // sums to 0.9
        t[[1, 0, 1]] = 1.0;
        let r = Array2::zeros((2, 1));
        let err = Mdp::new(t, r, 0.9).unwrap_err();
        match &err.violations()[0] {
            MdpViolation::NonStochasticRow { state: 0, action: 0, .. } => {}
            other => panic!("expected NonStochasticRow(0,0), got {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_unit_discount() {
        let mut t = Array3::zeros((1, 1, 1));
        t[[0, 0, 0]] = 1.0;
        let err = Mdp::new(t, Array2::zeros((1, 1)), 1.0).unwrap_err();
        assert!(matches!(err.violations()[0], MdpViolation::BadDiscount { .. }));
    }

    #[test]
    fn validate_reports_every_violation() {
        let mut t = Array3::zeros((2, 2, 2));
        t[[0, 0, 0]] = 0.5; // bad row
        t[[0, 1, 0]] = 1.0;
        t[[1, 0, 1]] = 1.0;
        t[[1, 1, 0]] = -0.25; // negative entry
        t[[1, 1, 1]] = 1.25;
        let r = Array2::zeros((2, 2));
        let err = Mdp::new(t, r, 1.5).unwrap_err();
        assert_eq!(err.violations().len(), 3, "{err}");
    }

    #[test]
    fn validate_rejects_reward_outside_declared_bounds() {
        let mut t = Array3::zeros((1, 1, 1));
        t[[0, 0, 0]] = 1.0;
        let mut r = Array2::zeros((1, 1));
        r[[0, 0]] = 2.0;
        let err = Mdp::with_bounds(t, r, 0.9, 0.0, 1.0).unwrap_err();
        assert!(matches!(
            err.violations()[0],
            MdpViolation::RewardOutOfBounds { state: 0, action: 0, .. }
        ));
    }

    #[test]
    fn evaluate_single_state_geometric_series() {
        // v = 1 + 0.5 v, so v = 2.
        let mdp = single_state_loop(1.0, 0.5);
        let v = evaluate_policy_exact(&mdp, &Policy::constant(1, 0)).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_matches_value_iteration_oracle() {
        // Oracle: iterate v <- T_pi v until the tail bound certifies 1e-11,
        // entirely independent of the linear solver.
        let mdp = envs::random_mdp(&envs::RandomMdpSpec {
            n_states: 6,
            n_actions: 3,
            gamma: 0.9,
            rng_seed: 42,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pi = Policy::new((0..6).map(|_| rng.gen_range(0..3)).collect());

        let mut oracle = vec![0.0; 6];
        let sweeps =
            ((1e-11f64 * (1.0 - 0.9) / (1.0 / (1.0 - 0.9))).ln() / 0.9f64.ln()).ceil() as usize;
        for _ in 0..sweeps {
            let prev = oracle.clone();
            for (s, slot) in oracle.iter_mut().enumerate() {
                let a = pi.action(s);
                let mut x = mdp.reward(s, a);
                for (s2, &pv) in prev.iter().enumerate() {
                    x += mdp.gamma() * mdp.transitions()[[s, a, s2]] * pv;
                }
                *slot = x;
            }
        }

        let v = evaluate_policy_exact(&mdp, &pi).unwrap();
        for s in 0..6 {
            assert!((v[s] - oracle[s]).abs() < 1e-10, "state {s}: {} vs {}", v[s], oracle[s]);
        }
    }

    #[test]
    fn optimal_value_of_zero_reward_mdp_is_zero() {
        let mdp = single_state_loop(0.0, 0.9);
        let (v, _) = optimal_value(&mdp);
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn optimal_value_matches_closed_form_on_two_goal_chain() {
        let spec = CounterexampleSpec { gamma: 0.9, h: 3 };
        let (mdp, _, _) = envs::build_counterexample(&spec).unwrap();
        let (v_star, pi_star) = optimal_value(&mdp);
        let expect = 1.0 / (1.0 - 0.9);
        assert!((v_star[0] - expect).abs() < 1e-10);
        assert!((v_star[1] - 0.0).abs() < 1e-10);
        assert!((v_star[2] - 0.0).abs() < 1e-10);
        assert!((v_star[3] - expect).abs() < 1e-10);
        assert_eq!(pi_star.action(0), envs::CX_UP);
    }

    #[test]
    fn optimal_value_dominates_random_policies() {
        let mdp = envs::random_mdp(&envs::RandomMdpSpec {
            n_states: 8,
            n_actions: 4,
            gamma: 0.95,
            rng_seed: 3,
        });
        let (v_star, _) = optimal_value(&mdp);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let pi = Policy::new((0..8).map(|_| rng.gen_range(0..4)).collect());
            let v_pi = evaluate_policy_exact(&mdp, &pi).unwrap();
            assert!(v_pi.le_within(&v_star, 1e-10));
        }
    }

    #[test]
    fn greedy_policy_of_optimal_value_reproduces_it() {
        let mdp = envs::random_mdp(&envs::RandomMdpSpec {
            n_states: 7,
            n_actions: 3,
            gamma: 0.9,
            rng_seed: 19,
        });
        let (v_star, pi_star) = optimal_value(&mdp);
        let v_pi = evaluate_policy_exact(&mdp, &pi_star).unwrap();
        assert!(v_pi.max_norm_dist(&v_star) < 1e-10);
    }

    #[test]
    fn optimal_value_agrees_with_policy_enumeration() {
        // Independent oracle: enumerate all |A|^|S| deterministic policies,
        // evaluate each exactly, and take the componentwise maximum.
        let mdp = envs::random_mdp(&envs::RandomMdpSpec {
            n_states: 5,
            n_actions: 3,
            gamma: 0.85,
            rng_seed: 23,
        });
        let n = mdp.n_states();
        let a = mdp.n_actions();
        let mut best = vec![f64::NEG_INFINITY; n];
        for code in 0..a.pow(n as u32) {
            let mut c = code;
            let actions: Vec<usize> = (0..n)
                .map(|_| {
                    let act = c % a;
                    c /= a;
                    act
                })
                .collect();
            let v = evaluate_policy_exact(&mdp, &Policy::new(actions)).unwrap();
            for s in 0..n {
                best[s] = best[s].max(v[s]);
            }
        }
        let (v_star, _) = optimal_value(&mdp);
        for s in 0..n {
            assert!((v_star[s] - best[s]).abs() < 1e-10);
        }
    }

    #[test]
    fn json_round_trip_preserves_tables() {
        let mdp = envs::random_mdp(&envs::RandomMdpSpec {
            n_states: 4,
            n_actions: 2,
            gamma: 0.8,
            rng_seed: 5,
        });
        let restored = Mdp::from_json(&mdp.to_json()).unwrap();
        assert_eq!(restored.n_states(), 4);
        assert_eq!(restored.gamma(), mdp.gamma());
        assert_eq!(restored.transitions(), mdp.transitions());
        assert_eq!(restored.rewards(), mdp.rewards());
    }

    #[test]
    fn json_loader_rejects_invalid_rows() {
        let text = r#"{
            "n_states": 1, "n_actions": 1, "gamma": 0.9,
            "rewards": [[0.0]], "transitions": [[[0.5]]]
        }"#;
        let err = Mdp::from_json(text).unwrap_err();
        assert!(!err.violations().is_empty());
    }

    #[test]
    fn json_loader_rejects_shape_mismatch() {
        let text = r#"{
            "n_states": 2, "n_actions": 1, "gamma": 0.9,
            "rewards": [[0.0]], "transitions": [[[1.0, 0.0]]]
        }"#;
        assert!(matches!(Mdp::from_json(text), Err(MdpError::ShapeMismatch(_))));
    }
}

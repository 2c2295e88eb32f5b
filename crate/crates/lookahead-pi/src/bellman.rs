//! One-step Bellman operators and the partial-return operators built from
//! them.
//!
//! For a fixed policy the operator is `T_pi v = r_pi + gamma P_pi v`; the
//! optimality operator is `T v = max_pi T_pi v`, taken rowwise over actions.
//! Partial returns interpolate between a single application of `T_pi` and
//! exact policy evaluation:
//!
//! * the m-step return applies `T_pi` exactly `m` times;
//! * the lambda-weighted return is the geometric mixture
//!   `(1 - lambda) sum_j lambda^j (T_pi)^(j+1) v`, computed here in its
//!   resolvent form `v + (I - gamma lambda P_pi)^{-1} (T_pi v - v)`;
//! * the alternative mixture `(1 - lambda) sum_j lambda^j (T_pi)^j v`
//!   (note the exponent starts at zero) equals
//!   `v + lambda (I - gamma lambda P_pi)^{-1} (T_pi v - v)` and satisfies
//!   `bar_lambda_return(T_pi v) = lambda_return(v)`, which lets a scheme
//!   reuse an already-computed `T_pi v` without changing its fixed points.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::linalg::{solve_discounted_system, SolveError};
use crate::mdp::{Mdp, Policy, ValueFunction};

/// Default tail tolerance for the truncated-series form of the
/// lambda-weighted return and for its query-cost proxy.
pub const DEFAULT_SERIES_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LambdaError {
    #[error("lambda = {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("series tolerance = {0} must be positive and finite")]
    BadSeriesTolerance(f64),
}

/// Parameters of the lambda-weighted return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaParams {
    lambda: f64,
    series_tolerance: f64,
}

impl LambdaParams {
    pub fn new(lambda: f64) -> Result<Self, LambdaError> {
        if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
            return Err(LambdaError::LambdaOutOfRange(lambda));
        }
        Ok(LambdaParams { lambda, series_tolerance: DEFAULT_SERIES_TOLERANCE })
    }

    pub fn with_series_tolerance(mut self, tol: f64) -> Result<Self, LambdaError> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(LambdaError::BadSeriesTolerance(tol));
        }
        self.series_tolerance = tol;
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn series_tolerance(&self) -> f64 {
        self.series_tolerance
    }
}

/// The full action-value table `Q[s, a] = r(s, a) + gamma * P(s, a, .) v`.
pub fn q_values(mdp: &Mdp, v: &ValueFunction) -> Array2<f64> {
    assert_eq!(v.len(), mdp.n_states(), "value length != n_states");
    let gamma = mdp.gamma();
    let values = v.values();
    Array2::from_shape_fn((mdp.n_states(), mdp.n_actions()), |(s, a)| {
        mdp.reward(s, a) + gamma * mdp.transitions().slice(ndarray::s![s, a, ..]).dot(values)
    })
}

/// One application of the fixed-policy operator `T_pi`.
pub fn apply_t_pi(mdp: &Mdp, pi: &Policy, v: &ValueFunction) -> ValueFunction {
    pi.assert_valid_for(mdp);
    assert_eq!(v.len(), mdp.n_states(), "value length != n_states");
    let gamma = mdp.gamma();
    let values = v.values();
    let out = Array1::from_iter((0..mdp.n_states()).map(|s| {
        let a = pi.action(s);
        mdp.reward(s, a) + gamma * mdp.transitions().slice(ndarray::s![s, a, ..]).dot(values)
    }));
    ValueFunction::from_array_unchecked(out)
}

/// One application of the optimality operator `T`.
pub fn apply_t_opt(mdp: &Mdp, v: &ValueFunction) -> ValueFunction {
    let q = q_values(mdp, v);
    let out = Array1::from_iter(
        q.rows().into_iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    );
    ValueFunction::from_array_unchecked(out)
}

/// A policy attaining the rowwise maximum of the action values, breaking
/// ties toward the lowest action index.
pub fn greedy_policy(mdp: &Mdp, v: &ValueFunction) -> Policy {
    let q = q_values(mdp, v);
    greedy_from_q(&q)
}

pub(crate) fn greedy_from_q(q: &Array2<f64>) -> Policy {
    let actions = q
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_q = row[0];
            for (a, &value) in row.iter().enumerate().skip(1) {
                if value > best_q {
                    best = a;
                    best_q = value;
                }
            }
            best
        })
        .collect();
    Policy::new(actions)
}

/// The m-step return `(T_pi)^m v`. Requires `m >= 1`.
pub fn m_return(mdp: &Mdp, pi: &Policy, v: &ValueFunction, m: usize) -> ValueFunction {
    assert!(m >= 1, "m-step return needs m >= 1");
    let mut out = apply_t_pi(mdp, pi, v);
    for _ in 1..m {
        out = apply_t_pi(mdp, pi, &out);
    }
    out
}

/// The lambda-weighted return in resolvent form:
/// `v + (I - gamma lambda P_pi)^{-1} (T_pi v - v)`.
///
/// `lambda = 0` reduces to a single `T_pi` application and `lambda = 1` to
/// exact policy evaluation. The truncated-series route
/// ([`lambda_return_series`]) agrees with this closed form to within the
/// configured series tolerance.
pub fn lambda_return(
    mdp: &Mdp,
    pi: &Policy,
    v: &ValueFunction,
    lp: &LambdaParams,
) -> Result<ValueFunction, SolveError> {
    if lp.lambda == 0.0 {
        return Ok(apply_t_pi(mdp, pi, v));
    }
    let t_pi_v = apply_t_pi(mdp, pi, v);
    let w = t_pi_v.values() - v.values();
    let x = solve_discounted_system(mdp, pi, mdp.gamma() * lp.lambda, &w)?;
    Ok(ValueFunction::from_array_unchecked(v.values() + &x))
}

/// The lambda-weighted return as an explicitly truncated geometric mixture
/// `(1 - lambda) sum_{j<=J} lambda^j (T_pi)^(j+1) v + lambda^(J+1) (T_pi)^(J+1) v`,
/// truncated once the remaining tail is provably below the series
/// tolerance. Kept as an independent route for cross-checking the closed
/// form; the final correction term completes the mixture weights so the
/// truncation error contracts like `(gamma lambda)^(J+1)`.
pub fn lambda_return_series(
    mdp: &Mdp,
    pi: &Policy,
    v: &ValueFunction,
    lp: &LambdaParams,
) -> ValueFunction {
    let gamma = mdp.gamma();
    let lambda = lp.lambda;
    let mut x = apply_t_pi(mdp, pi, v); // (T_pi)^(j+1) v for j = 0
    if lambda == 0.0 {
        return x;
    }

    // Every tail term differs from the iterate at truncation by at most
    // (gamma lambda)^(J+1) * 2 ||v - v_pi||, and
    // ||v - v_pi|| <= ||T_pi v - v|| / (1 - gamma).
    let bound = 2.0 * x.max_norm_dist(v) / (1.0 - gamma);
    let mut acc = Array1::zeros(mdp.n_states());
    let mut weight = 1.0 - lambda; // (1 - lambda) lambda^j
    let mut tail = lambda; // lambda^(j+1)
    let mut err = gamma * lambda * bound; // bound * (gamma lambda)^(j+1)
    loop {
        acc += &(weight * x.values());
        if err <= lp.series_tolerance {
            break;
        }
        x = apply_t_pi(mdp, pi, &x);
        weight *= lambda;
        tail *= lambda;
        err *= gamma * lambda;
    }
    // Complete the mixture weights with the last iterate standing in for
    // every remaining term.
    acc += &(tail * x.values());
    ValueFunction::from_array_unchecked(acc)
}

/// The alternative mixture `(1 - lambda) sum_j lambda^j (T_pi)^j v`, i.e.
/// `v + lambda (I - gamma lambda P_pi)^{-1} (T_pi v - v)`.
///
/// `lambda = 0` is the identity map; `lambda = 1` is exact policy
/// evaluation; composed with one `T_pi` application it reproduces
/// [`lambda_return`].
pub fn bar_lambda_return(
    mdp: &Mdp,
    pi: &Policy,
    v: &ValueFunction,
    lp: &LambdaParams,
) -> Result<ValueFunction, SolveError> {
    if lp.lambda == 0.0 {
        return Ok(v.clone());
    }
    let t_pi_v = apply_t_pi(mdp, pi, v);
    let w = t_pi_v.values() - v.values();
    let x = solve_discounted_system(mdp, pi, mdp.gamma() * lp.lambda, &w)?;
    Ok(ValueFunction::from_array_unchecked(v.values() + &(lp.lambda * &x)))
}

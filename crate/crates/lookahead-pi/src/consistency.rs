//! The h-greedy consistency condition and the guarantees it buys.
//!
//! A pair `(v, pi)` is h-greedy consistent when `T_pi T^(h-1) v >= T^(h-1) v`
//! componentwise. Consistency is what makes partial-return evaluation safe:
//! it implies the monotone chain
//! `T_pi T^(h-1) v <= (T_pi)^2 T^(h-1) v <= ... <= v_pi`,
//! and from there a gamma^h contraction toward the optimal value for both
//! the m-step and lambda-weighted returns applied to the backed-up values.
//!
//! Any pair can be made consistent by subtracting the constant
//! `Delta = max_s (T^(h-1) v - T_pi T^(h-1) v)(s) / (gamma^(h-1) (1 - gamma))`
//! from `v`: constants pass through the operators scaled by powers of gamma,
//! so the shift closes the worst violation exactly while leaving every
//! greedy set unchanged.

use thiserror::Error;

use crate::bellman::{apply_t_pi, apply_t_opt, lambda_return, m_return, LambdaParams};
use crate::linalg::SolveError;
use crate::lookahead::tree_backup;
use crate::mdp::{optimal_value, Mdp, Policy, ValueFunction};

/// Violations at or below this bound count as consistent.
pub const CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConsistencyError {
    #[error("pair is not h-greedy consistent (violation {max_violation:.3e})")]
    PreconditionViolated { max_violation: f64 },
    #[error("baseline distance ||v* - v|| is numerically zero; ratio undefined")]
    DivisionDegenerate,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Outcome of a consistency check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    /// True when the worst violation is at most [`CONSISTENCY_TOL`].
    pub consistent: bool,
    /// `max{0, max_s (T^(h-1) v - T_pi T^(h-1) v)(s)}`.
    pub max_violation: f64,
    /// The constant shift that restores consistency; zero exactly when
    /// `consistent` is true.
    pub shift_delta: f64,
}

/// Worst-case gap `max_s (backed - t_pi_backed)(s)`; positive values are
/// consistency violations.
pub fn violation_gap(backed: &ValueFunction, t_pi_backed: &ValueFunction) -> f64 {
    backed
        .values()
        .iter()
        .zip(t_pi_backed.values().iter())
        .map(|(b, t)| b - t)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The consistency-restoring shift for a given worst-case gap:
/// `gap / (gamma^(h-1) (1 - gamma))` when the gap exceeds
/// [`CONSISTENCY_TOL`], zero otherwise — so the shift is zero exactly for
/// the pairs the check accepts.
pub fn shift_from_gap(gamma: f64, h: usize, gap: f64) -> f64 {
    if gap <= CONSISTENCY_TOL {
        0.0
    } else {
        gap / (gamma.powi(h as i32 - 1) * (1.0 - gamma))
    }
}

/// Checks whether `(v, pi)` is h-greedy consistent.
pub fn check_consistency(mdp: &Mdp, v: &ValueFunction, pi: &Policy, h: usize) -> ConsistencyReport {
    assert!(h >= 1, "lookahead horizon must be >= 1");
    let backed = power_backup(mdp, v, h);
    let t_pi_backed = apply_t_pi(mdp, pi, &backed);
    let gap = violation_gap(&backed, &t_pi_backed);
    ConsistencyReport {
        consistent: gap <= CONSISTENCY_TOL,
        max_violation: gap.max(0.0),
        shift_delta: shift_from_gap(mdp.gamma(), h, gap),
    }
}

/// Returns `v - Delta * e` with the smallest constant `Delta >= 0` that makes
/// `(v, pi)` consistent. Already-consistent pairs come back unchanged.
pub fn shift_to_consistent(mdp: &Mdp, v: &ValueFunction, pi: &Policy, h: usize) -> ValueFunction {
    let report = check_consistency(mdp, v, pi, h);
    if report.shift_delta == 0.0 {
        v.clone()
    } else {
        v.shifted(-report.shift_delta)
    }
}

/// The consistency-restoring shift for an initial pair, used by the noisy
/// convergence bound: `max{0, gap(v0, pi1)} / (gamma^(h-1) (1 - gamma))`.
pub fn delta0(mdp: &Mdp, v0: &ValueFunction, pi1: &Policy, h: usize) -> f64 {
    check_consistency(mdp, v0, pi1, h).shift_delta
}

/// Verifies the monotone evaluation chain on a consistent pair: each extra
/// `T_pi` application may only raise the backed-up values, and the chain
/// stays below the exact policy value.
///
/// Returns `Ok(true)` when `(T_pi)^l T^(h-1) v` is componentwise
/// nondecreasing for `l = 1..l_max` (within a `1e-11` rounding slack) and
/// the final iterate is at most `v_pi + 1e-10`. Inconsistent input pairs are
/// rejected.
pub fn verify_monotone_chain(
    mdp: &Mdp,
    v: &ValueFunction,
    pi: &Policy,
    h: usize,
    l_max: usize,
) -> Result<bool, ConsistencyError> {
    assert!(l_max >= 1, "need at least one chain step");
    let report = check_consistency(mdp, v, pi, h);
    if !report.consistent {
        return Err(ConsistencyError::PreconditionViolated {
            max_violation: report.max_violation,
        });
    }
    let backed = power_backup(mdp, v, h);
    let mut x = apply_t_pi(mdp, pi, &backed);
    for _ in 1..l_max {
        let next = apply_t_pi(mdp, pi, &x);
        if !x.le_within(&next, 1e-11) {
            return Ok(false);
        }
        x = next;
    }
    let v_pi = crate::mdp::evaluate_policy_exact(mdp, pi)?;
    Ok(x.le_within(&v_pi, 1e-10))
}

/// Measures the contraction achieved by one improvement-plus-evaluation
/// step from `v`: with `pi_h` the exact lookahead policy, returns
///
/// `( ||v* - (T_pi_h)^m T^(h-1) v|| / ||v* - v||,`
/// `  ||v* - lambda_return(pi_h, T^(h-1) v)|| / ||v* - v|| )`.
///
/// On consistent pairs both ratios are bounded by `gamma^h`. Computes the
/// optimal value internally; use [`verify_gamma_h_contraction_with`] to
/// amortize that across many calls on the same model.
pub fn verify_gamma_h_contraction(
    mdp: &Mdp,
    v: &ValueFunction,
    h: usize,
    m: usize,
    lp: &LambdaParams,
) -> Result<(f64, f64), ConsistencyError> {
    let (v_star, _) = optimal_value(mdp);
    verify_gamma_h_contraction_with(mdp, v, h, m, lp, &v_star)
}

/// [`verify_gamma_h_contraction`] with a precomputed optimal value.
pub fn verify_gamma_h_contraction_with(
    mdp: &Mdp,
    v: &ValueFunction,
    h: usize,
    m: usize,
    lp: &LambdaParams,
    v_star: &ValueFunction,
) -> Result<(f64, f64), ConsistencyError> {
    let den = v_star.max_norm_dist(v);
    if den <= 1e-12 {
        return Err(ConsistencyError::DivisionDegenerate);
    }
    let backup = tree_backup(mdp, v, h);
    let via_m = m_return(mdp, &backup.policy, &backup.backed_value, m);
    let via_lambda = lambda_return(mdp, &backup.policy, &backup.backed_value, lp)?;
    Ok((v_star.max_norm_dist(&via_m) / den, v_star.max_norm_dist(&via_lambda) / den))
}

/// The per-iteration constant that re-centers noisy iterates so the shifted
/// pair stays consistent:
/// `(max_delta + gamma^(h-1) max_eps - gamma^h min_eps) / (gamma^(h-1) (1 - gamma))`,
/// where `max_delta` bounds the improvement shortfall of the new policy and
/// `[min_eps, max_eps]` covers the evaluation noise added this iteration.
pub fn noise_shift_constant(
    gamma: f64,
    h: usize,
    max_delta: f64,
    max_eps: f64,
    min_eps: f64,
) -> f64 {
    let g_hm1 = gamma.powi(h as i32 - 1);
    (max_delta + g_hm1 * max_eps - gamma * g_hm1 * min_eps) / (g_hm1 * (1.0 - gamma))
}

/// `T^(h-1) v`.
fn power_backup(mdp: &Mdp, v: &ValueFunction, h: usize) -> ValueFunction {
    let mut out = v.clone();
    for _ in 1..h {
        out = apply_t_opt(mdp, &out);
    }
    out
}

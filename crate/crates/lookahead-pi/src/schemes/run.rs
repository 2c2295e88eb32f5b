//! The iteration loop shared by all schemes, plus its trace artifacts.
//!
//! One iteration is: improve (h-step lookahead, optionally with greedy
//! noise), evaluate (scheme-specific partial return), add per-state
//! evaluation noise, record diagnostics, check the stopping rule. The
//! distance diagnostics compare against a precomputed optimal value; they
//! are measurements for analysis, charged zero simulator queries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::consistency::{noise_shift_constant, shift_from_gap, violation_gap};
use crate::lookahead::{approx_tree_backup_with_rng, tree_backup};
use crate::mdp::{evaluate_policy_exact, optimal_value, Mdp, Policy, ValueFunction};
use crate::schemes::{cost, AlgoConfig, RunError, SchemeKind};

/// Slack for the shifted-pair consistency checks, absorbing accumulated
/// floating error in the running correction.
const SHIFTED_PAIR_SLACK: f64 = 1e-9;

/// Column header of [`RunReport::trace_csv`].
pub const TRACE_CSV_HEADER: &str =
    "k,dist_value,dist_policy_value,queries_cum,eps_max,delta_max";

/// Which stopping limit fired. When several fire on the same iteration the
/// order here is the precedence: convergence wins over budget wins over the
/// iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    BudgetExhausted,
    MaxIterations,
}

/// Diagnostics of one iteration (1-based `k`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `||v* - v_k||_inf`, measured on the stored (noisy) iterate.
    pub dist_value: f64,
    /// `||v* - v_pi_k||_inf` for the policy produced this iteration,
    /// via exact evaluation (an oracle measurement, not charged).
    pub dist_policy_value: f64,
    pub queries_this_iter: u64,
    /// Largest `|eps|` injected into the iterate this iteration.
    pub realized_eps_max: f64,
    /// Largest greedy shortfall realized by the improvement step.
    pub realized_delta_max: f64,
    /// Whether the shift-corrected pair stayed h-greedy consistent this
    /// iteration; present only when the run tracks shifted pairs and the
    /// scheme supports the diagnostic.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shifted_consistent: Option<bool>,
}

/// Everything a finished run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: SchemeKind,
    pub h: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    /// The consistency-restoring shift of the initial pair `(v0, pi_1)`.
    pub delta0: f64,
    /// Per-iteration diagnostics; never empty (a run performs at least one
    /// iteration before consulting the stopping rule).
    pub iterations: Vec<IterationRecord>,
    pub final_policy: Policy,
    pub final_value: ValueFunction,
    /// Equals the sum of `queries_this_iter` over `iterations`.
    pub total_queries: u64,
    pub stop_reason: StopReason,
}

impl RunReport {
    pub fn n_iterations(&self) -> usize {
        self.iterations.len()
    }

    fn last(&self) -> &IterationRecord {
        self.iterations.last().expect("a run records at least one iteration")
    }

    pub fn final_dist_value(&self) -> f64 {
        self.last().dist_value
    }

    pub fn final_dist_policy_value(&self) -> f64 {
        self.last().dist_policy_value
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields serialize")
    }

    /// The iteration trace as CSV with cumulative query counts.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        let mut cum = 0u64;
        for rec in &self.iterations {
            cum += rec.queries_this_iter;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rec.k,
                rec.dist_value,
                rec.dist_policy_value,
                cum,
                rec.realized_eps_max,
                rec.realized_delta_max
            ));
        }
        out
    }
}

/// Runs the configured scheme from `v0`, computing the optimal-value oracle
/// internally. Prefer [`run_with_oracle`] when many runs share one model.
///
/// The exact baseline (`h-pi`) ignores `v0` and starts from the value of
/// the constant-action-0 policy instead.
pub fn run(mdp: &Mdp, v0: &ValueFunction, cfg: &AlgoConfig) -> Result<RunReport, RunError> {
    let (v_star, _) = optimal_value(mdp);
    run_with_oracle(mdp, v0, cfg, &v_star)
}

/// [`run`] with a precomputed optimal value.
pub fn run_with_oracle(
    mdp: &Mdp,
    v0: &ValueFunction,
    cfg: &AlgoConfig,
    v_star: &ValueFunction,
) -> Result<RunReport, RunError> {
    let scheme = cfg.validate()?;
    assert_eq!(v0.len(), mdp.n_states(), "v0 length != n_states");
    assert_eq!(v_star.len(), mdp.n_states(), "oracle length != n_states");

    let mut v = if scheme.exact() {
        evaluate_policy_exact(mdp, &Policy::constant(mdp.n_states(), 0))?
    } else {
        v0.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let improve_queries = cost::tree_backup_queries(mdp, cfg.h);
    let diag_decay = if cfg.track_shifted_pairs { scheme.shift_decay(mdp, cfg) } else { None };
    let gamma = mdp.gamma();
    let g_hm1 = gamma.powi(cfg.h as i32 - 1);

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut total_queries = 0u64;
    let mut delta0 = 0.0;
    // Running shift of the consistency diagnostic, and the signed extremes
    // of the previous iteration's evaluation noise that feed its update.
    let mut alpha = 0.0;
    let mut prev_eps = (0.0f64, 0.0f64);
    // dist_policy_value re-solves only when the policy actually changes.
    let mut policy_eval: Option<(Policy, ValueFunction)> = None;
    let mut final_policy: Option<Policy> = None;
    let mut stop_reason = None;
    let mut k = 0usize;

    while stop_reason.is_none() {
        k += 1;
        let backup = if scheme.exact() {
            tree_backup(mdp, &v, cfg.h)
        } else {
            approx_tree_backup_with_rng(
                mdp,
                &v,
                cfg.h,
                cfg.greedy_noise_bound,
                cfg.adversarial_greedy,
                &mut rng,
            )
        };
        // The violation gap of the running pair comes free with the backup:
        // the root value is exactly T_pi applied to the backed-up value.
        let gap = violation_gap(&backup.backed_value, &backup.root_value);
        if k == 1 {
            delta0 = shift_from_gap(gamma, cfg.h, gap);
        }
        let shifted_consistent = diag_decay.map(|decay| {
            if k == 1 {
                // The initial shift is defined to close this gap exactly.
                alpha = delta0;
                true
            } else {
                alpha = decay * alpha
                    + noise_shift_constant(
                        gamma,
                        cfg.h,
                        backup.realized_delta_max(),
                        prev_eps.0,
                        prev_eps.1,
                    );
                gap <= g_hm1 * (1.0 - gamma) * alpha + SHIFTED_PAIR_SLACK
            }
        });

        let (value, eval_queries) = scheme.evaluate(mdp, cfg, &backup, &v)?;

        let (mut eps_hi, mut eps_lo) = (0.0f64, 0.0f64);
        v = if cfg.eval_noise_bound > 0.0 {
            let bound = cfg.eval_noise_bound;
            eps_hi = f64::NEG_INFINITY;
            eps_lo = f64::INFINITY;
            let noisy: Vec<f64> = value
                .values()
                .iter()
                .map(|x| {
                    let eps = rng.gen_range(-bound..=bound);
                    eps_hi = eps_hi.max(eps);
                    eps_lo = eps_lo.min(eps);
                    x + eps
                })
                .collect();
            ValueFunction::from_vec(noisy).expect("bounded noise keeps values finite")
        } else {
            value
        };
        prev_eps = (eps_hi, eps_lo);

        let queries_this_iter = improve_queries + eval_queries;
        total_queries += queries_this_iter;

        let dist_value = v_star.max_norm_dist(&v);
        let dist_policy_value = match &policy_eval {
            Some((pi, value)) if *pi == backup.policy => v_star.max_norm_dist(value),
            _ => {
                let value = evaluate_policy_exact(mdp, &backup.policy)?;
                let dist = v_star.max_norm_dist(&value);
                policy_eval = Some((backup.policy.clone(), value));
                dist
            }
        };

        records.push(IterationRecord {
            k,
            dist_value,
            dist_policy_value,
            queries_this_iter,
            realized_eps_max: eps_hi.abs().max(eps_lo.abs()),
            realized_delta_max: backup.realized_delta_max(),
            shifted_consistent,
        });
        final_policy = Some(backup.policy);

        if let Some(tol) = cfg.stop.value_tol {
            if dist_value <= tol {
                stop_reason = Some(StopReason::Converged);
            }
        }
        if stop_reason.is_none()
            && cfg.stop.query_budget > 0
            && total_queries >= cfg.stop.query_budget
        {
            stop_reason = Some(StopReason::BudgetExhausted);
        }
        if stop_reason.is_none() && cfg.stop.max_iterations > 0 && k >= cfg.stop.max_iterations {
            stop_reason = Some(StopReason::MaxIterations);
        }
    }

    Ok(RunReport {
        scheme: cfg.scheme,
        h: cfg.h,
        m: cfg.m,
        lambda: cfg.lambda,
        delta0,
        iterations: records,
        final_policy: final_policy.expect("loop ran at least once"),
        final_value: v,
        total_queries,
        stop_reason: stop_reason.expect("loop exits with a reason"),
    })
}

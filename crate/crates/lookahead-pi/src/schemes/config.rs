//! Run configuration shared by every iteration scheme.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SolveError;
use crate::schemes::SchemeKind;

/// Default tolerance used when an exact-solve query charge needs a target
/// accuracy but the stopping rule does not provide one.
pub const DEFAULT_EXACT_EVAL_TOL: f64 = 1e-12;

fn default_series_tolerance() -> f64 {
    crate::bellman::DEFAULT_SERIES_TOLERANCE
}

#[derive(Debug, Error)]
pub enum RunError {
    /// The configuration names parameters the selected scheme cannot use, or
    /// omits ones it needs.
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// When to stop iterating. `query_budget = 0` and `max_iterations = 0` mean
/// "unlimited"; a valid rule must keep at least one of the three limits
/// active. Limits are checked after each completed iteration, so a query
/// budget may be overshot by at most one iteration's worth of calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Stop once `||v* - v_k||_inf` falls to this value or below.
    #[serde(default)]
    pub value_tol: Option<f64>,
    /// Stop once the cumulative simulator-query count reaches this.
    #[serde(default)]
    pub query_budget: u64,
    #[serde(default)]
    pub max_iterations: usize,
}

impl StoppingRule {
    /// Run until the value iterate is within `value_tol` of optimal, with an
    /// iteration cap as a safety net.
    pub fn until_dist(value_tol: f64, max_iterations: usize) -> Self {
        StoppingRule { value_tol: Some(value_tol), query_budget: 0, max_iterations }
    }

    /// Run until the query budget is spent.
    pub fn until_budget(query_budget: u64) -> Self {
        StoppingRule { value_tol: None, query_budget, max_iterations: 0 }
    }

    /// Run a fixed number of iterations.
    pub fn for_iterations(max_iterations: usize) -> Self {
        StoppingRule { value_tol: None, query_budget: 0, max_iterations }
    }

    fn validate(&self) -> Result<(), RunError> {
        if let Some(tol) = self.value_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(RunError::ConfigMismatch(format!(
                    "value_tol must be a positive real, got {tol}"
                )));
            }
        }
        if self.value_tol.is_none() && self.query_budget == 0 && self.max_iterations == 0 {
            return Err(RunError::ConfigMismatch(
                "stopping rule has no active limit (value_tol, query_budget, max_iterations)"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Full description of one run: which scheme, its lookahead and evaluation
/// parameters, the noise bounds, and when to stop.
///
/// `m` applies to the m-step schemes and `lambda` to the lambda-weighted
/// ones; supplying a parameter the scheme cannot consume is rejected up
/// front rather than silently ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoConfig {
    pub scheme: SchemeKind,
    /// Lookahead horizon of the improvement step (`h >= 1`).
    pub h: usize,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Bound of the per-state uniform evaluation noise added each iteration.
    #[serde(default)]
    pub eval_noise_bound: f64,
    /// Bound of the per-state greedy shortfall allowed in the improvement.
    #[serde(default)]
    pub greedy_noise_bound: f64,
    /// Realize the greedy shortfall adversarially (worst admissible action)
    /// instead of picking a random admissible action.
    #[serde(default)]
    pub adversarial_greedy: bool,
    #[serde(default)]
    pub rng_seed: u64,
    pub stop: StoppingRule,
    /// Truncation tolerance behind the lambda-return query charge.
    #[serde(default = "default_series_tolerance")]
    pub series_tolerance: f64,
    /// Record, per iteration, whether the shift-corrected pair stays
    /// h-greedy consistent (a diagnostic; never changes the iterates).
    #[serde(default)]
    pub track_shifted_pairs: bool,
}

impl AlgoConfig {
    /// A noise-free configuration with neither `m` nor `lambda` set; chain
    /// the `with_*` builders for the rest.
    pub fn new(scheme: SchemeKind, h: usize, stop: StoppingRule) -> Self {
        AlgoConfig {
            scheme,
            h,
            m: None,
            lambda: None,
            eval_noise_bound: 0.0,
            greedy_noise_bound: 0.0,
            adversarial_greedy: false,
            rng_seed: 0,
            stop,
            series_tolerance: default_series_tolerance(),
            track_shifted_pairs: false,
        }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_noise(mut self, eval_noise_bound: f64, greedy_noise_bound: f64) -> Self {
        self.eval_noise_bound = eval_noise_bound;
        self.greedy_noise_bound = greedy_noise_bound;
        self
    }

    pub fn with_adversarial_greedy(mut self) -> Self {
        self.adversarial_greedy = true;
        self
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    pub fn with_shifted_tracking(mut self) -> Self {
        self.track_shifted_pairs = true;
        self
    }

    /// Checks the scheme-independent invariants, then hands off to the
    /// selected scheme for its parameter requirements. Returns the scheme so
    /// callers validate and resolve in one step.
    pub fn validate(&self) -> Result<&'static dyn crate::schemes::Scheme, RunError> {
        if self.h < 1 {
            return Err(RunError::ConfigMismatch("lookahead horizon h must be >= 1".into()));
        }
        for (name, bound) in [
            ("eval_noise_bound", self.eval_noise_bound),
            ("greedy_noise_bound", self.greedy_noise_bound),
        ] {
            if !(bound >= 0.0 && bound.is_finite()) {
                return Err(RunError::ConfigMismatch(format!(
                    "{name} must be a nonnegative real, got {bound}"
                )));
            }
        }
        if !(self.series_tolerance > 0.0 && self.series_tolerance.is_finite()) {
            return Err(RunError::ConfigMismatch(format!(
                "series_tolerance must be a positive real, got {}",
                self.series_tolerance
            )));
        }
        if let Some(m) = self.m {
            if m < 1 {
                return Err(RunError::ConfigMismatch("m must be >= 1".into()));
            }
        }
        if let Some(lambda) = self.lambda {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(RunError::ConfigMismatch(format!(
                    "lambda must lie in [0, 1], got {lambda}"
                )));
            }
        }
        self.stop.validate()?;
        let scheme = crate::schemes::scheme_for(self.scheme);
        scheme.check_config(self)?;
        Ok(scheme)
    }

    /// Target accuracy charged for exact policy evaluation (and the
    /// `lambda = 1` return, which is the same computation).
    pub fn exact_eval_tol(&self) -> f64 {
        self.stop.value_tol.unwrap_or(DEFAULT_EXACT_EVAL_TOL)
    }

    pub(crate) fn required_m(&self) -> usize {
        self.m.expect("validated config carries m")
    }

    pub(crate) fn required_lambda(&self) -> f64 {
        self.lambda.expect("validated config carries lambda")
    }
}

//! The iteration schemes: policy improvement by h-step lookahead combined
//! with different partial-evaluation rules.
//!
//! Every scheme shares the same improvement step — an (optionally noisy)
//! h-step lookahead — and differs only in how it turns the lookahead's
//! byproducts into the next value iterate:
//!
//! | scheme            | next value (before noise)                     |
//! |-------------------|-----------------------------------------------|
//! | `h-pi`            | exact `v_pi` (classical policy iteration)     |
//! | `hm-pi`           | `(T_pi)^m` applied to the backed-up value     |
//! | `hlambda-pi`      | lambda-return of the backed-up value          |
//! | `nc-hm-pi`        | `(T_pi)^m` applied to the raw iterate         |
//! | `nc-hlambda-pi`   | lambda-return of the raw iterate              |
//! | `hm-pi-root`      | `(T_pi)^(m-1)` applied to the root value      |
//! | `hlambda-pi-root` | lambda-bar return of the root value           |
//!
//! The `nc-` ("non-contracting") variants discard the backed-up value and
//! evaluate from the raw iterate; their one-step error coefficient can
//! exceed one, which is what the worst-case chain in [`crate::envs`]
//! realizes. The `-root` variants consume the root value instead of the
//! backed-up one and are value-for-value equivalent to their plain
//! counterparts.
//!
//! Implementations are zero-sized and registered in [`SCHEMES`]; select one
//! at runtime via [`scheme_by_name`] (CLI/config strings) or [`scheme_for`].

mod config;
pub mod cost;
mod run;

pub use config::{AlgoConfig, RunError, StoppingRule, DEFAULT_EXACT_EVAL_TOL};
pub use run::{run, run_with_oracle, IterationRecord, RunReport, StopReason, TRACE_CSV_HEADER};

use serde::{Deserialize, Serialize};

use crate::bellman::{bar_lambda_return, lambda_return, m_return, LambdaParams};
use crate::lookahead::TreeBackupResult;
use crate::mdp::{evaluate_policy_exact, Mdp, ValueFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "h-pi")]
    HPi,
    #[serde(rename = "hm-pi")]
    HmPi,
    #[serde(rename = "hlambda-pi")]
    HLambdaPi,
    #[serde(rename = "nc-hm-pi")]
    NcHmPi,
    #[serde(rename = "nc-hlambda-pi")]
    NcHLambdaPi,
    #[serde(rename = "hm-pi-root")]
    HmPiRoot,
    #[serde(rename = "hlambda-pi-root")]
    HLambdaPiRoot,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::HPi,
        SchemeKind::HmPi,
        SchemeKind::HLambdaPi,
        SchemeKind::NcHmPi,
        SchemeKind::NcHLambdaPi,
        SchemeKind::HmPiRoot,
        SchemeKind::HLambdaPiRoot,
    ];

    /// Canonical identifier, used in configs, CSV rows, and CLI arguments.
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::HPi => "h-pi",
            SchemeKind::HmPi => "hm-pi",
            SchemeKind::HLambdaPi => "hlambda-pi",
            SchemeKind::NcHmPi => "nc-hm-pi",
            SchemeKind::NcHLambdaPi => "nc-hlambda-pi",
            SchemeKind::HmPiRoot => "hm-pi-root",
            SchemeKind::HLambdaPiRoot => "hlambda-pi-root",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SchemeKind::ALL
            .into_iter()
            .find(|kind| kind.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = SchemeKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown scheme '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// One iteration scheme: a named evaluation rule over the shared lookahead
/// improvement. Implementations are stateless.
pub trait Scheme: Sync {
    fn kind(&self) -> SchemeKind;

    fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Rejects configs that carry parameters this scheme cannot consume or
    /// miss ones it requires.
    fn check_config(&self, cfg: &AlgoConfig) -> Result<(), RunError>;

    /// True when the improvement step must be the exact lookahead (no greedy
    /// noise) and the evaluation is exact.
    fn exact(&self) -> bool {
        false
    }

    /// One evaluation step: maps the improvement byproducts and the current
    /// iterate to the next value (before evaluation noise) and its query
    /// charge.
    fn evaluate(
        &self,
        mdp: &Mdp,
        cfg: &AlgoConfig,
        backup: &TreeBackupResult,
        current: &ValueFunction,
    ) -> Result<(ValueFunction, u64), RunError>;

    /// How much one evaluation step scales a constant shift of the iterate,
    /// i.e. the per-iteration decay of the consistency-restoring correction.
    /// `None` when the shifted-pair diagnostic does not apply to this
    /// scheme.
    fn shift_decay(&self, mdp: &Mdp, cfg: &AlgoConfig) -> Option<f64> {
        let _ = (mdp, cfg);
        None
    }
}

fn require_m(cfg: &AlgoConfig, scheme: &str) -> Result<(), RunError> {
    if cfg.m.is_none() {
        return Err(RunError::ConfigMismatch(format!("{scheme} requires m")));
    }
    if cfg.lambda.is_some() {
        return Err(RunError::ConfigMismatch(format!(
            "{scheme} is an m-step scheme; lambda does not apply"
        )));
    }
    Ok(())
}

fn require_lambda(cfg: &AlgoConfig, scheme: &str) -> Result<(), RunError> {
    if cfg.lambda.is_none() {
        return Err(RunError::ConfigMismatch(format!("{scheme} requires lambda")));
    }
    if cfg.m.is_some() {
        return Err(RunError::ConfigMismatch(format!(
            "{scheme} is a lambda-weighted scheme; m does not apply"
        )));
    }
    Ok(())
}

fn lambda_params(cfg: &AlgoConfig) -> Result<LambdaParams, RunError> {
    LambdaParams::new(cfg.required_lambda())
        .and_then(|lp| lp.with_series_tolerance(cfg.series_tolerance))
        .map_err(|e| RunError::ConfigMismatch(e.to_string()))
}

struct HPi;

impl Scheme for HPi {
    fn kind(&self) -> SchemeKind {
        SchemeKind::HPi
    }

    fn check_config(&self, cfg: &AlgoConfig) -> Result<(), RunError> {
        if cfg.m.is_some() || cfg.lambda.is_some() {
            return Err(RunError::ConfigMismatch(
                "h-pi evaluates exactly; m and lambda do not apply".into(),
            ));
        }
        if cfg.eval_noise_bound != 0.0 || cfg.greedy_noise_bound != 0.0 {
            return Err(RunError::ConfigMismatch(
                "h-pi is the exact baseline; noise bounds must be zero".into(),
            ));
        }
        Ok(())
    }

    fn exact(&self) -> bool {
        true
    }

    fn evaluate(
        &self,
        mdp: &Mdp,
        cfg: &AlgoConfig,
        backup: &TreeBackupResult,
        _current: &ValueFunction,
    ) -> Result<(ValueFunction, u64), RunError> {
        let value = evaluate_policy_exact(mdp, &backup.policy)?;
        Ok((value, cost::exact_eval_queries(mdp, cfg.exact_eval_tol())))
    }
}

struct HmPi;

impl Scheme for HmPi {
    fn kind(&self) -> SchemeKind {
        SchemeKind::HmPi
    }

    fn check_config(&self, cfg: &AlgoConfig) -> Result<(), RunError> {
        require_m(cfg, "hm-pi")
    }

    fn evaluate(
        &self,
        mdp: &Mdp,
        cfg: &AlgoConfig,
        backup: &TreeBackupResult,
        _current: &ValueFunction,
    ) -> Result<(ValueFunction, u64), RunError> {
        let m = cfg.required_m();
        let value = m_return(mdp, &backup.policy, &backup.backed_value, m);
        Ok((value, cost::m_return_queries(mdp, m)))
    }

    fn shift_decay(&self, mdp: &Mdp, cfg: &AlgoConfig) -> Option<f64> {
        // A constant shift passes through T^(h-1) scaled by gamma^(h-1) and
        // through each of the m policy sweeps scaled by gamma.
        Some(mdp.gamma().powi((cfg.h - 1 + cfg.required_m()) as i32))
    }
}

struct HLambdaPi;

impl Scheme for HLambdaPi {
    fn kind(&self) -> SchemeKind {
        SchemeKind::HLambdaPi
    }

    fn check_config(&self, cfg: &AlgoConfig) -> Result<(), RunError> {
        require_lambda(cfg, "hlambda-pi")
    }

    fn evaluate(
        &self,
        mdp: &Mdp,
        cfg: &AlgoConfig,
        backup: &TreeBackupResult,
        _current: &ValueFunction,
    ) -> Result<(ValueFunction, u64), RunError> {
        let lp = lambda_params(cfg)?;
        let value = lambda_return(mdp, &backup.policy, &backup.backed_value, &lp)?;
        let queries =
            cost::lambda_return_queries(mdp, lp.lambda(), cfg.series_tolerance, cfg.exact_eval_tol());
        Ok((value, queries))
    }

    fn shift_decay(&self, mdp: &Mdp, cfg: &AlgoConfig) -> Option<f64> {
        // The lambda-return scales a constant shift by
        // gamma (1 - lambda) / (1 - gamma lambda), on top of the gamma^(h-1)
        // from the backup.
        let gamma = mdp.gamma();
        let lambda = cfg.required_lambda();
        Some(
            gamma.powi(cfg.h as i32 - 1) * gamma * (1.0 - lambda) / (1.0 - gamma * lambda),
        )
    }
}

struct NcHmPi;

impl Scheme for NcHmPi {
    fn kind(&self) -> SchemeKind {
        SchemeKind::NcHmPi
    }

    fn check_config(&self, cfg: &AlgoConfig) -> Result<(), RunError> {
        require_m(cfg, "nc-hm-pi")
    }

    fn evaluate(
        &self,
        mdp: &Mdp,
        cfg: &AlgoConfig,
        backup: &TreeBackupResult,
        current: &ValueFunction,
    ) -> Result<(ValueFunction, u64), RunError> {
        let m = cfg.required_m();
        let value = m_return(mdp, &backup.policy, current, m);
        Ok((value, cost::m_return_queries(mdp, m)))
    }
}

struct NcHLambdaPi;

impl Scheme for NcHLambdaPi {
    fn kind(&self) -> SchemeKind {
        SchemeKind::NcHLambdaPi
    }

    fn check_config(&self, cfg: &AlgoConfig) -> Result<(), RunError> {
        require_lambda(cfg, "nc-hlambda-pi")
    }

    fn evaluate(
        &self,
        mdp: &Mdp,
        cfg: &AlgoConfig,
        backup: &TreeBackupResult,
        current: &ValueFunction,
    ) -> Result<(ValueFunction, u64), RunError> {
        let lp = lambda_params(cfg)?;
        let value = lambda_return(mdp, &backup.policy, current, &lp)?;
        let queries =
            cost::lambda_return_queries(mdp, lp.lambda(), cfg.series_tolerance, cfg.exact_eval_tol());
        Ok((value, queries))
    }
}

struct HmPiRoot;

impl Scheme for HmPiRoot {
    fn kind(&self) -> SchemeKind {
        SchemeKind::HmPiRoot
    }

    fn check_config(&self, cfg: &AlgoConfig) -> Result<(), RunError> {
        require_m(cfg, "hm-pi-root")
    }

    fn evaluate(
        &self,
        mdp: &Mdp,
        cfg: &AlgoConfig,
        backup: &TreeBackupResult,
        _current: &ValueFunction,
    ) -> Result<(ValueFunction, u64), RunError> {
        // The root value is already one policy sweep past the backed-up
        // value, so only m - 1 further sweeps are needed (and charged).
        let m = cfg.required_m();
        if m == 1 {
            return Ok((backup.root_value.clone(), 0));
        }
        let value = m_return(mdp, &backup.policy, &backup.root_value, m - 1);
        Ok((value, cost::m_return_queries(mdp, m - 1)))
    }
}

struct HLambdaPiRoot;

impl Scheme for HLambdaPiRoot {
    fn kind(&self) -> SchemeKind {
        SchemeKind::HLambdaPiRoot
    }

    fn check_config(&self, cfg: &AlgoConfig) -> Result<(), RunError> {
        require_lambda(cfg, "hlambda-pi-root")
    }

    fn evaluate(
        &self,
        mdp: &Mdp,
        cfg: &AlgoConfig,
        backup: &TreeBackupResult,
        _current: &ValueFunction,
    ) -> Result<(ValueFunction, u64), RunError> {
        let lp = lambda_params(cfg)?;
        let value = bar_lambda_return(mdp, &backup.policy, &backup.root_value, &lp)?;
        let queries = if lp.lambda() == 0.0 {
            // The lambda-bar return at lambda = 0 is the root value itself.
            0
        } else {
            cost::lambda_return_queries(mdp, lp.lambda(), cfg.series_tolerance, cfg.exact_eval_tol())
        };
        Ok((value, queries))
    }
}

/// Every scheme, in the [`SchemeKind::ALL`] order.
pub static SCHEMES: [&dyn Scheme; 7] =
    [&HPi, &HmPi, &HLambdaPi, &NcHmPi, &NcHLambdaPi, &HmPiRoot, &HLambdaPiRoot];

/// Resolves a canonical scheme name (as used in configs and CSV output).
pub fn scheme_by_name(name: &str) -> Option<&'static dyn Scheme> {
    SCHEMES.iter().copied().find(|s| s.name() == name)
}

pub fn scheme_for(kind: SchemeKind) -> &'static dyn Scheme {
    SCHEMES
        .iter()
        .copied()
        .find(|s| s.kind() == kind)
        .expect("every kind is registered")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_covers_every_kind_under_its_canonical_name() {
        for kind in SchemeKind::ALL {
            let scheme = scheme_for(kind);
            assert_eq!(scheme.kind(), kind);
            let by_name = scheme_by_name(kind.name()).expect("name resolves");
            assert_eq!(by_name.kind(), kind);
            assert_eq!(kind.name().parse::<SchemeKind>(), Ok(kind));
            // The serde spelling and the canonical name agree.
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert!(scheme_by_name("pi").is_none());
        assert!("x-pi".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn parameter_requirements_are_enforced() {
        let stop = StoppingRule::for_iterations(5);
        let reject = |cfg: AlgoConfig| {
            assert!(
                matches!(cfg.validate(), Err(RunError::ConfigMismatch(_))),
                "accepted {cfg:?}"
            );
        };
        // m-schemes need m and refuse lambda.
        reject(AlgoConfig::new(SchemeKind::HmPi, 2, stop));
        reject(AlgoConfig::new(SchemeKind::HmPi, 2, stop).with_m(2).with_lambda(0.5));
        reject(AlgoConfig::new(SchemeKind::NcHmPi, 2, stop).with_lambda(0.5));
        reject(AlgoConfig::new(SchemeKind::HmPiRoot, 2, stop));
        // lambda-schemes need lambda and refuse m.
        reject(AlgoConfig::new(SchemeKind::HLambdaPi, 2, stop));
        reject(AlgoConfig::new(SchemeKind::HLambdaPi, 2, stop).with_lambda(0.5).with_m(1));
        reject(AlgoConfig::new(SchemeKind::NcHLambdaPi, 2, stop).with_m(3));
        reject(AlgoConfig::new(SchemeKind::HLambdaPiRoot, 2, stop));
        // The exact baseline takes neither parameters nor noise.
        reject(AlgoConfig::new(SchemeKind::HPi, 2, stop).with_m(1));
        reject(AlgoConfig::new(SchemeKind::HPi, 2, stop).with_noise(0.1, 0.0));
        // Out-of-range values.
        reject(AlgoConfig::new(SchemeKind::HmPi, 0, stop).with_m(1));
        reject(AlgoConfig::new(SchemeKind::HmPi, 2, stop).with_m(0));
        reject(AlgoConfig::new(SchemeKind::HLambdaPi, 2, stop).with_lambda(1.5));
        reject(AlgoConfig::new(SchemeKind::HmPi, 2, stop).with_m(1).with_noise(-0.1, 0.0));
        // No active stopping limit.
        reject(AlgoConfig::new(
            SchemeKind::HmPi,
            2,
            StoppingRule { value_tol: None, query_budget: 0, max_iterations: 0 },
        )
        .with_m(1));

        // And the well-formed versions pass.
        for kind in SchemeKind::ALL {
            let mut cfg = AlgoConfig::new(kind, 2, stop);
            match kind {
                SchemeKind::HmPi | SchemeKind::NcHmPi | SchemeKind::HmPiRoot => {
                    cfg = cfg.with_m(2);
                }
                SchemeKind::HLambdaPi | SchemeKind::NcHLambdaPi | SchemeKind::HLambdaPiRoot => {
                    cfg = cfg.with_lambda(0.5);
                }
                SchemeKind::HPi => {}
            }
            assert!(cfg.validate().is_ok(), "rejected {cfg:?}");
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = AlgoConfig::new(SchemeKind::HLambdaPi, 3, StoppingRule::until_dist(1e-7, 100))
            .with_lambda(0.7)
            .with_noise(0.3, 0.0)
            .with_seed(11);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: AlgoConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        // Unknown fields are config errors, not silent drops.
        assert!(serde_json::from_str::<AlgoConfig>(
            "{\"scheme\":\"hm-pi\",\"h\":2,\"em\":3,\"stop\":{\"max_iterations\":5}}"
        )
        .is_err());
        // Omitted optional fields take their defaults.
        let sparse: AlgoConfig = serde_json::from_str(
            "{\"scheme\":\"hm-pi\",\"h\":2,\"m\":3,\"stop\":{\"max_iterations\":5}}",
        )
        .unwrap();
        assert_eq!(sparse.m, Some(3));
        assert_eq!(sparse.eval_noise_bound, 0.0);
        assert_eq!(sparse.series_tolerance, crate::bellman::DEFAULT_SERIES_TOLERANCE);
        assert!(sparse.validate().is_ok());
    }
}

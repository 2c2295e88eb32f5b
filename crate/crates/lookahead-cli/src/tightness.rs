//! `tightness`: measures the worst-case chain's one-step error ratios and
//! compares them to their closed forms.

use lookahead_pi::bellman::{lambda_return, m_return, LambdaParams};
use lookahead_pi::envs::{build_counterexample, CounterexampleSpec, EnvError};
use lookahead_pi::mdp::optimal_value;

use crate::config::Resolved;
use crate::output::write_csv;
use crate::CliError;

pub const HEADER: &str = "route,gamma,h,param,predicted,measured,abs_error,config_hash";

pub fn cmd_tightness(cfg: &Resolved) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut mismatches = 0usize;
    for &gamma in &cfg.gammas {
        for &h in &cfg.h_values {
            let (mdp, v, pi) =
                build_counterexample(&CounterexampleSpec { gamma, h }).map_err(|e| match e {
                    EnvError::BadSpec(msg) => CliError::Config(msg),
                    other => CliError::Check(other.to_string()),
                })?;
            let (v_star, _) = optimal_value(&mdp);
            let den = v_star.max_norm_dist(&v);
            let g_h = gamma.powi(h as i32);
            for &m in &cfg.m_values {
                let predicted = gamma.powi(m as i32) + g_h;
                let measured = v_star.max_norm_dist(&m_return(&mdp, &pi, &v, m)) / den;
                let abs_error = (measured - predicted).abs();
                if abs_error > cfg.tolerance {
                    mismatches += 1;
                }
                rows.push(format!(
                    "m,{gamma},{h},{m},{predicted},{measured},{abs_error},{}",
                    cfg.hash
                ));
            }
            for &lambda in &cfg.lambdas {
                let lp = LambdaParams::new(lambda)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let predicted = g_h + gamma * (1.0 - lambda) / (1.0 - gamma * lambda);
                let evaluated = lambda_return(&mdp, &pi, &v, &lp)
                    .map_err(|e| CliError::Check(e.to_string()))?;
                let measured = v_star.max_norm_dist(&evaluated) / den;
                let abs_error = (measured - predicted).abs();
                if abs_error > cfg.tolerance {
                    mismatches += 1;
                }
                rows.push(format!(
                    "lambda,{gamma},{h},{lambda},{predicted},{measured},{abs_error},{}",
                    cfg.hash
                ));
            }
        }
    }
    write_csv(&cfg.output_path, HEADER, &rows)?;
    println!("wrote {} rows to {}", rows.len(), cfg.output_path.display());
    if mismatches > 0 {
        return Err(CliError::Check(format!(
            "{mismatches} ratio(s) deviate from the closed form by more than {}",
            cfg.tolerance
        )));
    }
    println!("all ratios match their closed forms within {}", cfg.tolerance);
    Ok(())
}

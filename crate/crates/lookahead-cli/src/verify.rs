//! `verify`: runs every library invariant suite on seeded random instances
//! and reports per-suite pass counts. The optional fault injection corrupts
//! one fixture's transition row before validation, demonstrating that bad
//! model data cannot slip through.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use lookahead_pi::bellman::{
    apply_t_opt, apply_t_pi, bar_lambda_return, lambda_return, m_return, LambdaParams,
};
use lookahead_pi::consistency::{
    check_consistency, shift_to_consistent, verify_gamma_h_contraction_with,
    verify_monotone_chain,
};
use lookahead_pi::envs::{initial_value, random_mdp, RandomMdpSpec};
use lookahead_pi::lookahead::{approx_tree_backup, is_in_h_greedy_set, tree_backup, GreedyNoise};
use lookahead_pi::mdp::{evaluate_policy_exact, optimal_value, Mdp, Policy, ValueFunction};
use lookahead_pi::schemes::{run_with_oracle, AlgoConfig, SchemeKind, StopReason, StoppingRule};

use crate::config::Resolved;
use crate::CliError;

struct SuiteOutcome {
    name: &'static str,
    checks: usize,
    failure: Option<String>,
}

/// Runs per-seed checks in parallel and folds them into one outcome,
/// keeping the failure of the smallest seed for determinism.
fn run_suite<F>(name: &'static str, seeds: &[u64], check: F) -> SuiteOutcome
where
    F: Fn(u64) -> Result<usize, String> + Sync,
{
    let results: Vec<Result<usize, String>> = seeds.par_iter().map(|&s| check(s)).collect();
    let mut checks = 0;
    let mut failure = None;
    for result in results {
        match result {
            Ok(n) => checks += n,
            Err(msg) => {
                failure = Some(msg);
                break;
            }
        }
    }
    SuiteOutcome { name, checks, failure }
}

fn fixture(seed: u64) -> (Mdp, Policy, ValueFunction) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xC0FFEE);
    let mdp = random_mdp(&RandomMdpSpec {
        n_states: rng.gen_range(3..=10),
        n_actions: rng.gen_range(2..=4),
        gamma: 0.8 + 0.19 * rng.gen::<f64>(),
        rng_seed: seed ^ 0xFEED,
    });
    let pi =
        Policy::new((0..mdp.n_states()).map(|_| rng.gen_range(0..mdp.n_actions())).collect());
    let v = initial_value(mdp.n_states(), seed ^ 0xBEEF);
    (mdp, pi, v)
}

fn ensure(ok: bool, count: &mut usize, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        *count += 1;
        Ok(())
    } else {
        Err(msg())
    }
}

fn suite_mdp(seeds: &[u64], inject_fault: bool) -> SuiteOutcome {
    let first = seeds.first().copied();
    run_suite("mdp", seeds, move |seed| {
        let mut n = 0;
        let (mdp, pi, _) = fixture(seed);
        n += 1; // construction validated the tables

        let json = mdp.to_json();
        let reparsed = Mdp::from_json(&json).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(reparsed.to_json() == json, &mut n, || {
            format!("seed {seed}: JSON round trip altered the model")
        })?;

        // A corrupted transition row can never pass: either validation
        // rejects the fixture (the expected path) or the corruption slipped
        // through — both end the suite.
        if inject_fault && Some(seed) == first {
            let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
            value["transitions"][0][0][0] =
                serde_json::json!(value["transitions"][0][0][0].as_f64().unwrap() + 0.5);
            return match Mdp::from_json(&value.to_string()) {
                Err(e) => Err(format!("seed {seed}: fixture failed validation: {e}")),
                Ok(_) => Err(format!("seed {seed}: corrupted fixture went undetected")),
            };
        }

        let v_pi = evaluate_policy_exact(&mdp, &pi).map_err(|e| format!("seed {seed}: {e}"))?;
        let residual = v_pi.max_norm_dist(&apply_t_pi(&mdp, &pi, &v_pi));
        ensure(residual <= 1e-10, &mut n, || {
            format!("seed {seed}: evaluation fixed-point residual {residual:.2e}")
        })?;

        let (v_star, greedy) = optimal_value(&mdp);
        let v_greedy = evaluate_policy_exact(&mdp, &greedy).unwrap();
        ensure(v_star.max_norm_dist(&v_greedy) <= 1e-9, &mut n, || {
            format!("seed {seed}: optimal value does not match its greedy policy")
        })?;
        ensure(v_pi.le_within(&v_star, 1e-10), &mut n, || {
            format!("seed {seed}: a policy value exceeds the optimum")
        })?;
        Ok(n)
    })
}

fn suite_bellman(seeds: &[u64]) -> SuiteOutcome {
    run_suite("bellman", seeds, |seed| {
        let mut n = 0;
        let (mdp, pi, v) = fixture(seed);
        let w = initial_value(mdp.n_states(), seed ^ 0xD00D);
        let gamma = mdp.gamma();

        let m = 2 + (seed as usize) % 5;
        let stepped = apply_t_pi(&mdp, &pi, &v);
        let split = m_return(&mdp, &pi, &stepped, m - 1).max_norm_dist(&m_return(&mdp, &pi, &v, m));
        ensure(split <= 1e-10, &mut n, || format!("seed {seed}: m-step split off by {split:.2e}"))?;

        let lp = LambdaParams::new([0.0, 0.3, 0.7, 0.95, 1.0][(seed as usize) % 5]).unwrap();
        let root_form = bar_lambda_return(&mdp, &pi, &stepped, &lp)
            .and_then(|x| Ok(x.max_norm_dist(&lambda_return(&mdp, &pi, &v, &lp)?)))
            .map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(root_form <= 1e-10, &mut n, || {
            format!("seed {seed}: root-form identity off by {root_form:.2e}")
        })?;

        let alpha = 1.5;
        let shift = apply_t_pi(&mdp, &pi, &v.shifted(alpha))
            .max_norm_dist(&apply_t_pi(&mdp, &pi, &v).shifted(gamma * alpha));
        ensure(shift <= 1e-10, &mut n, || {
            format!("seed {seed}: constant shift off by {shift:.2e}")
        })?;

        let lhs = apply_t_opt(&mdp, &v).max_norm_dist(&apply_t_opt(&mdp, &w));
        let rhs = gamma * v.max_norm_dist(&w) + 1e-12;
        ensure(lhs <= rhs, &mut n, || {
            format!("seed {seed}: contraction violated ({lhs:.6} > {rhs:.6})")
        })?;
        Ok(n)
    })
}

fn suite_lookahead(seeds: &[u64]) -> SuiteOutcome {
    run_suite("lookahead", seeds, |seed| {
        let mut n = 0;
        let (mdp, _, v) = fixture(seed);
        let h = 1 + (seed as usize) % 4;
        let backup = tree_backup(&mdp, &v, h);

        let mut power = v.clone();
        for _ in 1..h {
            power = apply_t_opt(&mdp, &power);
        }
        let d_backed = backup.backed_value.max_norm_dist(&power);
        ensure(d_backed <= 1e-12, &mut n, || {
            format!("seed {seed}: backed value differs from the operator power by {d_backed:.2e}")
        })?;

        let d_root =
            backup.root_value.max_norm_dist(&apply_t_pi(&mdp, &backup.policy, &backup.backed_value));
        ensure(d_root <= 1e-12, &mut n, || {
            format!("seed {seed}: root value is not one policy backup of the children")
        })?;

        ensure(is_in_h_greedy_set(&mdp, &v, &backup.policy, h), &mut n, || {
            format!("seed {seed}: exact policy escaped its own greedy set")
        })?;

        let delta = 0.2;
        let noisy = approx_tree_backup(&mdp, &v, h, &GreedyNoise::new(delta, seed).adversarial());
        let slack_ok = noisy.realized_delta_max() <= delta + 1e-12
            && noisy
                .root_value
                .values()
                .iter()
                .zip(backup.root_value.values().iter())
                .all(|(a, e)| *a >= e - delta - 1e-12 && *a <= e + 1e-12);
        ensure(slack_ok, &mut n, || {
            format!("seed {seed}: approximate greedy step exceeded its slack")
        })?;
        Ok(n)
    })
}

fn suite_consistency(seeds: &[u64]) -> SuiteOutcome {
    run_suite("consistency", seeds, |seed| {
        let mut n = 0;
        let (mdp, _, _) = fixture(seed);
        let h = 1 + (seed as usize) % 3;
        let pessimistic =
            ValueFunction::constant(mdp.n_states(), mdp.r_min() / (1.0 - mdp.gamma()));
        let backup = tree_backup(&mdp, &pessimistic, h);

        let report = check_consistency(&mdp, &pessimistic, &backup.policy, h);
        ensure(report.consistent && report.shift_delta == 0.0, &mut n, || {
            format!("seed {seed}: pessimistic pair reported inconsistent")
        })?;

        let chain = verify_monotone_chain(&mdp, &pessimistic, &backup.policy, h, 10)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(chain, &mut n, || format!("seed {seed}: evaluation chain not monotone"))?;

        let (v_star, _) = optimal_value(&mdp);
        let lp = LambdaParams::new([0.0, 0.5, 0.9][(seed as usize) % 3]).unwrap();
        let m = 1 + (seed as usize) % 5;
        let (ratio_m, ratio_l) =
            verify_gamma_h_contraction_with(&mdp, &pessimistic, h, m, &lp, &v_star)
                .map_err(|e| format!("seed {seed}: {e}"))?;
        let bound = mdp.gamma().powi(h as i32) + 1e-10;
        ensure(ratio_m <= bound && ratio_l <= bound, &mut n, || {
            format!("seed {seed}: contraction ratios {ratio_m:.6}/{ratio_l:.6} exceed {bound:.6}")
        })?;

        // An arbitrary (possibly inconsistent) pair is repaired by its shift.
        let mut spiked = v_star.values().to_vec();
        spiked[0] += 25.0;
        let spiked = ValueFunction::from_vec(spiked).unwrap();
        let pi = tree_backup(&mdp, &spiked, h).policy;
        let repaired = shift_to_consistent(&mdp, &spiked, &pi, h);
        ensure(check_consistency(&mdp, &repaired, &pi, h).consistent, &mut n, || {
            format!("seed {seed}: shift failed to restore consistency")
        })?;
        Ok(n)
    })
}

fn suite_schemes(seeds: &[u64]) -> SuiteOutcome {
    run_suite("schemes", seeds, |seed| {
        let mut n = 0;
        let (mdp, _, v0) = fixture(seed);
        let (v_star, _) = optimal_value(&mdp);
        let m = 1 + (seed as usize) % 3;

        // Depth-one lookahead: the contracting and non-contracting updates
        // coincide exactly, queries included.
        let stop = StoppingRule::for_iterations(6);
        let hm = AlgoConfig::new(SchemeKind::HmPi, 1, stop).with_m(m);
        let nc = AlgoConfig::new(SchemeKind::NcHmPi, 1, stop).with_m(m);
        let hm_report = run_with_oracle(&mdp, &v0, &hm, &v_star).map_err(|e| e.to_string())?;
        let nc_report = run_with_oracle(&mdp, &v0, &nc, &v_star).map_err(|e| e.to_string())?;
        let coincide = hm_report.total_queries == nc_report.total_queries
            && hm_report.final_value.max_norm_dist(&nc_report.final_value) == 0.0;
        ensure(coincide, &mut n, || format!("seed {seed}: depth-one schemes diverged"))?;

        // Root-value variant reproduces the backed-value variant.
        let h = 1 + (seed as usize) % 3;
        let stop = StoppingRule::for_iterations(8);
        let base = AlgoConfig::new(SchemeKind::HmPi, h, stop).with_m(m);
        let root = AlgoConfig::new(SchemeKind::HmPiRoot, h, stop).with_m(m);
        let base_report = run_with_oracle(&mdp, &v0, &base, &v_star).map_err(|e| e.to_string())?;
        let root_report = run_with_oracle(&mdp, &v0, &root, &v_star).map_err(|e| e.to_string())?;
        let d = base_report.final_value.max_norm_dist(&root_report.final_value);
        ensure(d <= 1e-10, &mut n, || {
            format!("seed {seed}: root variant diverged by {d:.2e}")
        })?;

        // A query budget is overshot by at most one iteration.
        let per_iter = (h * mdp.n_states() * mdp.n_actions() + m * mdp.n_states()) as u64;
        let budget = 3 * per_iter + 1;
        let capped = AlgoConfig::new(SchemeKind::HmPi, h, StoppingRule::until_budget(budget))
            .with_m(m);
        let capped_report =
            run_with_oracle(&mdp, &v0, &capped, &v_star).map_err(|e| e.to_string())?;
        let budget_ok = capped_report.stop_reason == StopReason::BudgetExhausted
            && capped_report.n_iterations() == 4
            && capped_report.total_queries == 4 * per_iter;
        ensure(budget_ok, &mut n, || {
            format!(
                "seed {seed}: budget stop ran {} iterations for {} queries",
                capped_report.n_iterations(),
                capped_report.total_queries
            )
        })?;

        // Per-iteration charges add up, under noise too.
        let noisy = AlgoConfig::new(SchemeKind::HmPi, h, StoppingRule::for_iterations(5))
            .with_m(m)
            .with_noise(0.2, 0.1)
            .with_seed(seed);
        let noisy_report =
            run_with_oracle(&mdp, &v0, &noisy, &v_star).map_err(|e| e.to_string())?;
        let summed: u64 = noisy_report.iterations.iter().map(|r| r.queries_this_iter).sum();
        ensure(summed == noisy_report.total_queries, &mut n, || {
            format!("seed {seed}: per-iteration charges do not sum to the total")
        })?;
        Ok(n)
    })
}

pub fn cmd_verify(cfg: &Resolved, inject_fault: bool) -> Result<(), CliError> {
    let seeds = &cfg.seeds;
    let outcomes = [
        suite_mdp(seeds, inject_fault),
        suite_bellman(seeds),
        suite_lookahead(seeds),
        suite_consistency(seeds),
        suite_schemes(seeds),
    ];
    let mut failing = Vec::new();
    for outcome in &outcomes {
        match &outcome.failure {
            None => println!("suite {}: {} checks passed", outcome.name, outcome.checks),
            Some(msg) => {
                println!(
                    "suite {}: FAILED after {} checks: {msg}",
                    outcome.name, outcome.checks
                );
                failing.push(outcome.name);
            }
        }
    }
    if failing.is_empty() {
        println!("all suites passed");
        Ok(())
    } else {
        Err(CliError::Check(format!("failing suites: {}", failing.join(", "))))
    }
}

//! `contraction`: samples random models with a consistent (pessimistic)
//! start and checks that one improvement-plus-evaluation step contracts the
//! distance to the optimum by at least `gamma^h`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use lookahead_pi::bellman::LambdaParams;
use lookahead_pi::consistency::verify_gamma_h_contraction_with;
use lookahead_pi::envs::{random_mdp, RandomMdpSpec};
use lookahead_pi::mdp::{optimal_value, ValueFunction};

use crate::config::Resolved;
use crate::output::write_csv;
use crate::CliError;

pub const HEADER: &str =
    "seed,n_states,n_actions,gamma,h,m,lambda,ratio_m,ratio_lambda,bound,config_hash";

struct Instance {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
}

/// Derives the model shape for one seeded instance; the discount is drawn
/// from the configured `[lo, hi]` interval.
fn instance_for(seed: u64, gammas: &[f64]) -> Instance {
    let lo = gammas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = gammas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Instance {
        n_states: rng.gen_range(2..=10),
        n_actions: rng.gen_range(2..=4),
        gamma: lo + (hi - lo) * rng.gen::<f64>(),
    }
}

pub fn cmd_contraction(cfg: &Resolved) -> Result<(), CliError> {
    let results: Vec<Result<(Vec<String>, usize), CliError>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let inst = instance_for(seed, &cfg.gammas);
            let mdp = random_mdp(&RandomMdpSpec {
                n_states: inst.n_states,
                n_actions: inst.n_actions,
                gamma: inst.gamma,
                rng_seed: seed ^ 0x9E37_79B9_7F4A_7C15,
            });
            let (v_star, _) = optimal_value(&mdp);
            let v = ValueFunction::constant(mdp.n_states(), mdp.r_min() / (1.0 - mdp.gamma()));
            let mut rows = Vec::new();
            let mut violations = 0usize;
            for &h in &cfg.h_values {
                let bound = inst.gamma.powi(h as i32) + cfg.tolerance;
                for &m in &cfg.m_values {
                    for &lambda in &cfg.lambdas {
                        let lp = LambdaParams::new(lambda)
                            .map_err(|e| CliError::Config(e.to_string()))?;
                        let (ratio_m, ratio_l) =
                            verify_gamma_h_contraction_with(&mdp, &v, h, m, &lp, &v_star)
                                .map_err(|e| CliError::Check(e.to_string()))?;
                        if ratio_m > bound || ratio_l > bound {
                            violations += 1;
                        }
                        rows.push(format!(
                            "{seed},{},{},{},{h},{m},{lambda},{ratio_m},{ratio_l},{bound},{}",
                            inst.n_states, inst.n_actions, inst.gamma, cfg.hash
                        ));
                    }
                }
            }
            Ok((rows, violations))
        })
        .collect();

    let mut rows = Vec::new();
    let mut violations = 0usize;
    for result in results {
        let (mut seed_rows, seed_violations) = result?;
        rows.append(&mut seed_rows);
        violations += seed_violations;
    }
    write_csv(&cfg.output_path, HEADER, &rows)?;
    println!("wrote {} rows to {}", rows.len(), cfg.output_path.display());
    if violations > 0 {
        return Err(CliError::Check(format!(
            "{violations} cell(s) exceeded the gamma^h contraction bound"
        )));
    }
    println!("all contraction ratios within gamma^h + {}", cfg.tolerance);
    Ok(())
}

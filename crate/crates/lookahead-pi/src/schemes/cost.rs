//! Simulator-query accounting.
//!
//! Costs count model accesses `(s, a)` the way a simulator-backed
//! implementation would pay them, independently of how the numbers are
//! actually produced here (the lambda-return, for instance, is computed by a
//! direct solve but charged as the truncated series a simulator would run).
//! One fixed-policy sweep touches each state once; one full Bellman sweep
//! touches every state-action pair.
//!
//! Everything is a closed-form function of the model dimensions and the
//! configured tolerances, so two runs with the same shape parameters are
//! charged identically regardless of their noise realizations.

use crate::mdp::Mdp;

/// One application of `T_pi`: `|S|` queries.
pub fn t_pi_sweep_queries(mdp: &Mdp) -> u64 {
    mdp.n_states() as u64
}

/// One application of `T`: `|S| * |A|` queries.
pub fn t_opt_sweep_queries(mdp: &Mdp) -> u64 {
    (mdp.n_states() * mdp.n_actions()) as u64
}

/// h-step lookahead: `h - 1` optimal sweeps plus the final greedy sweep over
/// all actions, `h * |S| * |A|` in total.
pub fn tree_backup_queries(mdp: &Mdp, h: usize) -> u64 {
    h as u64 * t_opt_sweep_queries(mdp)
}

/// m-step return: `m * |S|`.
pub fn m_return_queries(mdp: &Mdp, m: usize) -> u64 {
    m as u64 * t_pi_sweep_queries(mdp)
}

/// Exact policy evaluation, charged as the number of fixed-policy sweeps
/// needed to push the worst-case error `gamma^n / (1 - gamma)` below
/// `value_tol`.
pub fn exact_eval_queries(mdp: &Mdp, value_tol: f64) -> u64 {
    assert!(value_tol > 0.0 && value_tol.is_finite(), "value_tol must be positive");
    let gamma = mdp.gamma();
    let sweeps = ((value_tol * (1.0 - gamma)).ln() / gamma.ln()).ceil().max(1.0);
    sweeps as u64 * t_pi_sweep_queries(mdp)
}

/// Lambda-weighted return, charged as the truncated-series length: the
/// smallest `J` with `span * (gamma * lambda)^J / (1 - gamma * lambda)`
/// below `series_tolerance`, where `span = (r_max - r_min) / (1 - gamma)`
/// bounds the value range of the model. `lambda = 0` is a single sweep;
/// `lambda = 1` is charged as an exact evaluation at `exact_tol`.
pub fn lambda_return_queries(
    mdp: &Mdp,
    lambda: f64,
    series_tolerance: f64,
    exact_tol: f64,
) -> u64 {
    assert!((0.0..=1.0).contains(&lambda), "lambda must lie in [0, 1]");
    assert!(series_tolerance > 0.0 && series_tolerance.is_finite());
    if lambda == 0.0 {
        return t_pi_sweep_queries(mdp);
    }
    if lambda == 1.0 {
        return exact_eval_queries(mdp, exact_tol);
    }
    let gl = mdp.gamma() * lambda;
    let span = (mdp.r_max() - mdp.r_min()) / (1.0 - mdp.gamma());
    let sweeps = if span == 0.0 {
        1.0
    } else {
        ((series_tolerance * (1.0 - gl) / span).ln() / gl.ln()).ceil().max(1.0)
    };
    sweeps as u64 * t_pi_sweep_queries(mdp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{random_mdp, RandomMdpSpec};
    use ndarray::{Array2, Array3};

    fn ten_by_five() -> Mdp {
        random_mdp(&RandomMdpSpec { n_states: 10, n_actions: 5, gamma: 0.9, rng_seed: 0 })
    }

    #[test]
    fn sweep_costs_follow_the_dimensions() {
        let mdp = ten_by_five();
        assert_eq!(t_pi_sweep_queries(&mdp), 10);
        assert_eq!(t_opt_sweep_queries(&mdp), 50);
        assert_eq!(tree_backup_queries(&mdp, 3), 150);
        assert_eq!(m_return_queries(&mdp, 3), 30);
    }

    #[test]
    fn exact_eval_charge_matches_the_tail_bound() {
        // gamma = 0.9, tol = 1e-6: 153 sweeps is the smallest n with
        // 0.9^n / 0.1 <= 1e-6 (152 gives 1.10e-6, 153 gives 9.94e-7).
        let mdp = ten_by_five();
        assert_eq!(exact_eval_queries(&mdp, 1e-6), 153 * 10);
    }

    #[test]
    fn lambda_charge_interpolates_between_sweep_and_exact() {
        let mdp = ten_by_five();
        assert_eq!(lambda_return_queries(&mdp, 0.0, 1e-10, 1e-6), 10);
        assert_eq!(lambda_return_queries(&mdp, 1.0, 1e-10, 1e-6), exact_eval_queries(&mdp, 1e-6));
        // Rewards live in [0, 1) here, so span < 10; pin the charge with an
        // explicitly bounded model instead: span = 10, gamma*lambda = 0.45,
        // smallest J with 10 * 0.45^J / 0.55 <= 1e-10 is 33.
        let bounded = Mdp::with_bounds(
            Array3::from_elem((2, 2, 2), 0.5),
            Array2::from_elem((2, 2), 0.5),
            0.9,
            0.0,
            1.0,
        )
        .unwrap();
        assert_eq!(lambda_return_queries(&bounded, 0.5, 1e-10, 1e-6), 33 * 2);
    }

    #[test]
    fn constant_reward_models_charge_a_single_sweep() {
        let mdp = Mdp::new(
            Array3::from_elem((3, 2, 3), 1.0 / 3.0),
            Array2::from_elem((3, 2), 0.25),
            0.9,
        )
        .unwrap();
        assert_eq!(lambda_return_queries(&mdp, 0.7, 1e-10, 1e-6), 3);
    }
}

//! Dense linear solves shared by exact policy evaluation and the resolvent
//! form of the lambda-weighted return.

use nalgebra::{DMatrix, DVector};
use ndarray::Array1;
use thiserror::Error;

use crate::mdp::{Mdp, Policy};

/// Residual bound (max norm) below which a solve is accepted.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("linear system is singular to working precision")]
    Singular,
    #[error("linear solve residual {residual:.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e}")]
    ResidualTooLarge { residual: f64 },
}

/// Solves `(I - beta * P_pi) x = rhs` where `P_pi` is the transition matrix
/// induced by `pi`. Uses an LU factorization plus iterative refinement and
/// rejects the answer if the residual stays above [`SOLVE_RESIDUAL_TOL`].
///
/// For `beta` in `[0, 1)` the system matrix is strictly diagonally dominant,
/// so failure indicates corrupted inputs rather than conditioning.
pub(crate) fn solve_discounted_system(
    mdp: &Mdp,
    pi: &Policy,
    beta: f64,
    rhs: &Array1<f64>,
) -> Result<Array1<f64>, SolveError> {
    let n = mdp.n_states();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let p = mdp.transitions()[[i, pi.action(i), j]];
        let eye = if i == j { 1.0 } else { 0.0 };
        eye - beta * p
    });
    let b = DVector::from_fn(n, |i, _| rhs[i]);

    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(SolveError::Singular)?;

    // One refinement pass per loop; the factorization is reused so this is
    // cheap relative to the solve itself.
    let mut residual = (&b - &a * &x).amax();
    for _ in 0..3 {
        if residual <= SOLVE_RESIDUAL_TOL {
            break;
        }
        let r = &b - &a * &x;
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
        residual = (&b - &a * &x).amax();
    }
    if residual > SOLVE_RESIDUAL_TOL {
        return Err(SolveError::ResidualTooLarge { residual });
    }
    Ok(Array1::from_iter(x.iter().copied()))
}

//! Planning algorithms for tabular discounted MDPs built around multiple-step
//! greedy policy improvement.
//!
//! The library models an infinite-horizon MDP `(S, A, P, R, gamma)` with dense
//! transition and reward tables and provides:
//!
//! * exact policy evaluation and optimal values ([`mdp`]),
//! * the one-step Bellman operators plus m-step and lambda-weighted partial
//!   returns ([`bellman`]),
//! * h-step lookahead policies computed by backward induction ([`lookahead`]),
//! * the h-greedy consistency condition, the shift that restores it, and
//!   numerical checks of the contraction guarantees that follow from it
//!   ([`consistency`]),
//! * a family of policy-iteration schemes that combine lookahead improvement
//!   with partial-return evaluation, behind a common [`schemes::Scheme`]
//!   trait with a by-name registry ([`schemes`]),
//! * closed-form and randomized environments used by the experiments and the
//!   test suites ([`envs`]).
//!
//! All randomness is drawn from explicitly seeded generators, so every run,
//! trace, and CSV artifact is reproducible bit for bit.

pub mod bellman;
pub mod consistency;
pub mod envs;
mod linalg;
pub mod lookahead;
pub mod mdp;
pub mod schemes;

pub use mdp::{Mdp, Policy, ValueFunction};

//! Numerical laboratory for finite discounted MDPs under softmax policies.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`] and [`policy`] hold the model and the softmax parameterization.
//! - [`exact`] computes values, Q-values, advantages, occupation measures,
//!   returns, exact policy gradients, the optimal return and the analysis
//!   constants by direct linear algebra.
//! - [`sampling`] draws i.i.d. states from the discounted occupation measure
//!   and one-step transitions from seeded, splittable random streams.
//! - [`actor_critic`] is the single-timescale actor-critic loop together with
//!   the expected fixed-policy critic operator.
//! - [`diagnostics`] turns iterates into sub-optimality / critic-error /
//!   gradient-norm traces and checks the inequalities the convergence
//!   argument relies on.
//! - [`recursion`] iterates the scalar recursions (coupled actor-critic and
//!   Lyapunov) and certifies the ODE-tracking bound.

pub mod actor_critic;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod mdp;
pub mod policy;
pub mod recursion;
pub mod sampling;

pub use error::{Error, Result};
pub use mdp::TabularMdp;
pub use policy::SoftmaxPolicy;

/// Dense table indexed `[s][a]`, stored as an `S x A` matrix.
pub type Table = nalgebra::DMatrix<f64>;
/// Dense vector indexed by state.
pub type StateVec = nalgebra::DVector<f64>;

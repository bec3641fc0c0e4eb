//! Lifelong reinforcement learning over a distribution of policies.
//!
//! A diagonal-Gaussian "world policy" over policy parameters is learned from a
//! stream of tasks. Every `N` tasks the distribution takes one step on a
//! PAC-Bayes regularized negative-return objective, and a prior distribution
//! trails it with a geometrically decaying mixing speed.
//!
//! Module map:
//!
//! - [`policy`]: Gibbs-linear and MLP policies, Gaussian distributions over
//!   their parameters, closed-form KL and the reparameterization chain.
//! - [`envs`]: CartPole physics, tabular chain MDPs, task-distribution samplers.
//! - [`pacbayes`]: the training regularizer, the run-level bound, the KL budget
//!   and sample-complexity constants.
//! - [`lifelong`]: the EPICG update, the lifelong loop, the fine-tune variant and
//!   the single-task baseline.
//! - [`verify`]: martingale concentration simulation, generalization-gap report,
//!   KL-budget audit.
//! - [`config`] and [`runner`]: experiment files, CSV output, sweeps.

pub mod config;
pub mod envs;
mod error;
pub mod lifelong;
pub mod pacbayes;
pub mod policy;
pub mod quadrature;
pub mod rng;
pub mod runner;
pub mod verify;

pub use error::{Error, Result};

//! Policies and Gaussian distributions over their parameters.

mod features;
mod gaussian;
mod gibbs;
mod layered;

pub(crate) use features::tabular_index as tabular_state;
pub use features::FeatureMap;
pub use gaussian::{kl_diag_gaussian, FlatGibbsDistribution, GaussianPolicyDistribution};
pub use gibbs::GibbsLinearPolicy;
pub use layered::{
    softplus_inv, Activation, GaussianLayer, InputMap, LayerSpec, LayeredGaussianPolicy, MlpPolicy,
};

use crate::rng::NoiseDraw;
use crate::{Error, Result};
use rand::Rng;
use serde::Serialize;

/// A stochastic policy over a finite action set with a flat parameter vector.
pub trait Policy: Send + Sync {
    fn n_actions(&self) -> usize;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    fn action_probs(&self, state: &[f64]) -> Result<Vec<f64>>;

    /// Gradient of `ln pi(action | state)` with respect to [`Policy::params`].
    fn grad_log_prob(&self, state: &[f64], action: usize) -> Result<Vec<f64>>;

    fn sample_action<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<usize>
    where
        Self: Sized,
    {
        let probs = self.action_probs(state)?;
        Ok(sample_categorical(&probs, rng))
    }
}

/// A reparameterizable distribution over the parameters of a [`Policy`].
///
/// Optimization happens in an unconstrained coordinate system ("free
/// parameters"): `(mu, ln sigma)` for the flat Gaussian, `(mu, delta)` for the
/// layered one.
pub trait ParamDistribution: Clone + Send + Sync + Serialize {
    type Policy: Policy + Clone;

    /// Length of the noise vector consumed by [`ParamDistribution::sample`].
    fn noise_dim(&self) -> usize;

    fn sample(&self, noise: &NoiseDraw) -> Result<Self::Policy>;

    /// Policy at the distribution mean (zero noise).
    fn mean_policy(&self) -> Self::Policy;

    fn free_params(&self) -> Vec<f64>;

    fn set_free_params(&mut self, free: &[f64]) -> Result<()>;

    /// Chains a gradient with respect to the sampled policy parameters back to
    /// the free parameters, for the policy produced by `sample(noise)`.
    fn pullback(&self, noise: &NoiseDraw, grad_params: &[f64]) -> Result<Vec<f64>>;

    /// `KL(self || prior)`.
    fn kl(&self, prior: &Self) -> Result<f64>;

    /// Gradient of `KL(self || prior)` with respect to the free parameters of `self`.
    fn kl_grad(&self, prior: &Self) -> Result<Vec<f64>>;

    /// Moves `self` (a prior) toward `posterior`: `self <- (1 - lambda) self + lambda posterior`,
    /// applied to the mean and scale parameters.
    fn evolve_toward(&mut self, posterior: &Self, lambda: f64) -> Result<()>;
}

/// Numerically stable `ln(1 + exp(x))`.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else if x < -30.0 {
        x.exp()
    } else if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`], the logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max subtraction. Non-finite scores are rejected.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("action score {bad}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

use super::{FeatureMap, GibbsLinearPolicy, ParamDistribution};
use crate::rng::NoiseDraw;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Diagonal Gaussian `N(mu, diag(sigma^2))` over a flat parameter vector.
///
/// Serializes as `{"d": .., "mu": [..], "sigma": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianDoc", into = "GaussianDoc")]
pub struct GaussianPolicyDistribution {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussianDoc {
    d: usize,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl TryFrom<GaussianDoc> for GaussianPolicyDistribution {
    type Error = Error;

    fn try_from(doc: GaussianDoc) -> Result<Self> {
        Error::check_dim(doc.d, doc.mu.len())?;
        GaussianPolicyDistribution::new(doc.mu, doc.sigma)
    }
}

impl From<GaussianPolicyDistribution> for GaussianDoc {
    fn from(g: GaussianPolicyDistribution) -> Self {
        GaussianDoc {
            d: g.mu.len(),
            mu: g.mu,
            sigma: g.sigma,
        }
    }
}

impl GaussianPolicyDistribution {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        Error::check_dim(mu.len(), sigma.len())?;
        if let Some(s) = sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Domain(format!(
                "sigma must be positive and finite, got {s}"
            )));
        }
        if let Some(m) = mu.iter().find(|m| !m.is_finite()) {
            return Err(Error::Numeric(format!("mu entry {m}")));
        }
        Ok(GaussianPolicyDistribution { mu, sigma })
    }

    /// `mu = 0`, `sigma = 0.1` per coordinate.
    pub fn initial(d: usize) -> Self {
        GaussianPolicyDistribution {
            mu: vec![0.0; d],
            sigma: vec![0.1; d],
        }
    }

    pub fn isotropic(mu: Vec<f64>, sigma: f64) -> Result<Self> {
        let d = mu.len();
        Self::new(mu, vec![sigma; d])
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `mu + sigma * epsilon`, element-wise.
    pub fn sample_theta(&self, noise: &NoiseDraw) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), noise.len())?;
        Ok(self
            .mu
            .iter()
            .zip(&self.sigma)
            .zip(&noise.epsilon)
            .map(|((m, s), e)| m + s * e)
            .collect())
    }

    pub fn kl(&self, other: &Self) -> Result<f64> {
        kl_diag_gaussian(self, other)
    }

    /// Gradient of `KL(self || prior)` in `(mu, ln sigma)` coordinates.
    pub fn kl_grad_log_sigma(&self, prior: &Self) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), prior.dim())?;
        let d = self.dim();
        let mut g = vec![0.0; 2 * d];
        for i in 0..d {
            let pv = prior.sigma[i] * prior.sigma[i];
            g[i] = (self.mu[i] - prior.mu[i]) / pv;
            g[d + i] = self.sigma[i] * self.sigma[i] / pv - 1.0;
        }
        Ok(g)
    }

    /// Stacks `(mu, ln sigma)`.
    pub fn to_log_params(&self) -> Vec<f64> {
        self.mu
            .iter()
            .copied()
            .chain(self.sigma.iter().map(|s| s.ln()))
            .collect()
    }

    pub fn from_log_params(free: &[f64]) -> Result<Self> {
        if free.len() % 2 != 0 {
            return Err(Error::dim(free.len() + 1, free.len()));
        }
        let d = free.len() / 2;
        Self::new(
            free[..d].to_vec(),
            free[d..].iter().map(|v| v.exp()).collect(),
        )
    }

    /// `self <- (1 - lambda) self + lambda other` on `mu` and `sigma`.
    pub fn mix_toward(&mut self, other: &Self, lambda: f64) -> Result<()> {
        Error::check_dim(self.dim(), other.dim())?;
        for (a, b) in self.mu.iter_mut().zip(&other.mu) {
            *a = (1.0 - lambda) * *a + lambda * b;
        }
        for (a, b) in self.sigma.iter_mut().zip(&other.sigma) {
            *a = (1.0 - lambda) * *a + lambda * b;
        }
        Ok(())
    }
}

/// Closed-form `KL(N(mu, sigma^2) || N(mu_bar, sigma_bar^2))` for diagonal Gaussians.
pub fn kl_diag_gaussian(
    p: &GaussianPolicyDistribution,
    q: &GaussianPolicyDistribution,
) -> Result<f64> {
    Error::check_dim(p.dim(), q.dim())?;
    let mut total = 0.0;
    for i in 0..p.dim() {
        let (s, sb) = (p.sigma[i], q.sigma[i]);
        if !(s > 0.0 && sb > 0.0) {
            return Err(Error::Domain(format!("non-positive sigma at {i}")));
        }
        let dm = p.mu[i] - q.mu[i];
        total += (sb / s).ln() + (s * s + dm * dm) / (2.0 * sb * sb) - 0.5;
    }
    // Rounding can leave tiny negatives for near-identical inputs.
    Ok(total.max(0.0))
}

/// Flat Gaussian over the weights of a [`GibbsLinearPolicy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatGibbsDistribution {
    pub dist: GaussianPolicyDistribution,
    pub features: FeatureMap,
}

impl FlatGibbsDistribution {
    pub fn new(dist: GaussianPolicyDistribution, features: FeatureMap) -> Result<Self> {
        Error::check_dim(features.dim(), dist.dim())?;
        Ok(FlatGibbsDistribution { dist, features })
    }

    pub fn initial(features: FeatureMap) -> Self {
        FlatGibbsDistribution {
            dist: GaussianPolicyDistribution::initial(features.dim()),
            features,
        }
    }
}

impl ParamDistribution for FlatGibbsDistribution {
    type Policy = GibbsLinearPolicy;

    fn noise_dim(&self) -> usize {
        self.dist.dim()
    }

    fn sample(&self, noise: &NoiseDraw) -> Result<GibbsLinearPolicy> {
        GibbsLinearPolicy::new(self.dist.sample_theta(noise)?, self.features.clone())
    }

    fn mean_policy(&self) -> GibbsLinearPolicy {
        GibbsLinearPolicy {
            theta: self.dist.mu.clone(),
            features: self.features.clone(),
        }
    }

    fn free_params(&self) -> Vec<f64> {
        self.dist.to_log_params()
    }

    fn set_free_params(&mut self, free: &[f64]) -> Result<()> {
        Error::check_dim(2 * self.dist.dim(), free.len())?;
        self.dist = GaussianPolicyDistribution::from_log_params(free)?;
        Ok(())
    }

    /// `d/dmu = g`, `d/d ln sigma = g * epsilon * sigma`.
    fn pullback(&self, noise: &NoiseDraw, grad_params: &[f64]) -> Result<Vec<f64>> {
        let d = self.dist.dim();
        Error::check_dim(d, noise.len())?;
        Error::check_dim(d, grad_params.len())?;
        let mut out = Vec::with_capacity(2 * d);
        out.extend_from_slice(grad_params);
        out.extend(
            grad_params
                .iter()
                .zip(&noise.epsilon)
                .zip(&self.dist.sigma)
                .map(|((g, e), s)| g * e * s),
        );
        Ok(out)
    }

    fn kl(&self, prior: &Self) -> Result<f64> {
        kl_diag_gaussian(&self.dist, &prior.dist)
    }

    fn kl_grad(&self, prior: &Self) -> Result<Vec<f64>> {
        self.dist.kl_grad_log_sigma(&prior.dist)
    }

    fn evolve_toward(&mut self, posterior: &Self, lambda: f64) -> Result<()> {
        self.dist.mix_toward(&posterior.dist, lambda)
    }
}

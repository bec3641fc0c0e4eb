//! Lifelong task distributions: mixtures of per-parameter distributions.

use super::{CartPoleParams, ChainMdp, ParamMdp};
use crate::policy::sample_categorical;
use crate::rng::{stream, Purpose};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Resampling attempts before an out-of-support draw is clamped.
pub const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ParamDist {
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    Categorical { values: Vec<f64>, probs: Vec<f64> },
}

impl ParamDist {
    pub fn point(value: f64) -> Self {
        ParamDist::Categorical {
            values: vec![value],
            probs: vec![1.0],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ParamDist::Normal { mean, std } => {
                if !(mean.is_finite() && *std >= 0.0 && std.is_finite()) {
                    return Err(Error::Config(format!("bad normal({mean}, {std})")));
                }
            }
            ParamDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::Config(format!("bad uniform({lo}, {hi})")));
                }
            }
            ParamDist::Categorical { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::Config(
                        "categorical needs matching values and probs".into(),
                    ));
                }
                check_weights(probs, "categorical probabilities")?;
            }
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ParamDist::Normal { mean, std } => {
                if *std == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, *std).expect("validated").sample(rng)
                }
            }
            ParamDist::Uniform { lo, hi } => {
                if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..*hi)
                }
            }
            ParamDist::Categorical { values, probs } => values[sample_categorical(probs, rng)],
        }
    }
}

fn check_weights(w: &[f64], what: &str) -> Result<()> {
    if w.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Config(format!("{what} must be non-negative")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("{what} sum to {total}, not 1")));
    }
    Ok(())
}

/// Which task family the sampled parameters describe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    CartPole {
        horizon: usize,
        discount: f64,
    },
    /// [`ChainMdp::slippery_chain`] with parameters `slip`, `right_reward`, `left_reward`.
    Chain {
        n_states: usize,
        horizon: usize,
        discount: f64,
    },
}

impl EnvSpec {
    /// `(name, default, support_lo, support_hi)` for every parameter.
    pub fn parameters(&self) -> &'static [(&'static str, f64, f64, f64)] {
        match self {
            EnvSpec::CartPole { .. } => &[
                ("cart_mass", 1.0, 1e-3, f64::INFINITY),
                ("pole_mass", 0.1, 1e-3, f64::INFINITY),
                ("pole_length", 0.5, 1e-3, f64::INFINITY),
            ],
            EnvSpec::Chain { .. } => &[
                ("slip", 0.1, 0.0, 1.0),
                ("right_reward", 1.0, 0.0, 1.0),
                ("left_reward", 0.2, 0.0, 1.0),
            ],
        }
    }

    pub fn horizon(&self) -> usize {
        match *self {
            EnvSpec::CartPole { horizon, .. } | EnvSpec::Chain { horizon, .. } => horizon,
        }
    }

    pub fn discount(&self) -> f64 {
        match *self {
            EnvSpec::CartPole { discount, .. } | EnvSpec::Chain { discount, .. } => discount,
        }
    }

    pub fn with_horizon(&self, h: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            EnvSpec::CartPole { horizon, .. } | EnvSpec::Chain { horizon, .. } => *horizon = h,
        }
        out
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        self.parameters().iter().map(|p| p.0).collect()
    }

    /// Builds a task from values given in [`EnvSpec::param_names`] order.
    pub fn build(&self, values: &[f64]) -> Result<ParamMdp> {
        Error::check_dim(self.parameters().len(), values.len())?;
        let named = self
            .param_names()
            .into_iter()
            .map(String::from)
            .zip(values.iter().copied())
            .collect();
        let mdp = match *self {
            EnvSpec::CartPole { horizon, discount } => ParamMdp::cartpole(
                CartPoleParams::new(values[0], values[1], values[2])?,
                horizon,
                discount,
            )?,
            EnvSpec::Chain {
                n_states,
                horizon,
                discount,
            } => ParamMdp::chain(
                ChainMdp::slippery_chain(n_states, values[0], values[1], values[2])?,
                horizon,
                discount,
            )?,
        };
        Ok(mdp.with_params(named))
    }

    /// Task with every parameter at its default.
    pub fn default_task(&self) -> Result<ParamMdp> {
        let v: Vec<f64> = self.parameters().iter().map(|p| p.1).collect();
        self.build(&v)
    }
}

/// One mixture component: a weight and a distribution per named parameter.
/// Parameters not listed keep the family default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub params: Vec<(String, ParamDist)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDistribution {
    pub env: EnvSpec,
    pub components: Vec<MixtureComponent>,
}

impl TaskDistribution {
    pub fn new(env: EnvSpec, components: Vec<MixtureComponent>) -> Result<Self> {
        let td = TaskDistribution { env, components };
        td.validate()?;
        Ok(td)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config("task distribution has no components".into()));
        }
        let weights: Vec<f64> = self.components.iter().map(|c| c.weight).collect();
        check_weights(&weights, "mixture weights")?;
        let names = self.env.param_names();
        for c in &self.components {
            for (name, dist) in &c.params {
                if !names.contains(&name.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown parameter `{name}`; expected one of {names:?}"
                    )));
                }
                dist.validate()?;
            }
        }
        Ok(())
    }

    /// Draws a component, then each parameter (resampling out-of-support
    /// draws up to [`MAX_RESAMPLES`] times before clamping).
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, ParamMdp)> {
        if self.components.is_empty() {
            return Err(Error::Config("task distribution has no components".into()));
        }
        let weights: Vec<f64> = self.components.iter().map(|c| c.weight).collect();
        let k = sample_categorical(&weights, rng);
        let comp = &self.components[k];
        let mut values = Vec::with_capacity(self.env.parameters().len());
        for &(name, default, lo, hi) in self.env.parameters() {
            let v = match comp.params.iter().find(|(n, _)| n == name) {
                None => default,
                Some((_, dist)) => {
                    let mut v = dist.draw(rng);
                    let mut tries = 0;
                    while !(lo..=hi).contains(&v) && tries < MAX_RESAMPLES {
                        v = dist.draw(rng);
                        tries += 1;
                    }
                    v.clamp(lo, hi)
                }
            };
            values.push(v);
        }
        Ok((k, self.env.build(&values)?))
    }

    /// Deterministic per seed.
    pub fn sample_task(&self, seed: u64) -> Result<ParamMdp> {
        let mut rng = stream(seed, Purpose::Task, &[]);
        Ok(self.sample_with(&mut rng)?.1)
    }

    pub fn cartpole_uniform(horizon: usize, discount: f64) -> Self {
        let u = |lo, hi| ParamDist::Uniform { lo, hi };
        TaskDistribution {
            env: EnvSpec::CartPole { horizon, discount },
            components: vec![MixtureComponent {
                weight: 1.0,
                params: vec![
                    ("cart_mass".into(), u(1.0, 5.0)),
                    ("pole_mass".into(), u(0.1, 0.5)),
                    ("pole_length".into(), u(0.3, 0.7)),
                ],
            }],
        }
    }

    /// Five joint components; each parameter's marginal is the tabulated mixture.
    pub fn cartpole_gmm(horizon: usize, discount: f64) -> Self {
        let n = |mean, std| ParamDist::Normal { mean, std };
        let rows = [
            (0.15, 1.0, 0.4, 0.3),
            (0.15, 5.0, 0.5, 0.7),
            (0.18, 2.0, 0.2, 0.4),
            (0.18, 4.0, 0.3, 0.6),
            (0.34, 3.0, 0.1, 0.5),
        ];
        TaskDistribution {
            env: EnvSpec::CartPole { horizon, discount },
            components: rows
                .iter()
                .map(|&(w, cart, pole, len)| MixtureComponent {
                    weight: w,
                    params: vec![
                        ("cart_mass".into(), n(cart, 0.1)),
                        ("pole_mass".into(), n(pole, 0.01)),
                        ("pole_length".into(), n(len, 0.01)),
                    ],
                })
                .collect(),
        }
    }

    /// Slippery chains with random slip and end rewards.
    pub fn chain_uniform(n_states: usize, horizon: usize, discount: f64) -> Self {
        let u = |lo, hi| ParamDist::Uniform { lo, hi };
        TaskDistribution {
            env: EnvSpec::Chain {
                n_states,
                horizon,
                discount,
            },
            components: vec![MixtureComponent {
                weight: 1.0,
                params: vec![
                    ("slip".into(), u(0.0, 0.3)),
                    ("right_reward".into(), u(0.6, 1.0)),
                    ("left_reward".into(), u(0.1, 0.4)),
                ],
            }],
        }
    }

    /// Degenerate distribution that always yields the family default task.
    pub fn single_task(env: EnvSpec) -> Self {
        TaskDistribution {
            env,
            components: vec![MixtureComponent {
                weight: 1.0,
                params: Vec::new(),
            }],
        }
    }

    pub fn preset(name: &str, env: &EnvSpec) -> Result<Self> {
        let (h, g) = (env.horizon(), env.discount());
        match (name, env) {
            ("uniform", EnvSpec::CartPole { .. }) => Ok(Self::cartpole_uniform(h, g)),
            ("gmm", EnvSpec::CartPole { .. }) => Ok(Self::cartpole_gmm(h, g)),
            ("uniform", EnvSpec::Chain { n_states, .. }) => {
                Ok(Self::chain_uniform(*n_states, h, g))
            }
            ("single", _) => Ok(Self::single_task(env.clone())),
            _ => Err(Error::Config(format!("no preset `{name}` for {env:?}"))),
        }
    }
}

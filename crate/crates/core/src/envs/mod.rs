//! Parameterized tasks, rollouts and task-distribution samplers.

pub mod cartpole;
pub mod chain;
pub mod tasks;

pub use cartpole::CartPoleParams;
pub use chain::ChainMdp;
pub use tasks::{EnvSpec, MixtureComponent, ParamDist, TaskDistribution};

use crate::policy::{sample_categorical, FeatureMap, InputMap, Policy};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MdpKind {
    CartPole(CartPoleParams),
    Chain(ChainMdp),
}

/// A task: dynamics plus horizon, discount and the per-step reward scale that
/// keeps every emitted reward in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamMdp {
    pub kind: MdpKind,
    pub horizon: usize,
    pub discount: f64,
    pub reward_scale: f64,
    /// Sampled parameters in declaration order, for logging.
    pub params: Vec<(String, f64)>,
}

/// Outcome of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

impl ParamMdp {
    fn check_common(horizon: usize, discount: f64) -> Result<()> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(Error::Config(format!("discount {discount} outside (0, 1]")));
        }
        Ok(())
    }

    /// Cart-pole task; each surviving step pays `1 / horizon`.
    pub fn cartpole(params: CartPoleParams, horizon: usize, discount: f64) -> Result<Self> {
        Self::check_common(horizon, discount)?;
        params.validate()?;
        Ok(ParamMdp {
            params: params
                .named()
                .iter()
                .map(|(n, v)| (n.to_string(), *v))
                .collect(),
            kind: MdpKind::CartPole(params),
            horizon,
            discount,
            reward_scale: 1.0 / horizon as f64,
        })
    }

    /// Tabular task; rewards are already in `[0, 1]` so the scale is 1.
    pub fn chain(chain: ChainMdp, horizon: usize, discount: f64) -> Result<Self> {
        Self::check_common(horizon, discount)?;
        Ok(ParamMdp {
            kind: MdpKind::Chain(chain),
            horizon,
            discount,
            reward_scale: 1.0,
            params: Vec::new(),
        })
    }

    pub fn with_reward_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::Config(format!(
                "reward scale {scale} outside (0, 1]"
            )));
        }
        self.reward_scale = scale;
        Ok(self)
    }

    pub fn with_params(mut self, params: Vec<(String, f64)>) -> Self {
        self.params = params;
        self
    }

    pub fn n_actions(&self) -> usize {
        match &self.kind {
            MdpKind::CartPole(_) => 2,
            MdpKind::Chain(c) => c.n_actions,
        }
    }

    pub fn state_dim(&self) -> usize {
        match &self.kind {
            MdpKind::CartPole(_) => cartpole::STATE_DIM,
            MdpKind::Chain(_) => 1,
        }
    }

    /// Default Gibbs feature map for this task family.
    pub fn default_features(&self) -> FeatureMap {
        match &self.kind {
            MdpKind::CartPole(_) => FeatureMap::StateBlock {
                n_actions: 2,
                state_dim: cartpole::STATE_DIM,
            },
            MdpKind::Chain(c) => FeatureMap::Tabular {
                n_states: c.n_states,
                n_actions: c.n_actions,
            },
        }
    }

    pub fn default_input(&self) -> InputMap {
        match &self.kind {
            MdpKind::CartPole(_) => InputMap::Raw {
                dim: cartpole::STATE_DIM,
            },
            MdpKind::Chain(c) => InputMap::OneHot {
                n_states: c.n_states,
            },
        }
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            MdpKind::CartPole(_) => (0..cartpole::STATE_DIM)
                .map(|_| rng.random_range(-0.05..0.05))
                .collect(),
            MdpKind::Chain(c) => vec![sample_categorical(c.initial(), rng) as f64],
        }
    }

    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        action: usize,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        match &self.kind {
            MdpKind::CartPole(p) => {
                let (next, done) = p.step(state, action)?;
                Ok(StepOutcome {
                    next_state: next.to_vec(),
                    reward: self.reward_scale,
                    done,
                })
            }
            MdpKind::Chain(c) => {
                let s = crate::policy::tabular_state(state, c.n_states)?;
                if action >= c.n_actions {
                    return Err(Error::Domain(format!(
                        "action {action} outside 0..{}",
                        c.n_actions
                    )));
                }
                let next = sample_categorical(c.transition_row(s, action), rng);
                Ok(StepOutcome {
                    next_state: c.state(next),
                    reward: self.reward_scale * c.reward(s, action),
                    done: false,
                })
            }
        }
    }

    /// Largest possible discounted return, `scale * sum_{h<H} discount^h`.
    pub fn max_return(&self) -> f64 {
        let steps = if self.discount == 1.0 {
            self.horizon as f64
        } else {
            (1.0 - self.discount.powi(self.horizon as i32)) / (1.0 - self.discount)
        };
        self.reward_scale * steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

/// At most `H` steps with the discounted return of the recorded rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub discount: f64,
    pub return_discounted: f64,
}

impl Trajectory {
    pub fn from_steps(steps: Vec<Step>, discount: f64) -> Self {
        let return_discounted = discounted_sum(steps.iter().map(|s| s.reward), discount);
        Trajectory {
            steps,
            discount,
            return_discounted,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Discounted tail return from each step.
    pub fn reward_to_go(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.steps.len()];
        let mut acc = 0.0;
        for (h, step) in self.steps.iter().enumerate().rev() {
            acc = step.reward + self.discount * acc;
            out[h] = acc;
        }
        out
    }

    pub fn undiscounted(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

fn discounted_sum(rewards: impl Iterator<Item = f64>, discount: f64) -> f64 {
    let mut total = 0.0;
    let mut w = 1.0;
    for r in rewards {
        total += w * r;
        w *= discount;
    }
    total
}

/// Runs `policy` for at most `horizon` steps, sampling actions and transitions from `rng`.
pub fn rollout<P: Policy, R: Rng + ?Sized>(
    mdp: &ParamMdp,
    policy: &P,
    rng: &mut R,
) -> Result<Trajectory> {
    if policy.n_actions() != mdp.n_actions() {
        return Err(Error::dim(mdp.n_actions(), policy.n_actions()));
    }
    let mut state = mdp.initial_state(rng);
    let mut steps = Vec::with_capacity(mdp.horizon);
    for _ in 0..mdp.horizon {
        let action = policy.sample_action(&state, rng)?;
        let out = mdp.step(&state, action, rng)?;
        steps.push(Step {
            state: std::mem::replace(&mut state, out.next_state),
            action,
            reward: out.reward,
        });
        if out.done {
            break;
        }
    }
    Ok(Trajectory::from_steps(steps, mdp.discount))
}

/// Exact `J_M(pi)` on tabular tasks.
pub fn exact_expected_return<P: Policy>(mdp: &ParamMdp, policy: &P) -> Result<f64> {
    match &mdp.kind {
        MdpKind::Chain(c) => c.expected_return(policy, mdp.horizon, mdp.discount, mdp.reward_scale),
        MdpKind::CartPole(_) => Err(Error::Unsupported(
            "exact expected return needs a tabular task".into(),
        )),
    }
}

/// Exact gradient of [`exact_expected_return`] in the policy parameters.
pub fn exact_expected_return_grad<P: Policy>(mdp: &ParamMdp, policy: &P) -> Result<Vec<f64>> {
    match &mdp.kind {
        MdpKind::Chain(c) => {
            c.expected_return_grad(policy, mdp.horizon, mdp.discount, mdp.reward_scale)
        }
        MdpKind::CartPole(_) => Err(Error::Unsupported(
            "exact policy gradient needs a tabular task".into(),
        )),
    }
}

/// Fixed states at which policy probabilities are probed for diagnostics.
pub fn probe_states(mdp: &ParamMdp) -> Vec<Vec<f64>> {
    match &mdp.kind {
        MdpKind::Chain(c) => (0..c.n_states).map(|s| c.state(s)).collect(),
        MdpKind::CartPole(_) => {
            let mut out = Vec::new();
            for x in [-1.0, 0.0, 1.0] {
                for v in [-0.5, 0.0, 0.5] {
                    for th in [-0.1, 0.0, 0.1] {
                        for w in [-0.5, 0.0, 0.5] {
                            out.push(vec![x, v, th, w]);
                        }
                    }
                }
            }
            out
        }
    }
}

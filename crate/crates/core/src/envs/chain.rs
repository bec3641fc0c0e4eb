//! Tabular MDPs small enough for exact evaluation.

use crate::policy::Policy;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Finite MDP with `transition[s][a][s']`, `reward[s][a]` in `[0, 1]` and an
/// initial-state distribution. States are encoded as `[index as f64]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMdp {
    pub n_states: usize,
    pub n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    initial: Vec<f64>,
}

impl ChainMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config(
                "chain MDP needs at least one state and action".into(),
            ));
        }
        Error::check_dim(n_states * n_actions * n_states, transition.len())?;
        Error::check_dim(n_states * n_actions, reward.len())?;
        Error::check_dim(n_states, initial.len())?;
        for row in transition.chunks(n_states) {
            check_distribution(row, "transition row")?;
        }
        check_distribution(&initial, "initial distribution")?;
        if let Some(r) = reward.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Domain(format!("reward {r} outside [0, 1]")));
        }
        Ok(ChainMdp {
            n_states,
            n_actions,
            transition,
            reward,
            initial,
        })
    }

    /// One state whose actions are arms paying `rewards`.
    pub fn bandit(rewards: &[f64]) -> Result<Self> {
        let a = rewards.len();
        ChainMdp::new(1, a, vec![1.0; a], rewards.to_vec(), vec![1.0])
    }

    /// `n_states` in a line, action 0 moves left and action 1 moves right; with
    /// probability `slip` the agent stays put. Reward `left_reward` in state 0,
    /// `right_reward` in the last state, zero elsewhere. Starts in state 0.
    pub fn slippery_chain(
        n_states: usize,
        slip: f64,
        right_reward: f64,
        left_reward: f64,
    ) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::Config(
                "slippery chain needs at least 2 states".into(),
            ));
        }
        if !(0.0..=1.0).contains(&slip) {
            return Err(Error::Domain(format!("slip {slip} outside [0, 1]")));
        }
        let n_actions = 2;
        let mut transition = vec![0.0; n_states * n_actions * n_states];
        let mut reward = vec![0.0; n_states * n_actions];
        for s in 0..n_states {
            for a in 0..n_actions {
                let target = if a == 0 {
                    s.saturating_sub(1)
                } else {
                    (s + 1).min(n_states - 1)
                };
                let base = (s * n_actions + a) * n_states;
                transition[base + target] += 1.0 - slip;
                transition[base + s] += slip;
                reward[s * n_actions + a] = if s + 1 == n_states {
                    right_reward
                } else if s == 0 {
                    left_reward
                } else {
                    0.0
                };
            }
        }
        let mut initial = vec![0.0; n_states];
        initial[0] = 1.0;
        Self::new(n_states, n_actions, transition, reward, initial)
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transition[base..base + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn state(&self, s: usize) -> Vec<f64> {
        vec![s as f64]
    }

    fn policy_table<P: Policy>(&self, policy: &P) -> Result<Vec<Vec<f64>>> {
        Error::check_dim(self.n_actions, policy.n_actions())?;
        (0..self.n_states)
            .map(|s| policy.action_probs(&self.state(s)))
            .collect()
    }

    /// Exact `E[sum_{h=1}^{H} discount^{h-1} scale * r_h]` by backward induction.
    pub fn expected_return<P: Policy>(
        &self,
        policy: &P,
        horizon: usize,
        discount: f64,
        reward_scale: f64,
    ) -> Result<f64> {
        let pi = self.policy_table(policy)?;
        let mut v = vec![0.0; self.n_states];
        for _ in 0..horizon {
            v = self.backup(&pi, &v, discount, reward_scale);
        }
        Ok(dot(&self.initial, &v))
    }

    fn q_values(&self, v_next: &[f64], discount: f64, reward_scale: f64) -> Vec<f64> {
        let mut q = vec![0.0; self.n_states * self.n_actions];
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                q[s * self.n_actions + a] = reward_scale * self.reward(s, a)
                    + discount * dot(self.transition_row(s, a), v_next);
            }
        }
        q
    }

    fn backup(
        &self,
        pi: &[Vec<f64>],
        v_next: &[f64],
        discount: f64,
        reward_scale: f64,
    ) -> Vec<f64> {
        let q = self.q_values(v_next, discount, reward_scale);
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| pi[s][a] * q[s * self.n_actions + a])
                    .sum()
            })
            .collect()
    }

    /// Exact gradient of [`ChainMdp::expected_return`] with respect to the
    /// policy parameters (finite-horizon policy-gradient theorem).
    pub fn expected_return_grad<P: Policy>(
        &self,
        policy: &P,
        horizon: usize,
        discount: f64,
        reward_scale: f64,
    ) -> Result<Vec<f64>> {
        let pi = self.policy_table(policy)?;
        let n_params = policy.params().len();
        // Backward pass: q[h] for h = 0..H-1 (step h+1).
        let mut qs = vec![Vec::new(); horizon];
        let mut v = vec![0.0; self.n_states];
        for h in (0..horizon).rev() {
            qs[h] = self.q_values(&v, discount, reward_scale);
            v = (0..self.n_states)
                .map(|s| {
                    (0..self.n_actions)
                        .map(|a| pi[s][a] * qs[h][s * self.n_actions + a])
                        .sum()
                })
                .collect();
        }
        let scores: Vec<Vec<Vec<f64>>> = (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| policy.grad_log_prob(&self.state(s), a))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; n_params];
        let mut occupancy = self.initial.clone();
        let mut weight = 1.0;
        for q in &qs {
            for s in 0..self.n_states {
                if occupancy[s] == 0.0 {
                    continue;
                }
                for a in 0..self.n_actions {
                    let c = weight * occupancy[s] * pi[s][a] * q[s * self.n_actions + a];
                    for (g, sc) in grad.iter_mut().zip(&scores[s][a]) {
                        *g += c * sc;
                    }
                }
            }
            let mut next = vec![0.0; self.n_states];
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    let m = occupancy[s] * pi[s][a];
                    if m == 0.0 {
                        continue;
                    }
                    for (n, t) in next.iter_mut().zip(self.transition_row(s, a)) {
                        *n += m * t;
                    }
                }
            }
            occupancy = next;
            weight *= discount;
        }
        Ok(grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Domain(format!("{what} has a negative entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{FeatureMap, GibbsLinearPolicy};

    #[test]
    fn rows_must_sum_to_one() {
        assert!(ChainMdp::new(1, 1, vec![0.9], vec![0.0], vec![1.0]).is_err());
        assert!(ChainMdp::new(1, 1, vec![1.0], vec![1.5], vec![1.0]).is_err());
        assert!(ChainMdp::new(1, 1, vec![1.0], vec![0.5], vec![1.0]).is_ok());
    }

    #[test]
    fn slippery_chain_rows_are_distributions() {
        let c = ChainMdp::slippery_chain(3, 0.2, 1.0, 0.3).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert!((c.transition_row(s, a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(c.transition_row(0, 0), &[1.0, 0.0, 0.0]);
        assert_eq!(c.transition_row(1, 1), &[0.0, 0.2, 0.8]);
        assert_eq!(c.reward(2, 0), 1.0);
        assert_eq!(c.reward(0, 1), 0.3);
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let c = ChainMdp::slippery_chain(3, 0.15, 0.9, 0.2).unwrap();
        let fm = FeatureMap::Tabular {
            n_states: 3,
            n_actions: 2,
        };
        let theta = vec![0.3, -0.4, 0.1, 0.8, -0.5, 0.2];
        let pol = GibbsLinearPolicy::new(theta.clone(), fm.clone()).unwrap();
        let g = c.expected_return_grad(&pol, 5, 0.9, 1.0).unwrap();
        for k in 0..theta.len() {
            let h = 1e-6;
            let mut up = theta.clone();
            up[k] += h;
            let mut dn = theta.clone();
            dn[k] -= h;
            let ju = c
                .expected_return(
                    &GibbsLinearPolicy::new(up, fm.clone()).unwrap(),
                    5,
                    0.9,
                    1.0,
                )
                .unwrap();
            let jd = c
                .expected_return(
                    &GibbsLinearPolicy::new(dn, fm.clone()).unwrap(),
                    5,
                    0.9,
                    1.0,
                )
                .unwrap();
            let fd = (ju - jd) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "k={k} fd={fd} g={}", g[k]);
        }
    }
}

use super::{softmax, FeatureMap, Policy};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// `pi(a | s) = exp(theta . psi(s, a)) / sum_b exp(theta . psi(s, b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsLinearPolicy {
    pub theta: Vec<f64>,
    pub features: FeatureMap,
}

impl GibbsLinearPolicy {
    pub fn new(theta: Vec<f64>, features: FeatureMap) -> Result<Self> {
        Error::check_dim(features.dim(), theta.len())?;
        Ok(GibbsLinearPolicy { theta, features })
    }

    pub fn zeros(features: FeatureMap) -> Self {
        GibbsLinearPolicy {
            theta: vec![0.0; features.dim()],
            features,
        }
    }

    fn feature_rows(&self, state: &[f64]) -> Result<Vec<Vec<f64>>> {
        (0..self.features.n_actions())
            .map(|a| self.features.features(state, a))
            .collect()
    }

    pub fn scores(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .feature_rows(state)?
            .iter()
            .map(|f| dot(&self.theta, f))
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Policy for GibbsLinearPolicy {
    fn n_actions(&self) -> usize {
        self.features.n_actions()
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn action_probs(&self, state: &[f64]) -> Result<Vec<f64>> {
        softmax(&self.scores(state)?)
    }

    /// `psi(s, a) - sum_b pi(s, b) psi(s, b)`.
    fn grad_log_prob(&self, state: &[f64], action: usize) -> Result<Vec<f64>> {
        if action >= self.n_actions() {
            return Err(Error::Domain(format!("action {action} out of range")));
        }
        let rows = self.feature_rows(state)?;
        let scores: Vec<f64> = rows.iter().map(|f| dot(&self.theta, f)).collect();
        let probs = softmax(&scores)?;
        let mut grad = rows[action].clone();
        for (p, row) in probs.iter().zip(&rows) {
            for (g, f) in grad.iter_mut().zip(row) {
                *g -= p * f;
            }
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_arm(theta: Vec<f64>) -> GibbsLinearPolicy {
        GibbsLinearPolicy::new(theta, FeatureMap::ActionOneHot { n_actions: 2 }).unwrap()
    }

    #[test]
    fn zero_theta_is_uniform() {
        let pol = GibbsLinearPolicy::zeros(FeatureMap::StateBlock {
            n_actions: 3,
            state_dim: 2,
        });
        let p = pol.action_probs(&[0.3, -1.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_case_gradient() {
        let pol = two_arm(vec![0.0, 0.0]);
        assert_eq!(pol.grad_log_prob(&[], 0).unwrap(), vec![0.5, -0.5]);
        assert_eq!(pol.grad_log_prob(&[], 1).unwrap(), vec![-0.5, 0.5]);
    }

    #[test]
    fn large_scores_stay_finite() {
        let pol = two_arm(vec![1000.0, 999.0]);
        let p = pol.action_probs(&[]).unwrap();
        assert!((p[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn gradient_matches_central_differences() {
        // Finite-difference oracle on ln pi for a random theta with d = 4.
        let fm = FeatureMap::StateBlock {
            n_actions: 2,
            state_dim: 1,
        };
        let theta = vec![0.3, -1.2, 0.7, 0.45];
        let pol = GibbsLinearPolicy::new(theta.clone(), fm.clone()).unwrap();
        let state = [0.8];
        for a in 0..2 {
            let g = pol.grad_log_prob(&state, a).unwrap();
            for k in 0..4 {
                let h = 1e-5;
                let mut tp = theta.clone();
                tp[k] += h;
                let mut tm = theta.clone();
                tm[k] -= h;
                let lp = GibbsLinearPolicy::new(tp, fm.clone())
                    .unwrap()
                    .action_probs(&state)
                    .unwrap()[a]
                    .ln();
                let lm = GibbsLinearPolicy::new(tm, fm.clone())
                    .unwrap()
                    .action_probs(&state)
                    .unwrap()[a]
                    .ln();
                let fd = (lp - lm) / (2.0 * h);
                let scale = g[k].abs().max(1e-3);
                assert!(
                    (fd - g[k]).abs() / scale < 1e-6,
                    "a={a} k={k} fd={fd} g={}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn wrong_theta_length_is_rejected() {
        assert!(
            GibbsLinearPolicy::new(vec![0.0; 3], FeatureMap::ActionOneHot { n_actions: 2 })
                .is_err()
        );
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one_and_score_identity_holds(
            theta in proptest::collection::vec(-5.0f64..5.0, 10),
            state in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let pol = GibbsLinearPolicy::new(theta, FeatureMap::StateBlock { n_actions: 2, state_dim: 4 }).unwrap();
            let p = pol.action_probs(&state).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0));
            let mut acc = vec![0.0; 10];
            for (a, pa) in p.iter().enumerate() {
                let g = pol.grad_log_prob(&state, a).unwrap();
                for (s, gk) in acc.iter_mut().zip(g) {
                    *s += pa * gk;
                }
            }
            prop_assert!(acc.iter().all(|v| v.abs() < 1e-10));
        }

        #[test]
        fn softmax_shift_invariance(scores in proptest::collection::vec(-50.0f64..50.0, 2..6), shift in -500.0f64..500.0) {
            let a = softmax(&scores).unwrap();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let b = softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// State-action feature map `psi(s, a)` for Gibbs-linear policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// `[1, s_1, .., s_k]` written into the block of action `a`, zeros elsewhere.
    /// Dimension `n_actions * (state_dim + 1)`.
    StateBlock { n_actions: usize, state_dim: usize },
    /// One-hot over `(state index, action)`; the state is `[index]`.
    Tabular { n_states: usize, n_actions: usize },
    /// One-hot over actions, ignoring the state.
    ActionOneHot { n_actions: usize },
    /// Single feature equal to 1 for `action` and 0 otherwise.
    ActionIndicator { n_actions: usize, action: usize },
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match *self {
            FeatureMap::StateBlock {
                n_actions,
                state_dim,
            } => n_actions * (state_dim + 1),
            FeatureMap::Tabular {
                n_states,
                n_actions,
            } => n_states * n_actions,
            FeatureMap::ActionOneHot { n_actions } => n_actions,
            FeatureMap::ActionIndicator { .. } => 1,
        }
    }

    pub fn n_actions(&self) -> usize {
        match *self {
            FeatureMap::StateBlock { n_actions, .. }
            | FeatureMap::Tabular { n_actions, .. }
            | FeatureMap::ActionOneHot { n_actions }
            | FeatureMap::ActionIndicator { n_actions, .. } => n_actions,
        }
    }

    /// Writes `psi(state, action)` into `out` (length [`FeatureMap::dim`]).
    pub fn write(&self, state: &[f64], action: usize, out: &mut [f64]) -> Result<()> {
        let n_actions = self.n_actions();
        if action >= n_actions {
            return Err(Error::Domain(format!(
                "action {action} outside 0..{n_actions}"
            )));
        }
        Error::check_dim(self.dim(), out.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        match *self {
            FeatureMap::StateBlock { state_dim, .. } => {
                Error::check_dim(state_dim, state.len())?;
                if let Some(bad) = state.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Numeric(format!("state feature {bad}")));
                }
                let base = action * (state_dim + 1);
                out[base] = 1.0;
                out[base + 1..base + 1 + state_dim].copy_from_slice(state);
            }
            FeatureMap::Tabular {
                n_states,
                n_actions,
            } => {
                let s = tabular_index(state, n_states)?;
                out[s * n_actions + action] = 1.0;
            }
            FeatureMap::ActionOneHot { .. } => out[action] = 1.0,
            FeatureMap::ActionIndicator { action: hot, .. } => {
                if action == hot {
                    out[0] = 1.0;
                }
            }
        }
        Ok(())
    }

    pub fn features(&self, state: &[f64], action: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.write(state, action, &mut out)?;
        Ok(out)
    }
}

/// Decodes a tabular state stored as `[index]`.
pub(crate) fn tabular_index(state: &[f64], n_states: usize) -> Result<usize> {
    Error::check_dim(1, state.len())?;
    let v = state[0];
    if !(v >= 0.0 && v.fract() == 0.0 && (v as usize) < n_states) {
        return Err(Error::Domain(format!(
            "tabular state {v} outside 0..{n_states}"
        )));
    }
    Ok(v as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_block_layout() {
        let fm = FeatureMap::StateBlock {
            n_actions: 2,
            state_dim: 4,
        };
        assert_eq!(fm.dim(), 10);
        let f = fm.features(&[0.1, 0.2, 0.3, 0.4], 1).unwrap();
        assert_eq!(f, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn tabular_rejects_bad_state() {
        let fm = FeatureMap::Tabular {
            n_states: 3,
            n_actions: 2,
        };
        assert_eq!(fm.features(&[2.0], 1).unwrap()[5], 1.0);
        assert!(fm.features(&[3.0], 0).is_err());
        assert!(fm.features(&[0.5], 0).is_err());
    }

    #[test]
    fn invalid_action_is_domain_error() {
        let fm = FeatureMap::ActionOneHot { n_actions: 2 };
        assert!(matches!(fm.features(&[], 2), Err(Error::Domain(_))));
    }

    #[test]
    fn non_finite_state_is_numeric_error() {
        let fm = FeatureMap::StateBlock {
            n_actions: 2,
            state_dim: 1,
        };
        assert!(matches!(
            fm.features(&[f64::INFINITY], 0),
            Err(Error::Numeric(_))
        ));
    }
}

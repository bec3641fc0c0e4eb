//! Layer-wise Gaussian weights for a small MLP policy.
//!
//! Each weight is sampled multiplicatively, `w = mu * (1 + gamma * eps)` with
//! `gamma = softplus(delta)`, so an entry has mean `mu` and standard deviation
//! `gamma * |mu|`. Biases follow the same rule.

use super::features::tabular_index;
use super::{sigmoid, softmax, softplus, ParamDistribution, Policy};
use crate::rng::{standard_normal_vec, NoiseDraw};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const MAX_LAYERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// How a raw environment state becomes the network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputMap {
    Raw {
        dim: usize,
    },
    /// Tabular state `[index]` encoded one-hot.
    OneHot {
        n_states: usize,
    },
}

impl InputMap {
    pub fn dim(&self) -> usize {
        match *self {
            InputMap::Raw { dim } => dim,
            InputMap::OneHot { n_states } => n_states,
        }
    }

    fn encode(&self, state: &[f64]) -> Result<Vec<f64>> {
        match *self {
            InputMap::Raw { dim } => {
                Error::check_dim(dim, state.len())?;
                if let Some(bad) = state.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Numeric(format!("state value {bad}")));
                }
                Ok(state.to_vec())
            }
            InputMap::OneHot { n_states } => {
                let s = tabular_index(state, n_states)?;
                let mut x = vec![0.0; n_states];
                x[s] = 1.0;
                Ok(x)
            }
        }
    }
}

/// Shape of one dense layer. `activation` is `None` for the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Option<Activation>,
}

impl LayerSpec {
    fn n_params(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

fn validate_layers(input: &InputMap, layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() || layers.len() > MAX_LAYERS {
        return Err(Error::Config(format!(
            "MLP must have 1..={MAX_LAYERS} layers, got {}",
            layers.len()
        )));
    }
    Error::check_dim(input.dim(), layers[0].inputs)?;
    for pair in layers.windows(2) {
        Error::check_dim(pair[0].outputs, pair[1].inputs)?;
    }
    for (i, l) in layers.iter().enumerate() {
        let last = i + 1 == layers.len();
        if last != l.activation.is_none() {
            return Err(Error::Config(
                "hidden layers need an activation and the output layer must be linear".into(),
            ));
        }
    }
    Ok(())
}

/// Concrete MLP with a softmax head. Parameters are stored per layer as the
/// row-major weight matrix `[outputs][inputs]` followed by the bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpPolicy {
    pub input: InputMap,
    pub layers: Vec<LayerSpec>,
    pub params: Vec<f64>,
}

impl MlpPolicy {
    pub fn new(input: InputMap, layers: Vec<LayerSpec>, params: Vec<f64>) -> Result<Self> {
        validate_layers(&input, &layers)?;
        Error::check_dim(layers.iter().map(LayerSpec::n_params).sum(), params.len())?;
        Ok(MlpPolicy {
            input,
            layers,
            params,
        })
    }

    /// Pre-activations and activations of every layer, input first.
    fn forward(&self, state: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let mut acts = vec![self.input.encode(state)?];
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for layer in &self.layers {
            let x = acts.last().unwrap();
            let (w, rest) = self.params[offset..].split_at(layer.inputs * layer.outputs);
            let b = &rest[..layer.outputs];
            let z: Vec<f64> = (0..layer.outputs)
                .map(|o| {
                    let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b[o]
                })
                .collect();
            let a = match layer.activation {
                Some(act) => z.iter().map(|&v| act.apply(v)).collect(),
                None => z.clone(),
            };
            pre.push(z);
            acts.push(a);
            offset += layer.n_params();
        }
        Ok((pre, acts))
    }

    pub fn logits(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(state)?.1.pop().unwrap())
    }
}

impl Policy for MlpPolicy {
    fn n_actions(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn action_probs(&self, state: &[f64]) -> Result<Vec<f64>> {
        softmax(&self.logits(state)?)
    }

    fn grad_log_prob(&self, state: &[f64], action: usize) -> Result<Vec<f64>> {
        if action >= self.n_actions() {
            return Err(Error::Domain(format!("action {action} out of range")));
        }
        let (pre, acts) = self.forward(state)?;
        let probs = softmax(acts.last().unwrap())?;
        let mut delta: Vec<f64> = probs.iter().map(|p| -p).collect();
        delta[action] += 1.0;

        let mut grad = vec![0.0; self.params.len()];
        let mut end = self.params.len();
        for (r, layer) in self.layers.iter().enumerate().rev() {
            let start = end - layer.n_params();
            let x = &acts[r];
            let (gw, gb) = grad[start..end].split_at_mut(layer.inputs * layer.outputs);
            for o in 0..layer.outputs {
                gb[o] = delta[o];
                for i in 0..layer.inputs {
                    gw[o * layer.inputs + i] = delta[o] * x[i];
                }
            }
            if r > 0 {
                let w = &self.params[start..start + layer.inputs * layer.outputs];
                let prev_act = self.layers[r - 1].activation.expect("hidden activation");
                delta = (0..layer.inputs)
                    .map(|i| {
                        let back: f64 = (0..layer.outputs)
                            .map(|o| w[o * layer.inputs + i] * delta[o])
                            .sum();
                        back * prev_act.derivative(pre[r - 1][i])
                    })
                    .collect();
            }
            end = start;
        }
        Ok(grad)
    }
}

/// Gaussian weights of one layer. Matrices are row-major `[outputs][inputs]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Option<Activation>,
    pub mu_w: Vec<f64>,
    pub delta_w: Vec<f64>,
    pub mu_b: Vec<f64>,
    pub delta_b: Vec<f64>,
}

impl GaussianLayer {
    fn spec(&self) -> LayerSpec {
        LayerSpec {
            inputs: self.inputs,
            outputs: self.outputs,
            activation: self.activation,
        }
    }

    fn check(&self) -> Result<()> {
        let nw = self.inputs * self.outputs;
        Error::check_dim(nw, self.mu_w.len())?;
        Error::check_dim(nw, self.delta_w.len())?;
        Error::check_dim(self.outputs, self.mu_b.len())?;
        Error::check_dim(self.outputs, self.delta_b.len())?;
        Ok(())
    }
}

/// Per-layer `(mu, delta)` Gaussian over MLP weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredGaussianPolicy {
    pub input: InputMap,
    pub layers: Vec<GaussianLayer>,
}

impl LayeredGaussianPolicy {
    pub fn new(input: InputMap, layers: Vec<GaussianLayer>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(GaussianLayer::spec).collect();
        validate_layers(&input, &specs)?;
        for l in &layers {
            l.check()?;
        }
        Ok(LayeredGaussianPolicy { input, layers })
    }

    /// `mu ~ N(0, 2 / fan_in)` for weights and biases, `delta = -2`.
    pub fn initial<R: Rng + ?Sized>(
        input: InputMap,
        specs: &[LayerSpec],
        rng: &mut R,
    ) -> Result<Self> {
        validate_layers(&input, specs)?;
        let layers = specs
            .iter()
            .map(|s| {
                let scale = (2.0 / s.inputs as f64).sqrt();
                let nw = s.inputs * s.outputs;
                GaussianLayer {
                    inputs: s.inputs,
                    outputs: s.outputs,
                    activation: s.activation,
                    mu_w: standard_normal_vec(rng, nw)
                        .into_iter()
                        .map(|v| v * scale)
                        .collect(),
                    delta_w: vec![-2.0; nw],
                    mu_b: standard_normal_vec(rng, s.outputs)
                        .into_iter()
                        .map(|v| v * scale)
                        .collect(),
                    delta_b: vec![-2.0; s.outputs],
                }
            })
            .collect();
        Ok(LayeredGaussianPolicy { input, layers })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(GaussianLayer::spec).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.spec().n_params()).sum()
    }

    /// Means in MLP parameter layout.
    pub fn mu_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.mu_w);
            out.extend_from_slice(&l.mu_b);
        }
        out
    }

    pub fn delta_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.delta_w);
            out.extend_from_slice(&l.delta_b);
        }
        out
    }

    /// Per-entry `gamma = softplus(delta)`.
    pub fn gamma_flat(&self) -> Vec<f64> {
        self.delta_flat().into_iter().map(softplus).collect()
    }

    /// Per-entry standard deviation `gamma * |mu|`.
    pub fn std_flat(&self) -> Vec<f64> {
        self.mu_flat()
            .iter()
            .zip(self.gamma_flat())
            .map(|(m, g)| g * m.abs())
            .collect()
    }

    fn set_flat(&mut self, mu: &[f64], delta: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.mu_w.len();
            let nb = l.mu_b.len();
            l.mu_w.copy_from_slice(&mu[off..off + nw]);
            l.delta_w.copy_from_slice(&delta[off..off + nw]);
            l.mu_b.copy_from_slice(&mu[off + nw..off + nw + nb]);
            l.delta_b.copy_from_slice(&delta[off + nw..off + nw + nb]);
            off += nw + nb;
        }
    }

    /// `w = mu * (1 + softplus(delta) * eps)`; noise is laid out like the MLP
    /// parameters (per layer: weights then biases).
    pub fn sample_layered(&self, noise: &NoiseDraw) -> Result<MlpPolicy> {
        Error::check_dim(self.n_params(), noise.len())?;
        let params = self
            .mu_flat()
            .iter()
            .zip(self.gamma_flat())
            .zip(&noise.epsilon)
            .map(|((m, g), e)| m * (1.0 + g * e))
            .collect();
        Ok(MlpPolicy {
            input: self.input.clone(),
            layers: self.specs(),
            params,
        })
    }
}

impl ParamDistribution for LayeredGaussianPolicy {
    type Policy = MlpPolicy;

    fn noise_dim(&self) -> usize {
        self.n_params()
    }

    fn sample(&self, noise: &NoiseDraw) -> Result<MlpPolicy> {
        self.sample_layered(noise)
    }

    fn mean_policy(&self) -> MlpPolicy {
        MlpPolicy {
            input: self.input.clone(),
            layers: self.specs(),
            params: self.mu_flat(),
        }
    }

    fn free_params(&self) -> Vec<f64> {
        let mut v = self.mu_flat();
        v.extend(self.delta_flat());
        v
    }

    fn set_free_params(&mut self, free: &[f64]) -> Result<()> {
        let p = self.n_params();
        Error::check_dim(2 * p, free.len())?;
        if let Some(bad) = free.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("layered parameter {bad}")));
        }
        self.set_flat(&free[..p], &free[p..]);
        Ok(())
    }

    /// `dw/dmu = 1 + gamma * eps`, `dw/ddelta = mu * eps * sigmoid(delta)`.
    fn pullback(&self, noise: &NoiseDraw, grad_params: &[f64]) -> Result<Vec<f64>> {
        let p = self.n_params();
        Error::check_dim(p, noise.len())?;
        Error::check_dim(p, grad_params.len())?;
        let mu = self.mu_flat();
        let delta = self.delta_flat();
        let mut out = vec![0.0; 2 * p];
        for k in 0..p {
            let e = noise.epsilon[k];
            out[k] = grad_params[k] * (1.0 + softplus(delta[k]) * e);
            out[p + k] = grad_params[k] * mu[k] * e * sigmoid(delta[k]);
        }
        Ok(out)
    }

    fn kl(&self, prior: &Self) -> Result<f64> {
        let (s, sb) = (self.std_flat(), prior.std_flat());
        Error::check_dim(s.len(), sb.len())?;
        let (m, mb) = (self.mu_flat(), prior.mu_flat());
        let mut total = 0.0;
        for k in 0..s.len() {
            if !(s[k] > 0.0 && sb[k] > 0.0) {
                return Err(Error::Domain(format!(
                    "zero weight scale at entry {k} (mu = 0 or gamma underflow)"
                )));
            }
            let dm = m[k] - mb[k];
            total += (sb[k] / s[k]).ln() + (s[k] * s[k] + dm * dm) / (2.0 * sb[k] * sb[k]) - 0.5;
        }
        Ok(total.max(0.0))
    }

    fn kl_grad(&self, prior: &Self) -> Result<Vec<f64>> {
        let p = self.n_params();
        Error::check_dim(p, prior.n_params())?;
        let (m, mb) = (self.mu_flat(), prior.mu_flat());
        let delta = self.delta_flat();
        let sb = prior.std_flat();
        let mut out = vec![0.0; 2 * p];
        for k in 0..p {
            let g = softplus(delta[k]);
            let vb = sb[k] * sb[k];
            if !(m[k] != 0.0 && vb > 0.0) {
                return Err(Error::Domain(format!("zero weight scale at entry {k}")));
            }
            out[k] = -1.0 / m[k] + (g * g * m[k] + (m[k] - mb[k])) / vb;
            out[p + k] = sigmoid(delta[k]) * (-1.0 / g + g * m[k] * m[k] / vb);
        }
        Ok(out)
    }

    fn evolve_toward(&mut self, posterior: &Self, lambda: f64) -> Result<()> {
        Error::check_dim(self.n_params(), posterior.n_params())?;
        let mix = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> {
            a.iter()
                .zip(&b)
                .map(|(x, y)| (1.0 - lambda) * x + lambda * y)
                .collect()
        };
        let mu = mix(self.mu_flat(), posterior.mu_flat());
        let delta = mix(self.delta_flat(), posterior.delta_flat());
        self.set_flat(&mu, &delta);
        Ok(())
    }
}

/// Inverse of [`softplus`] for positive arguments.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn net() -> LayeredGaussianPolicy {
        let mut rng = stream(3, Purpose::Init, &[]);
        LayeredGaussianPolicy::initial(
            InputMap::Raw { dim: 3 },
            &[
                LayerSpec {
                    inputs: 3,
                    outputs: 4,
                    activation: Some(Activation::Tanh),
                },
                LayerSpec {
                    inputs: 4,
                    outputs: 3,
                    activation: Some(Activation::Relu),
                },
                LayerSpec {
                    inputs: 3,
                    outputs: 2,
                    activation: None,
                },
            ],
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn zero_delta_gives_ln2_scale() {
        let mut n = net();
        let p = n.n_params();
        let mut free = n.free_params();
        free[p..].iter_mut().for_each(|d| *d = 0.0);
        n.set_free_params(&free).unwrap();
        assert!(n.gamma_flat().iter().all(|&g| g == std::f64::consts::LN_2));
    }

    #[test]
    fn zero_noise_returns_means() {
        let n = net();
        let pol = n.sample_layered(&NoiseDraw::zeros(n.n_params())).unwrap();
        assert_eq!(pol.params, n.mu_flat());
        assert!(n
            .sample_layered(&NoiseDraw::zeros(n.n_params() + 1))
            .is_err());
    }

    #[test]
    fn shapes_must_compose() {
        let bad = [
            LayerSpec {
                inputs: 3,
                outputs: 4,
                activation: Some(Activation::Tanh),
            },
            LayerSpec {
                inputs: 5,
                outputs: 2,
                activation: None,
            },
        ];
        let mut rng = stream(0, Purpose::Init, &[]);
        assert!(LayeredGaussianPolicy::initial(InputMap::Raw { dim: 3 }, &bad, &mut rng).is_err());
    }

    #[test]
    fn mlp_grad_log_prob_matches_finite_differences() {
        let n = net();
        let pol = n
            .sample_layered(&NoiseDraw::new(1, 0, n.n_params()))
            .unwrap();
        let state = [0.4, -0.7, 1.1];
        for a in 0..2 {
            let g = pol.grad_log_prob(&state, a).unwrap();
            for k in 0..pol.params.len() {
                let h = 1e-6;
                let mut up = pol.clone();
                up.params[k] += h;
                let mut dn = pol.clone();
                dn.params[k] -= h;
                let fd = (up.action_probs(&state).unwrap()[a].ln()
                    - dn.action_probs(&state).unwrap()[a].ln())
                    / (2.0 * h);
                assert!(
                    (fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0),
                    "a={a} k={k}"
                );
            }
        }
    }

    #[test]
    fn pullback_matches_finite_differences_of_sampled_weights() {
        let n = net();
        let noise = NoiseDraw::new(9, 2, n.n_params());
        let state = [0.2, 0.1, -0.5];
        let objective = |d: &LayeredGaussianPolicy| {
            d.sample_layered(&noise)
                .unwrap()
                .action_probs(&state)
                .unwrap()[1]
                .ln()
        };
        let pol = n.sample_layered(&noise).unwrap();
        let g = n
            .pullback(&noise, &pol.grad_log_prob(&state, 1).unwrap())
            .unwrap();
        let free = n.free_params();
        for k in (0..free.len()).step_by(3) {
            let h = 1e-6;
            let mut up = n.clone();
            let mut f = free.clone();
            f[k] += h;
            up.set_free_params(&f).unwrap();
            let mut dn = n.clone();
            f[k] -= 2.0 * h;
            dn.set_free_params(&f).unwrap();
            let fd = (objective(&up) - objective(&dn)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0), "k={k}");
        }
    }

    #[test]
    fn kl_gradient_matches_finite_differences() {
        let prior = net();
        let mut post = prior.clone();
        let mut f = post.free_params();
        for (i, v) in f.iter_mut().enumerate() {
            *v += 0.05 * ((i % 7) as f64 - 3.0);
        }
        post.set_free_params(&f).unwrap();
        let g = post.kl_grad(&prior).unwrap();
        for k in 0..f.len() {
            let h = 1e-6;
            let mut up = post.clone();
            let mut fu = f.clone();
            fu[k] += h;
            up.set_free_params(&fu).unwrap();
            let mut dn = post.clone();
            fu[k] -= 2.0 * h;
            dn.set_free_params(&fu).unwrap();
            let fd = (up.kl(&prior).unwrap() - dn.kl(&prior).unwrap()) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() < 1e-5 * g[k].abs().max(1.0),
                "k={k} fd={fd} g={}",
                g[k]
            );
        }
        assert_eq!(prior.kl(&prior).unwrap(), 0.0);
    }

    #[test]
    fn one_hot_input() {
        let mut rng = stream(4, Purpose::Init, &[]);
        let n = LayeredGaussianPolicy::initial(
            InputMap::OneHot { n_states: 3 },
            &[LayerSpec {
                inputs: 3,
                outputs: 2,
                activation: None,
            }],
            &mut rng,
        )
        .unwrap();
        let pol = n.mean_policy();
        let p = pol.action_probs(&[2.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pol.action_probs(&[3.0]).is_err());
    }

    #[test]
    fn softplus_inverse() {
        for y in [1e-3, 0.1, std::f64::consts::LN_2, 2.0, 40.0] {
            assert!((softplus(softplus_inv(y)) - y).abs() < 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn json_round_trip() {
        let n = net();
        let text = serde_json::to_string(&n).unwrap();
        let back: LayeredGaussianPolicy = serde_json::from_str(&text).unwrap();
        assert_eq!(back, n);
    }
}

use crate::envs::{exact_expected_return, rollout, MdpKind, ParamMdp};
use crate::policy::ParamDistribution;
use crate::rng::{standard_normal_vec, stream, NoiseDraw, Purpose};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Differences `D_l`, their prefix sums and both concentration envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTrace {
    pub d: Vec<f64>,
    pub s: Vec<f64>,
    pub n: usize,
    pub horizon: usize,
    pub delta: f64,
    pub bound_az: f64,
    pub bound_fr: f64,
    /// Grid value of the Freedman parameter attaining `bound_fr`.
    pub fr_lambda: f64,
}

impl MartingaleTrace {
    pub fn final_sum(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    pub fn exceeds_azuma(&self) -> bool {
        self.final_sum().abs() > self.bound_az
    }
}

/// `sqrt(ln(2/delta) T N^2 H^2 / 2)`: each `D_l` lies in an interval of
/// length `N H` once the window's policy is fixed.
pub fn azuma_envelope(t: usize, n: usize, h: usize, delta: f64) -> f64 {
    let c = (n * h) as f64;
    (0.5 * (2.0 / delta).ln() * t as f64 * c * c).sqrt()
}

/// `(1/lambda) ln(2/delta) + lambda T N^2 H^2`.
pub fn freedman_envelope(t: usize, n: usize, h: usize, delta: f64, lambda: f64) -> f64 {
    let c = (n * h) as f64;
    (2.0 / delta).ln() / lambda + lambda * t as f64 * c * c
}

/// Minimum of [`freedman_envelope`] over `lambda_k = c^-k / (N H)` with
/// `c = sqrt 2`, `k = 0..64`.
pub fn freedman_grid_min(t: usize, n: usize, h: usize, delta: f64) -> (f64, f64) {
    let b = (n * h) as f64;
    let c = std::f64::consts::SQRT_2;
    (0..64)
        .map(|k| {
            let lam = c.powi(-k) / b;
            (freedman_envelope(t, n, h, delta, lam), lam)
        })
        .fold((f64::INFINITY, 0.0), |best, cur| {
            if cur.0 < best.0 {
                cur
            } else {
                best
            }
        })
}

/// One trace over `p_sequence.len()` windows. Window `l` draws one policy from
/// `p_sequence[l]`; task `i` of the window is `tasks[(l N + i) mod len]`.
/// `D_l = sum_i (E[V_i | policy] - V_i)` with one realized rollout per task.
pub fn simulate_martingale<D: ParamDistribution>(
    tasks: &[ParamMdp],
    p_sequence: &[D],
    n: usize,
    delta: f64,
    seed: u64,
) -> Result<MartingaleTrace> {
    if tasks.is_empty() || p_sequence.is_empty() || n == 0 {
        return Err(Error::Protocol(
            "martingale needs tasks, windows and N > 0".into(),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta {delta} outside (0, 1)")));
    }
    if tasks.iter().any(|t| !matches!(t.kind, MdpKind::Chain(_))) {
        return Err(Error::Unsupported(
            "martingale simulation needs tabular tasks".into(),
        ));
    }
    let horizon = tasks.iter().map(|t| t.horizon).max().unwrap_or(0);
    let bound = (n * horizon) as f64;
    let mut d = Vec::with_capacity(p_sequence.len());
    for (l, dist) in p_sequence.iter().enumerate() {
        let mut rng = stream(seed, Purpose::Martingale, &[l as u64]);
        let noise = NoiseDraw::from_vec(standard_normal_vec(&mut rng, dist.noise_dim()));
        let policy = dist.sample(&noise)?;
        let mut dl = 0.0;
        for i in 0..n {
            let task = &tasks[(l * n + i) % tasks.len()];
            let expected = exact_expected_return(task, &policy)?;
            let mut rr = stream(seed, Purpose::Martingale, &[l as u64, 1 + i as u64]);
            dl += expected - rollout(task, &policy, &mut rr)?.return_discounted;
        }
        assert!(
            dl.abs() <= bound,
            "|D_{l}| = {} exceeds N H = {bound}",
            dl.abs()
        );
        d.push(dl);
    }
    let mut s = Vec::with_capacity(d.len());
    let mut acc = 0.0;
    for v in &d {
        acc += v;
        s.push(acc);
    }
    let t = d.len();
    let (bound_fr, fr_lambda) = freedman_grid_min(t, n, horizon, delta);
    Ok(MartingaleTrace {
        bound_az: azuma_envelope(t, n, horizon, delta),
        bound_fr,
        fr_lambda,
        d,
        s,
        n,
        horizon,
        delta,
    })
}

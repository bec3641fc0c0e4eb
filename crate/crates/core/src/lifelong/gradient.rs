use crate::envs::{rollout, ParamMdp, Trajectory};
use crate::pacbayes::{training_regularizer, training_regularizer_slope, RegularizerConfig};
use crate::policy::{ParamDistribution, Policy};
use crate::rng::{stream, NoiseDraw, Purpose};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Monte-Carlo estimate of the regularized objective and its gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    /// Gradient of the loss (negative return plus regularizer) in the free parameters.
    pub grad: Vec<f64>,
    /// `-sum_i mean_j J_ij + R(KL)`.
    pub loss: f64,
    pub mean_return: f64,
    /// Realized returns, task-major.
    pub returns: Vec<f64>,
    pub kl: f64,
    pub regularizer: f64,
}

/// Per-step baselines for each trajectory: the mean reward-to-go at that step
/// over the other trajectories of the batch. Trajectories that ended earlier
/// contribute zero. A batch of one gets its own reward-to-go.
pub fn leave_one_out_baselines(batch: &[&Trajectory]) -> Vec<Vec<f64>> {
    let togo: Vec<Vec<f64>> = batch.iter().map(|t| t.reward_to_go()).collect();
    if batch.len() == 1 {
        return togo;
    }
    let longest = togo.iter().map(Vec::len).max().unwrap_or(0);
    let mut totals = vec![0.0; longest];
    for g in &togo {
        for (t, v) in totals.iter_mut().zip(g) {
            *t += v;
        }
    }
    let others = (batch.len() - 1) as f64;
    togo.iter()
        .map(|g| {
            g.iter()
                .zip(&totals)
                .map(|(own, total)| (total - own) / others)
                .collect()
        })
        .collect()
}

/// `sum_h discount^h grad log pi(a_h | s_h) (G_h - b_h)`.
pub fn score_gradient<P: Policy>(
    policy: &P,
    traj: &Trajectory,
    baseline: &[f64],
) -> Result<Vec<f64>> {
    let togo = traj.reward_to_go();
    let mut out = vec![0.0; policy.params().len()];
    let mut w = 1.0;
    for ((step, g), b) in traj.steps.iter().zip(&togo).zip(baseline) {
        let adv = w * (g - b);
        if adv != 0.0 {
            let score = policy.grad_log_prob(&step.state, step.action)?;
            for (o, s) in out.iter_mut().zip(&score) {
                *o += adv * s;
            }
        }
        w *= traj.discount;
    }
    Ok(out)
}

/// Draws `m` policies from `posterior`, rolls each out once on every task, and
/// returns the score-function gradient chained to the free parameters plus the
/// analytic regularizer gradient.
///
/// The regularizer enters once per update. Noise index `(update << 32) | j`
/// and rollout stream `(update, task, draw)` make the estimate independent of
/// thread scheduling.
pub fn estimate_gradient<D: ParamDistribution>(
    posterior: &D,
    prior: &D,
    tasks: &[ParamMdp],
    m: usize,
    cfg: &RegularizerConfig,
    seed: u64,
    update: u64,
) -> Result<GradientEstimate> {
    if tasks.is_empty() || m == 0 {
        return Err(Error::Protocol(
            "gradient needs at least one task and one draw".into(),
        ));
    }
    let dim = posterior.noise_dim();
    let noises: Vec<NoiseDraw> = (0..m as u64)
        .map(|j| NoiseDraw::new(seed, (update << 32) | j, dim))
        .collect();
    let policies = noises
        .iter()
        .map(|n| posterior.sample(n))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..tasks.len())
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .collect();
    let trajs = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut rng = stream(seed, Purpose::Rollout, &[update, i as u64, j as u64]);
            rollout(&tasks[i], &policies[j], &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    let baselines = leave_one_out_baselines(&refs);
    let pulled = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(_, j))| {
            let g = score_gradient(&policies[j], &trajs[k], &baselines[k])?;
            posterior.pullback(&noises[j], &g)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grad = vec![0.0; posterior.free_params().len()];
    for g in &pulled {
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let inv_m = 1.0 / m as f64;
    for g in grad.iter_mut() {
        *g *= -inv_m;
    }
    let returns: Vec<f64> = trajs.iter().map(|t| t.return_discounted).collect();
    let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;

    let kl = posterior.kl(prior)?;
    let regularizer = training_regularizer(kl, cfg)?;
    if cfg.reg_scale > 0.0 {
        let slope = training_regularizer_slope(kl, cfg)?;
        for (g, k) in grad.iter_mut().zip(posterior.kl_grad(prior)?) {
            *g += slope * k;
        }
    }
    let loss = -mean_return * tasks.len() as f64 + regularizer;
    Ok(GradientEstimate {
        grad,
        loss,
        mean_return,
        returns,
        kl,
        regularizer,
    })
}

/// `steps` REINFORCE iterations on a single task, each from `batch`
/// rollouts, with gradient ascent of size `beta` and global-norm clipping.
///
/// Streams are keyed by `(purpose, tag, step, rollout)`.
#[allow(clippy::too_many_arguments)]
pub fn reinforce_finetune<P: Policy + Clone>(
    policy: &P,
    task: &ParamMdp,
    steps: usize,
    batch: usize,
    beta: f64,
    clip_norm: f64,
    seed: u64,
    purpose: Purpose,
    tag: u64,
) -> Result<P> {
    let mut current = policy.clone();
    for step in 0..steps {
        let trajs = (0..batch)
            .map(|b| {
                let mut rng = stream(seed, purpose, &[tag, step as u64, b as u64]);
                rollout(task, &current, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Trajectory> = trajs.iter().collect();
        let baselines = leave_one_out_baselines(&refs);
        let mut grad = vec![0.0; current.params().len()];
        for (t, b) in trajs.iter().zip(&baselines) {
            for (a, g) in grad.iter_mut().zip(score_gradient(&current, t, b)?) {
                *a += g / batch as f64;
            }
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite fine-tuning gradient at step {step}"
            )));
        }
        let scale = if norm > clip_norm {
            clip_norm / norm
        } else {
            1.0
        };
        for (p, g) in current.params_mut().iter_mut().zip(&grad) {
            *p += beta * scale * g;
        }
    }
    Ok(current)
}

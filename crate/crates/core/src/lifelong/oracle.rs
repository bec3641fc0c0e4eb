use crate::envs::{exact_expected_return, exact_expected_return_grad, ParamMdp};
use crate::pacbayes::{training_regularizer, training_regularizer_slope, RegularizerConfig};
use crate::policy::{FlatGibbsDistribution, ParamDistribution};
use crate::quadrature::GaussHermite;
use crate::rng::NoiseDraw;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

const MAX_NODES: usize = 300_000;

/// Deterministic objective `-sum_i E[J_i] + R(KL)` and its gradient in
/// `(mu, ln sigma)`, by tensor Gauss-Hermite quadrature over the noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureObjective {
    pub value: f64,
    pub grad: Vec<f64>,
    /// `sum_i E[J_i]`.
    pub expected_return: f64,
}

pub fn objective_quadrature(
    posterior: &FlatGibbsDistribution,
    prior: &FlatGibbsDistribution,
    tasks: &[ParamMdp],
    cfg: &RegularizerConfig,
    points: usize,
) -> Result<QuadratureObjective> {
    let rule = GaussHermite::new(points)?;
    let d = posterior.noise_dim();
    let mut ret = 0.0;
    let mut grad = vec![0.0; 2 * d];
    let mut failure = None;
    rule.for_each_node(d, MAX_NODES, |eps, w| {
        if failure.is_some() {
            return;
        }
        let noise = NoiseDraw::from_vec(eps.to_vec());
        let step = (|| -> Result<()> {
            let pol = posterior.sample(&noise)?;
            let mut g_theta = vec![0.0; d];
            for task in tasks {
                ret += w * exact_expected_return(task, &pol)?;
                for (a, b) in g_theta
                    .iter_mut()
                    .zip(exact_expected_return_grad(task, &pol)?)
                {
                    *a += b;
                }
            }
            for (a, b) in grad.iter_mut().zip(posterior.pullback(&noise, &g_theta)?) {
                *a -= w * b;
            }
            Ok(())
        })();
        if let Err(e) = step {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let kl = posterior.kl(prior)?;
    let reg = training_regularizer(kl, cfg)?;
    if cfg.reg_scale > 0.0 {
        let slope = training_regularizer_slope(kl, cfg)?;
        for (g, k) in grad.iter_mut().zip(posterior.kl_grad(prior)?) {
            *g += slope * k;
        }
    }
    Ok(QuadratureObjective {
        value: -ret + reg,
        grad,
        expected_return: ret,
    })
}

fn expected_loss(
    dist: &FlatGibbsDistribution,
    task: &ParamMdp,
    rule: &GaussHermite,
) -> Result<f64> {
    let mut total = 0.0;
    let mut failure = None;
    rule.for_each_node(dist.noise_dim(), MAX_NODES, |eps, w| {
        match dist
            .sample(&NoiseDraw::from_vec(eps.to_vec()))
            .and_then(|p| exact_expected_return(task, &p))
        {
            Ok(j) => total -= w * j,
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Both sides of the training-error decomposition: the per-task average
/// `(1/K) sum_i E_{P_{l(i)-1}}[-J_i]` and the per-window average
/// `(1/T) sum_l (1/N) sum_{i in window l} E_{P_{l-1}}[-J_i]`, each computed by
/// its own pass of quadrature. `joint[l]` is the distribution used in window `l`.
pub fn proposition1_check(
    tasks: &[ParamMdp],
    joint: &[FlatGibbsDistribution],
    n: usize,
    points: usize,
) -> Result<(f64, f64)> {
    let t = joint.len();
    if n == 0 || t == 0 || tasks.len() != t * n {
        return Err(Error::Protocol(format!(
            "{} tasks do not form {t} windows of {n}",
            tasks.len()
        )));
    }
    if joint.iter().any(|p| p.noise_dim() > 2) {
        return Err(Error::Unsupported(
            "quadrature check supports at most 2 parameters".into(),
        ));
    }
    let rule = GaussHermite::new(points)?;
    let mut lhs = 0.0;
    for (i, task) in tasks.iter().enumerate() {
        lhs += expected_loss(&joint[i / n], task, &rule)?;
    }
    lhs /= tasks.len() as f64;
    let mut rhs = 0.0;
    for (l, dist) in joint.iter().enumerate() {
        let mut window = 0.0;
        for task in &tasks[l * n..(l + 1) * n] {
            window += expected_loss(dist, task, &rule)?;
        }
        rhs += window / n as f64;
    }
    rhs /= t as f64;
    Ok((lhs, rhs))
}

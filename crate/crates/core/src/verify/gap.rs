use crate::envs::{exact_expected_return, rollout, MdpKind, TaskDistribution};
use crate::lifelong::{sample_sd, RunLog};
use crate::pacbayes::{theorem1_bound, theorem1_bound_with_log_term, RegularizerConfig};
use crate::policy::ParamDistribution;
use crate::rng::{standard_normal_vec, stream, NoiseDraw, Purpose};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Measured generalization gap against the computed bounds.
///
/// Losses are negative discounted returns. The expected loss averages the
/// snapshots used for training, `P_0 .. P_{T-1}`, over fresh tasks, matching
/// how the training error averages the same snapshots over the stored tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub seed: u64,
    pub holdout_tasks: usize,
    pub expected_loss: f64,
    pub expected_loss_se: f64,
    pub training_error: f64,
    pub training_error_se: f64,
    pub gap: f64,
    pub gap_se: f64,
    /// Loss of the final posterior alone on the same holdout tasks.
    pub final_posterior_loss: f64,
    /// Bound with `ln(2/delta) = K^gamma`.
    pub bound_stated: f64,
    /// Bound with `ln(2/delta) = K`.
    pub bound_proof: f64,
    /// Last regularizer value used in training.
    pub regularizer_used: f64,
    pub covered: bool,
}

/// Evaluates the run's training snapshots on `holdout_tasks` fresh tasks, with
/// `draws` policy samples per (snapshot, task).
pub fn gap_report<D: ParamDistribution>(
    run: &RunLog<D>,
    tasks: &TaskDistribution,
    cfg: &RegularizerConfig,
    holdout_tasks: usize,
    draws: usize,
    seed: u64,
) -> Result<GapReport> {
    if holdout_tasks == 0 {
        return Err(Error::Config("holdout_tasks must be at least 1".into()));
    }
    if draws == 0 {
        return Err(Error::Config("draws must be at least 1".into()));
    }
    let live: Vec<_> = run.updates.iter().filter(|u| !u.aborted).collect();
    if live.is_empty() {
        return Err(Error::InsufficientData(
            "run has no completed update".into(),
        ));
    }
    let used = &run.snapshots[..run.snapshots.len() - 1];
    let last = run.snapshots.last().expect("snapshots are never empty");

    let mut per_task = Vec::with_capacity(holdout_tasks);
    let mut final_total = 0.0;
    for j in 0..holdout_tasks {
        let mut rng = stream(seed, Purpose::Holdout, &[j as u64]);
        let task = tasks.sample_with(&mut rng)?.1;
        let value = |dist: &D, tag: u64| -> Result<f64> {
            let mut acc = 0.0;
            for k in 0..draws {
                let mut nr = stream(seed, Purpose::Holdout, &[j as u64, tag, k as u64]);
                let noise = NoiseDraw::from_vec(standard_normal_vec(&mut nr, dist.noise_dim()));
                let pol = dist.sample(&noise)?;
                acc += match task.kind {
                    MdpKind::Chain(_) => exact_expected_return(&task, &pol)?,
                    MdpKind::CartPole(_) => rollout(&task, &pol, &mut nr)?.return_discounted,
                };
            }
            Ok(acc / draws as f64)
        };
        let mut loss = 0.0;
        for (l, dist) in used.iter().enumerate() {
            loss -= value(dist, 1 + l as u64)?;
        }
        per_task.push(loss / used.len() as f64);
        final_total -= value(last, 0)?;
    }
    let expected_loss = per_task.iter().sum::<f64>() / holdout_tasks as f64;
    let expected_loss_se = sample_sd(&per_task) / (holdout_tasks as f64).sqrt();

    let t = live.len() as f64;
    let training_error = -live.iter().map(|u| u.train_return).sum::<f64>() / t;
    let var_sum: f64 = live
        .iter()
        .map(|u| u.train_return_sd.powi(2) / u.train_samples.max(1) as f64)
        .sum();
    let training_error_se = var_sum.sqrt() / t;

    let k_cfg = RegularizerConfig {
        k_seen: run.tasks.len(),
        ..cfg.clone()
    };
    let bound_stated = theorem1_bound(&k_cfg)?.value;
    let bound_proof = theorem1_bound_with_log_term(&k_cfg, run.tasks.len() as f64)?.value;
    let gap = expected_loss - training_error;
    Ok(GapReport {
        seed: run.seed,
        holdout_tasks,
        expected_loss,
        expected_loss_se,
        training_error,
        training_error_se,
        gap,
        gap_se: (expected_loss_se.powi(2) + training_error_se.powi(2)).sqrt(),
        final_posterior_loss: final_total / holdout_tasks as f64,
        bound_stated,
        bound_proof,
        regularizer_used: live.last().map(|u| u.training_regularizer).unwrap_or(0.0),
        covered: gap <= bound_stated,
    })
}

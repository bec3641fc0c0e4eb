//! The lifelong loop: memory buffer, EPICG update, the fine-tune variant and
//! the single-task baseline.
//!
//! A run is a pure function of its configuration and seed. Every rollout and
//! noise vector comes from a stream keyed by the seed and the indices of the
//! work item, so the rollouts inside one update can run on any number of
//! threads and still reduce to the same bits.

mod gradient;
mod oracle;
mod run;

pub use gradient::{
    estimate_gradient, leave_one_out_baselines, reinforce_finetune, score_gradient,
    GradientEstimate,
};
pub use oracle::{objective_quadrature, proposition1_check, QuadratureObjective};
pub use run::{epicg_ft, evaluate_policy, run_lifelong, single_task_baseline};

use crate::envs::{ParamMdp, TaskDistribution};
use crate::pacbayes::RegularizerConfig;
use crate::policy::ParamDistribution;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which training loop produced a [`RunLog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Epicg,
    EpicgFt,
    SingleTask,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Epicg => "epicg",
            Algo::EpicgFt => "epicg_ft",
            Algo::SingleTask => "single_task",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "epicg" => Ok(Algo::Epicg),
            "epicg_ft" => Ok(Algo::EpicgFt),
            "single_task" => Ok(Algo::SingleTask),
            other => Err(Error::Config(format!(
                "unknown algo {other:?}; expected epicg, epicg_ft or single_task"
            ))),
        }
    }
}

/// The task stream: where tasks come from and how many arrive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub tasks: TaskDistribution,
    /// Total tasks `K`.
    pub k: usize,
}

/// Optimizer settings that are not bound constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Policy draws per update (`M`).
    pub m: usize,
    pub beta: f64,
    pub clip_norm: f64,
    /// REINFORCE iterations for the fine-tune variant and the baseline.
    pub inner_steps: usize,
    pub inner_beta: f64,
    /// Rollouts per REINFORCE iteration.
    pub inner_batch: usize,
    /// Rollouts averaged for the reported reward on non-tabular tasks.
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            m: 5,
            beta: 0.3,
            clip_norm: 10.0,
            inner_steps: 5,
            inner_beta: 2.0,
            inner_batch: 5,
            eval_episodes: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if self.inner_batch == 0 || self.eval_episodes == 0 {
            return Err(Error::Config(
                "inner_batch and eval_episodes must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("clip_norm", self.clip_norm),
            ("inner_beta", self.inner_beta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Up to `N` tasks waiting for the next update.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBuffer {
    capacity: usize,
    tasks: Vec<ParamMdp>,
}

impl MemoryBuffer {
    pub fn new(capacity: usize) -> Self {
        MemoryBuffer {
            capacity,
            tasks: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, task: ParamMdp) -> Result<()> {
        if self.tasks.len() >= self.capacity {
            return Err(Error::Protocol(format!(
                "memory already holds {} tasks",
                self.capacity
            )));
        }
        self.tasks.push(task);
        Ok(())
    }

    pub fn tasks(&self) -> &[ParamMdp] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.tasks.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.tasks.clear();
    }
}

/// Posterior, prior and schedule between updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifelongState<D> {
    pub posterior: D,
    pub prior: D,
    pub lambda_now: f64,
    /// Updates applied so far.
    pub update_index: usize,
    pub tasks_seen: usize,
    pub beta: f64,
    pub m: usize,
}

impl<D: ParamDistribution> LifelongState<D> {
    /// Prior starts equal to the posterior.
    pub fn new(init: D, lambda0: f64, beta: f64, m: usize) -> Self {
        LifelongState {
            prior: init.clone(),
            posterior: init,
            lambda_now: lambda0,
            update_index: 0,
            tasks_seen: 0,
            beta,
            m,
        }
    }
}

/// What one call to [`epicg_update`] did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    /// KL of the pre-step posterior to the pre-step prior (the one in the objective).
    pub kl_objective: f64,
    pub regularizer: f64,
    /// Mean realized discounted return over all `(task, draw)` pairs.
    pub train_return: f64,
    /// Sample standard deviation of those returns.
    pub train_return_sd: f64,
    pub grad_norm: f64,
    pub clipped: bool,
    /// Set when the gradient was non-finite and the state was left untouched.
    pub aborted: bool,
}

/// One EPICG step on a full buffer, followed by prior evolution, `lambda`
/// decay and clearing the buffer.
///
/// The buffer is emptied even when the update aborts.
pub fn epicg_update<D: ParamDistribution>(
    state: &mut LifelongState<D>,
    buffer: &mut MemoryBuffer,
    cfg: &RegularizerConfig,
    clip_norm: f64,
    seed: u64,
) -> Result<UpdateReport> {
    if buffer.len() != cfg.n {
        return Err(Error::Protocol(format!(
            "update needs exactly N = {} tasks, buffer holds {}",
            cfg.n,
            buffer.len()
        )));
    }
    let est = estimate_gradient(
        &state.posterior,
        &state.prior,
        buffer.tasks(),
        state.m,
        cfg,
        seed,
        state.update_index as u64,
    );
    buffer.clear();
    let est = est?;
    let train_return_sd = sample_sd(&est.returns);
    let norm = est.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Ok(UpdateReport {
            kl_objective: est.kl,
            regularizer: est.regularizer,
            train_return: est.mean_return,
            train_return_sd,
            grad_norm: norm,
            clipped: false,
            aborted: true,
        });
    }
    let clipped = norm > clip_norm;
    let scale = if clipped { clip_norm / norm } else { 1.0 };
    let mut free = state.posterior.free_params();
    for (p, g) in free.iter_mut().zip(&est.grad) {
        *p -= state.beta * scale * g;
    }
    let mut next = state.posterior.clone();
    next.set_free_params(&free)?;
    state.prior.evolve_toward(&next, state.lambda_now)?;
    state.posterior = next;
    state.lambda_now *= cfg.alpha;
    state.update_index += 1;
    Ok(UpdateReport {
        kl_objective: est.kl,
        regularizer: est.regularizer,
        train_return: est.mean_return,
        train_return_sd,
        grad_norm: norm,
        clipped,
        aborted: false,
    })
}

/// Reward of one task as it arrived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    /// 1-based arrival index.
    pub task_index: usize,
    pub params: Vec<(String, f64)>,
    pub reward: f64,
    /// Updates completed before this task was evaluated.
    pub update_index: usize,
}

/// Diagnostics written after each update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    /// 1-based update index `l`.
    pub update_index: usize,
    pub tasks_seen: usize,
    /// `KL(P_l || P_bar_l)` after the step and the prior move.
    pub kl_step: f64,
    pub kl_running_sum: f64,
    /// Budget for `l + 1` windows.
    pub kl_budget: f64,
    pub training_regularizer: f64,
    pub theorem1_bound: f64,
    pub r_hat: f64,
    pub s_min_hat: f64,
    /// Pinsker TV proxy between `P_l` and `P_{l-1}`.
    pub tv_step: f64,
    /// Every TV proxy so far is at most the configured `r`.
    pub premise_ok: bool,
    pub train_return: f64,
    pub train_return_sd: f64,
    /// Realized returns in the update, `N * M` of them.
    pub train_samples: usize,
    pub grad_norm: f64,
    pub clipped: bool,
    pub aborted: bool,
    pub lambda_now: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog<D> {
    pub algo: Algo,
    pub seed: u64,
    pub tasks: Vec<TaskRecord>,
    pub updates: Vec<UpdateRecord>,
    /// Initial posterior followed by the posterior after every update.
    pub snapshots: Vec<D>,
    pub final_prior: D,
}

impl<D> RunLog<D> {
    pub fn rewards(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.reward).collect()
    }

    /// Mean reward over the first `n` tasks.
    pub fn head_mean(&self, n: usize) -> f64 {
        mean(self.tasks.iter().take(n).map(|t| t.reward))
    }

    /// Mean reward over the last `n` tasks.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let skip = self.tasks.len().saturating_sub(n);
        mean(self.tasks.iter().skip(skip).map(|t| t.reward))
    }

    /// Mean realized training return over all updates.
    pub fn train_return(&self) -> Option<f64> {
        let live: Vec<f64> = self
            .updates
            .iter()
            .filter(|u| !u.aborted)
            .map(|u| u.train_return)
            .collect();
        (!live.is_empty()).then(|| mean(live.into_iter()))
    }

    pub fn final_posterior(&self) -> Option<&D> {
        self.snapshots.last()
    }
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Least-squares slope of `values` against their index.
pub fn trend_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

#[cfg(test)]
mod tests;

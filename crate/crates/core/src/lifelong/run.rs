use super::{
    epicg_update, reinforce_finetune, Algo, LifelongState, MemoryBuffer, RunLog, StreamConfig,
    TaskRecord, TrainConfig, UpdateRecord,
};
use crate::envs::{exact_expected_return, probe_states, rollout, MdpKind, ParamMdp};
use crate::pacbayes::{kl_budget, pinsker_tv, theorem1_bound, RegularizerConfig};
use crate::policy::{ParamDistribution, Policy};
use crate::rng::{standard_normal_vec, stream, NoiseDraw, Purpose};
use crate::{Error, Result};

/// Reported reward of `policy` on `task`: the exact expected return on tabular
/// tasks, otherwise the mean discounted return of `episodes` rollouts.
pub fn evaluate_policy<P: Policy>(
    task: &ParamMdp,
    policy: &P,
    seed: u64,
    task_index: u64,
    episodes: usize,
) -> Result<f64> {
    if let MdpKind::Chain(_) = task.kind {
        return exact_expected_return(task, policy);
    }
    let mut total = 0.0;
    for e in 0..episodes {
        let mut rng = stream(seed, Purpose::Eval, &[task_index, e as u64]);
        total += rollout(task, policy, &mut rng)?.return_discounted;
    }
    Ok(total / episodes as f64)
}

fn check_configs(
    stream_cfg: &StreamConfig,
    train: &TrainConfig,
    cfg: &RegularizerConfig,
) -> Result<()> {
    cfg.validate()?;
    train.validate()?;
    stream_cfg.tasks.validate()?;
    if stream_cfg.k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let h = stream_cfg.tasks.env.horizon();
    if h != cfg.horizon {
        return Err(Error::Config(format!(
            "bound horizon H = {} differs from the environment horizon {h}",
            cfg.horizon
        )));
    }
    Ok(())
}

fn sample_task(stream_cfg: &StreamConfig, seed: u64, i: usize) -> Result<ParamMdp> {
    let mut rng = stream(seed, Purpose::Task, &[i as u64]);
    Ok(stream_cfg.tasks.sample_with(&mut rng)?.1)
}

fn min_prob<D: ParamDistribution>(dist: &D, probes: &[Vec<f64>]) -> Result<f64> {
    let pol = dist.mean_policy();
    let mut lo = f64::INFINITY;
    for s in probes {
        for p in pol.action_probs(s)? {
            lo = lo.min(p);
        }
    }
    Ok(lo)
}

fn drive<D: ParamDistribution>(
    algo: Algo,
    stream_cfg: &StreamConfig,
    init: D,
    train: &TrainConfig,
    cfg: &RegularizerConfig,
    seed: u64,
) -> Result<RunLog<D>> {
    check_configs(stream_cfg, train, cfg)?;
    let mut state = LifelongState::new(init, cfg.lambda0, train.beta, train.m);
    let mut buffer = MemoryBuffer::new(cfg.n);
    let mut log = RunLog {
        algo,
        seed,
        tasks: Vec::with_capacity(stream_cfg.k),
        updates: Vec::new(),
        snapshots: vec![state.posterior.clone()],
        final_prior: state.prior.clone(),
    };
    let mut kl_sum = 0.0;
    let mut r_hat: f64 = 0.0;
    let mut s_min_hat = f64::INFINITY;
    let mut premise_ok = true;

    for i in 1..=stream_cfg.k {
        let task = sample_task(stream_cfg, seed, i)?;
        let mean = state.posterior.mean_policy();
        let reward = match algo {
            Algo::EpicgFt => {
                let tuned = reinforce_finetune(
                    &mean,
                    &task,
                    train.inner_steps,
                    train.inner_batch,
                    train.inner_beta,
                    train.clip_norm,
                    seed,
                    Purpose::FineTune,
                    i as u64,
                )?;
                evaluate_policy(&task, &tuned, seed, i as u64, train.eval_episodes)?
            }
            _ => evaluate_policy(&task, &mean, seed, i as u64, train.eval_episodes)?,
        };
        log.tasks.push(TaskRecord {
            task_index: i,
            params: task.params.clone(),
            reward,
            update_index: state.update_index,
        });
        state.tasks_seen = i;
        let probes = probe_states(&task);
        if i == 1 {
            s_min_hat = min_prob(&state.posterior, &probes)?;
        }
        buffer.push(task)?;
        if !buffer.is_full() {
            continue;
        }

        let before = state.posterior.clone();
        let report = epicg_update(&mut state, &mut buffer, cfg, train.clip_norm, seed)?;
        let kl_step = state.posterior.kl(&state.prior)?;
        let tv_step = if report.aborted {
            0.0
        } else {
            pinsker_tv(&state.posterior, &before)?
        };
        kl_sum += kl_step;
        r_hat = r_hat.max(tv_step);
        premise_ok &= tv_step <= cfg.r;
        s_min_hat = s_min_hat.min(min_prob(&state.posterior, &probes)?);
        let l = log.updates.len() + 1;
        let seen = RegularizerConfig {
            k_seen: i,
            ..cfg.clone()
        };
        log.updates.push(UpdateRecord {
            update_index: l,
            tasks_seen: i,
            kl_step,
            kl_running_sum: kl_sum,
            kl_budget: kl_budget(cfg, l + 1)?,
            training_regularizer: report.regularizer,
            theorem1_bound: theorem1_bound(&seen)?.value,
            r_hat,
            s_min_hat,
            tv_step,
            premise_ok,
            train_return: report.train_return,
            train_return_sd: report.train_return_sd,
            train_samples: cfg.n * train.m,
            grad_norm: report.grad_norm,
            clipped: report.clipped,
            aborted: report.aborted,
            lambda_now: state.lambda_now,
        });
        log.snapshots.push(state.posterior.clone());
    }
    log.final_prior = state.prior;
    Ok(log)
}

/// EPICG over the task stream. The reported reward of each task is the
/// posterior-mean policy's return on it, measured before the task enters memory.
pub fn run_lifelong<D: ParamDistribution>(
    stream_cfg: &StreamConfig,
    init: D,
    train: &TrainConfig,
    cfg: &RegularizerConfig,
    seed: u64,
) -> Result<RunLog<D>> {
    drive(Algo::Epicg, stream_cfg, init, train, cfg, seed)
}

/// As [`run_lifelong`], but each task's reward comes from a copy of the
/// posterior-mean policy fine-tuned on that task for `train.inner_steps`
/// REINFORCE iterations. The copy is discarded afterwards.
pub fn epicg_ft<D: ParamDistribution>(
    stream_cfg: &StreamConfig,
    init: D,
    train: &TrainConfig,
    cfg: &RegularizerConfig,
    seed: u64,
) -> Result<RunLog<D>> {
    drive(Algo::EpicgFt, stream_cfg, init, train, cfg, seed)
}

/// Trains a fresh policy drawn from `init` on every task, with no transfer.
pub fn single_task_baseline<D: ParamDistribution>(
    stream_cfg: &StreamConfig,
    init: D,
    train: &TrainConfig,
    seed: u64,
) -> Result<RunLog<D>> {
    train.validate()?;
    stream_cfg.tasks.validate()?;
    let mut tasks = Vec::with_capacity(stream_cfg.k);
    for i in 1..=stream_cfg.k {
        let task = sample_task(stream_cfg, seed, i)?;
        let mut rng = stream(seed, Purpose::Init, &[i as u64]);
        let noise = NoiseDraw::from_vec(standard_normal_vec(&mut rng, init.noise_dim()));
        let fresh = init.sample(&noise)?;
        let tuned = reinforce_finetune(
            &fresh,
            &task,
            train.inner_steps,
            train.inner_batch,
            train.inner_beta,
            train.clip_norm,
            seed,
            Purpose::FineTune,
            i as u64,
        )?;
        let reward = evaluate_policy(&task, &tuned, seed, i as u64, train.eval_episodes)?;
        tasks.push(TaskRecord {
            task_index: i,
            params: task.params.clone(),
            reward,
            update_index: 0,
        });
    }
    Ok(RunLog {
        algo: Algo::SingleTask,
        seed,
        tasks,
        updates: Vec::new(),
        snapshots: vec![init.clone()],
        final_prior: init,
    })
}

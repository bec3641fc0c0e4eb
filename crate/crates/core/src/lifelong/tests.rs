use super::*;
use crate::envs::{ChainMdp, EnvSpec};
use crate::policy::{FeatureMap, FlatGibbsDistribution, GaussianPolicyDistribution};

fn reg(n: usize, horizon: usize) -> RegularizerConfig {
    RegularizerConfig {
        n,
        horizon,
        k_seen: n,
        ..RegularizerConfig::default()
    }
}

fn bandit_task(rewards: &[f64]) -> ParamMdp {
    ParamMdp::chain(ChainMdp::bandit(rewards).unwrap(), 1, 0.9).unwrap()
}

fn flat(mu: Vec<f64>, sigma: Vec<f64>) -> FlatGibbsDistribution {
    let n = mu.len();
    FlatGibbsDistribution::new(
        GaussianPolicyDistribution::new(mu, sigma).unwrap(),
        FeatureMap::ActionOneHot { n_actions: n },
    )
    .unwrap()
}

fn chain_stream(k: usize) -> StreamConfig {
    StreamConfig {
        tasks: TaskDistribution::chain_uniform(4, 8, 0.95),
        k,
    }
}

fn chain_init() -> FlatGibbsDistribution {
    FlatGibbsDistribution::initial(FeatureMap::Tabular {
        n_states: 4,
        n_actions: 2,
    })
}

#[test]
fn buffer_rejects_overflow() {
    let mut b = MemoryBuffer::new(1);
    b.push(bandit_task(&[1.0, 0.0])).unwrap();
    assert!(matches!(
        b.push(bandit_task(&[1.0, 0.0])),
        Err(Error::Protocol(_))
    ));
}

#[test]
fn update_needs_a_full_buffer() {
    let mut state = LifelongState::new(flat(vec![0.0, 0.0], vec![0.1, 0.1]), 0.9, 0.1, 2);
    let mut buffer = MemoryBuffer::new(2);
    buffer.push(bandit_task(&[1.0, 0.0])).unwrap();
    let err = epicg_update(&mut state, &mut buffer, &reg(2, 1), 10.0, 0);
    assert!(matches!(err, Err(Error::Protocol(_))));
}

#[test]
fn constant_return_leaves_mean_unchanged() {
    let init = flat(vec![0.3, -0.2], vec![0.5, 0.5]);
    let mut state = LifelongState::new(init.clone(), 0.9, 0.5, 1);
    let mut buffer = MemoryBuffer::new(1);
    buffer.push(bandit_task(&[0.7, 0.7])).unwrap();
    let cfg = RegularizerConfig {
        reg_scale: 0.0,
        ..reg(1, 1)
    };
    let rep = epicg_update(&mut state, &mut buffer, &cfg, 10.0, 3).unwrap();
    assert_eq!(state.posterior.dist.mu(), init.dist.mu());
    assert_eq!(rep.grad_norm, 0.0);
    assert!(buffer.is_empty());
}

#[test]
fn full_lambda_makes_prior_equal_posterior() {
    let mut state = LifelongState::new(flat(vec![0.0, 0.0], vec![0.3, 0.3]), 1.0, 0.5, 4);
    let mut buffer = MemoryBuffer::new(2);
    let cfg = RegularizerConfig {
        lambda0: 1.0,
        ..reg(2, 1)
    };
    for _ in 0..2 {
        buffer.push(bandit_task(&[1.0, 0.0])).unwrap();
    }
    epicg_update(&mut state, &mut buffer, &cfg, 10.0, 1).unwrap();
    assert_eq!(state.prior, state.posterior);
    for _ in 0..2 {
        buffer.push(bandit_task(&[1.0, 0.0])).unwrap();
    }
    let rep = epicg_update(&mut state, &mut buffer, &cfg, 10.0, 1).unwrap();
    assert_eq!(rep.kl_objective, 0.0);
}

#[test]
fn lambda_schedule_prior_hull_and_memory_hygiene() {
    let cfg = RegularizerConfig {
        k_seen: 40,
        ..reg(4, 8)
    };
    let train = TrainConfig {
        m: 3,
        beta: 0.5,
        ..TrainConfig::default()
    };
    let stream_cfg = chain_stream(40);
    let mut state = LifelongState::new(chain_init(), cfg.lambda0, train.beta, train.m);
    let mut buffer = MemoryBuffer::new(cfg.n);
    let mut expected_lambda = cfg.lambda0;
    for i in 1..=stream_cfg.k {
        let mut rng = crate::rng::stream(5, crate::rng::Purpose::Task, &[i as u64]);
        buffer
            .push(stream_cfg.tasks.sample_with(&mut rng).unwrap().1)
            .unwrap();
        assert!(buffer.len() <= cfg.n);
        if buffer.is_full() {
            let prior_before = state.prior.clone();
            epicg_update(&mut state, &mut buffer, &cfg, train.clip_norm, 5).unwrap();
            assert!(buffer.is_empty());
            expected_lambda *= cfg.alpha;
            assert_eq!(state.lambda_now, expected_lambda);
            let (p0, p1, q) = (&prior_before.dist, &state.prior.dist, &state.posterior.dist);
            for k in 0..q.dim() {
                let (lo, hi) = (p0.mu()[k].min(q.mu()[k]), p0.mu()[k].max(q.mu()[k]));
                assert!(lo <= p1.mu()[k] && p1.mu()[k] <= hi);
                let (lo, hi) = (
                    p0.sigma()[k].min(q.sigma()[k]),
                    p0.sigma()[k].max(q.sigma()[k]),
                );
                assert!(lo <= p1.sigma()[k] && p1.sigma()[k] <= hi);
                assert!(p1.sigma()[k] > 0.0);
            }
        }
    }
    assert_eq!(state.update_index, 10);
}

#[test]
fn regularizer_pulls_posterior_to_prior_without_reward() {
    let prior = flat(vec![0.0, 0.0], vec![0.5, 0.5]);
    let mut state = LifelongState::new(prior.clone(), 0.0, 0.05, 2);
    state.posterior = flat(vec![1.0, -0.5], vec![0.8, 0.3]);
    let cfg = RegularizerConfig {
        lambda0: 0.0,
        reg_scale: 50.0,
        ..reg(1, 1)
    };
    let mut buffer = MemoryBuffer::new(1);
    let mut last = state.posterior.kl(&state.prior).unwrap();
    let mut steps = 0;
    while last >= 1e-6 {
        buffer.push(bandit_task(&[0.0, 0.0])).unwrap();
        epicg_update(&mut state, &mut buffer, &cfg, 10.0, 9).unwrap();
        let kl = state.posterior.kl(&state.prior).unwrap();
        assert!(kl < last, "KL rose from {last} to {kl} at step {steps}");
        last = kl;
        steps += 1;
        assert!(steps < 20_000);
    }
}

#[test]
fn single_update_when_k_equals_n() {
    let cfg = RegularizerConfig {
        k_seen: 4,
        ..reg(4, 8)
    };
    let log = run_lifelong(
        &chain_stream(4),
        chain_init(),
        &TrainConfig::default(),
        &cfg,
        1,
    )
    .unwrap();
    assert_eq!(log.updates.len(), 1);
    assert_eq!(log.updates[0].tasks_seen, 4);
    assert_eq!(log.snapshots.len(), 2);
    assert!(log.tasks.iter().all(|t| t.update_index == 0));
}

#[test]
fn runs_are_reproducible() {
    let cfg = RegularizerConfig {
        k_seen: 24,
        ..reg(4, 8)
    };
    let a = run_lifelong(
        &chain_stream(24),
        chain_init(),
        &TrainConfig::default(),
        &cfg,
        11,
    )
    .unwrap();
    let b = run_lifelong(
        &chain_stream(24),
        chain_init(),
        &TrainConfig::default(),
        &cfg,
        11,
    )
    .unwrap();
    assert_eq!(a, b);
    let c = run_lifelong(
        &chain_stream(24),
        chain_init(),
        &TrainConfig::default(),
        &cfg,
        12,
    )
    .unwrap();
    assert_ne!(a.rewards(), c.rewards());
}

#[test]
fn zero_step_finetune_matches_lifelong_and_never_touches_posterior() {
    let cfg = RegularizerConfig {
        k_seen: 16,
        ..reg(4, 8)
    };
    let zero = TrainConfig {
        inner_steps: 0,
        ..TrainConfig::default()
    };
    let base = run_lifelong(&chain_stream(16), chain_init(), &zero, &cfg, 4).unwrap();
    let ft0 = epicg_ft(&chain_stream(16), chain_init(), &zero, &cfg, 4).unwrap();
    assert_eq!(base.rewards(), ft0.rewards());
    let ft = epicg_ft(
        &chain_stream(16),
        chain_init(),
        &TrainConfig {
            inner_steps: 10,
            ..zero
        },
        &cfg,
        4,
    )
    .unwrap();
    let a = serde_json::to_string(&base.snapshots).unwrap();
    let b = serde_json::to_string(&ft.snapshots).unwrap();
    assert_eq!(a, b);
}

#[test]
fn finetuning_improves_a_fixed_chain() {
    let env = EnvSpec::Chain {
        n_states: 4,
        horizon: 8,
        discount: 0.95,
    };
    let stream_cfg = StreamConfig {
        tasks: TaskDistribution::single_task(env),
        k: 40,
    };
    let cfg = RegularizerConfig {
        k_seen: 40,
        ..reg(4, 8)
    };
    let zero = TrainConfig {
        inner_steps: 0,
        ..TrainConfig::default()
    };
    let fifty = TrainConfig {
        inner_steps: 50,
        ..zero.clone()
    };
    let a = epicg_ft(&stream_cfg, chain_init(), &zero, &cfg, 2).unwrap();
    let b = epicg_ft(&stream_cfg, chain_init(), &fifty, &cfg, 2).unwrap();
    let wins = a
        .rewards()
        .iter()
        .zip(b.rewards())
        .filter(|(x, y)| y >= *x)
        .count();
    assert!(wins as f64 >= 0.9 * 40.0, "{wins}/40");
}

#[test]
fn baseline_is_deterministic_and_has_no_updates() {
    let train = TrainConfig::default();
    let a = single_task_baseline(&chain_stream(10), chain_init(), &train, 3).unwrap();
    let b = single_task_baseline(&chain_stream(10), chain_init(), &train, 3).unwrap();
    assert_eq!(a, b);
    assert!(a.updates.is_empty());
    assert_eq!(a.tasks.len(), 10);
}

#[test]
fn horizon_mismatch_is_a_config_error() {
    let cfg = RegularizerConfig {
        k_seen: 4,
        ..reg(4, 9)
    };
    let err = run_lifelong(
        &chain_stream(4),
        chain_init(),
        &TrainConfig::default(),
        &cfg,
        1,
    );
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn quadrature_gradient_matches_finite_differences() {
    let tasks = [bandit_task(&[1.0, 0.0, 0.4]), bandit_task(&[0.2, 0.9, 0.0])];
    let prior = flat(vec![0.0, 0.0, 0.0], vec![0.6, 0.6, 0.6]);
    let post = flat(vec![0.3, -0.2, 0.1], vec![0.5, 0.8, 0.4]);
    let cfg = reg(2, 1);
    let at = |free: &[f64]| {
        let mut p = post.clone();
        p.set_free_params(free).unwrap();
        objective_quadrature(&p, &prior, &tasks, &cfg, 24).unwrap()
    };
    let free = post.free_params();
    let analytic = at(&free).grad;
    for k in 0..free.len() {
        let h = 1e-5;
        let mut up = free.clone();
        up[k] += h;
        let mut dn = free.clone();
        dn[k] -= h;
        let fd = (at(&up).value - at(&dn).value) / (2.0 * h);
        let rel = (fd - analytic[k]).abs() / analytic[k].abs().max(1e-3);
        assert!(rel < 1e-4, "k={k} fd={fd} analytic={}", analytic[k]);
    }
}

#[test]
fn proposition1_sides_agree() {
    let env = EnvSpec::Chain {
        n_states: 3,
        horizon: 5,
        discount: 0.9,
    };
    let tasks: Vec<ParamMdp> = [
        [0.1, 1.0, 0.2],
        [0.3, 0.8, 0.1],
        [0.0, 0.6, 0.4],
        [0.2, 0.9, 0.3],
    ]
    .iter()
    .map(|v| env.build(v).unwrap())
    .collect();
    let feat = FeatureMap::ActionIndicator {
        n_actions: 2,
        action: 1,
    };
    let p = |mu: f64, s: f64| {
        FlatGibbsDistribution::new(
            GaussianPolicyDistribution::new(vec![mu], vec![s]).unwrap(),
            feat.clone(),
        )
        .unwrap()
    };
    let (lhs, rhs) = proposition1_check(&tasks, &[p(0.2, 0.7), p(0.9, 0.4)], 2, 64).unwrap();
    assert!((lhs - rhs).abs() < 1e-8, "{lhs} {rhs}");
    let (lhs, rhs) = proposition1_check(&tasks[..2], &[p(0.2, 0.7)], 2, 64).unwrap();
    assert_eq!(lhs, rhs);
    let same = vec![tasks[0].clone(); 4];
    let (lhs, rhs) = proposition1_check(&same, &[p(0.2, 0.7), p(0.2, 0.7)], 2, 64).unwrap();
    let (single, _) = proposition1_check(&same[..1], &[p(0.2, 0.7)], 1, 64).unwrap();
    assert!((lhs - single).abs() < 1e-14 && (rhs - single).abs() < 1e-14);
    let wide = flat(vec![0.0; 3], vec![1.0; 3]);
    let bandits = vec![bandit_task(&[1.0, 0.0, 0.0])];
    assert!(matches!(
        proposition1_check(&bandits, &[wide], 1, 8),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn trend_slope_of_a_line() {
    assert!((trend_slope(&[1.0, 3.0, 5.0, 7.0]) - 2.0).abs() < 1e-12);
    assert_eq!(trend_slope(&[4.0]), 0.0);
}

#[test]
fn algo_names_round_trip() {
    for a in [Algo::Epicg, Algo::EpicgFt, Algo::SingleTask] {
        assert_eq!(Algo::parse(a.name()).unwrap(), a);
    }
    assert!(Algo::parse("sac").is_err());
}

use epic::envs::{ChainMdp, ParamMdp};
use epic::lifelong::{estimate_gradient, objective_quadrature};
use epic::pacbayes::RegularizerConfig;
use epic::policy::{
    FeatureMap, FlatGibbsDistribution, GaussianPolicyDistribution, ParamDistribution,
};

fn bandit(r: &[f64]) -> ParamMdp {
    ParamMdp::chain(ChainMdp::bandit(r).unwrap(), 1, 0.9).unwrap()
}

fn dist(mu: Vec<f64>, sigma: Vec<f64>) -> FlatGibbsDistribution {
    let n = mu.len();
    FlatGibbsDistribution::new(
        GaussianPolicyDistribution::new(mu, sigma).unwrap(),
        FeatureMap::ActionOneHot { n_actions: n },
    )
    .unwrap()
}

fn cfg(n: usize) -> RegularizerConfig {
    RegularizerConfig {
        n,
        horizon: 1,
        k_seen: n,
        ..RegularizerConfig::default()
    }
}

fn fd_check(post: &FlatGibbsDistribution, prior: &FlatGibbsDistribution, tasks: &[ParamMdp]) {
    let at = |free: &[f64]| {
        let mut p = post.clone();
        p.set_free_params(free).unwrap();
        objective_quadrature(&p, prior, tasks, &cfg(tasks.len()), 24).unwrap()
    };
    let free = post.free_params();
    let g = at(&free).grad;
    for k in 0..free.len() {
        let h = 1e-5;
        let (mut up, mut dn) = (free.clone(), free.clone());
        up[k] += h;
        dn[k] -= h;
        let fd = (at(&up).value - at(&dn).value) / (2.0 * h);
        assert!(
            (fd - g[k]).abs() / g[k].abs().max(1e-3) < 1e-4,
            "d={} k={k}",
            free.len() / 2
        );
    }
}

#[test]
fn quadrature_gradient_matches_central_differences_up_to_d3() {
    let one = |mu: f64, s: f64| {
        FlatGibbsDistribution::new(
            GaussianPolicyDistribution::new(vec![mu], vec![s]).unwrap(),
            FeatureMap::ActionIndicator {
                n_actions: 2,
                action: 1,
            },
        )
        .unwrap()
    };
    let two_arm = [bandit(&[1.0, 0.2]), bandit(&[0.1, 0.7])];
    fd_check(&one(0.4, 0.6), &one(0.0, 1.0), &two_arm);
    fd_check(
        &dist(vec![0.4, -0.3], vec![0.6, 0.9]),
        &dist(vec![0.0; 2], vec![0.7; 2]),
        &two_arm,
    );
    let three_arm = [bandit(&[1.0, 0.0, 0.4]), bandit(&[0.2, 0.9, 0.0])];
    fd_check(
        &dist(vec![0.3, -0.2, 0.1], vec![0.5, 0.8, 0.4]),
        &dist(vec![0.0; 3], vec![0.6; 3]),
        &three_arm,
    );
}

#[test]
fn monte_carlo_gradient_within_two_percent_at_1e5_draws() {
    let tasks = [bandit(&[1.0, 0.0, 0.4]), bandit(&[0.2, 0.9, 0.0])];
    let prior = dist(vec![0.0; 3], vec![0.6; 3]);
    let post = dist(vec![0.3, -0.2, 0.1], vec![0.5, 0.8, 0.4]);
    let exact = objective_quadrature(&post, &prior, &tasks, &cfg(2), 32)
        .unwrap()
        .grad;
    let mc = estimate_gradient(&post, &prior, &tasks, 100_000, &cfg(2), 13, 0)
        .unwrap()
        .grad;
    let err: f64 = exact
        .iter()
        .zip(&mc)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(err / norm < 0.02, "relative error {}", err / norm);
}

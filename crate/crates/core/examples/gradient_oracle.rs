//! The Monte-Carlo EPICG gradient against the Gauss-Hermite quadrature oracle
//! on bandit tasks, and both sides of the window decomposition identity.

use epic::envs::{ChainMdp, EnvSpec, ParamMdp};
use epic::lifelong::{estimate_gradient, objective_quadrature, proposition1_check};
use epic::pacbayes::RegularizerConfig;
use epic::policy::{FeatureMap, FlatGibbsDistribution, GaussianPolicyDistribution};

fn main() -> epic::Result<()> {
    let bandit = |r: &[f64]| ParamMdp::chain(ChainMdp::bandit(r)?, 1, 0.9);
    let tasks = [bandit(&[1.0, 0.0, 0.4])?, bandit(&[0.2, 0.9, 0.0])?];
    let feat = FeatureMap::ActionOneHot { n_actions: 3 };
    let prior = FlatGibbsDistribution::new(
        GaussianPolicyDistribution::new(vec![0.0; 3], vec![0.6; 3])?,
        feat.clone(),
    )?;
    let post = FlatGibbsDistribution::new(
        GaussianPolicyDistribution::new(vec![0.3, -0.2, 0.1], vec![0.5, 0.8, 0.4])?,
        feat,
    )?;
    let cfg = RegularizerConfig {
        n: 2,
        horizon: 1,
        k_seen: 2,
        ..RegularizerConfig::default()
    };
    let exact = objective_quadrature(&post, &prior, &tasks, &cfg, 24)?;
    let mc = estimate_gradient(&post, &prior, &tasks, 50_000, &cfg, 9, 0)?;
    println!("{:>10} {:>12} {:>12}", "param", "quadrature", "monte carlo");
    for (k, (a, b)) in exact.grad.iter().zip(&mc.grad).enumerate() {
        println!("{k:>10} {a:>12.6} {b:>12.6}");
    }

    let env = EnvSpec::Chain {
        n_states: 3,
        horizon: 5,
        discount: 0.9,
    };
    let chain_tasks: Vec<ParamMdp> = [
        [0.1, 1.0, 0.2],
        [0.3, 0.8, 0.1],
        [0.0, 0.6, 0.4],
        [0.2, 0.9, 0.3],
    ]
    .iter()
    .map(|v| env.build(v))
    .collect::<epic::Result<_>>()?;
    let one = FeatureMap::ActionIndicator {
        n_actions: 2,
        action: 1,
    };
    let p = |mu: f64, s: f64| {
        FlatGibbsDistribution::new(
            GaussianPolicyDistribution::new(vec![mu], vec![s])?,
            one.clone(),
        )
    };
    let (lhs, rhs) = proposition1_check(&chain_tasks, &[p(0.2, 0.7)?, p(0.9, 0.4)?], 2, 64)?;
    println!(
        "window decomposition: lhs {lhs:.12} rhs {rhs:.12} diff {:.2e}",
        (lhs - rhs).abs()
    );
    Ok(())
}

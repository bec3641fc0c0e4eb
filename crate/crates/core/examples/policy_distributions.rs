//! Gaussian distributions over policy parameters: closed-form KL against a
//! Monte-Carlo estimate, reparameterized sampling and the layered network.

use epic::policy::{
    softplus, Activation, FeatureMap, FlatGibbsDistribution, GaussianPolicyDistribution, InputMap,
    LayerSpec, LayeredGaussianPolicy, ParamDistribution, Policy,
};
use epic::rng::{stream, NoiseDraw, Purpose};

fn main() -> epic::Result<()> {
    let q = GaussianPolicyDistribution::new(vec![0.5, -1.0], vec![0.8, 1.3])?;
    let p = GaussianPolicyDistribution::new(vec![0.0, 0.0], vec![1.0, 1.0])?;
    let closed = q.kl(&p)?;

    let draws = 200_000;
    let mut mc = 0.0;
    for i in 0..draws {
        let theta = q.sample_theta(&NoiseDraw::new(7, i, 2))?;
        let log_ratio: f64 = theta
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let zq = (t - q.mu()[k]) / q.sigma()[k];
                let zp = (t - p.mu()[k]) / p.sigma()[k];
                -q.sigma()[k].ln() - 0.5 * zq * zq + p.sigma()[k].ln() + 0.5 * zp * zp
            })
            .sum();
        mc += log_ratio;
    }
    println!(
        "KL closed form {closed:.6}, Monte Carlo ({draws} draws) {:.6}",
        mc / draws as f64
    );

    let gibbs = FlatGibbsDistribution::new(q, FeatureMap::ActionOneHot { n_actions: 2 })?;
    let pol = gibbs.sample(&NoiseDraw::new(1, 0, gibbs.noise_dim()))?;
    println!(
        "sampled Gibbs policy {:?} -> probs {:?}",
        pol.params(),
        pol.action_probs(&[])?
    );

    let mut rng = stream(3, Purpose::Init, &[]);
    let specs = [
        LayerSpec {
            inputs: 4,
            outputs: 8,
            activation: Some(Activation::Tanh),
        },
        LayerSpec {
            inputs: 8,
            outputs: 2,
            activation: None,
        },
    ];
    let net = LayeredGaussianPolicy::initial(InputMap::Raw { dim: 4 }, &specs, &mut rng)?;
    println!(
        "layered net: {} weights, first std {:.4} (= |mu| softplus(delta) = {:.4})",
        net.n_params(),
        net.std_flat()[0],
        net.mu_flat()[0].abs() * softplus(net.delta_flat()[0])
    );
    let mlp = net.sample(&NoiseDraw::new(2, 0, net.noise_dim()))?;
    println!(
        "sampled network probs at the origin {:?}",
        mlp.action_probs(&[0.0; 4])?
    );
    Ok(())
}

//! CartPole physics and rollouts with a zero-weight (uniform) Gibbs policy.

use epic::envs::{rollout, CartPoleParams, ParamMdp};
use epic::policy::GibbsLinearPolicy;
use epic::rng::{stream, Purpose};

fn main() -> epic::Result<()> {
    let params = CartPoleParams::default();
    let mut s = [0.0, 0.0, 0.05, 0.0];
    for t in 0..5 {
        s = params.integrate(&s, 10.0);
        println!("t={} x={:+.5} theta={:+.5}", t + 1, s[0], s[2]);
    }

    for (name, p) in [
        ("default", params),
        ("heavy", CartPoleParams::new(2.0, 0.5, 1.0)?),
    ] {
        let mdp = ParamMdp::cartpole(p, 200, 0.99)?;
        let policy = GibbsLinearPolicy::zeros(mdp.default_features());
        let mut lens = Vec::new();
        for e in 0..20 {
            let mut rng = stream(11, Purpose::Rollout, &[e]);
            lens.push(rollout(&mdp, &policy, &mut rng)?.len());
        }
        let mean = lens.iter().sum::<usize>() as f64 / lens.len() as f64;
        println!("{name}: uniform policy survives {mean:.1} steps on average");
    }
    Ok(())
}

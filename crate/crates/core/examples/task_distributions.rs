//! Task distributions: the CartPole presets and the chain suite.

use epic::envs::{MdpKind, TaskDistribution};
use epic::rng::{stream, Purpose};

fn main() -> epic::Result<()> {
    for (name, td) in [
        (
            "cartpole uniform",
            TaskDistribution::cartpole_uniform(200, 0.99),
        ),
        ("cartpole gmm", TaskDistribution::cartpole_gmm(200, 0.99)),
        (
            "chain uniform",
            TaskDistribution::chain_uniform(5, 20, 0.95),
        ),
    ] {
        println!("{name}:");
        let mut rng = stream(5, Purpose::Task, &[]);
        for _ in 0..4 {
            let (component, task) = td.sample_with(&mut rng)?;
            let kind = match task.kind {
                MdpKind::CartPole(_) => "cartpole",
                MdpKind::Chain(_) => "chain",
            };
            println!("  component {component} {kind} {:?}", task.params);
        }
    }
    Ok(())
}

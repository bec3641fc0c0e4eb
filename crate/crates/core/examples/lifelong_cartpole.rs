//! EPICG, its fine-tune variant and the single-task baseline on CartPole.

use epic::envs::TaskDistribution;
use epic::lifelong::{epicg_ft, run_lifelong, single_task_baseline, StreamConfig, TrainConfig};
use epic::pacbayes::RegularizerConfig;
use epic::policy::{FeatureMap, FlatGibbsDistribution, GaussianPolicyDistribution};

fn main() -> epic::Result<()> {
    let stream = StreamConfig {
        tasks: TaskDistribution::cartpole_uniform(200, 0.99),
        k: 200,
    };
    let train = TrainConfig::default();
    let cfg = RegularizerConfig::default();
    let features = FeatureMap::StateBlock {
        n_actions: 2,
        state_dim: 4,
    };
    let init = FlatGibbsDistribution::new(
        GaussianPolicyDistribution::new(vec![0.0; 10], vec![0.1; 10])?,
        features,
    )?;

    for seed in 1..=3 {
        let run = run_lifelong(&stream, init.clone(), &train, &cfg, seed)?;
        let ft = epicg_ft(&stream, init.clone(), &train, &cfg, seed)?;
        let base = single_task_baseline(&stream, init.clone(), &train, seed)?;
        println!(
            "seed {seed}: epicg {:.4} -> {:.4}, epicg_ft final {:.4}, single-task final {:.4}, updates {}",
            run.head_mean(50),
            run.tail_mean(50),
            ft.tail_mean(50),
            base.tail_mean(50),
            run.updates.len()
        );
    }
    Ok(())
}

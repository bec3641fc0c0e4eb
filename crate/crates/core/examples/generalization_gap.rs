//! A chain run followed by the generalization-gap report and the KL-budget audit.

use epic::envs::TaskDistribution;
use epic::lifelong::{run_lifelong, StreamConfig, TrainConfig};
use epic::pacbayes::RegularizerConfig;
use epic::policy::{FeatureMap, FlatGibbsDistribution, GaussianPolicyDistribution};
use epic::verify::{gap_report, kl_budget_audit};

fn main() -> epic::Result<()> {
    let stream = StreamConfig {
        tasks: TaskDistribution::chain_uniform(5, 20, 0.95),
        k: 200,
    };
    let train = TrainConfig {
        beta: 0.01,
        ..TrainConfig::default()
    };
    let cfg = RegularizerConfig {
        horizon: 20,
        ..RegularizerConfig::default()
    };
    let init = FlatGibbsDistribution::new(
        GaussianPolicyDistribution::new(vec![0.0; 10], vec![1.0; 10])?,
        FeatureMap::Tabular {
            n_states: 5,
            n_actions: 2,
        },
    )?;
    let run = run_lifelong(&stream, init, &train, &cfg, 4)?;
    let gap = gap_report(&run, &stream.tasks, &cfg, 200, 4, 4)?;
    println!(
        "expected loss {:.4} ± {:.4}, training error {:.4} ± {:.4}",
        gap.expected_loss, gap.expected_loss_se, gap.training_error, gap.training_error_se
    );
    println!(
        "gap {:.4} ± {:.4}; bound {:.3} (proof variant {:.3}); covered {}",
        gap.gap, gap.gap_se, gap.bound_stated, gap.bound_proof, gap.covered
    );
    let audit = kl_budget_audit(&run, &cfg)?;
    for row in &audit.rows {
        println!(
            "update {}: sum KL {:.5} budget {:.2} premise {}",
            row.update_index, row.kl_running_sum, row.budget, row.premise_ok
        );
    }
    println!("violations {} flagged {}", audit.violations, audit.flagged);
    Ok(())
}

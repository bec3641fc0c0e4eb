//! Runs an experiment from config text into a directory and a small N sweep.

use epic::config::{ExperimentConfig, Sweep};
use epic::runner::{run_experiment, run_sweep};

const CONFIG: &str = r#"
[experiment]
seeds = [1, 2, 3]
final_window = 10

[env]
name = "chain"
horizon = 10
discount = 0.9

[train]
K = 40
N = 5
M = 3

[verify]
holdout_tasks = 50
martingale_traces = 10

[sweep]
N = [2, 5, 10]
"#;

fn main() {
    let cfg =
        ExperimentConfig::from_toml_str(CONFIG, "inline.toml").unwrap_or_else(|e| panic!("{e}"));
    let out = std::env::temp_dir().join("epic-example-runner");
    let summary = run_experiment(&cfg, CONFIG, &out, true).unwrap_or_else(|e| panic!("{e}"));
    println!(
        "final-window mean {:.4} ± {:.4}, {} of {} seeds improved",
        summary.final_window.mean,
        summary.final_window.std,
        summary.improved_seeds,
        summary.seeds.len()
    );
    println!("verify: {:?}", summary.verify);
    for arm in
        run_sweep(&cfg, CONFIG, Sweep::N, &out.join("sweep")).unwrap_or_else(|e| panic!("{e}"))
    {
        println!("N={}: final-window {:.4}", arm.value, arm.final_window.mean);
    }
    println!("artifacts in {}", out.display());
}

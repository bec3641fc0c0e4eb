//! Simulated martingale traces on chain tasks with Azuma and Freedman envelopes.

use epic::envs::{ParamMdp, TaskDistribution};
use epic::policy::{FeatureMap, FlatGibbsDistribution, GaussianPolicyDistribution};
use epic::rng::{stream, Purpose};
use epic::verify::simulate_martingale;

fn main() -> epic::Result<()> {
    let td = TaskDistribution::chain_uniform(3, 10, 0.9);
    let (t, n, delta) = (20, 4, 0.1);
    let mut rng = stream(1, Purpose::Task, &[]);
    let tasks: Vec<ParamMdp> = (0..t * n)
        .map(|_| td.sample_with(&mut rng).map(|x| x.1))
        .collect::<epic::Result<_>>()?;
    let p = FlatGibbsDistribution::new(
        GaussianPolicyDistribution::new(vec![0.0; 6], vec![1.0; 6])?,
        FeatureMap::Tabular {
            n_states: 3,
            n_actions: 2,
        },
    )?;
    let seq = vec![p; t];
    let traces = 1000;
    let mut exceed = 0;
    let mut mean_d = 0.0;
    let mut last = None;
    for k in 0..traces {
        let tr = simulate_martingale(&tasks, &seq, n, delta, k)?;
        exceed += tr.exceeds_azuma() as usize;
        mean_d += tr.d.iter().sum::<f64>() / tr.d.len() as f64;
        last = Some(tr);
    }
    let tr = last.expect("at least one trace");
    println!(
        "Azuma envelope {:.3}, Freedman envelope {:.3} (lambda {:.3e})",
        tr.bound_az, tr.bound_fr, tr.fr_lambda
    );
    println!(
        "mean D_l {:.4}, exceedances {exceed}/{traces} (allowed fraction {delta})",
        mean_d / traces as f64
    );
    println!("last trace |S_T| = {:.3}", tr.final_sum().abs());
    Ok(())
}

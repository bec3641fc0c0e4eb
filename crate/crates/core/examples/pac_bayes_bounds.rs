//! Bound machinery: the training regularizer, the run-level bound under both
//! confidence choices, the KL budget and the sample-complexity constants.

use epic::pacbayes::{
    kl_budget, kl_budget_limit, sample_complexity_k, theorem1_bound, theorem1_bound_with_log_term,
    training_regularizer, RegularizerConfig,
};

fn main() -> epic::Result<()> {
    let cfg = RegularizerConfig::default();
    for kl in [0.0, 1.0, 10.0, 100.0] {
        println!(
            "regularizer at KL={kl:>5}: {:.6}",
            training_regularizer(kl, &cfg)?
        );
    }
    for k in [200, 1000, 2000, 100_000] {
        let c = RegularizerConfig {
            k_seen: k,
            ..cfg.clone()
        };
        let stated = theorem1_bound(&c)?;
        let proof = theorem1_bound_with_log_term(&c, k as f64)?;
        println!(
            "K={k:>6}: T={} bound {:.4} (ln(2/delta)=K gives {:.4})",
            stated.windows, stated.value, proof.value
        );
    }
    for t in [1, 2, 8, 50] {
        println!("KL budget after {t} windows: {:.4}", kl_budget(&cfg, t)?);
    }
    println!("KL budget limit: {:.4}", kl_budget_limit(&cfg));
    for eps in [0.5, 0.25, 0.125] {
        let sc = sample_complexity_k(eps, &cfg)?;
        println!(
            "epsilon={eps}: K >= {} ({:.3e} vs {:.3e})",
            sc.k, sc.kl_branch, sc.confidence_branch
        );
    }
    Ok(())
}

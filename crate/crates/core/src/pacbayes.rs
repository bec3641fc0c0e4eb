//! PAC-Bayes quantities: the KL-dependent training regularizer, the run-level
//! bound, the KL budget of an evolving prior, and sample-complexity constants.
//!
//! Two different functions of the KL divergence are involved. The training
//! regularizer is the McAllester form with `N * H` samples,
//!
//! ```text
//! R(kl) = kappa * sqrt( (kl + ln(2 sqrt(N H) / delta)) / (2 N H) )
//! ```
//!
//! and is what the optimizer differentiates. The run-level bound
//! ([`theorem1_bound`]) has the KL budget substituted in and is reported
//! as a diagnostic only.

use crate::policy::{ParamDistribution, Policy};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Constants shared by the regularizer and the diagnostic bounds.
///
/// `gamma_exp` is the bound exponent and is unrelated to the MDP discount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig {
    /// Tasks per update (memory size `N`).
    pub n: usize,
    pub horizon: usize,
    /// Tasks seen so far (`K`).
    pub k_seen: usize,
    pub lambda0: f64,
    pub alpha: f64,
    pub s_min: f64,
    pub r: f64,
    pub delta_conf: f64,
    pub gamma_exp: f64,
    pub reg_scale: f64,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        RegularizerConfig {
            n: 25,
            horizon: 200,
            k_seen: 200,
            lambda0: 0.9,
            alpha: 0.95,
            s_min: 0.01,
            r: 0.1,
            delta_conf: 0.05,
            gamma_exp: 0.25,
            reg_scale: 1.0,
        }
    }
}

fn in_range(name: &str, v: f64, ok: bool) -> Result<()> {
    if ok && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} is out of range")))
    }
}

impl RegularizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.horizon == 0 || self.k_seen == 0 {
            return Err(Error::Config("N, H and K must be positive".into()));
        }
        in_range("lambda0", self.lambda0, (0.0..=1.0).contains(&self.lambda0))?;
        in_range("alpha", self.alpha, (0.0..1.0).contains(&self.alpha))?;
        in_range("s_min", self.s_min, self.s_min > 0.0 && self.s_min <= 1.0)?;
        in_range("r", self.r, self.r >= 0.0)?;
        in_range(
            "delta_conf",
            self.delta_conf,
            self.delta_conf > 0.0 && self.delta_conf < 1.0,
        )?;
        in_range(
            "gamma_exp",
            self.gamma_exp,
            self.gamma_exp > 0.0 && self.gamma_exp < 1.0,
        )?;
        in_range("reg_scale", self.reg_scale, self.reg_scale >= 0.0)?;
        Ok(())
    }

    /// Samples per update window, `N * H`.
    pub fn sample_count(&self) -> f64 {
        (self.n * self.horizon) as f64
    }

    /// `ln(2 sqrt(N H) / delta)`.
    pub fn confidence_term(&self) -> f64 {
        (2.0 * self.sample_count().sqrt() / self.delta_conf).ln()
    }
}

/// `kappa * sqrt((kl + ln(2 sqrt(NH)/delta)) / (2 NH))`.
pub fn training_regularizer(kl: f64, cfg: &RegularizerConfig) -> Result<f64> {
    if !(kl >= 0.0) {
        return Err(Error::Domain(format!("KL must be non-negative, got {kl}")));
    }
    if cfg.reg_scale == 0.0 {
        return Ok(0.0);
    }
    let inner = (kl + cfg.confidence_term()) / (2.0 * cfg.sample_count());
    Ok(cfg.reg_scale * inner.max(0.0).sqrt())
}

/// `dR/dkl`.
pub fn training_regularizer_slope(kl: f64, cfg: &RegularizerConfig) -> Result<f64> {
    if !(kl >= 0.0) {
        return Err(Error::Domain(format!("KL must be non-negative, got {kl}")));
    }
    if cfg.reg_scale == 0.0 {
        return Ok(0.0);
    }
    let n = 2.0 * cfg.sample_count();
    let inner = kl + cfg.confidence_term();
    if inner <= 0.0 {
        return Err(Error::Domain(
            "confidence term is non-positive (delta >= 2 sqrt(NH))".into(),
        ));
    }
    Ok(cfg.reg_scale / (2.0 * (n * inner).sqrt()))
}

/// Run-level bound with its window count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub value: f64,
    /// `T = floor(K / N)`.
    pub windows: usize,
    /// Set when `K` is not a multiple of `N`.
    pub truncated: bool,
}

/// ```text
/// 2 sqrt(N) H (lambda r / (1 - alpha)) sqrt((1 - alpha^(2(T-1))) / (s_min (1 - alpha^2))) / sqrt(K)
///   + 2 sqrt(N) H / K^((1 - gamma_exp) / 2)
/// ```
pub fn theorem1_bound(cfg: &RegularizerConfig) -> Result<BoundReport> {
    cfg.validate()?;
    let k = cfg.k_seen as f64;
    let log_term = k.powf(cfg.gamma_exp);
    theorem1_bound_with_log_term(cfg, log_term)
}

/// Same bound with the confidence log term `ln(2/delta)` supplied explicitly.
/// The stated form uses `ln(2/delta) = K^gamma_exp`; the substitution
/// `delta = 2 exp(-K)` gives `ln(2/delta) = K`.
pub fn theorem1_bound_with_log_term(cfg: &RegularizerConfig, log_term: f64) -> Result<BoundReport> {
    cfg.validate()?;
    let windows = cfg.k_seen / cfg.n;
    let truncated = cfg.k_seen % cfg.n != 0;
    if windows == 0 {
        return Err(Error::Config(format!(
            "K = {} is smaller than N = {}",
            cfg.k_seen, cfg.n
        )));
    }
    let k = cfg.k_seen as f64;
    let sqrt_n = (cfg.n as f64).sqrt();
    let h = cfg.horizon as f64;
    let a = cfg.alpha;
    let geometric = (1.0 - a.powi(2 * (windows as i32 - 1))) / (cfg.s_min * (1.0 - a * a));
    let kl_part =
        2.0 * sqrt_n * h * (cfg.lambda0 * cfg.r / (1.0 - a)) * geometric.sqrt() / k.sqrt();
    let conf_part = 2.0 * sqrt_n * h * log_term.sqrt() / k.sqrt();
    Ok(BoundReport {
        value: kl_part + conf_part,
        windows,
        truncated,
    })
}

/// Ceiling on `sum_{l=1}^{T-1} KL(P_l || P_bar_l)`:
/// `(2 lambda^2 r^2 / (s_min (1 - alpha)^2)) (1 - alpha^(2(T-1))) / (1 - alpha^2)`.
pub fn kl_budget(cfg: &RegularizerConfig, windows: usize) -> Result<f64> {
    if windows == 0 {
        return Err(Error::Domain("T must be at least 1".into()));
    }
    let a = cfg.alpha;
    let lead = 2.0 * cfg.lambda0.powi(2) * cfg.r.powi(2) / (cfg.s_min * (1.0 - a).powi(2));
    Ok(lead * (1.0 - a.powi(2 * (windows as i32 - 1))) / (1.0 - a * a))
}

/// `T -> infinity` limit of [`kl_budget`].
pub fn kl_budget_limit(cfg: &RegularizerConfig) -> f64 {
    let a = cfg.alpha;
    2.0 * cfg.lambda0.powi(2) * cfg.r.powi(2) / (cfg.s_min * (1.0 - a).powi(2) * (1.0 - a * a))
}

/// The two closed-form branches of the task-count requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleComplexity {
    pub kl_branch: f64,
    pub confidence_branch: f64,
    /// Ceiling of the larger branch. The additive `O~(N eps^-4)` optimization
    /// term has no explicit constant and is not included.
    pub k: u64,
}

/// `max(16 N H^2 lambda^2 r^2 / (s_min (1-alpha)^3 (1+alpha) eps^2), (16 N H^2 / eps^2)^(1/(1-gamma)))`.
pub fn sample_complexity_k(epsilon: f64, cfg: &RegularizerConfig) -> Result<SampleComplexity> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = cfg.n as f64;
    let h2 = (cfg.horizon as f64).powi(2);
    let a = cfg.alpha;
    let e2 = epsilon * epsilon;
    let kl_branch = 16.0 * n * h2 * cfg.lambda0.powi(2) * cfg.r.powi(2)
        / (cfg.s_min * (1.0 - a).powi(3) * (1.0 + a) * e2);
    let confidence_branch = (16.0 * n * h2 / e2).powf(1.0 / (1.0 - cfg.gamma_exp));
    let top = kl_branch.max(confidence_branch);
    if top > u64::MAX as f64 {
        return Err(Error::Numeric(format!("required K = {top} overflows")));
    }
    Ok(SampleComplexity {
        kl_branch,
        confidence_branch,
        k: top.ceil() as u64,
    })
}

/// Logged estimates of the assumption constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEstimates {
    /// Smallest action probability of the mean policy over snapshots and probes.
    pub s_min_hat: f64,
    /// Largest Pinsker upper bound on TV between consecutive snapshots.
    pub r_hat: f64,
}

/// Pinsker upper bound on the total-variation distance, using the tighter
/// of the two KL directions and capped at 1.
pub fn pinsker_tv<D: ParamDistribution>(a: &D, b: &D) -> Result<f64> {
    let kl = a.kl(b)?.min(b.kl(a)?);
    Ok((kl / 2.0).sqrt().min(1.0))
}

pub fn estimate_assumption_constants<D: ParamDistribution>(
    history: &[D],
    probes: &[Vec<f64>],
) -> Result<AssumptionEstimates> {
    if history.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 snapshots, got {}",
            history.len()
        )));
    }
    let mut r_hat: f64 = 0.0;
    for pair in history.windows(2) {
        r_hat = r_hat.max(pinsker_tv(&pair[1], &pair[0])?);
    }
    let mut s_min_hat = f64::INFINITY;
    for snap in history {
        let pol = snap.mean_policy();
        for s in probes {
            for p in pol.action_probs(s)? {
                s_min_hat = s_min_hat.min(p);
            }
        }
    }
    Ok(AssumptionEstimates { s_min_hat, r_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{FeatureMap, FlatGibbsDistribution, GaussianPolicyDistribution};
    use proptest::prelude::*;

    fn cfg() -> RegularizerConfig {
        RegularizerConfig {
            n: 25,
            horizon: 100,
            k_seen: 1000,
            lambda0: 0.9,
            alpha: 0.95,
            s_min: 0.01,
            r: 0.1,
            delta_conf: 0.05,
            gamma_exp: 0.25,
            reg_scale: 1.0,
        }
    }

    #[test]
    fn regularizer_at_zero_kl() {
        // mpmath, 50 digits: sqrt(ln(2 sqrt(200) / 0.05) / 400)
        let c = RegularizerConfig {
            n: 2,
            horizon: 100,
            ..cfg()
        };
        let v = training_regularizer(0.0, &c).unwrap();
        assert!((v - 0.125_877_302_733_534_48).abs() < 1e-15, "{v}");
    }

    #[test]
    fn regularizer_ablation_and_domain() {
        let c = RegularizerConfig {
            reg_scale: 0.0,
            ..cfg()
        };
        assert_eq!(training_regularizer(12.0, &c).unwrap(), 0.0);
        assert_eq!(training_regularizer_slope(12.0, &c).unwrap(), 0.0);
        assert!(matches!(
            training_regularizer(-1e-3, &cfg()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn regularizer_slope_matches_finite_difference() {
        let c = cfg();
        for kl in [0.0, 0.3, 5.0] {
            let h = 1e-6;
            let fd = (training_regularizer(kl + h, &c).unwrap()
                - training_regularizer((kl - h).max(0.0), &c).unwrap())
                / (kl + h - (kl - h).max(0.0));
            let s = training_regularizer_slope(kl, &c).unwrap();
            assert!((fd - s).abs() < 1e-6 * s.max(1e-3), "kl={kl}");
        }
    }

    #[test]
    fn theorem1_frozen_value() {
        // mpmath, 50 digits: 1881.16383068135435180925952605...
        let b = theorem1_bound(&cfg()).unwrap();
        assert!(
            (b.value - 1881.163_830_681_354_4).abs() < 1e-9,
            "{}",
            b.value
        );
        assert_eq!(b.windows, 40);
        assert!(!b.truncated);
    }

    #[test]
    fn theorem1_frozen_prior_keeps_only_confidence_part() {
        let c = RegularizerConfig {
            lambda0: 0.0,
            ..cfg()
        };
        let expected = 2.0 * 5.0 * 100.0 / 1000f64.powf(0.375);
        assert!((theorem1_bound(&c).unwrap().value - expected).abs() < 1e-10);
    }

    #[test]
    fn theorem1_is_not_monotone_in_k_for_few_windows() {
        let c = RegularizerConfig {
            n: 1,
            horizon: 1,
            k_seen: 1,
            ..cfg()
        };
        let one = theorem1_bound(&c).unwrap().value;
        let two = theorem1_bound(&RegularizerConfig {
            k_seen: 2,
            ..c.clone()
        })
        .unwrap()
        .value;
        assert!(two > one);
        let late = theorem1_bound(&RegularizerConfig {
            k_seen: 4000,
            ..c.clone()
        })
        .unwrap()
        .value;
        let later = theorem1_bound(&RegularizerConfig { k_seen: 8000, ..c })
            .unwrap()
            .value;
        assert!(later < late);
    }

    #[test]
    fn theorem1_flags_truncated_windows() {
        let c = RegularizerConfig {
            k_seen: 1010,
            ..cfg()
        };
        let b = theorem1_bound(&c).unwrap();
        assert_eq!(b.windows, 40);
        assert!(b.truncated);
    }

    #[test]
    fn kl_budget_values() {
        let c = RegularizerConfig { r: 0.05, ..cfg() };
        assert_eq!(kl_budget(&c, 1).unwrap(), 0.0);
        // mpmath, 50 digits: 1631.13299921446455463888789553...
        let v = kl_budget(&c, 40).unwrap();
        assert!((v - 1631.132_999_214_464_6).abs() < 1e-9, "{v}");
        let limit = kl_budget_limit(&c);
        assert!((kl_budget(&c, 5000).unwrap() - limit).abs() < 1e-9 * limit);
        assert!(kl_budget(&c, 0).is_err());
    }

    #[test]
    fn sample_complexity_frozen_value() {
        let c = RegularizerConfig { r: 0.05, ..cfg() };
        // mpmath: first branch 13292307692.3077, second 4031747359.66
        let s = sample_complexity_k(0.5, &c).unwrap();
        assert_eq!(s.k, 13_292_307_693);
        assert!((s.kl_branch - 13_292_307_692.307_692).abs() < 1e-2);
        assert!((s.confidence_branch - 4_031_747_359.663_594).abs() < 1e-1);
        assert!(matches!(
            sample_complexity_k(0.0, &c),
            Err(Error::Domain(_))
        ));
        assert!(sample_complexity_k(-1.0, &c).is_err());
    }

    #[test]
    fn sample_complexity_scaling() {
        let c = RegularizerConfig { r: 0.05, ..cfg() };
        let a = sample_complexity_k(0.5, &c).unwrap();
        let b = sample_complexity_k(0.25, &c).unwrap();
        let e = sample_complexity_k(0.125, &c).unwrap();
        assert!((b.kl_branch / a.kl_branch - 4.0).abs() < 1e-12);
        assert!((e.kl_branch / b.kl_branch - 4.0).abs() < 1e-12);
        let expo = 2.0 / (1.0 - c.gamma_exp);
        assert!(
            (b.confidence_branch / a.confidence_branch - 2f64.powf(expo)).abs()
                < 1e-9 * 2f64.powf(expo)
        );
        let z = RegularizerConfig { lambda0: 0.0, ..c };
        let s = sample_complexity_k(0.5, &z).unwrap();
        assert_eq!(s.kl_branch, 0.0);
        assert_eq!(s.k, s.confidence_branch.ceil() as u64);
    }

    fn flat(mu: f64, sigma: f64) -> FlatGibbsDistribution {
        FlatGibbsDistribution::new(
            GaussianPolicyDistribution::new(vec![mu], vec![sigma]).unwrap(),
            FeatureMap::ActionIndicator {
                n_actions: 2,
                action: 1,
            },
        )
        .unwrap()
    }

    #[test]
    fn assumption_constants_examples() {
        let same =
            estimate_assumption_constants(&[flat(0.0, 1.0), flat(0.0, 1.0)], &[vec![]]).unwrap();
        assert_eq!(same.r_hat, 0.0);
        assert_eq!(same.s_min_hat, 0.5);
        let moved =
            estimate_assumption_constants(&[flat(0.0, 1.0), flat(1.0, 1.0)], &[vec![]]).unwrap();
        assert!((moved.r_hat - 0.5).abs() < 1e-15);
        assert!(matches!(
            estimate_assumption_constants(&[flat(0.0, 1.0)], &[vec![]]),
            Err(Error::InsufficientData(_))
        ));
    }

    proptest! {
        #[test]
        fn regularizer_monotone(kl1 in 0.0f64..50.0, dk in 1e-6f64..50.0, n in 1usize..60, h in 1usize..300) {
            let c = RegularizerConfig { n, horizon: h, ..cfg() };
            prop_assert!(training_regularizer(kl1 + dk, &c).unwrap() > training_regularizer(kl1, &c).unwrap());
            let bigger_n = RegularizerConfig { n: n + 1, ..c.clone() };
            prop_assert!(training_regularizer(kl1, &bigger_n).unwrap() < training_regularizer(kl1, &c).unwrap());
            let looser = RegularizerConfig { delta_conf: c.delta_conf / 2.0, ..c.clone() };
            prop_assert!(training_regularizer(kl1, &looser).unwrap() > training_regularizer(kl1, &c).unwrap());
            prop_assert!(training_regularizer(0.0, &c).unwrap() > 0.0);
        }

        #[test]
        fn theorem1_monotonicity(
            n in 1usize..50, h in 1usize..200, t in 1usize..60, lam in 0.0f64..1.0,
            alpha in 0.05f64..0.99, r in 0.0f64..1.0, s_min in 0.001f64..1.0, g in 0.05f64..0.95,
        ) {
            let c = RegularizerConfig { n, horizon: h, k_seen: n * t, lambda0: lam, alpha, s_min, r, gamma_exp: g, ..cfg() };
            let base = theorem1_bound(&c).unwrap().value;
            let conf = |k: usize| {
                let cc = RegularizerConfig { k_seen: k, lambda0: 0.0, ..c.clone() };
                theorem1_bound(&cc).unwrap().value
            };
            prop_assert!(conf(n * (t + 1)) <= conf(n * t) * (1.0 + 1e-12));
            let more_k = theorem1_bound(&RegularizerConfig { k_seen: n * (t + 1), ..c.clone() }).unwrap().value;
            let ceiling = 2.0 * (n as f64).sqrt() * h as f64 * lam * r / (1.0 - alpha)
                / (s_min * (1.0 - alpha * alpha)).sqrt() / ((n * (t + 1)) as f64).sqrt();
            prop_assert!(more_k <= conf(n * (t + 1)) + ceiling * (1.0 + 1e-12));
            let more_h = theorem1_bound(&RegularizerConfig { horizon: h + 1, ..c.clone() }).unwrap().value;
            prop_assert!(more_h >= base);
            let more_l = theorem1_bound(&RegularizerConfig { lambda0: (lam + 0.01).min(1.0), ..c.clone() }).unwrap().value;
            prop_assert!(more_l >= base);
            let more_r = theorem1_bound(&RegularizerConfig { r: r + 0.01, ..c.clone() }).unwrap().value;
            prop_assert!(more_r >= base);
        }

        #[test]
        fn kl_budget_monotone_and_bounded(t in 1usize..500, lam in 0.0f64..1.0, alpha in 0.0f64..0.99, r in 0.0f64..1.0) {
            let c = RegularizerConfig { lambda0: lam, alpha, r, ..cfg() };
            let a = kl_budget(&c, t).unwrap();
            let b = kl_budget(&c, t + 1).unwrap();
            prop_assert!(b >= a);
            prop_assert!(b <= kl_budget_limit(&c) * (1.0 + 1e-12));
        }
    }
}

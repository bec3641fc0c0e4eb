//! Runs experiments from a config and writes their artifacts.
//!
//! Output layout of one `run`:
//!
//! | file | columns |
//! |------|---------|
//! | `rewards.csv` | `seed, task_index, <task params…>, reward, update_index` |
//! | `tasks.csv` | `seed, task_index, param_name, value` |
//! | `bounds.csv` | `seed, update_index, kl_step, kl_running_sum, kl_budget, training_regularizer, theorem1_bound, r_hat, s_min_hat, tasks_seen, tv_step, premise_ok, train_return, train_return_sd, train_samples, grad_norm, clipped, aborted, lambda_now` |
//! | `verify.csv` | `kind, seed, index, statistic, bound, bound_alt, se, covered` |
//! | `martingale.csv` | `seed, trace, window, d, s` |
//! | `snapshots/seed_<s>.json` | posterior after every update and the final prior |
//! | `summary.json` | per-seed window means, aggregates, bound diagnostics, resolved config |
//!
//! `ablate` writes one such directory per sweep value plus `sweep_summary.csv`
//! with `sweep, value, seeds, first_window_mean, final_window_mean,
//! final_window_std, final_window_variance`.
//!
//! Floats are written as `{:.16e}` (17 significant digits). Rows are ordered
//! by seed as listed in the config, then by index, so identical configs give
//! byte-identical files regardless of thread count.
//!
//! Plotting recipe: the learning curve is `reward` against `task_index` in
//! `rewards.csv` (one curve per seed); the KL budget is `kl_running_sum` and
//! `kl_budget` against `update_index` in `bounds.csv`.

use crate::config::{ConfigError, ExperimentConfig, PolicyInit, Sweep};
use crate::envs::{ParamMdp, TaskDistribution};
use crate::lifelong::{
    epicg_ft, run_lifelong, sample_sd, single_task_baseline, trend_slope, Algo, RunLog, TaskRecord,
    UpdateRecord,
};
use crate::pacbayes::{kl_budget_limit, theorem1_bound, theorem1_bound_with_log_term};
use crate::policy::ParamDistribution;
use crate::rng::{stream, Purpose};
use crate::verify::{
    gap_report, kl_budget_audit, simulate_martingale, GapReport, KlAudit, MartingaleTrace,
};
use crate::Error;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

/// Environment variable that replaces `experiment.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "EPIC_OUTPUT_DIR";

/// Why a command failed; see [`Failure::exit_code`].
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Seed { seed: u64, error: Error },
    Output { path: PathBuf, message: String },
}

impl Failure {
    /// 2 for a malformed config, 1 for anything that failed at runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Seed { seed, error } => write!(f, "seed {seed}: {error}"),
            Failure::Output { path, message } => write!(f, "{}: {message}", path.display()),
        }
    }
}

impl std::error::Error for Failure {}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn output_err(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn plain_config_error(message: String) -> Failure {
    Failure::Config(ConfigError {
        source_name: "config".into(),
        line: None,
        column: None,
        message,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation across seeds.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        Stat {
            mean: values.iter().sum::<f64>() / values.len().max(1) as f64,
            std: sample_sd(values),
            n: values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub first_window_mean: f64,
    pub final_window_mean: f64,
    /// Least-squares slope of reward against task index.
    pub reward_slope: f64,
    pub updates: usize,
    pub aborted_updates: usize,
    pub kl_running_sum: Option<f64>,
    pub r_hat: Option<f64>,
    pub s_min_hat: Option<f64>,
    pub premise_ok: Option<bool>,
    pub gap: Option<GapReport>,
    pub kl_audit_violations: Option<usize>,
    pub kl_audit_flagged: Option<usize>,
    pub martingale_exceed_azuma: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostics {
    /// Bound at the full stream with `ln(2/delta) = K^gamma`.
    pub theorem1_bound_stated: f64,
    /// Same with `ln(2/delta) = K`.
    pub theorem1_bound_proof: f64,
    pub windows: usize,
    /// `K` is not a multiple of `N`.
    pub truncated: bool,
    pub kl_budget_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub gap_runs: usize,
    pub gap_covered: usize,
    pub kl_premise_windows: usize,
    pub kl_violations: usize,
    pub kl_flagged: usize,
    pub martingale_traces: usize,
    pub martingale_exceed_azuma: usize,
    pub martingale_exceed_freedman: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algo: String,
    pub window: usize,
    pub seeds: Vec<SeedSummary>,
    pub first_window: Stat,
    pub final_window: Stat,
    /// Seeds whose final-window mean exceeds their first-window mean.
    pub improved_seeds: usize,
    pub bound: BoundDiagnostics,
    pub verify: Option<VerifySummary>,
    pub config: ExperimentConfig,
    pub config_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub sweep: String,
    pub value: f64,
    pub directory: PathBuf,
    pub first_window: Stat,
    pub final_window: Stat,
    pub per_seed_final: Vec<f64>,
}

struct SeedOutput {
    seed: u64,
    tasks: Vec<TaskRecord>,
    updates: Vec<UpdateRecord>,
    snapshots: serde_json::Value,
    gap: Option<GapReport>,
    audit: Option<KlAudit>,
    traces: Vec<MartingaleTrace>,
}

/// `EPIC_OUTPUT_DIR` when set, otherwise the config's `output_dir`.
pub fn resolve_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.experiment.output_dir.clone())
}

fn load(path: &Path) -> Result<(ExperimentConfig, String), Failure> {
    let cfg = ExperimentConfig::load(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| output_err(path, e))?;
    Ok((cfg, text))
}

/// `run <config>`.
pub fn run_file(path: &Path) -> Result<Summary, Failure> {
    let (cfg, text) = load(path)?;
    let out = resolve_output_dir(&cfg);
    run_experiment(&cfg, &text, &out, cfg.verify.enabled)
}

/// `verify <config>`: a run with every check enabled.
pub fn verify_file(path: &Path) -> Result<Summary, Failure> {
    let (cfg, text) = load(path)?;
    let out = resolve_output_dir(&cfg);
    run_experiment(&cfg, &text, &out, true)
}

/// `ablate <config> --sweep <name>`.
pub fn ablate_file(path: &Path, sweep: &str) -> Result<Vec<ArmSummary>, Failure> {
    let sweep = Sweep::parse(sweep).ok_or_else(|| {
        plain_config_error(format!(
            "unknown sweep `{sweep}`; expected kappa, N or lambda0"
        ))
    })?;
    let (cfg, text) = load(path)?;
    let out = resolve_output_dir(&cfg);
    run_sweep(&cfg, &text, sweep, &out)
}

fn execute<D: ParamDistribution>(
    cfg: &ExperimentConfig,
    init: D,
    seed: u64,
    checks: bool,
) -> crate::Result<SeedOutput> {
    let stream_cfg = cfg.stream_config()?;
    let train = cfg.train_config();
    let reg = cfg.regularizer_config();
    let log: RunLog<D> = match cfg.algo() {
        Algo::Epicg => run_lifelong(&stream_cfg, init, &train, &reg, seed)?,
        Algo::EpicgFt => epicg_ft(&stream_cfg, init, &train, &reg, seed)?,
        Algo::SingleTask => single_task_baseline(&stream_cfg, init, &train, seed)?,
    };
    let snapshots = serde_json::json!({
        "snapshots": log.snapshots,
        "final_prior": log.final_prior,
    });
    let (mut gap, mut audit, mut traces) = (None, None, Vec::new());
    if checks && log.algo != Algo::SingleTask {
        gap = Some(gap_report(
            &log,
            &stream_cfg.tasks,
            &reg,
            cfg.verify.holdout_tasks,
            cfg.verify.draws,
            seed,
        )?);
        audit = Some(kl_budget_audit(&log, &reg)?);
        traces = martingale_traces(&log, &stream_cfg.tasks, cfg, seed)?;
    }
    Ok(SeedOutput {
        seed,
        tasks: log.tasks,
        updates: log.updates,
        snapshots,
        gap,
        audit,
        traces,
    })
}

/// Traces along the run's training snapshots `P_0 .. P_{T-1}`, each on its
/// own fresh tasks.
fn martingale_traces<D: ParamDistribution>(
    log: &RunLog<D>,
    tasks: &TaskDistribution,
    cfg: &ExperimentConfig,
    seed: u64,
) -> crate::Result<Vec<MartingaleTrace>> {
    let windows = log.snapshots.len() - 1;
    if cfg.verify.martingale_traces == 0 || windows == 0 {
        return Ok(Vec::new());
    }
    let n = cfg.train.n;
    let seq = &log.snapshots[..windows];
    (0..cfg.verify.martingale_traces)
        .into_par_iter()
        .map(|trace| {
            let mut rng = stream(seed, Purpose::Martingale, &[u64::MAX, trace as u64]);
            let trace_seed = rng.next_u64();
            let fresh: Vec<ParamMdp> = (0..windows * n)
                .map(|_| tasks.sample_with(&mut rng).map(|t| t.1))
                .collect::<crate::Result<_>>()?;
            simulate_martingale(&fresh, seq, n, cfg.verify.martingale_delta, trace_seed)
        })
        .collect()
}

fn execute_seed(cfg: &ExperimentConfig, seed: u64, checks: bool) -> crate::Result<SeedOutput> {
    match cfg.policy_init(seed)? {
        PolicyInit::Linear(d) => execute(cfg, d, seed, checks),
        PolicyInit::Mlp(d) => execute(cfg, d, seed, checks),
    }
}

/// Float formatting used in every CSV.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| output_err(path, e))?;
    w.write_record(header).map_err(|e| output_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| output_err(path, e))?;
    }
    w.flush().map_err(|e| output_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| output_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| output_err(path, e))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

const BOUNDS_HEADER: [&str; 19] = [
    "seed",
    "update_index",
    "kl_step",
    "kl_running_sum",
    "kl_budget",
    "training_regularizer",
    "theorem1_bound",
    "r_hat",
    "s_min_hat",
    "tasks_seen",
    "tv_step",
    "premise_ok",
    "train_return",
    "train_return_sd",
    "train_samples",
    "grad_norm",
    "clipped",
    "aborted",
    "lambda_now",
];

const VERIFY_HEADER: [&str; 8] = [
    "kind",
    "seed",
    "index",
    "statistic",
    "bound",
    "bound_alt",
    "se",
    "covered",
];

fn bounds_row(seed: u64, u: &UpdateRecord) -> Vec<String> {
    vec![
        seed.to_string(),
        u.update_index.to_string(),
        fmt_f64(u.kl_step),
        fmt_f64(u.kl_running_sum),
        fmt_f64(u.kl_budget),
        fmt_f64(u.training_regularizer),
        fmt_f64(u.theorem1_bound),
        fmt_f64(u.r_hat),
        fmt_f64(u.s_min_hat),
        u.tasks_seen.to_string(),
        fmt_f64(u.tv_step),
        u.premise_ok.to_string(),
        fmt_f64(u.train_return),
        fmt_f64(u.train_return_sd),
        u.train_samples.to_string(),
        fmt_f64(u.grad_norm),
        u.clipped.to_string(),
        u.aborted.to_string(),
        fmt_f64(u.lambda_now),
    ]
}

fn verify_rows(o: &SeedOutput) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let seed = o.seed.to_string();
    if let Some(g) = &o.gap {
        rows.push(vec![
            "gap".into(),
            seed.clone(),
            "0".into(),
            fmt_f64(g.gap),
            fmt_f64(g.bound_stated),
            fmt_f64(g.bound_proof),
            fmt_f64(g.gap_se),
            g.covered.to_string(),
        ]);
    }
    if let Some(a) = &o.audit {
        for r in &a.rows {
            rows.push(vec![
                if r.premise_ok {
                    "kl_budget"
                } else {
                    "kl_budget_flagged"
                }
                .into(),
                seed.clone(),
                r.update_index.to_string(),
                fmt_f64(r.kl_running_sum),
                fmt_f64(r.budget),
                String::new(),
                String::new(),
                r.within_budget.to_string(),
            ]);
        }
    }
    for (i, t) in o.traces.iter().enumerate() {
        rows.push(vec![
            "martingale".into(),
            seed.clone(),
            i.to_string(),
            fmt_f64(t.final_sum().abs()),
            fmt_f64(t.bound_az),
            fmt_f64(t.bound_fr),
            String::new(),
            (!t.exceeds_azuma()).to_string(),
        ]);
    }
    rows
}

fn seed_summary(o: &SeedOutput, window: usize) -> SeedSummary {
    let rewards: Vec<f64> = o.tasks.iter().map(|t| t.reward).collect();
    let w = window.min(rewards.len()).max(1);
    let head = &rewards[..w.min(rewards.len())];
    let tail = &rewards[rewards.len().saturating_sub(w)..];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let last = o.updates.last();
    SeedSummary {
        seed: o.seed,
        first_window_mean: mean(head),
        final_window_mean: mean(tail),
        reward_slope: trend_slope(&rewards),
        updates: o.updates.len(),
        aborted_updates: o.updates.iter().filter(|u| u.aborted).count(),
        kl_running_sum: last.map(|u| u.kl_running_sum),
        r_hat: last.map(|u| u.r_hat),
        s_min_hat: last.map(|u| u.s_min_hat),
        premise_ok: last.map(|u| u.premise_ok),
        gap: o.gap.clone(),
        kl_audit_violations: o.audit.as_ref().map(|a| a.violations),
        kl_audit_flagged: o.audit.as_ref().map(|a| a.flagged),
        martingale_exceed_azuma: (!o.traces.is_empty())
            .then(|| o.traces.iter().filter(|t| t.exceeds_azuma()).count()),
    }
}

/// Runs every seed of `cfg` and writes the artifacts into `out`.
/// `config_text` is embedded verbatim in `summary.json`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    config_text: &str,
    out: &Path,
    checks: bool,
) -> Result<Summary, Failure> {
    if checks && cfg.algo() == Algo::SingleTask {
        return Err(plain_config_error(
            "verification needs a lifelong algo (epicg or epicg_ft)".into(),
        ));
    }
    let results: Vec<_> = cfg
        .experiment
        .seeds
        .par_iter()
        .map(|&seed| execute_seed(cfg, seed, checks).map_err(|error| Failure::Seed { seed, error }))
        .collect();
    let outputs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    std::fs::create_dir_all(out.join("snapshots")).map_err(|e| output_err(out, e))?;

    let names = cfg.env_spec().param_names();
    let mut header = strings(&["seed", "task_index"]);
    header.extend(names.iter().map(|s| s.to_string()));
    header.extend(strings(&["reward", "update_index"]));
    let reward_rows = outputs.iter().flat_map(|o| {
        o.tasks.iter().map(move |t| {
            let mut row = vec![o.seed.to_string(), t.task_index.to_string()];
            row.extend(t.params.iter().map(|p| fmt_f64(p.1)));
            row.push(fmt_f64(t.reward));
            row.push(t.update_index.to_string());
            row
        })
    });
    write_csv(&out.join("rewards.csv"), &header, reward_rows)?;

    let task_rows = outputs.iter().flat_map(|o| {
        o.tasks.iter().flat_map(move |t| {
            t.params.iter().map(move |(name, v)| {
                vec![
                    o.seed.to_string(),
                    t.task_index.to_string(),
                    name.clone(),
                    fmt_f64(*v),
                ]
            })
        })
    });
    write_csv(
        &out.join("tasks.csv"),
        &strings(&["seed", "task_index", "param_name", "value"]),
        task_rows,
    )?;

    let bound_rows = outputs
        .iter()
        .flat_map(|o| o.updates.iter().map(move |u| bounds_row(o.seed, u)));
    write_csv(
        &out.join("bounds.csv"),
        &strings(&BOUNDS_HEADER),
        bound_rows,
    )?;

    for o in &outputs {
        write_json(
            &out.join("snapshots").join(format!("seed_{}.json", o.seed)),
            &o.snapshots,
        )?;
    }

    let verify = checks.then(|| {
        write_csv(
            &out.join("verify.csv"),
            &strings(&VERIFY_HEADER),
            outputs.iter().flat_map(verify_rows),
        )?;
        let rows = outputs.iter().flat_map(|o| {
            o.traces.iter().enumerate().flat_map(move |(i, t)| {
                t.d.iter().zip(&t.s).enumerate().map(move |(l, (d, s))| {
                    vec![
                        o.seed.to_string(),
                        i.to_string(),
                        (l + 1).to_string(),
                        fmt_f64(*d),
                        fmt_f64(*s),
                    ]
                })
            })
        });
        write_csv(
            &out.join("martingale.csv"),
            &strings(&["seed", "trace", "window", "d", "s"]),
            rows,
        )?;
        let all_traces: Vec<&MartingaleTrace> = outputs.iter().flat_map(|o| &o.traces).collect();
        let audits: Vec<&KlAudit> = outputs.iter().filter_map(|o| o.audit.as_ref()).collect();
        Ok::<_, Failure>(VerifySummary {
            gap_runs: outputs.iter().filter(|o| o.gap.is_some()).count(),
            gap_covered: outputs
                .iter()
                .filter(|o| o.gap.as_ref().is_some_and(|g| g.covered))
                .count(),
            kl_premise_windows: audits.iter().map(|a| a.premise_windows).sum(),
            kl_violations: audits.iter().map(|a| a.violations).sum(),
            kl_flagged: audits.iter().map(|a| a.flagged).sum(),
            martingale_traces: all_traces.len(),
            martingale_exceed_azuma: all_traces.iter().filter(|t| t.exceeds_azuma()).count(),
            martingale_exceed_freedman: all_traces
                .iter()
                .filter(|t| t.final_sum().abs() > t.bound_fr)
                .count(),
        })
    });
    let verify = verify.transpose()?;

    let window = cfg.experiment.final_window;
    let seeds: Vec<SeedSummary> = outputs.iter().map(|o| seed_summary(o, window)).collect();
    let first: Vec<f64> = seeds.iter().map(|s| s.first_window_mean).collect();
    let last: Vec<f64> = seeds.iter().map(|s| s.final_window_mean).collect();
    let reg = cfg.regularizer_config();
    let stated = theorem1_bound(&reg).map_err(|error| Failure::Seed {
        seed: cfg.experiment.seeds[0],
        error,
    })?;
    let proof =
        theorem1_bound_with_log_term(&reg, reg.k_seen as f64).map_err(|error| Failure::Seed {
            seed: cfg.experiment.seeds[0],
            error,
        })?;
    let summary = Summary {
        algo: cfg.algo().name().into(),
        window,
        improved_seeds: seeds
            .iter()
            .filter(|s| s.final_window_mean > s.first_window_mean)
            .count(),
        first_window: Stat::of(&first),
        final_window: Stat::of(&last),
        seeds,
        bound: BoundDiagnostics {
            theorem1_bound_stated: stated.value,
            theorem1_bound_proof: proof.value,
            windows: stated.windows,
            truncated: stated.truncated,
            kl_budget_limit: kl_budget_limit(&reg),
        },
        verify,
        config: cfg.clone(),
        config_text: config_text.to_string(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn arm_dir(sweep: Sweep, value: f64) -> String {
    format!("{}_{}", sweep.name(), value)
}

/// Runs one arm per sweep value into `out/<sweep>_<value>/` and writes
/// `out/sweep_summary.csv`.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    config_text: &str,
    sweep: Sweep,
    out: &Path,
) -> Result<Vec<ArmSummary>, Failure> {
    let values = cfg.sweep_values(sweep);
    if values.is_empty() {
        return Err(plain_config_error(format!(
            "sweep.{} lists no values",
            sweep.name()
        )));
    }
    let mut arms = Vec::with_capacity(values.len());
    for &v in &values {
        let arm_cfg = cfg.with_sweep_value(sweep, v);
        let dir = out.join(arm_dir(sweep, v));
        let s = run_experiment(&arm_cfg, config_text, &dir, arm_cfg.verify.enabled)?;
        arms.push(ArmSummary {
            sweep: sweep.name().into(),
            value: v,
            directory: dir,
            first_window: s.first_window,
            final_window: s.final_window,
            per_seed_final: s.seeds.iter().map(|x| x.final_window_mean).collect(),
        });
    }
    std::fs::create_dir_all(out).map_err(|e| output_err(out, e))?;
    let rows = arms.iter().map(|a| {
        vec![
            a.sweep.clone(),
            fmt_f64(a.value),
            a.final_window.n.to_string(),
            fmt_f64(a.first_window.mean),
            fmt_f64(a.final_window.mean),
            fmt_f64(a.final_window.std),
            fmt_f64(a.final_window.std * a.final_window.std),
        ]
    });
    write_csv(
        &out.join("sweep_summary.csv"),
        &strings(&[
            "sweep",
            "value",
            "seeds",
            "first_window_mean",
            "final_window_mean",
            "final_window_std",
            "final_window_variance",
        ]),
        rows,
    )?;
    Ok(arms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(
            "[experiment]\nseeds = [3, 1]\nfinal_window = 4\n\n[env]\nname = \"chain\"\nhorizon = 10\ndiscount = 0.9\n\n[train]\nK = 8\nN = 4\nM = 2\n",
            "tiny.toml",
        )
        .unwrap()
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let back: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn run_writes_every_artifact_in_seed_order() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_experiment(&tiny(), "", dir.path(), false).unwrap();
        assert_eq!(
            s.seeds.iter().map(|x| x.seed).collect::<Vec<_>>(),
            vec![3, 1]
        );
        for f in [
            "rewards.csv",
            "tasks.csv",
            "bounds.csv",
            "summary.json",
            "snapshots/seed_1.json",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(!dir.path().join("verify.csv").exists());
        let bounds = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
        assert_eq!(bounds.lines().count(), 1 + 2 * 2);
        assert!(bounds.lines().nth(1).unwrap().starts_with("3,1,"));
    }

    #[test]
    fn seed_failures_name_the_seed() {
        let mut cfg = tiny();
        cfg.train.beta = f64::NAN;
        let err = run_experiment(&cfg, "", tempfile::tempdir().unwrap().path(), false).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().starts_with("seed 3:"), "{err}");
    }

    #[test]
    fn single_task_cannot_be_verified() {
        let mut cfg = tiny();
        cfg.experiment.algo = "single_task".into();
        let err = run_experiment(&cfg, "", tempfile::tempdir().unwrap().path(), true).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn verify_writes_traces() {
        let mut cfg = tiny();
        cfg.verify.holdout_tasks = 5;
        cfg.verify.martingale_traces = 3;
        let dir = tempfile::tempdir().unwrap();
        let s = run_experiment(&cfg, "", dir.path(), true).unwrap();
        let v = s.verify.unwrap();
        assert_eq!(v.gap_runs, 2);
        assert_eq!(v.martingale_traces, 6);
        let text = std::fs::read_to_string(dir.path().join("martingale.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 6 * 2);
        assert!(text.lines().nth(4).unwrap().starts_with("3,1,2,"));
    }

    #[test]
    fn sweep_makes_one_directory_per_value() {
        let mut cfg = tiny();
        cfg.sweep.n = vec![2, 4];
        let dir = tempfile::tempdir().unwrap();
        let arms = run_sweep(&cfg, "", Sweep::N, dir.path()).unwrap();
        assert_eq!(arms.len(), 2);
        assert!(dir.path().join("N_2/rewards.csv").exists());
        let text = std::fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}

//! Experiment files.
//!
//! Configs are TOML with one section per concern. Every key has a default and
//! unknown keys are rejected. A minimal file:
//!
//! ```toml
//! [experiment]
//! algo = "epicg"          # epicg | epicg_ft | single_task
//! seeds = [1, 2, 3, 4, 5]
//! output_dir = "out/cartpole"
//!
//! [env]
//! name = "cartpole"       # cartpole | chain
//! tasks = "uniform"       # uniform | gmm | single
//! horizon = 200
//!
//! [train]
//! K = 200
//! N = 25
//! ```
//!
//! A custom task mixture replaces the preset:
//!
//! ```toml
//! [[env.components]]
//! weight = 1.0
//! params.cart_mass = { dist = "uniform", lo = 1.0, hi = 2.0 }
//! ```

use crate::envs::{EnvSpec, MixtureComponent, ParamDist, TaskDistribution};
use crate::lifelong::{Algo, StreamConfig, TrainConfig};
use crate::pacbayes::RegularizerConfig;
use crate::policy::{
    Activation, FeatureMap, FlatGibbsDistribution, GaussianPolicyDistribution, LayerSpec,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// A config problem, with the 1-based line and column when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source_name: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {}", self.source_name, self.message),
            (Some(l), None) => write!(f, "{}:{l}: {}", self.source_name, self.message),
            _ => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub algo: String,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Tasks in the first and final reporting windows.
    pub final_window: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            algo: "epicg".into(),
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("epic-out"),
            final_window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    #[serde(default)]
    pub params: BTreeMap<String, ParamDist>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub name: String,
    pub tasks: String,
    #[serde(alias = "H")]
    pub horizon: usize,
    pub discount: f64,
    /// Chain length; ignored for cart-pole.
    pub n_states: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentSpec>,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            name: "cartpole".into(),
            tasks: "uniform".into(),
            horizon: 200,
            discount: 0.99,
            n_states: 5,
            components: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    /// `linear` (Gibbs over the environment's features) or `mlp`.
    pub kind: String,
    pub hidden: Vec<usize>,
    pub activation: String,
    pub init_sigma: f64,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: "linear".into(),
            hidden: vec![16],
            activation: "tanh".into(),
            init_sigma: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    #[serde(alias = "K")]
    pub k: usize,
    #[serde(alias = "N")]
    pub n: usize,
    #[serde(alias = "M")]
    pub m: usize,
    pub beta: f64,
    pub clip_norm: f64,
    pub inner_steps: usize,
    pub inner_beta: f64,
    pub inner_batch: usize,
    pub eval_episodes: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            k: 200,
            n: 25,
            m: t.m,
            beta: t.beta,
            clip_norm: t.clip_norm,
            inner_steps: t.inner_steps,
            inner_beta: t.inner_beta,
            inner_batch: t.inner_batch,
            eval_episodes: t.eval_episodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSection {
    pub lambda0: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub delta_conf: f64,
    pub gamma_exp: f64,
    pub s_min: f64,
    pub r: f64,
}

impl Default for BoundSection {
    fn default() -> Self {
        let r = RegularizerConfig::default();
        BoundSection {
            lambda0: r.lambda0,
            alpha: r.alpha,
            kappa: r.reg_scale,
            delta_conf: r.delta_conf,
            gamma_exp: r.gamma_exp,
            s_min: r.s_min,
            r: r.r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Also run the checks after `run`.
    pub enabled: bool,
    pub holdout_tasks: usize,
    /// Policy draws per (snapshot, holdout task).
    pub draws: usize,
    /// Martingale traces per seed; chain environments only.
    pub martingale_traces: usize,
    pub martingale_delta: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            enabled: false,
            holdout_tasks: 200,
            draws: 4,
            martingale_traces: 0,
            martingale_delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub kappa: Vec<f64>,
    #[serde(alias = "N")]
    pub n: Vec<usize>,
    pub lambda0: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            kappa: vec![0.0, 1.0],
            n: vec![5, 10, 25, 50],
            lambda0: vec![0.84, 0.86, 0.88, 0.90, 0.92, 0.94],
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub env: EnvSection,
    pub policy: PolicySection,
    pub train: TrainSection,
    pub bound: BoundSection,
    pub verify: VerifySection,
    pub sweep: SweepSection,
}

/// Which sweep `ablate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Kappa,
    N,
    Lambda0,
}

impl Sweep {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "kappa" => Some(Sweep::Kappa),
            "N" | "n" => Some(Sweep::N),
            "lambda0" => Some(Sweep::Lambda0),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Kappa => "kappa",
            Sweep::N => "N",
            Sweep::Lambda0 => "lambda0",
        }
    }
}

/// Initial world-policy distribution selected by `[policy]`.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyInit {
    Linear(FlatGibbsDistribution),
    Mlp(crate::policy::LayeredGaussianPolicy),
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    (line, col)
}

/// Line of `key` inside `[section]`, or of the section header when the key is absent.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix("[[").and_then(|l| l.split("]]").next()) {
            current = h.trim().to_string();
            continue;
        }
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = h.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            let name = line.split('=').next().unwrap_or("").trim();
            if !key.is_empty() && (name == key || name.eq_ignore_ascii_case(key)) {
                return Some(i + 1);
            }
        }
    }
    header
}

impl ExperimentConfig {
    /// Parses TOML text; `source_name` prefixes error messages.
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(text, span.start);
                    (Some(l), Some(c))
                }
                None => (None, None),
            };
            ConfigError {
                source_name: source_name.into(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.check().map_err(|(section, key, message)| ConfigError {
            source_name: source_name.into(),
            line: locate(text, section, key),
            column: None,
            message,
        })?;
        Ok(cfg)
    }

    /// Reads a `.toml` file, or a `.json` file holding the same structure
    /// (for instance the `config` object of a `summary.json`).
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source_name: name.clone(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ConfigError {
                    source_name: name.clone(),
                    line: Some(e.line()),
                    column: Some(e.column()),
                    message: e.to_string(),
                })?;
            let inner = value.get("config").cloned().unwrap_or(value);
            let cfg: ExperimentConfig = serde_json::from_value(inner).map_err(|e| ConfigError {
                source_name: name.clone(),
                line: None,
                column: None,
                message: e.to_string(),
            })?;
            cfg.check().map_err(|(_, _, message)| ConfigError {
                source_name: name,
                line: None,
                column: None,
                message,
            })?;
            return Ok(cfg);
        }
        Self::from_toml_str(&text, &name)
    }

    /// Canonical TOML with every key spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    fn check(&self) -> Result<(), (&'static str, &'static str, String)> {
        let e = |s: &'static str, k: &'static str, m: String| Err((s, k, m));
        if Algo::parse(&self.experiment.algo).is_err() {
            return e(
                "experiment",
                "algo",
                format!(
                    "unknown algo `{}`; expected epicg, epicg_ft or single_task",
                    self.experiment.algo
                ),
            );
        }
        if self.experiment.seeds.is_empty() {
            return e("experiment", "seeds", "seeds must not be empty".into());
        }
        if self.experiment.final_window == 0 {
            return e(
                "experiment",
                "final_window",
                "final_window must be positive".into(),
            );
        }
        if !matches!(self.env.name.as_str(), "cartpole" | "chain") {
            return e(
                "env",
                "name",
                format!(
                    "unknown env `{}`; expected cartpole or chain",
                    self.env.name
                ),
            );
        }
        if self.env.components.is_empty() {
            if let Err(err) = TaskDistribution::preset(&self.env.tasks, &self.env_spec()) {
                return e("env", "tasks", err.to_string());
            }
        }
        if self.env.name == "chain" && self.env.n_states < 2 {
            return e("env", "n_states", "chain needs at least 2 states".into());
        }
        if let Err(err) = self.task_distribution() {
            return e("env", "components", err.to_string());
        }
        if !matches!(self.policy.kind.as_str(), "linear" | "mlp") {
            return e(
                "policy",
                "kind",
                format!(
                    "unknown policy `{}`; expected linear or mlp",
                    self.policy.kind
                ),
            );
        }
        if !matches!(self.policy.activation.as_str(), "tanh" | "relu") {
            return e(
                "policy",
                "activation",
                format!("unknown activation `{}`", self.policy.activation),
            );
        }
        if self.policy.kind == "mlp"
            && (self.policy.hidden.len() > 2 || self.policy.hidden.contains(&0))
        {
            return e(
                "policy",
                "hidden",
                "at most two hidden layers of positive width".into(),
            );
        }
        if !(self.policy.init_sigma > 0.0 && self.policy.init_sigma.is_finite()) {
            return e("policy", "init_sigma", "init_sigma must be positive".into());
        }
        if self.train.k < self.train.n {
            return e(
                "train",
                "k",
                format!("K = {} is smaller than N = {}", self.train.k, self.train.n),
            );
        }
        if let Err(err) = self.train_config().validate() {
            return e("train", "", err.to_string());
        }
        let reg = self.regularizer_config();
        if let Err(err) = reg.validate() {
            let msg = err.to_string();
            let key = [
                "lambda0",
                "alpha",
                "s_min",
                "delta_conf",
                "gamma_exp",
                "reg_scale",
                "r ",
            ]
            .into_iter()
            .find(|k| msg.contains(k.trim()))
            .map(|k| if k == "reg_scale" { "kappa" } else { k.trim() })
            .unwrap_or("");
            return Err(("bound", key, msg));
        }
        if self.verify.holdout_tasks == 0 {
            return e(
                "verify",
                "holdout_tasks",
                "holdout_tasks must be at least 1".into(),
            );
        }
        if self.verify.draws == 0 {
            return e("verify", "draws", "draws must be at least 1".into());
        }
        if !(self.verify.martingale_delta > 0.0 && self.verify.martingale_delta < 1.0) {
            return e(
                "verify",
                "martingale_delta",
                "martingale_delta must lie in (0, 1)".into(),
            );
        }
        if self.verify.martingale_traces > 0 && self.env.name != "chain" {
            return e(
                "verify",
                "martingale_traces",
                "martingale traces need the chain environment".into(),
            );
        }
        Ok(())
    }

    pub fn algo(&self) -> Algo {
        Algo::parse(&self.experiment.algo).expect("checked at load")
    }

    pub fn env_spec(&self) -> EnvSpec {
        match self.env.name.as_str() {
            "chain" => EnvSpec::Chain {
                n_states: self.env.n_states,
                horizon: self.env.horizon,
                discount: self.env.discount,
            },
            _ => EnvSpec::CartPole {
                horizon: self.env.horizon,
                discount: self.env.discount,
            },
        }
    }

    pub fn task_distribution(&self) -> crate::Result<TaskDistribution> {
        let env = self.env_spec();
        if self.env.components.is_empty() {
            return TaskDistribution::preset(&self.env.tasks, &env);
        }
        let comps = self
            .env
            .components
            .iter()
            .map(|c| MixtureComponent {
                weight: c.weight,
                params: c
                    .params
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            })
            .collect();
        TaskDistribution::new(env, comps)
    }

    pub fn stream_config(&self) -> crate::Result<StreamConfig> {
        Ok(StreamConfig {
            tasks: self.task_distribution()?,
            k: self.train.k,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            m: self.train.m,
            beta: self.train.beta,
            clip_norm: self.train.clip_norm,
            inner_steps: self.train.inner_steps,
            inner_beta: self.train.inner_beta,
            inner_batch: self.train.inner_batch,
            eval_episodes: self.train.eval_episodes,
        }
    }

    pub fn regularizer_config(&self) -> RegularizerConfig {
        RegularizerConfig {
            n: self.train.n,
            horizon: self.env.horizon,
            k_seen: self.train.k,
            lambda0: self.bound.lambda0,
            alpha: self.bound.alpha,
            s_min: self.bound.s_min,
            r: self.bound.r,
            delta_conf: self.bound.delta_conf,
            gamma_exp: self.bound.gamma_exp,
            reg_scale: self.bound.kappa,
        }
    }

    /// The initial distribution. MLP initial means are drawn from the
    /// `Init` stream of `seed`.
    pub fn policy_init(&self, seed: u64) -> crate::Result<PolicyInit> {
        let task = self.env_spec().default_task()?;
        match self.policy.kind.as_str() {
            "mlp" => {
                let input = task.default_input();
                let act = match self.policy.activation.as_str() {
                    "relu" => Activation::Relu,
                    _ => Activation::Tanh,
                };
                let mut specs = Vec::new();
                let mut width = input.dim();
                for &h in &self.policy.hidden {
                    specs.push(LayerSpec {
                        inputs: width,
                        outputs: h,
                        activation: Some(act),
                    });
                    width = h;
                }
                specs.push(LayerSpec {
                    inputs: width,
                    outputs: task.n_actions(),
                    activation: None,
                });
                let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Init, &[u64::MAX]);
                Ok(PolicyInit::Mlp(
                    crate::policy::LayeredGaussianPolicy::initial(input, &specs, &mut rng)?,
                ))
            }
            _ => {
                let features: FeatureMap = task.default_features();
                let d = features.dim();
                let dist =
                    GaussianPolicyDistribution::new(vec![0.0; d], vec![self.policy.init_sigma; d])?;
                Ok(PolicyInit::Linear(FlatGibbsDistribution::new(
                    dist, features,
                )?))
            }
        }
    }

    /// Copy with one sweep value applied.
    pub fn with_sweep_value(&self, sweep: Sweep, value: f64) -> Self {
        let mut out = self.clone();
        match sweep {
            Sweep::Kappa => out.bound.kappa = value,
            Sweep::N => out.train.n = value as usize,
            Sweep::Lambda0 => out.bound.lambda0 = value,
        }
        out
    }

    pub fn sweep_values(&self, sweep: Sweep) -> Vec<f64> {
        match sweep {
            Sweep::Kappa => self.sweep.kappa.clone(),
            Sweep::N => self.sweep.n.iter().map(|&n| n as f64).collect(),
            Sweep::Lambda0 => self.sweep.lambda0.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("", "t.toml").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.train.k, 200);
        assert_eq!(cfg.train.n, 25);
        assert_eq!(cfg.bound.lambda0, 0.9);
        assert_eq!(cfg.bound.alpha, 0.95);
    }

    #[test]
    fn canonical_text_round_trips() {
        let text = "[train]\nK = 50\nN = 10\n\n[bound]\nkappa = 0.0\n";
        let cfg = ExperimentConfig::from_toml_str(text, "t.toml").unwrap();
        assert_eq!(cfg.train.k, 50);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml(), "c.toml").unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_key_is_reported_with_its_line() {
        let text = "[experiment]\nalgo = \"epicg\"\n\n[train]\nK = 50\nbogus = 3\n";
        let err = ExperimentConfig::from_toml_str(text, "t.toml").unwrap_err();
        assert_eq!(err.line, Some(6), "{err}");
        assert!(err.message.contains("bogus"), "{err}");
        assert!(err.to_string().starts_with("t.toml:6:"));
    }

    #[test]
    fn syntax_error_has_line_and_column() {
        let err = ExperimentConfig::from_toml_str("[train]\nK = = 4\n", "t.toml").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.column.is_some());
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        let text = "[experiment]\nalgo = \"epicg\"\nseeds = []\n";
        let err = ExperimentConfig::from_toml_str(text, "t.toml").unwrap_err();
        assert_eq!(err.line, Some(3), "{err}");
        let text = "[bound]\nkappa = 1.0\nalpha = 1.5\n";
        let err = ExperimentConfig::from_toml_str(text, "t.toml").unwrap_err();
        assert_eq!(err.line, Some(3), "{err}");
        let text = "[experiment]\nalgo = \"sac\"\n";
        assert_eq!(
            ExperimentConfig::from_toml_str(text, "t").unwrap_err().line,
            Some(2)
        );
        let text = "[env]\nname = \"chain\"\ntasks = \"gmm\"\n";
        assert_eq!(
            ExperimentConfig::from_toml_str(text, "t").unwrap_err().line,
            Some(3)
        );
    }

    #[test]
    fn custom_components_replace_the_preset() {
        let text = r#"
[env]
name = "chain"
horizon = 10

[[env.components]]
weight = 1.0
params.slip = { dist = "uniform", lo = 0.0, hi = 0.1 }
"#;
        let cfg = ExperimentConfig::from_toml_str(text, "t").unwrap();
        let td = cfg.task_distribution().unwrap();
        assert_eq!(td.components.len(), 1);
        assert_eq!(td.components[0].params[0].0, "slip");
        let bad = text.replace("slip", "gravity");
        assert!(ExperimentConfig::from_toml_str(&bad, "t").is_err());
    }

    #[test]
    fn policy_init_shapes() {
        let cfg = ExperimentConfig::default();
        match cfg.policy_init(1).unwrap() {
            PolicyInit::Linear(d) => assert_eq!(d.dist.dim(), 10),
            _ => panic!("expected linear"),
        }
        let mut mlp = cfg.clone();
        mlp.policy.kind = "mlp".into();
        assert!(matches!(mlp.policy_init(1).unwrap(), PolicyInit::Mlp(_)));
    }

    #[test]
    fn sweep_values_apply() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.with_sweep_value(Sweep::N, 10.0).train.n, 10);
        assert_eq!(cfg.with_sweep_value(Sweep::Kappa, 0.0).bound.kappa, 0.0);
        assert_eq!(Sweep::parse("lambda0"), Some(Sweep::Lambda0));
        assert_eq!(Sweep::parse("beta"), None);
    }
}

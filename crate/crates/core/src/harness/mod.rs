//! Run configuration, training runs with on-disk artifacts, re-scoring of
//! saved parameters and brute-force reference optimizers.

mod oracle;
mod telemetry;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use oracle::{points_per_axis, run_oracle, search, OracleResult, SearchMethod, SearchSpace, GRID_MAX_DIMS};
pub use telemetry::{emit_csv, format_row, write_json, BestRecord, CsvLog, CSV_HEADER};

use crate::bellenv::{default_mode, make_env, BellEnvironment, EnvOptions, RewardMode, ENV_NAMES};
use crate::error::{Error, Result};
use crate::neuralnet::DEFAULT_HIDDEN;
use crate::rl::{train, Algorithm, PPOConfig, SquashKind, TrainOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Argument(_) | Error::Capacity { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Json(_) => EXIT_IO,
        Error::Training(_) | Error::Numerical(_) | Error::NoConvergence { .. } | Error::State(_) => EXIT_TRAINING,
    }
}

/// Everything a training run needs. Serialized as a flat JSON object, both
/// as config file input and as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: String,
    /// Defaults per environment when absent.
    pub mode: Option<String>,
    #[serde(alias = "qubits")]
    pub n_qubits: usize,
    #[serde(alias = "layers")]
    pub ansatz_layers: usize,
    pub per_site: bool,
    pub clip_eps: f64,
    #[serde(alias = "batch")]
    pub rollouts_per_epoch: usize,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub algorithm: Algorithm,
    pub single_shot: bool,
    pub workers: usize,
    pub squash: SquashKind,
    pub lr_end_fraction: f64,
    pub center_reward: bool,
    #[serde(alias = "out")]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PPOConfig::default();
        Self {
            env: "chsh".into(),
            mode: None,
            n_qubits: 4,
            ansatz_layers: 3,
            per_site: false,
            clip_eps: p.clip_eps,
            rollouts_per_epoch: p.rollouts_per_epoch,
            update_epochs: p.update_epochs,
            minibatch_size: p.minibatch_size,
            gamma: p.gamma,
            gae_lambda: p.gae_lambda,
            lr_policy: p.lr_policy,
            lr_value: p.lr_value,
            epochs: p.epochs,
            seed: p.seed,
            hidden: DEFAULT_HIDDEN.to_vec(),
            algorithm: p.algorithm,
            single_shot: p.single_shot,
            workers: p.workers,
            squash: p.squash,
            lr_end_fraction: p.lr_end_fraction,
            center_reward: p.center_reward,
            output_dir: PathBuf::from("run"),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub env: Option<String>,
    pub mode: Option<String>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub seed: Option<u64>,
    pub qubits: Option<usize>,
    pub layers: Option<usize>,
    pub clip_eps: Option<f64>,
    pub algorithm: Option<Algorithm>,
    pub out: Option<PathBuf>,
    pub per_site: Option<bool>,
    pub single_shot: Option<bool>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($src:ident => $dst:ident),*) => {$(
                if let Some(v) = &o.$src {
                    self.$dst = v.clone();
                }
            )*};
        }
        set!(env => env, epochs => epochs, batch => rollouts_per_epoch, seed => seed, qubits => n_qubits,
             layers => ansatz_layers, clip_eps => clip_eps, algorithm => algorithm, out => output_dir,
             per_site => per_site, single_shot => single_shot, workers => workers);
        if o.mode.is_some() {
            self.mode = o.mode.clone();
        }
    }

    pub fn reward_mode(&self) -> Result<RewardMode> {
        match &self.mode {
            Some(m) => m.parse(),
            None => Ok(default_mode(&self.env)),
        }
    }

    pub fn env_options(&self) -> EnvOptions {
        EnvOptions { n_qubits: self.n_qubits, layers: self.ansatz_layers, per_site: self.per_site }
    }

    pub fn ppo(&self) -> PPOConfig {
        PPOConfig {
            clip_eps: self.clip_eps,
            rollouts_per_epoch: self.rollouts_per_epoch,
            update_epochs: self.update_epochs,
            minibatch_size: self.minibatch_size,
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            lr_policy: self.lr_policy,
            lr_value: self.lr_value,
            epochs: self.epochs,
            seed: self.seed,
            hidden: self.hidden.clone(),
            algorithm: self.algorithm,
            single_shot: self.single_shot,
            workers: self.workers,
            squash: self.squash,
            lr_end_fraction: self.lr_end_fraction,
            center_reward: self.center_reward,
        }
    }

    /// Checks names and hyperparameters, fills in the mode and builds the
    /// environment.
    pub fn resolve(&mut self) -> Result<Box<dyn BellEnvironment>> {
        if !ENV_NAMES.contains(&self.env.as_str()) {
            return Err(Error::Config(format!(
                "unknown environment `{}` (expected one of {})",
                self.env,
                ENV_NAMES.join(", ")
            )));
        }
        let mode = self.reward_mode()?;
        self.mode = Some(mode.as_str().to_string());
        self.ppo().validate()?;
        make_env(&self.env, mode, &self.env_options()).map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(format!("cannot build `{}` in {mode} mode: {other}", self.env)),
        })
    }
}

/// Reads an optional flat JSON config file and applies the overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            if text.trim().is_empty() {
                RunConfig::default()
            } else {
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
        }
        None => RunConfig::default(),
    };
    config.apply(overrides);
    Ok(config)
}

/// Trains and writes `run.json`, `log.csv` (one flushed row per epoch) and
/// `best.json` into `config.output_dir`. A training abort leaves the first
/// two in place.
pub fn run_train(config: &RunConfig) -> Result<TrainOutcome> {
    let mut config = config.clone();
    let env = config.resolve()?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    write_json(&config, &dir.join("run.json"))?;
    let mut log = CsvLog::create(&dir.join("log.csv"))?;
    let mut io_error = None;
    let outcome = train(env.as_ref(), &config.ppo(), |s, _| {
        if io_error.is_none() {
            io_error = log.append(s).err();
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let outcome = outcome?;
    let record = BestRecord {
        env: config.env.clone(),
        mode: env.spec().mode.to_string(),
        n_qubits: config.n_qubits,
        ansatz_layers: config.ansatz_layers,
        per_site: config.per_site,
        best_reward: outcome.best_reward,
        action: outcome.best_action.clone(),
        policy: outcome.best_policy.net.to_snapshot(),
        value: outcome.best_value.to_snapshot(),
        log_std: outcome.best_policy.log_std().to_vec(),
        ansatz_angles: env.ansatz_angles(&outcome.best_action),
    };
    write_json(&record, &dir.join("best.json"))?;
    Ok(outcome)
}

/// Re-scores the action stored in a `best.json`. `env` overrides the
/// environment named in the file.
pub fn run_eval(params: &Path, env: Option<&str>) -> Result<f64> {
    let text = std::fs::read_to_string(params)?;
    let record: BestRecord =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", params.display())))?;
    let name = env.unwrap_or(&record.env);
    let mode: RewardMode = record.mode.parse()?;
    let opts = EnvOptions { n_qubits: record.n_qubits, layers: record.ansatz_layers, per_site: record.per_site };
    let env = make_env(name, mode, &opts)?;
    env.spec().check_action(&record.action).map_err(|e| Error::Config(e.to_string()))?;
    env.reward(&record.action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn config_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_defaults() {
        let f = config_file("");
        let o = Overrides { env: Some("chsh".into()), ..Overrides::default() };
        let c = load_config(Some(f.path()), &o).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn flags_beat_file() {
        let f = config_file(r#"{"epochs": 50, "seed": 3}"#);
        let o = Overrides { epochs: Some(10), ..Overrides::default() };
        let c = load_config(Some(f.path()), &o).unwrap();
        assert_eq!((c.epochs, c.seed), (10, 3));
    }

    #[test]
    fn unknown_key_is_named() {
        let f = config_file(r#"{"foo": 1}"#);
        let err = load_config(Some(f.path()), &Overrides::default()).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_CONFIG);
        assert!(err.to_string().contains("foo"));
    }

    #[test]
    fn type_mismatch_is_config_error() {
        let f = config_file(r#"{"epochs": "many"}"#);
        let err = load_config(Some(f.path()), &Overrides::default()).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_CONFIG);
    }

    #[test]
    fn resolve_rejects_bad_env_and_mode() {
        let mut c = RunConfig { env: "ghz".into(), ..RunConfig::default() };
        assert_eq!(exit_code(&c.resolve().err().unwrap()), EXIT_CONFIG);
        let mut c = RunConfig { env: "mbi".into(), mode: Some("fixed".into()), ..RunConfig::default() };
        assert_eq!(exit_code(&c.resolve().err().unwrap()), EXIT_CONFIG);
        let mut c = RunConfig { env: "dicke".into(), ..RunConfig::default() };
        c.resolve().unwrap();
        assert_eq!(c.mode.as_deref(), Some("ansatz"));
    }

    #[test]
    fn train_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig {
            epochs: 2,
            rollouts_per_epoch: 4,
            hidden: vec![8],
            output_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let out = run_train(&c).unwrap();
        let log = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
        assert_eq!(log.lines().count(), 3);
        let run: RunConfig = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
        assert_eq!(run.mode.as_deref(), Some("eigen"));
        let score = run_eval(&dir.path().join("best.json"), None).unwrap();
        assert_eq!(score, out.best_reward);
    }
}

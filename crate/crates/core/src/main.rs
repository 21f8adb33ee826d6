use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bellforge::bellenv::{default_mode, make_env, EnvOptions, RewardMode};
use bellforge::harness::{exit_code, load_config, run_eval, run_oracle, run_train, Overrides};
use bellforge::rl::Algorithm;
use bellforge::{Error, Result};

#[derive(Parser)]
#[command(name = "bellforge", version, about = "Search for Bell-inequality violations with policy optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write log.csv, best.json and run.json.
    Train(TrainArgs),
    /// Brute-force the best reward over a grid or random sample.
    Oracle(OracleArgs),
    /// Re-score the action stored in a best.json.
    Eval(EvalArgs),
}

#[derive(Args)]
struct EnvArgs {
    /// chsh, bilocal, mbi or dicke.
    #[arg(long)]
    env: Option<String>,
    /// fixed, eigen, full or ansatz.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    qubits: Option<usize>,
    /// Variational circuit depth.
    #[arg(long)]
    layers: Option<usize>,
    /// Separate measurement angles on every site of the many-body inequalities.
    #[arg(long)]
    per_site: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    epochs: Option<usize>,
    /// Rollouts per epoch.
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clip_eps: Option<f64>,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,
    /// Flat JSON object with any run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Choose all angles in one step instead of one per step.
    #[arg(long)]
    single_shot: bool,
    /// Threads for rollout collection.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Grid spacing in radians.
    #[arg(long, default_value_t = 0.01)]
    resolution: f64,
    /// Maximum number of reward evaluations.
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
    /// Seed of the random search used for large spaces.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// best.json written by `train`.
    #[arg(long)]
    params: PathBuf,
    /// Score against this environment instead of the one in the file.
    #[arg(long)]
    env: Option<String>,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn train(args: TrainArgs) -> Result<()> {
    let overrides = Overrides {
        env: args.env.env,
        mode: args.env.mode,
        epochs: args.epochs,
        batch: args.batch,
        seed: args.seed,
        qubits: args.env.qubits,
        layers: args.env.layers,
        clip_eps: args.clip_eps,
        algorithm: args.algorithm,
        out: args.out,
        per_site: args.env.per_site.then_some(true),
        single_shot: args.single_shot.then_some(true),
        workers: args.workers,
    };
    let config = load_config(args.config.as_deref(), &overrides)?;
    let outcome = run_train(&config)?;
    println!("best_reward {}", outcome.best_reward);
    println!("output {}", config.output_dir.display());
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let name = args.env.env.unwrap_or_else(|| "chsh".into());
    let mode: RewardMode = match args.env.mode {
        Some(m) => m.parse()?,
        None => default_mode(&name),
    };
    let defaults = EnvOptions::default();
    let opts = EnvOptions {
        n_qubits: args.env.qubits.unwrap_or(defaults.n_qubits),
        layers: args.env.layers.unwrap_or(defaults.layers),
        per_site: args.env.per_site,
    };
    let env = make_env(&name, mode, &opts).map_err(|e| Error::Config(e.to_string()))?;
    let result =
        run_oracle(env.as_ref(), args.resolution, args.budget, args.seed).map_err(|e| match e {
            Error::Argument(m) => Error::Config(m),
            other => other,
        })?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Oracle(a) => oracle(a),
        Command::Eval(a) => run_eval(&a.params, a.env.as_deref()).map(|v| println!("{v}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bellforge: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

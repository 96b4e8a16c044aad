use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::Value;

use duet_cli::commands::{self, ExportFormat, InspectTarget};
use duet_cli::config::{AgentKind, Config, UserKind};
use duet_cli::server::{self, AppState};
use duet_cli::CliError;
use duet_core::orchestrator::Mode;

#[derive(Parser)]
#[command(name = "duet", version, about = "Dual-control agent evaluation: tasks, runs, scoring and review")]
struct Cli {
    /// TOML or JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Domain to load.
    #[arg(long, global = true)]
    domain: Option<String>,
    /// Run store root (runs/ and sessions/ live here).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compose every task of the domain and write the task file.
    Generate {
        #[arg(long, default_value = "tasks.json")]
        out: PathBuf,
    },
    /// Check that every task is unsolved at init, along each strict prefix
    /// of its solution, and solved at the end.
    Verify {
        #[arg(long)]
        tasks: Option<PathBuf>,
        /// Write one report per line here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the balanced suite and assign personas.
    Sample {
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "suite.json")]
        out: PathBuf,
    },
    /// Execute trials, store trajectories and score them.
    Run {
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Store root for the new run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Agent policy.
        #[arg(long, value_enum)]
        policy: Option<AgentKind>,
        #[arg(long, value_enum)]
        user_policy: Option<UserKind>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Replay and score a stored run; writes results and the summary.
    Evaluate {
        /// Run id in the store, or a run directory.
        run: String,
        /// Also require the expected tool calls.
        #[arg(long)]
        match_actions: bool,
    },
    /// Re-execute stored trajectories and compare final hashes.
    Replay {
        run: String,
        /// Only this trajectory file.
        #[arg(long)]
        trajectory: Option<String>,
    },
    /// Write plot-ready pass^k tables of an evaluated run.
    Export {
        run: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read stored runs and tasks (the headless side of the server).
    Inspect {
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[command(subcommand)]
        target: InspectTarget,
    },
    /// Start the HTTP API.
    Serve {
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn execute(cli: Cli) -> Result<Option<Value>, CliError> {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(d) = cli.domain {
        config.domain = d;
    }
    if let Some(s) = &cli.store {
        config.store = s.display().to_string();
    }
    let store = PathBuf::from(&config.store);
    match cli.command {
        Command::Generate { out } => commands::generate(&config, &out).map(Some),
        Command::Verify { tasks, out } => commands::verify(&config, tasks.as_deref(), out.as_deref()).map(Some),
        Command::Sample { tasks, seed, out } => {
            commands::sample(&config, tasks.as_deref(), seed.unwrap_or(config.sample.seed), &out).map(Some)
        }
        Command::Run {
            tasks,
            mode,
            trials,
            seed,
            out,
            policy,
            user_policy,
            max_steps,
        } => {
            if let Some(m) = mode {
                config.run.mode = m;
            }
            if let Some(t) = trials {
                config.run.trials_per_task = t;
            }
            if let Some(s) = seed {
                config.run.seed = s;
            }
            if let Some(p) = policy {
                config.policies.agent = p;
            }
            if let Some(u) = user_policy {
                config.policies.user = u;
            }
            if let Some(m) = max_steps {
                config.run.max_steps = m;
            }
            let root = out.unwrap_or(store);
            commands::run(&config, tasks.as_deref(), &root).map(Some)
        }
        Command::Evaluate { run, match_actions } => {
            commands::evaluate(&store, &run, match_actions.then_some(true)).map(Some)
        }
        Command::Replay { run, trajectory } => commands::replay(&store, &run, trajectory.as_deref()).map(Some),
        Command::Export { run, format, out } => commands::export(&store, &run, format, out.as_deref()),
        Command::Inspect { tasks, target } => {
            commands::inspect(&config, &store, tasks.as_deref(), &target).map(Some)
        }
        Command::Serve { tasks, addr, seed } => {
            commands::domain(&config.domain)?;
            let tasks = match tasks {
                Some(p) => duet_core::tasks::io::read_tasks(&p)?,
                None => commands::balanced_suite(&config.domain, seed.unwrap_or(config.sample.seed))?,
            };
            let state = Arc::new(AppState::new(store, tasks, config.run.clone()));
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e.to_string()))?;
            runtime
                .block_on(server::serve(state, &addr))
                .map_err(|e| CliError::new("io", format!("{addr}: {e}")))?;
            Ok(None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Some(v)) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::FAILURE
        }
    }
}

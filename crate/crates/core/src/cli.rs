//! The `prosim` command line. Exit codes: 0 success, 2 invalid input or
//! configuration, 3 failed optimisation or training.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::arrival::ArrivalVariant;
use crate::conformance::{BranchingMode, NonConformance};
use crate::evaluation::evaluate_logs;
use crate::eventlog::{log_to_csv_string, read_log_file, EventLog, Timestamp};
use crate::pipeline::{save_generators, train_generators, PipelineConfig, PipelineError, SimulationConfig};
use crate::project::ProjectStore;
use crate::search::{build_model, optimize_structure, SearchConfig, StructureConfig};
use crate::service::{load_scenario, serve};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_OPTIMIZATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "prosim", version, about = "Discover, train and run business process simulation models")]
pub struct Cli {
    /// TOML file with pipeline settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ArrivalArg {
    Multimodal,
    Recurrent,
}

impl From<ArrivalArg> for ArrivalVariant {
    fn from(a: ArrivalArg) -> Self {
        match a {
            ArrivalArg::Multimodal => ArrivalVariant::Multimodal,
            ArrivalArg::Recurrent => ArrivalVariant::Recurrent,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BranchingArg {
    Equiprobable,
    Discovered,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NonConformanceArg {
    Repair,
    Replace,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discover a stochastic process model from a CSV log.
    Discover {
        log: PathBuf,
        /// Project directory to write into.
        #[arg(long)]
        out: PathBuf,
        /// Search the discovery settings instead of using the given ones.
        #[arg(long)]
        auto: bool,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, value_enum, default_value = "discovered")]
        branching: BranchingArg,
        #[arg(long, value_enum, default_value = "repair")]
        nonconformance: NonConformanceArg,
    },
    /// Train the arrival and time generators for a discovered model.
    Train {
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model file; defaults to the one in the project.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "multimodal")]
        arrival: ArrivalArg,
    },
    /// Simulate a log from a trained project.
    Simulate {
        #[arg(long)]
        project: PathBuf,
        #[arg(short = 'n', long)]
        cases: usize,
        /// CSV file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "multimodal")]
        arrival: ArrivalArg,
        /// First case start (RFC 3339); defaults to the last training case start.
        #[arg(long)]
        start: Option<Timestamp>,
    },
    /// Compare a simulated log with a reference log.
    Evaluate {
        simulated: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a project over local HTTP.
    Serve {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

fn invalid(message: impl std::fmt::Display) -> CliError {
    CliError { code: EXIT_VALIDATION, message: message.to_string() }
}

fn failed(message: impl std::fmt::Display) -> CliError {
    CliError { code: EXIT_OPTIMIZATION, message: message.to_string() }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            invalid(e)
        } else {
            failed(e)
        }
    }
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig, CliError> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn read_log(path: &Path, config: &PipelineConfig) -> Result<EventLog, CliError> {
    let log = read_log_file(path, &config.csv).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if log.is_empty() {
        return Err(invalid(format!("{}: no traces", path.display())));
    }
    Ok(log)
}

fn io(e: std::io::Error) -> CliError {
    invalid(e)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let config = load_config(cli.config.as_deref(), cli.seed)?;
    let hash = config.hash();
    match cli.command {
        Command::Discover { log, out, auto, eta, epsilon, branching, nonconformance } => {
            let input = read_log(&log, &config)?;
            let store = ProjectStore::create(&out).map_err(io)?;
            let (model, structure) = if auto {
                let search = SearchConfig { seed: config.seed, state_limit: config.state_limit, ..config.search.clone() };
                let (model, report) = optimize_structure(&input, &search).map_err(failed)?;
                store.write_json(ProjectStore::SEARCH_REPORT, &report, &hash).map_err(io)?;
                eprintln!("{} trials, winner {}", report.trials.len(), report.winner);
                (model, report.trials[report.winner].config)
            } else {
                for (name, v) in [("eta", eta), ("epsilon", epsilon)] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(invalid(format!("{name} = {v} is outside [0, 1]")));
                    }
                }
                let structure = StructureConfig {
                    eta,
                    epsilon,
                    branching: match branching {
                        BranchingArg::Equiprobable => BranchingMode::Equiprobable,
                        BranchingArg::Discovered => BranchingMode::Discovered,
                    },
                    nonconformance: match nonconformance {
                        NonConformanceArg::Repair => NonConformance::Repair,
                        NonConformanceArg::Replace => NonConformance::Replace,
                    },
                };
                let (model, _) = build_model(&input, &structure, config.state_limit).map_err(failed)?;
                (model, structure)
            };
            store.write(ProjectStore::INPUT, log_to_csv_string(&input).as_bytes(), &hash).map_err(io)?;
            store.write(ProjectStore::MODEL, model.to_json().as_bytes(), &hash).map_err(io)?;
            store.write_json(ProjectStore::STRUCTURE, &structure, &hash).map_err(io)?;
            println!("{}", store.path(ProjectStore::MODEL).display());
        }
        Command::Train { log, out, model, arrival } => {
            let input = read_log(&log, &config)?;
            let store = ProjectStore::create(&out).map_err(io)?;
            let model_path = model.unwrap_or_else(|| store.path(ProjectStore::MODEL));
            let text = std::fs::read_to_string(&model_path)
                .map_err(|e| invalid(format!("model {}: {e}", model_path.display())))?;
            let model = crate::graph::StochasticProcessModel::from_json(&text)
                .map_err(|e| invalid(format!("model {}: {e}", model_path.display())))?;
            let structure: StructureConfig = store.read_json(ProjectStore::STRUCTURE).unwrap_or(StructureConfig::BASELINE);
            let config = PipelineConfig { arrival: arrival.into(), ..config };
            let generators = train_generators(&input, &model, structure.nonconformance, &config)?;
            save_generators(&store, &generators, &hash).map_err(io)?;
            store.write_json(ProjectStore::TRAIN_REPORT, &generators.summary(input.len()), &hash).map_err(io)?;
            if model_path != store.path(ProjectStore::MODEL) {
                store.write(ProjectStore::MODEL, model.to_json().as_bytes(), &hash).map_err(io)?;
            }
            println!("{}", store.root().display());
        }
        Command::Simulate { project, cases, out, arrival, start } => {
            let store = ProjectStore::open(&project).map_err(io)?;
            let scenario = load_scenario(&store)?;
            let sim = SimulationConfig {
                num_cases: cases,
                seed: config.seed,
                arrival_variant: arrival.into(),
                start_anchor: start.unwrap_or(scenario.generators.anchor),
                max_len: scenario.generators.max_len,
            };
            let log = crate::pipeline::simulate(&scenario.model, &scenario.generators, &sim)?;
            std::fs::write(&out, log_to_csv_string(&log)).map_err(io)?;
            println!("{}", out.display());
        }
        Command::Evaluate { simulated, reference, out } => {
            let g = read_log(&simulated, &config)?;
            let r = read_log(&reference, &config)?;
            let metrics = evaluate_logs(&g, &r).map_err(invalid)?;
            let text = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
            if let Some(path) = out {
                std::fs::write(path, &text).map_err(io)?;
            }
            println!("{text}");
        }
        Command::Serve { project, port, host } => {
            let store = ProjectStore::open(&project).map_err(io)?;
            serve(store, &format!("{host}:{port}"))?;
        }
    }
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

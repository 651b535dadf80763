//! `xychain`: run the spin-chain scenarios from the command line.

mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use xychain::model::RangeMode;
use xychain::scenarios::{self, ScenarioKind};

use config::{ConfigError, Overrides};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "xychain", version, about = "Excitation transfer in Rydberg spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Range {
    Full,
    #[value(alias = "nn", alias = "nearest_neighbor")]
    NearestNeighbor,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its tables, summary and provenance.
    Run {
        scenario: String,
        /// TOML configuration file.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Ideal limit: perfect pulses, no damping, motion or loss.
        #[arg(long)]
        ideal: bool,
        #[arg(long, value_enum)]
        range: Option<Range>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: xychain-output/<scenario>].
        #[arg(short, long, env = "XYCHAIN_OUTPUT_DIR")]
        out: Option<PathBuf>,
        /// Worker threads [default: all cores].
        #[arg(short, long, env = "XYCHAIN_WORKERS")]
        workers: Option<usize>,
        /// Override a configuration value, e.g. `three_chain.taus.max=3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print the scenario catalog.
    ListScenarios {
        #[arg(long)]
        json: bool,
    },
    /// Check a configuration file without running anything.
    ValidateConfig {
        config: PathBuf,
        /// Scenario to validate against when the file names none.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn parse_kind(s: &str) -> Result<ScenarioKind, ConfigError> {
    Ok(s.parse::<ScenarioKind>()?)
}

fn print_catalog(json: bool, out: &mut impl Write) -> std::io::Result<()> {
    let catalog = scenarios::catalog();
    if json {
        return writeln!(out, "{}", serde_json::to_string_pretty(&catalog).expect("catalog serializes"));
    }
    for info in &catalog {
        writeln!(out, "{}\n  {}\n  reproduces: {}", info.name, info.description, info.figure)?;
        for (key, meaning) in info.parameters {
            writeln!(out, "    {key}: {meaning}")?;
        }
    }
    Ok(())
}

fn list_scenarios(json: bool) -> ExitCode {
    match print_catalog(json, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe is not worth reporting
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn validate_config(path: PathBuf, scenario: Option<String>, set: Vec<String>) -> ExitCode {
    let result = scenario
        .as_deref()
        .map(parse_kind)
        .transpose()
        .and_then(|kind| config::resolve(Some(&path), &Overrides { scenario: kind, set, ..Overrides::default() }));
    match result {
        Ok(r) => {
            println!("{}: valid for {}", path.display(), r.config.scenario.map_or("-", |k| k.name()));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    scenario: String,
    config_path: Option<PathBuf>,
    ideal: bool,
    range: Option<Range>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    set: Vec<String>,
) -> ExitCode {
    let resolved = parse_kind(&scenario).and_then(|kind| {
        let overrides = Overrides {
            scenario: Some(kind),
            ideal,
            range: range.map(|r| match r {
                Range::Full => RangeMode::Full,
                Range::NearestNeighbor => RangeMode::NearestNeighbor,
            }),
            seed,
            set,
        };
        config::resolve(config_path.as_deref(), &overrides)
    });
    let resolved = match resolved {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let kind = resolved.config.scenario.expect("resolve sets the scenario");

    if let Some(n) = workers {
        if n == 0 {
            eprintln!("error: worker count must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    log::info!("running {kind} with {} worker(s)", rayon::current_num_threads());

    let output = match scenarios::run(&resolved.config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {kind}: {e}");
            let code = if e.is_config() {
                EXIT_CONFIG
            } else if e.is_io() {
                EXIT_IO
            } else {
                EXIT_NUMERICAL
            };
            return ExitCode::from(code);
        }
    };

    let dir = out.unwrap_or_else(|| PathBuf::from("xychain-output").join(kind.name()));
    match output::write_all(&dir, &output, &resolved) {
        Ok(files) => {
            println!("wrote {} files to {}", files.len(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, config, ideal, range, seed, out, workers, set } => {
            run(scenario, config, ideal, range, seed, out, workers, set)
        }
        Command::ListScenarios { json } => list_scenarios(json),
        Command::ValidateConfig { config, scenario, set } => validate_config(config, scenario, set),
    }
}

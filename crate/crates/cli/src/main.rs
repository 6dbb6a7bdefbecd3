use clap::{Args, Parser, Subcommand};
use lossq::config::{self, Command, OutputFormat, RunConfig};
use lossq::execute::{execute, EXIT_USAGE};
use lossq::CliError;
use std::path::PathBuf;

/// Loss analysis of the finite-buffer M/GI/1 queue with packetized
/// messages: exact busy-period characteristics, asymptotic predictions,
/// Monte Carlo cross-validation and redundancy sweeps.
#[derive(Parser)]
#[command(name = "lossq", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the run configuration (TOML: [model] / [command] / [output]).
    #[arg(long)]
    config: PathBuf,
    /// Artifact destination; stdout when omitted. Overrides [output] path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (csv or json). Overrides [output] format.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// RNG seed override for the simulation streams.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Exact busy-period characteristics and loss probability.
    Analyze(CommonArgs),
    /// Monte Carlo estimation over independent replications.
    Simulate(SimArgs),
    /// Regime classification and asymptotic predictions vs exact values.
    Asymptote(CommonArgs),
    /// Sweep redundant packet counts and report the loss trade-off.
    Redundancy(CommonArgs),
    /// Simulate, then z-score against the exact characteristics.
    Compare(SimArgs),
    /// Parse the config and print its normalized form (round-trip check).
    Echo(CommonArgs),
}

fn load_config(path: &PathBuf) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    config::parse_config(&text)
}

fn apply_common_overrides(cfg: &mut RunConfig, common: &CommonArgs) -> Result<(), CliError> {
    if let Some(out) = &common.out {
        cfg.output.path = Some(out.display().to_string());
    }
    match common.format.as_deref() {
        None => {}
        Some("csv") => cfg.output.format = OutputFormat::Csv,
        Some("json") => cfg.output.format = OutputFormat::Json,
        Some(other) => {
            return Err(CliError::Config(format!(
                "--format: expected csv or json, got '{other}'"
            )))
        }
    }
    Ok(())
}

fn check_command_name(cfg: &RunConfig, cli_name: &str) -> Result<(), CliError> {
    if cfg.command.name() != cli_name {
        return Err(CliError::Config(format!(
            "command.name: config declares '{}' but the CLI invoked '{cli_name}'",
            cfg.command.name()
        )));
    }
    Ok(())
}

fn run_cli(cli: &Cli) -> Result<i32, CliError> {
    let (common, cli_name, seed) = match &cli.command {
        CliCommand::Analyze(c) => (c, "analyze", None),
        CliCommand::Simulate(s) => (&s.common, "simulate", s.seed),
        CliCommand::Asymptote(c) => (c, "asymptote", None),
        CliCommand::Redundancy(c) => (c, "redundancy", None),
        CliCommand::Compare(s) => (&s.common, "compare", s.seed),
        CliCommand::Echo(c) => (c, "echo", None),
    };
    let mut cfg = load_config(&common.config)?;
    apply_common_overrides(&mut cfg, common)?;
    if cli_name == "echo" {
        let echoed = config::emit_config(&cfg);
        match &cfg.output.path {
            Some(path) => std::fs::write(path, &echoed)
                .map_err(|e| CliError::Io(format!("cannot write {path}: {e}")))?,
            None => print!("{echoed}"),
        }
        return Ok(0);
    }
    check_command_name(&cfg, cli_name)?;
    if let Some(seed) = seed {
        match &mut cfg.command {
            Command::Simulate(o) | Command::Compare(o) => o.seed = seed,
            _ => unreachable!("--seed only exists on simulate/compare"),
        }
    }
    Ok(execute(&cfg)?.exit_code)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2; usage problems are documented as exit 1
            let _ = e.print();
            std::process::exit(EXIT_USAGE);
        }
    };
    // LOSSQ_THREADS caps the rayon worker count for replications and sweeps
    let pool = match std::env::var("LOSSQ_THREADS") {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => Some(pool),
                Err(e) => {
                    eprintln!("lossq: cannot build thread pool: {e}");
                    std::process::exit(EXIT_USAGE);
                }
            },
            _ => {
                eprintln!("lossq: LOSSQ_THREADS must be a positive integer, got '{v}'");
                std::process::exit(EXIT_USAGE);
            }
        },
        Err(_) => None,
    };
    let result = match &pool {
        Some(pool) => pool.install(|| run_cli(&cli)),
        None => run_cli(&cli),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("lossq: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

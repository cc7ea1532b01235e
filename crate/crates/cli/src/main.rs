//! `qpm`: run one toolkit pipeline from a TOML config and write its data products.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Format, RunConfig};
use error::CliError;
use output::Output;

/// Thread count for the worker pool; the only setting read from the environment.
const THREADS_ENV: &str = "QPM_THREADS";

#[derive(Parser)]
#[command(name = "qpm", version, about = "Photon-pair source design and analysis")]
#[command(after_help = "Values come from --flags first, then the config file, then built-in defaults.\n\
Without --config the bundled configuration is used. Set QPM_THREADS to fix the thread count.")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for the counting and time-of-flight simulations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Source for single-source subcommands.
    #[arg(long, global = true)]
    source: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Phase-matching intensity, poling pattern and sidelobe cut.
    Pmf,
    /// Joint spectral amplitude and intensity.
    Jsa,
    /// Schmidt coefficients and leading modes.
    Schmidt,
    /// Pump bandwidth that maximizes purity.
    OptimizePump,
    /// Two-source interference dip versus delay.
    Hom,
    /// Zero-delay visibility versus beamsplitter reflectivity.
    Rsweep,
    /// Marginal g2(0) of each source.
    G2,
    /// Simulated time-tag stream.
    Simulate,
    /// Pair probability from coincidence histograms.
    Pspdc,
    /// Time-of-flight reconstruction of a joint spectral intensity.
    Tofmap,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let bytes = output::read_file(path)?;
            let text = String::from_utf8(bytes).map_err(|e| CliError::Config {
                section: "config".into(),
                reason: format!("not UTF-8: {e}"),
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::bundled(),
    };
    if let Some(dir) = &cli.output_dir {
        cfg.output.dir = dir.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(s) = &cli.source {
        cfg.source = Some(s.clone());
    }
    if let Some(seed) = cli.seed {
        if let Some(c) = cfg.counting.as_mut() {
            c.seed = seed;
        }
        if let Some(t) = cfg.tof.as_mut() {
            t.seed = seed;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Config {
        section: THREADS_ENV.into(),
        reason: format!("expected a positive integer, got '{value}'"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config {
            section: THREADS_ENV.into(),
            reason: e.to_string(),
        })
}

fn run(cli: &Cli) -> Result<String, CliError> {
    init_threads()?;
    let cfg = effective_config(cli)?;
    let mut out = Output::create(&cfg)?;
    let summary = match cli.command {
        Command::Pmf => commands::pmf_cmd(&cfg, &mut out),
        Command::Jsa => commands::jsa_cmd(&cfg, &mut out),
        Command::Schmidt => commands::schmidt_cmd(&cfg, &mut out),
        Command::OptimizePump => commands::optimize_pump_cmd(&cfg, &mut out),
        Command::Hom => commands::hom_cmd(&cfg, &mut out),
        Command::Rsweep => commands::rsweep_cmd(&cfg, &mut out),
        Command::G2 => commands::g2_cmd(&cfg, &mut out),
        Command::Simulate => commands::simulate_cmd(&cfg, &mut out),
        Command::Pspdc => commands::pspdc_cmd(&cfg, &mut out),
        Command::Tofmap => commands::tofmap_cmd(&cfg, &mut out),
    }?;
    for path in out.written() {
        log::info!("wrote {}", path.display());
    }
    Ok(summary)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qpm: {}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}

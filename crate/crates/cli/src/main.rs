use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdqkd_cli::{commands, CliError, CliResult, ExitStatus, Format, Output};

const THREADS_ENV: &str = "PDQKD_THREADS";

#[derive(Parser)]
#[command(name = "pdqkd", version, about = "Passive decoy-state QKD with two independent lasers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Photon-number distributions and g2 of both branches.
    Distribution {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Key-rate bound from observed gains and error rates.
    Keyrate {
        #[arg(long)]
        config: PathBuf,
        /// JSON document with q_c, e_c, q_nc and e_nc.
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo click records plus an aggregated summary (`<out>.json`).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pulses: u64,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gains and error rates from a click-record CSV.
    Ingest {
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid search over (mu1, mu2, t).
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Key rate against fiber length.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

fn emit(out: &Output, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, &out.text).map_err(|e| CliError::io(p.display().to_string(), e)),
        None => std::io::stdout()
            .lock()
            .write_all(out.text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> CliResult<ExitStatus> {
    configure_threads()?;
    let (output, out_path) = match cli.command {
        Command::Distribution { config, out, format } => {
            (commands::distribution(&commands::load_config(&config)?, format)?, out)
        }
        Command::Keyrate { config, stats, out } => {
            let cfg = commands::load_config(&config)?;
            (commands::keyrate(&cfg, &commands::read_text(&stats)?)?, out)
        }
        Command::Simulate { config, pulses, seed, out } => {
            let cfg = commands::load_config(&config)?;
            let output = commands::simulate(&cfg, pulses, seed.unwrap_or(cfg.seed), &out)?;
            (output, None)
        }
        Command::Ingest { records, out } => (commands::ingest(&records)?, out),
        Command::Optimize { config, out, format } => {
            (commands::optimize_cmd(&commands::load_config(&config)?, format)?, out)
        }
        Command::Scan { config, out, format } => {
            (commands::scan(&commands::load_config(&config)?, format)?, out)
        }
    };
    emit(&output, out_path.as_deref())?;
    Ok(output.status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitStatus::Usage.code() as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(status) => {
            if status == ExitStatus::NoKey {
                eprintln!("pdqkd: no key: the secure key rate bound is zero");
            }
            ExitCode::from(status.code() as u8)
        }
        Err(e) => {
            eprintln!("pdqkd: error: {e}");
            if let Some(hint) = e.hint() {
                eprintln!("pdqkd: hint: {hint}");
            }
            ExitCode::from(e.exit_status().code() as u8)
        }
    }
}

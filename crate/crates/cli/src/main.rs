mod commands;
mod config;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

use clap::{Parser, Subcommand};
use log::{error, warn};
use logdec_core::experiments::Backend;
use serde_json::json;

use crate::commands::{CommandError, Report};
use crate::config::{ConfigError, RawConfig, Settings};

const EXIT_FAILURE: u8 = 1;
const EXIT_BREAKDOWN: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "logdec", version, about = "LogSE and JZME decoherence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate one configuration and write its observable series.
    Run(Args),
    /// Run LogSE and JZME side by side and write widths and error curves.
    Compare(Args),
    /// LogSE breakdown time against domain length.
    BreakdownScan(Args),
    /// Distance of each regularized logarithm from ln on (0, 1].
    RegSweep(Args),
    /// Zero-pinning report for the configured initial state.
    ZeroPinning(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::Compare(_) => "compare",
            Command::BreakdownScan(_) => "breakdown-scan",
            Command::RegSweep(_) => "reg-sweep",
            Command::ZeroPinning(_) => "zero-pinning",
        }
    }

    fn args(&self) -> &Args {
        match self {
            Command::Run(a)
            | Command::Compare(a)
            | Command::BreakdownScan(a)
            | Command::RegSweep(a)
            | Command::ZeroPinning(a) => a,
        }
    }
}

fn load(args: &Args) -> Result<(RawConfig, Settings), ConfigError> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    for arg in &args.set {
        raw.apply_override(arg)?;
    }
    let settings = Settings::from_raw(&raw)?;
    Ok((raw, settings))
}

/// Worker cap for sweeps: `LOGDEC_THREADS` if set, else the available cores.
fn thread_budget() -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("LOGDEC_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                warn!("ignoring LOGDEC_THREADS={v:?}: expected a positive integer");
                available
            }
        },
        Err(_) => available,
    }
}

fn timestamp(t: SystemTime) -> String {
    humantime::format_rfc3339_seconds(t).to_string()
}

fn dispatch(command: &Command, settings: &Settings, out: &Path) -> Result<Report, CommandError> {
    match command {
        Command::Run(_) => commands::run(settings, out),
        Command::Compare(_) => {
            let settings = Settings { backend: Backend::Both, ..settings.clone() };
            commands::compare(&settings, out)
        }
        Command::BreakdownScan(_) => commands::breakdown_scan_cmd(settings, out, thread_budget()),
        Command::RegSweep(_) => commands::reg_sweep(settings, out),
        Command::ZeroPinning(_) => commands::zero_pinning(settings, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_FAILURE) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let args = cli.command.args();
    let (raw, settings) = match load(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("invalid configuration: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    if matches!(cli.command, Command::Compare(_)) && settings.backend != Backend::Both && !raw.is_default("backend") {
        eprintln!("invalid configuration: {}: backend: compare needs `both`", raw.origin("backend"));
        return ExitCode::from(EXIT_FAILURE);
    }
    let Some(out) = args.out.clone().or_else(|| settings.out_dir.clone()) else {
        eprintln!("invalid configuration: no output directory; pass --out or set output.dir");
        return ExitCode::from(EXIT_FAILURE);
    };
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("cannot create {}: {e}", out.display());
        return ExitCode::from(EXIT_FAILURE);
    }

    let started = SystemTime::now();
    let report = match dispatch(&cli.command, &settings, &out) {
        Ok(r) => r,
        Err(e) => {
            error!("{} failed: {e}", cli.command.name());
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    let meta = json!({
        "command": cli.command.name(),
        "config": raw.resolved(),
        "version": env!("CARGO_PKG_VERSION"),
        "started": timestamp(started),
        "finished": timestamp(SystemTime::now()),
        "result": report.result,
    });
    let path = out.join("run.json");
    let text = serde_json::to_string_pretty(&meta).expect("JSON values serialize");
    if let Err(e) = std::fs::write(&path, text + "\n") {
        eprintln!("cannot write {}: {e}", path.display());
        return ExitCode::from(EXIT_FAILURE);
    }
    match report.breakdown {
        Some(b) => {
            eprintln!("numerical breakdown at t = {} ({:?})", b.t, b.reason);
            ExitCode::from(EXIT_BREAKDOWN)
        }
        None => ExitCode::SUCCESS,
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use log::{error, info};
use thiserror::Error;

mod config;
mod modes;
mod report;

use config::Mode;
use report::{config_hash, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> CliError {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 3,
        }
    }
}

/// Boundary symbols of the Lame Dirichlet-to-Neumann map: computation,
/// coefficient recovery and validation against reference solvers.
#[derive(Debug, Parser)]
#[command(name = "lame-dtn", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    mode: Mode,
    /// JSON experiment config.
    #[arg(long, short)]
    config: PathBuf,
    /// Directory for report.json and CSV output; the report goes to stdout
    /// when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_outputs(
    out: &Path,
    report: &Report,
    csv: Option<&modes::DecayTable>,
    names: &config::OutputSpec,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join(&names.report);
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    if let Some(table) = csv {
        let path = out.join(&names.csv);
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?;
        let write = |w: &mut csv::Writer<std::fs::File>| -> csv::Result<()> {
            w.write_record(&table.headers)?;
            for row in &table.rows {
                w.write_record(row.iter().map(|x| format!("{x:e}")))?;
            }
            w.flush()?;
            Ok(())
        };
        write(&mut w).map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let mut timings = BTreeMap::new();
    let t0 = Instant::now();
    let loaded = config::load(&cli.config)?;
    let cfg = &loaded.config;
    cfg.validate(cli.mode)?;
    timings.insert("load".to_string(), t0.elapsed().as_secs_f64() * 1e3);

    let t1 = Instant::now();
    let output = modes::run(cfg, cli.mode)?;
    timings.insert("compute".to_string(), t1.elapsed().as_secs_f64() * 1e3);

    let passed = output.errors.is_empty() && output.checks.iter().all(|c| c.passed);
    let report = Report {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: cli.mode.name(),
        config_hash: config_hash(&loaded.canonical),
        config: loaded.canonical.clone(),
        body: output.body,
        checks: output.checks,
        errors: output.errors,
        passed,
        timings_ms: timings,
    };
    eprint!("{}", report.summary());
    match &cli.out {
        Some(dir) => {
            write_outputs(dir, &report, output.csv.as_ref(), &cfg.output)?;
            info!("wrote outputs to {}", dir.display());
        }
        None => println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        ),
    }
    if !report.errors.is_empty() {
        return Err(CliError::Numerical(format!(
            "{} job(s) failed",
            report.errors.len()
        )));
    }
    let ok = report.failed_checks().next().is_none();
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or(if cli.verbose { "debug" } else { "warn" }),
    )
    .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            error!("{e}");
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

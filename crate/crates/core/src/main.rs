use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ris_rsma::ao::SchemeSpec;
use ris_rsma::experiment::{self, ExperimentConfig, GainPair};
use ris_rsma::Result;

#[derive(Parser)]
#[command(name = "ris-rsma", version, about = "RIS-aided RSMA sum-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write one CSV row per cell.
    Run(Overrides),
    /// Aggregate a results CSV into means, intervals and relative gains.
    Summarize {
        #[arg(long)]
        input: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write per-iteration sum-rates of one realization for every scheme.
    Trace {
        #[command(flatten)]
        overrides: Overrides,
        /// Realization index to trace.
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
}

#[derive(Args)]
struct Overrides {
    /// TOML config; defaults are used for anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated scheme names, e.g. fully-rsma,single-sdma.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<SchemeSpec>>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    /// Comma-separated RIS sizes.
    #[arg(long, value_delimiter = ',')]
    elements: Option<Vec<usize>>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
}

impl Overrides {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        if let Some(v) = self.schemes {
            cfg.schemes = v;
        }
        if let Some(v) = self.snr {
            cfg.snr_db = v;
        }
        if let Some(v) = self.elements {
            cfg.elements = v;
        }
        if let Some(v) = self.realizations {
            cfg.realizations = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(overrides) => {
            let cfg = overrides.resolve()?;
            log::info!("running {} cells", cfg.cell_count());
            let rows = experiment::run(&cfg)?;
            experiment::write_rows(&cfg.out, &rows)?;
            let failed = rows.iter().filter(|r| !r.converged).count();
            log::info!("wrote {} rows to {} ({failed} not converged)", rows.len(), cfg.out.display());
        }
        Command::Summarize { input, out } => {
            let rows = experiment::read_rows(&input)?;
            let summary = experiment::summarize(&rows, &GainPair::defaults())?;
            experiment::write_summary(output(out.as_ref())?, &summary)?;
        }
        Command::Trace { overrides, realization } => {
            let out = overrides.out.clone();
            let cfg = overrides.resolve()?;
            let rows = experiment::trace(&cfg, realization)?;
            experiment::write_trace(output(out.as_ref())?, &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

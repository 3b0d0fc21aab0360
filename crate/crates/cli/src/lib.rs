//! Command-line surface for the SARF pipeline:
//! `fetch`, `featurize`, `tune`, `train`, `evaluate`, `compare`.
//!
//! Exit codes: 0 success, 1 usage, 2 data or validation, 3 network or provider.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ProviderKind, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sarf", version, about = "Sentiment-augmented random forest for daily index direction")]
pub struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Random-search trials.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: Option<u64>,
    /// Label horizon in trading days.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Row label in the comparison table.
    #[arg(long, global = true)]
    pub index_name: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download daily bars from Alpha Vantage into a CSV cache.
    Fetch {
        #[arg(long)]
        symbol: Option<String>,
        /// Cache directory (default `cache`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, env = "ALPHAVANTAGE_API_KEY", hide_env_values = true)]
        api_key: Option<String>,
        #[arg(long)]
        base_url: Option<String>,
    },
    /// Build the feature frame from bars and news.
    Featurize {
        #[arg(long)]
        bars: Option<PathBuf>,
        #[arg(long)]
        news: Option<PathBuf>,
        /// Recorded scores for the fixture provider.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, value_enum)]
        provider: Option<ProviderKind>,
        /// Frame CSV.
        #[arg(long)]
        out: PathBuf,
        /// Feature report JSON (default: next to the frame).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the frame before pruning.
        #[arg(long)]
        raw_out: Option<PathBuf>,
    },
    /// Random search with blocked cross-validation on the training split.
    Tune {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the forest on the training split.
    Train {
        #[arg(long)]
        frame: PathBuf,
        /// Tuning artifact whose best parameters to use.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model on the test split.
    Evaluate {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where `roc.csv` and `pr.csv` go (default: next to the report).
        #[arg(long)]
        curves_dir: Option<PathBuf>,
    },
    /// Technical-only baseline against SARF on the same split.
    Compare {
        /// Frame with sentiment columns.
        #[arg(long)]
        frame: PathBuf,
        /// Technical-only frame.
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the accuracy table here.
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

impl Cli {
    /// Config file (or defaults) with the flag overrides applied.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(t) = self.trials {
            config.search.trials = t as usize;
        }
        if let Some(h) = self.horizon {
            config.label.horizon = h as usize;
        }
        if let Some(name) = &self.index_name {
            config.index_name = name.clone();
        }
        match &self.command {
            Command::Fetch { base_url: Some(url), .. } => config.market_data.base_url = url.clone(),
            Command::Featurize { provider: Some(p), .. } => config.sentiment.provider = *p,
            _ => {}
        }
        config.validate()?;
        Ok(config)
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = cli.run_config()?;
    let go = || -> Result<(), CliError> {
        match &cli.command {
            Command::Fetch {
                symbol,
                out_dir,
                api_key,
                ..
            } => {
                let args = commands::FetchArgs {
                    symbol: symbol.clone(),
                    out_dir: out_dir.clone(),
                    api_key: api_key.clone(),
                };
                commands::fetch(&args, &config).map(drop)
            }
            Command::Featurize {
                bars,
                news,
                scores,
                out,
                report,
                raw_out,
                ..
            } => {
                let args = commands::FeaturizeArgs {
                    bars: bars.clone(),
                    news: news.clone(),
                    scores: scores.clone(),
                    out: out.clone(),
                    report: report.clone(),
                    raw_out: raw_out.clone(),
                };
                commands::featurize_cmd(&args, &config).map(drop)
            }
            Command::Tune { frame, out } => commands::tune(frame, out, &config).map(drop),
            Command::Train { frame, params, out } => {
                commands::train(frame, params.as_deref(), out, &config).map(drop)
            }
            Command::Evaluate {
                frame,
                model,
                out,
                curves_dir,
            } => commands::evaluate(frame, model, out, curves_dir.as_deref(), &config).map(drop),
            Command::Compare {
                frame,
                baseline,
                out,
                table,
            } => commands::compare(frame, baseline, out, table.as_deref(), &config).map(drop),
        }
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?
            .install(go),
        None => go(),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

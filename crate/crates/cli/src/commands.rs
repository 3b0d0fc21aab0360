//! One function per subcommand. Each reads its inputs, runs the library,
//! and writes artifacts that carry their own provenance.

use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sarf::evaluate::{
    compare_models, curve_csv, digest, evaluate_model, random_search, CompareConfig, Comparison,
    EvalReport, SearchResult,
};
use sarf::features::{train_size, FeatureFrame};
use sarf::forest::{train_forest, ForestModel, HyperParams};
use sarf::market_data::{parse_bars_csv, AlphaVantageClient};
use sarf::sentiment::{
    parse_news_jsonl, FixtureProvider, HttpProvider, HttpProviderConfig, LexiconProvider,
    SentimentProvider,
};
use serde::{Deserialize, Serialize};

use crate::config::{ProviderKind, RunConfig};
use crate::error::CliError;
use crate::pipeline::{featurize, FeatureSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub sha256: String,
}

/// Enough to tell whether two artifacts came from the same run recipe.
/// Deliberately free of paths and timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
}

struct Inputs(Vec<InputDigest>);

impl Inputs {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn read(&mut self, role: &str, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        self.0.push(InputDigest {
            role: role.to_string(),
            sha256: digest(&bytes),
        });
        Ok(bytes)
    }

    fn read_text(&mut self, role: &str, path: &Path) -> Result<String, CliError> {
        String::from_utf8(self.read(role, path)?)
            .map_err(|_| CliError::Data(format!("{}: not valid UTF-8", path.display())))
    }

    fn provenance(self, command: &str, config: &RunConfig) -> Provenance {
        Provenance {
            tool: "sarf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            seed: config.seed,
            inputs: self.0,
        }
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Data(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(fail)?;
    }
    std::fs::write(path, contents).map_err(fail)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_frame(inputs: &mut Inputs, role: &str, path: &Path) -> Result<FeatureFrame, CliError> {
    let bytes = inputs.read(role, path)?;
    FeatureFrame::from_csv(bytes.as_slice())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn required(flag: Option<&Path>, fallback: Option<&PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    flag.map(Path::to_path_buf)
        .or_else(|| fallback.cloned())
        .ok_or_else(|| CliError::Usage(format!("missing {what}")))
}

#[derive(Debug, Clone)]
pub struct FetchArgs {
    pub symbol: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub api_key: Option<String>,
}

/// Returns the cache file written (or reused when offline).
pub fn fetch(args: &FetchArgs, config: &RunConfig) -> Result<PathBuf, CliError> {
    let key = args.api_key.as_deref().filter(|k| !k.is_empty()).ok_or_else(|| {
        CliError::Usage("missing API key: pass --api-key or set ALPHAVANTAGE_API_KEY".into())
    })?;
    let symbol = args.symbol.as_deref().unwrap_or(&config.symbol);
    let dir = args
        .out_dir
        .clone()
        .or_else(|| config.paths.cache_dir.clone())
        .unwrap_or_else(|| PathBuf::from("cache"));
    let mut client = AlphaVantageClient::new(config.alphavantage()?);
    let outcome = client.fetch_daily(symbol, key, &dir)?;
    if outcome.stale {
        eprintln!(
            "warning: {}; using cached copy {}",
            outcome.warning.as_deref().unwrap_or("remote fetch failed"),
            outcome.cache_path.display()
        );
    }
    println!("{} bars -> {}", outcome.series.len(), outcome.cache_path.display());
    Ok(outcome.cache_path)
}

#[derive(Debug, Clone, Default)]
pub struct FeaturizeArgs {
    pub bars: Option<PathBuf>,
    pub news: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub out: PathBuf,
    /// Defaults to the frame path with a `.report.json` extension.
    pub report: Option<PathBuf>,
    /// Optional copy of the frame before pruning.
    pub raw_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureReport {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub summary: FeatureSummary,
}

pub fn featurize_cmd(args: &FeaturizeArgs, config: &RunConfig) -> Result<FeatureReport, CliError> {
    let mut inputs = Inputs::new();
    let bars_path = required(args.bars.as_deref(), config.paths.bars.as_ref(), "--bars")?;
    let text = inputs.read_text("bars", &bars_path)?;
    let bars = parse_bars_csv(&config.symbol, &text)
        .map_err(|e| CliError::Data(format!("{}: {e}", bars_path.display())))?;

    let kind = config.sentiment.provider;
    let mut news = Vec::new();
    if kind != ProviderKind::None {
        let path = required(args.news.as_deref(), config.paths.news.as_ref(), "--news (or set sentiment.provider = \"none\")")?;
        let bytes = inputs.read("news", &path)?;
        news = parse_news_jsonl(BufReader::new(bytes.as_slice()))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    let provider: Option<Box<dyn SentimentProvider>> = match kind {
        ProviderKind::None => None,
        ProviderKind::Lexicon => Some(Box::new(LexiconProvider)),
        ProviderKind::Fixture => {
            let path = required(args.scores.as_deref(), config.paths.scores.as_ref(), "--scores for the fixture provider")?;
            let bytes = inputs.read("scores", &path)?;
            let p = FixtureProvider::from_jsonl(BufReader::new(bytes.as_slice()))
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            Some(Box::new(p))
        }
        ProviderKind::Http => {
            let s = &config.sentiment;
            Some(Box::new(HttpProvider::new(HttpProviderConfig {
                timeout: Duration::from_secs(s.timeout_secs),
                retries: s.retries,
                ..HttpProviderConfig::new(s.endpoint.clone().expect("validated"))
            })))
        }
    };

    let out = featurize(&bars, news, provider.as_deref(), config)?;
    let report = FeatureReport {
        provenance: inputs.provenance("featurize", config),
        summary: out.summary,
    };
    write_file(&args.out, out.frame.to_csv().as_bytes())?;
    if let Some(raw) = &args.raw_out {
        write_file(raw, out.raw.to_csv().as_bytes())?;
    }
    let report_path = args.report.clone().unwrap_or_else(|| args.out.with_extension("report.json"));
    write_json(&report_path, &report)?;
    let s = &report.summary;
    println!(
        "{} rows x {} columns ({} before pruning, {} dropped) -> {}",
        s.labeled_rows,
        s.columns.len(),
        s.pre_prune_columns.len(),
        s.prune.dropped.len(),
        args.out.display()
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneArtifact {
    pub provenance: Provenance,
    pub train_rows: usize,
    pub search: SearchResult,
}

fn train_rows(frame: &FeatureFrame, config: &RunConfig) -> Result<usize, CliError> {
    Ok(train_size(frame.n_rows(), config.split.train_fraction)?)
}

pub fn tune(frame_path: &Path, out: &Path, config: &RunConfig) -> Result<TuneArtifact, CliError> {
    let mut inputs = Inputs::new();
    let frame = read_frame(&mut inputs, "frame", frame_path)?;
    let n_train = train_rows(&frame, config)?;
    let search = random_search(&frame.slice_rows(0..n_train)?, &config.search_config())?;
    let best = &search.trials[search.best_index];
    println!(
        "best of {} trials: #{} mean AUC {:.4}",
        search.trials.len(),
        best.index,
        best.mean_auc
    );
    let artifact = TuneArtifact {
        provenance: inputs.provenance("tune", config),
        train_rows: n_train,
        search,
    };
    write_json(out, &artifact)?;
    Ok(artifact)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelArtifact {
    pub provenance: Provenance,
    pub train_rows: usize,
    pub model: ForestModel,
}

impl ModelArtifact {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let bad = |m: String| CliError::Data(format!("model artifact: {m}"));
        // trees nest deeper than serde_json's default limit
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let mut value = serde_json::Value::deserialize(&mut de).map_err(|e| bad(e.to_string()))?;
        let model = value.get_mut("model").map(serde_json::Value::take).ok_or_else(|| bad("missing `model`".into()))?;
        let provenance = serde_json::from_value(value["provenance"].take()).map_err(|e| bad(e.to_string()))?;
        let train_rows = value["train_rows"].as_u64().ok_or_else(|| bad("missing `train_rows`".into()))? as usize;
        let model = ForestModel::from_json(&model.to_string())?;
        Ok(Self {
            provenance,
            train_rows,
            model,
        })
    }
}

/// Trains on the training split; parameters come from a tuning artifact
/// when given, otherwise from the `forest` config section.
pub fn train(frame_path: &Path, params: Option<&Path>, out: &Path, config: &RunConfig) -> Result<ModelArtifact, CliError> {
    let mut inputs = Inputs::new();
    let frame = read_frame(&mut inputs, "frame", frame_path)?;
    let hyper: HyperParams = match params {
        Some(path) => {
            let text = inputs.read_text("params", path)?;
            let tuned: TuneArtifact = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            tuned.search.best
        }
        None => config.hyper_params(),
    };
    let n_train = train_rows(&frame, config)?;
    let model = train_forest(&frame.slice_rows(0..n_train)?, &hyper)?;
    println!("trained {} trees on {n_train} rows -> {}", model.trees.len(), out.display());
    let artifact = ModelArtifact {
        provenance: inputs.provenance("train", config),
        train_rows: n_train,
        model,
    };
    write_json(out, &artifact)?;
    Ok(artifact)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub provenance: Provenance,
    pub train_rows: usize,
    pub report: EvalReport,
}

/// Scores the model on the rows after the training split. ROC and PR
/// curves go to `roc.csv` and `pr.csv` in `curves_dir`.
pub fn evaluate(
    frame_path: &Path,
    model_path: &Path,
    out: &Path,
    curves_dir: Option<&Path>,
    config: &RunConfig,
) -> Result<EvalArtifact, CliError> {
    let mut inputs = Inputs::new();
    let frame = read_frame(&mut inputs, "frame", frame_path)?;
    let artifact = ModelArtifact::from_json(&inputs.read_text("model", model_path)?)?;
    artifact.model.check_schema(&frame)?;
    let n_train = train_rows(&frame, config)?;
    if n_train != artifact.train_rows {
        return Err(CliError::Data(format!(
            "model was trained on {} rows but this frame and split give {n_train}",
            artifact.train_rows
        )));
    }
    let test = frame.slice_rows(n_train..frame.n_rows())?;
    let report = evaluate_model(&artifact.model, &test)?;

    let dir = curves_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.parent().map(Path::to_path_buf).unwrap_or_default());
    write_file(&dir.join("roc.csv"), curve_csv(&report.roc_points).as_bytes())?;
    write_file(&dir.join("pr.csv"), curve_csv(&report.pr_points).as_bytes())?;

    let m = &report.metrics;
    let auc = report.auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
    println!(
        "test rows {}: accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} auc {auc}",
        report.rows, m.accuracy, m.precision, m.recall, m.f1
    );
    let out_artifact = EvalArtifact {
        provenance: inputs.provenance("evaluate", config),
        train_rows: n_train,
        report,
    };
    write_json(out, &out_artifact)?;
    Ok(out_artifact)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareArtifact {
    pub provenance: Provenance,
    pub comparison: Comparison,
}

/// Tunes, trains and tests both frames; prints the accuracy table.
pub fn compare(
    sarf_frame: &Path,
    baseline_frame: &Path,
    out: &Path,
    table: Option<&Path>,
    config: &RunConfig,
) -> Result<CompareArtifact, CliError> {
    let mut inputs = Inputs::new();
    let with = read_frame(&mut inputs, "frame", sarf_frame)?;
    let without = read_frame(&mut inputs, "baseline", baseline_frame)?;
    let settings = CompareConfig {
        index_name: config.index_name.clone(),
        train_fraction: config.split.train_fraction,
        search: config.search_config(),
    };
    let comparison = compare_models(&with, &without, &settings)?;
    print!("{}", comparison.table);
    println!("accuracy delta (SARF - baseline): {:+.4}", comparison.accuracy_delta);
    if let Some(path) = table {
        write_file(path, comparison.table.as_bytes())?;
    }
    let artifact = CompareArtifact {
        provenance: inputs.provenance("compare", config),
        comparison,
    };
    write_json(out, &artifact)?;
    Ok(artifact)
}

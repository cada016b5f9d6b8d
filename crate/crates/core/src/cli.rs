//! Command-line front end.
//!
//! Every subcommand writes its artifacts into `--out DIR` together with a
//! `manifest.json` that lists each file with its SHA-256 digest and size, the
//! resolved configuration and its hash. A flat `key=value` file passed with
//! `--config` supplies defaults; flags given on the command line win.
//!
//! Failures print `{"error":{"kind":…,"message":…}}` on stderr and exit with
//! 2 (usage), 3 (data) or 4 (numeric).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::augment::{cutmix_dataset, CutMixConfig};
use crate::cds::{synthesize_series, CdsConfig, FragmentLimits};
use crate::data::{densify, fit_catalog, read_records_csv_file, read_series_file, sparsity, write_series_file, DenseSeries};
use crate::datagen::{sample_corpus, LatentStateModel};
use crate::error::{Error, Result};
use crate::eval::{
    discriminative_score, ngram_profile, pca_export, select_h_star, test1, test2, write_pca_csv, write_sofa_csv,
    DiscriminativeConfig, PcaParts, SofaInput, SyntheticSet, TestReport,
};
use crate::forecast::{evaluate, train, ForecastConfig, ForecastModel, Optimizer, Regime, TrainConfig};
use crate::io::{read_json_file, read_ndjson_file, write_json_file, write_ndjson_file};
use crate::pipeline::{cutmix_corpus, fit_space, parse_multiplier, parse_seed_grid, train_embedder, SymbolizerConfig};
use crate::symbolize::{symbolize_all, BlockEmbedder, Mode};
use crate::synthetic::plain_series;

#[derive(Parser, Debug)]
#[command(name = "cts-forge", version, about = "Symbolic synthesis and domain-adaptation tests for sparse time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a corpus from a latent-state model.
    Gen(GenArgs),
    /// Standardize and densify quadruplet records from CSV.
    Ingest(IngestArgs),
    /// Fit a symbol space and symbolize a corpus.
    Symbolize(SymbolizeArgs),
    /// Compositional synthesis.
    Synthesize(SynthesizeArgs),
    /// CutMix baseline.
    Cutmix(CutmixArgs),
    /// Train a forecaster.
    Train(TrainArgs),
    /// Test 1: risk of models trained on synthetic data versus original data.
    #[command(name = "eval-test1")]
    EvalTest1(Test1Args),
    /// Test 2: risk ratio of the best original model on synthetic and original test data.
    #[command(name = "eval-test2")]
    EvalTest2(Test2Args),
    /// Hellinger distances between symbol n-gram distributions.
    #[command(name = "metrics-hellinger")]
    MetricsHellinger(HellingerArgs),
    /// Post-hoc discriminative score.
    #[command(name = "metrics-discriminative")]
    MetricsDiscriminative(DiscriminativeArgs),
    /// SOFA scores from NDJSON inputs.
    Sofa(SofaArgs),
    /// Two-component PCA projection.
    Pca(PcaArgs),
    /// Collect test and metric reports from earlier runs.
    Report(ReportArgs),
}

#[derive(Args, Debug, Serialize)]
struct OutArg {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Input,
    Embd,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum EmbedTask {
    #[value(name = "3to3")]
    #[serde(rename = "3to3")]
    ThreeToThree,
    #[value(name = "24to24")]
    #[serde(rename = "24to24")]
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RegimeArg {
    TeacherForcing,
    FreeRunning,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum AugmentArg {
    Cds,
    Cutmix,
    /// Test 1 with the original corpus in place of a synthetic one.
    Original,
    /// Test 2 with the original test set in place of a synthetic one.
    Identical,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PartsArg {
    Values,
    Mask,
    Both,
}

#[derive(Args, Debug, Serialize)]
struct SymbolArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Input)]
    mode: ModeArg,
    /// Number of symbols.
    #[arg(long, default_value_t = 160)]
    k: usize,
    /// Block length in hours.
    #[arg(long, default_value_t = 3)]
    delta: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Trained embedder checkpoint for `embd` mode; one is trained when absent.
    #[arg(long, value_name = "FILE")]
    embedder: Option<PathBuf>,
    /// Task of the embedder trained on the fly.
    #[arg(long, value_enum, default_value_t = EmbedTask::ThreeToThree)]
    embed_task: EmbedTask,
    #[arg(long, default_value_t = 50)]
    embed_hidden: usize,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    /// Environment window.
    #[arg(long, default_value_t = 1)]
    w: usize,
    #[arg(long, default_value_t = 2)]
    max_spans: usize,
    #[arg(long, default_value_t = 2)]
    max_span_len: usize,
    /// Output size as a multiple of the corpus, e.g. 5x.
    #[arg(long, default_value = "1x")]
    budget: String,
    /// Reject outputs equal to any corpus sequence.
    #[arg(long)]
    exclude_corpus: bool,
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    #[arg(long, default_value_t = 24)]
    context: usize,
    #[arg(long, default_value_t = 24)]
    horizon: usize,
    #[arg(long, default_value_t = 3)]
    lag: usize,
    #[arg(long, default_value_t = 50)]
    hidden: usize,
    /// Defaults to teacher forcing for `train` and free running for the tests.
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 6)]
    patience: usize,
    #[arg(long, default_value_t = 0.2)]
    validation_fraction: f64,
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long, default_value = "fig1")]
    preset: String,
    /// Number of stays.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 48)]
    hours: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emission noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// Observe every cell.
    #[arg(long)]
    fully_observed: bool,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct IngestArgs {
    /// CSV with stay_id,feature_id,time_hours,value.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 48)]
    hours: usize,
    #[arg(long, default_value_t = 3)]
    delta: usize,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct SymbolizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    symbols: SymbolArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct SynthesizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    symbols: SymbolArgs,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct CutmixArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "1x")]
    budget: String,
    #[arg(long, default_value_t = 3)]
    delta: usize,
    /// Fixed window length; a random multiple of the block length when absent.
    #[arg(long)]
    window_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Optional test corpus for a risk estimate.
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Train the short-horizon embedding task instead of the forecaster.
    #[arg(long, value_enum)]
    embed_task: Option<EmbedTask>,
    #[arg(long, default_value_t = 3)]
    delta: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct Test1Args {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = AugmentArg::Cds)]
    augment: AugmentArg,
    /// Training seeds × symbolization seeds.
    #[arg(long, default_value = "3x3")]
    seeds: String,
    #[command(flatten)]
    symbols: SymbolArgs,
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct Test2Args {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = AugmentArg::Cds)]
    augment: AugmentArg,
    /// Number of candidate models trained on the original corpus.
    #[arg(long, default_value_t = 3)]
    models: usize,
    #[command(flatten)]
    symbols: SymbolArgs,
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct HellingerArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    synthetic: PathBuf,
    #[arg(long, default_value_t = 160)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    delta: usize,
    /// Comma-separated n-gram orders.
    #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct DiscriminativeArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    synthetic: PathBuf,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 1000)]
    max_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct SofaArgs {
    /// NDJSON of SOFA inputs.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct PcaArgs {
    #[arg(long)]
    input: PathBuf,
    /// Synthetic corpus projected into the same components.
    #[arg(long)]
    synthetic: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PartsArg::Values)]
    parts: PartsArg,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct ReportArgs {
    /// Run directories to collect from.
    #[arg(long, required = true, num_args = 1..)]
    runs: Vec<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArg,
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: &'a str,
    config: &'a serde_json::Value,
    inputs: Vec<FileEntry>,
    artifacts: Vec<FileEntry>,
}

/// Output directory plus the bookkeeping for its manifest.
struct Run {
    dir: PathBuf,
    command: &'static str,
    config: serde_json::Value,
    hash: String,
    inputs: Vec<PathBuf>,
    artifacts: Vec<String>,
}

impl Run {
    fn new<T: Serialize>(command: &'static str, args: &T, out: &Path) -> Result<Self> {
        let config = serde_json::json!({ "command": command, "args": args });
        let hash = hex::encode(Sha256::digest(serde_json::to_vec(&config)?));
        fs::create_dir_all(out)?;
        Ok(Self {
            dir: out.to_path_buf(),
            command,
            config,
            hash,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Path for a new artifact, recorded for the manifest.
    fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(mut self) -> Result<()> {
        self.artifacts.sort();
        self.artifacts.dedup();
        let artifacts = self
            .artifacts
            .iter()
            .map(|a| file_entry(&self.dir.join(a), a.clone()))
            .collect::<Result<Vec<_>>>()?;
        let inputs = self
            .inputs
            .iter()
            .map(|p| file_entry(p, p.display().to_string()))
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: &self.hash,
            config: &self.config,
            inputs,
            artifacts,
        };
        write_json_file(&self.dir.join("manifest.json"), &manifest)
    }
}

fn file_entry(path: &Path, name: String) -> Result<FileEntry> {
    let bytes = fs::read(path)?;
    Ok(FileEntry {
        name,
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

fn symbolizer_config(a: &SymbolArgs, seed: u64) -> SymbolizerConfig {
    SymbolizerConfig {
        mode: match a.mode {
            ModeArg::Input => Mode::Input,
            ModeArg::Embd => Mode::Embd,
        },
        k: a.k,
        delta: a.delta,
        seed,
        max_iter: a.max_iter,
    }
}

impl ModelArgs {
    fn configs(&self, default_regime: Regime, seed: u64) -> (ForecastConfig, TrainConfig) {
        let fc = ForecastConfig {
            context: self.context,
            horizon: self.horizon,
            lag: self.lag,
            hidden: self.hidden,
            stride: None,
        };
        let tc = TrainConfig {
            regime: match self.regime {
                Some(RegimeArg::TeacherForcing) => Regime::TeacherForcing,
                Some(RegimeArg::FreeRunning) => Regime::FreeRunning,
                None => default_regime,
            },
            optimizer: match self.optimizer {
                OptimizerArg::Adam => Optimizer::Adam,
                OptimizerArg::Sgd => Optimizer::Sgd,
            },
            learning_rate: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            seed,
        };
        (fc, tc)
    }
}

/// Loads or trains the embedder required by `embd` mode.
fn embedder_for(a: &SymbolArgs, series: &[DenseSeries], seed: u64, run: &mut Run) -> Result<Option<ForecastModel>> {
    if let ModeArg::Input = a.mode {
        return Ok(None);
    }
    if let Some(path) = &a.embedder {
        run.input(path);
        return ForecastModel::from_checkpoint(&fs::read_to_string(path)?).map(Some);
    }
    let tc = TrainConfig { seed, ..TrainConfig::default() };
    let model = match a.embed_task {
        EmbedTask::ThreeToThree => train_embedder(series, a.delta, a.embed_hidden, &tc)?,
        EmbedTask::Full => {
            let fc = ForecastConfig { hidden: a.embed_hidden, ..ForecastConfig::default() };
            train(&fc, series, &tc)?.model
        }
    };
    fs::write(run.artifact("embedder.json"), model.to_checkpoint()?)?;
    Ok(Some(model))
}

fn as_embedder(m: &Option<ForecastModel>) -> Option<&dyn BlockEmbedder> {
    m.as_ref().map(|m| m as &dyn BlockEmbedder)
}

fn load_series(path: &Path, run: &mut Run) -> Result<(Vec<String>, Vec<DenseSeries>)> {
    run.input(path);
    let (features, series) = read_series_file(path)?;
    if series.is_empty() {
        return Err(Error::Data(format!("{} holds no series", path.display())));
    }
    Ok((features, series))
}

fn same_features(a: &[String], b: &[String]) -> Result<()> {
    if a != b {
        return Err(Error::Data("corpora have different feature lists".into()));
    }
    Ok(())
}

fn cds_config(s: &SynthArgs, seed: u64, corpus_len: usize) -> Result<CdsConfig> {
    Ok(CdsConfig {
        window: s.w,
        limits: FragmentLimits {
            max_spans: s.max_spans,
            max_span_len: s.max_span_len,
        },
        seed,
        budget: parse_multiplier(&s.budget)? * corpus_len,
        exclude_corpus: s.exclude_corpus,
        ..CdsConfig::default()
    })
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let mut model = match a.preset.as_str() {
        "fig1" => LatentStateModel::fig1(),
        other => return Err(Error::Usage(format!("unknown preset '{other}'"))),
    };
    if let Some(noise) = a.noise {
        model = model.with_noise(noise);
    }
    if a.fully_observed {
        model = model.fully_observed();
    }
    let mut run = Run::new("gen", a, &a.out.out)?;
    let corpus = sample_corpus(&model, a.n, a.hours, a.seed)?;
    write_series_file(&run.artifact("corpus.ndjson"), &model.features, &corpus.series)?;
    write_ndjson_file(&run.artifact("latent.ndjson"), &corpus.latent)?;
    write_json_file(&run.artifact("model.json"), &model)?;
    let meta = serde_json::json!({
        "seed": a.seed,
        "stays": a.n,
        "hours": a.hours,
        "model_hash": corpus.model_hash,
        "emission": "gaussian",
    });
    write_json_file(&run.artifact("meta.json"), &meta)?;
    run.finish()
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let mut run = Run::new("ingest", a, &a.out.out)?;
    run.input(&a.input);
    let records = read_records_csv_file(&a.input)?;
    let fit = fit_catalog(&records)?;
    let dense = densify(&records, &fit.catalog, a.hours, a.delta)?;
    let features = fit.catalog.ids();
    write_json_file(&run.artifact("catalog.json"), &fit.catalog)?;
    write_series_file(&run.artifact("series.ndjson"), &features, &dense.series)?;
    let report = serde_json::json!({
        "hours": dense.hours,
        "stays": dense.series.len(),
        "dropped_short": dense.dropped_short,
        "dropped_gaps": dense.dropped_gaps,
        "unknown_records": dense.unknown_records,
        "excluded_features": fit.excluded,
        "sparsity": if dense.series.is_empty() { None } else { Some(sparsity(&dense.series)?) },
    });
    write_json_file(&run.artifact("ingest.json"), &report)?;
    run.finish()
}

fn cmd_symbolize(a: &SymbolizeArgs) -> Result<()> {
    let mut run = Run::new("symbolize", a, &a.out.out)?;
    let (_, series) = load_series(&a.input, &mut run)?;
    let embedder = embedder_for(&a.symbols, &series, a.seed, &mut run)?;
    let space = fit_space(&series, &symbolizer_config(&a.symbols, a.seed), as_embedder(&embedder))?;
    let sequences = symbolize_all(&series, a.symbols.delta, &space, as_embedder(&embedder))?;
    write_json_file(&run.artifact("space.json"), &space)?;
    write_ndjson_file(&run.artifact("symbols.ndjson"), &sequences)?;
    run.finish()
}

fn cmd_synthesize(a: &SynthesizeArgs) -> Result<()> {
    let mut run = Run::new("synthesize", a, &a.out.out)?;
    let (features, series) = load_series(&a.input, &mut run)?;
    let embedder = embedder_for(&a.symbols, &series, a.seed, &mut run)?;
    let space = fit_space(&series, &symbolizer_config(&a.symbols, a.seed), as_embedder(&embedder))?;
    let sequences = symbolize_all(&series, a.symbols.delta, &space, as_embedder(&embedder))?;
    let cfg = cds_config(&a.synth, a.seed, series.len())?;
    let out = synthesize_series(&series, &sequences, &cfg)?;
    write_json_file(&run.artifact("space.json"), &space)?;
    write_ndjson_file(&run.artifact("symbols.ndjson"), &sequences)?;
    write_ndjson_file(&run.artifact("synthetic.ndjson"), out.series.iter().map(|s| s.to_line(&features)))?;
    let stats = serde_json::json!({
        "requested": out.requested,
        "produced": out.series.len(),
        "exhausted": out.exhausted,
    });
    write_json_file(&run.artifact("synthesis.json"), &stats)?;
    if out.exhausted {
        eprintln!("warning: produced {} of {} requested series", out.series.len(), out.requested);
    }
    run.finish()
}

fn cmd_cutmix(a: &CutmixArgs) -> Result<()> {
    let mut run = Run::new("cutmix", a, &a.out.out)?;
    let (features, series) = load_series(&a.input, &mut run)?;
    let cfg = CutMixConfig {
        window_len: a.window_len,
        block_len: a.delta,
        seed: a.seed,
        budget: parse_multiplier(&a.budget)? * series.len(),
    };
    let out = cutmix_dataset(&series, &cfg)?;
    write_ndjson_file(&run.artifact("synthetic.ndjson"), out.iter().map(|s| s.to_line(&features)))?;
    run.finish()
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let mut run = Run::new("train", a, &a.out.out)?;
    let (_, series) = load_series(&a.input, &mut run)?;
    let (mut fc, tc) = a.model.configs(Regime::TeacherForcing, a.seed);
    if let Some(EmbedTask::ThreeToThree) = a.embed_task {
        fc = ForecastConfig { hidden: fc.hidden, ..ForecastConfig::three_to_three(a.delta) };
    }
    let trained = train(&fc, &series, &tc)?;
    fs::write(run.artifact("model.json"), trained.model.to_checkpoint()?)?;
    let history = serde_json::json!({ "best_epoch": trained.best_epoch, "epochs": trained.history });
    write_json_file(&run.artifact("history.json"), &history)?;
    if let Some(test) = &a.test {
        let (_, test_series) = load_series(test, &mut run)?;
        let risk = evaluate(&trained.model, &test_series)?;
        write_json_file(&run.artifact("risk.json"), &risk)?;
    }
    run.finish()
}

fn cmd_test1(a: &Test1Args) -> Result<()> {
    let mut run = Run::new("eval-test1", a, &a.out.out)?;
    let (f_train, train_set) = load_series(&a.train, &mut run)?;
    let (f_test, test_set) = load_series(&a.test, &mut run)?;
    same_features(&f_train, &f_test)?;
    let (n_train_seeds, n_sym_seeds) = parse_seed_grid(&a.seeds)?;
    let train_seeds: Vec<u64> = (1..=n_train_seeds as u64).map(|i| a.seed + i).collect();
    let sym_seeds: Vec<u64> = (1..=n_sym_seeds as u64).map(|i| a.seed + i).collect();
    let mut sets = Vec::new();
    match a.augment {
        AugmentArg::Cds => {
            for &s in &sym_seeds {
                let embedder = embedder_for(&a.symbols, &train_set, s, &mut run)?;
                let space = fit_space(&train_set, &symbolizer_config(&a.symbols, s), as_embedder(&embedder))?;
                let seqs = symbolize_all(&train_set, a.symbols.delta, &space, as_embedder(&embedder))?;
                let out = synthesize_series(&train_set, &seqs, &cds_config(&a.synth, s, train_set.len())?)?;
                sets.push(SyntheticSet { seed: s, series: plain_series(&out.series) });
            }
        }
        AugmentArg::Cutmix => {
            let mult = parse_multiplier(&a.synth.budget)?;
            for &s in &sym_seeds {
                sets.push(SyntheticSet { seed: s, series: cutmix_corpus(&train_set, a.symbols.delta, mult, s)? });
            }
        }
        AugmentArg::Original => sets.push(SyntheticSet { seed: 0, series: train_set.clone() }),
        AugmentArg::Identical => return Err(Error::Usage("--augment identical applies to eval-test2".into())),
    }
    let (fc, tc) = a.model.configs(Regime::FreeRunning, a.seed);
    let result = test1(&train_set, &sets, &test_set, &train_seeds, &fc, &tc)?;
    write_json_file(&run.artifact("test1.json"), &TestReport::from_test1(&result, &run.hash))?;
    run.finish()
}

fn cmd_test2(a: &Test2Args) -> Result<()> {
    let mut run = Run::new("eval-test2", a, &a.out.out)?;
    let (f_train, train_set) = load_series(&a.train, &mut run)?;
    let (f_test, test_set) = load_series(&a.test, &mut run)?;
    same_features(&f_train, &f_test)?;
    if a.models == 0 {
        return Err(Error::Usage("--models must be positive".into()));
    }
    let (fc, tc) = a.model.configs(Regime::FreeRunning, a.seed);
    let seeds: Vec<u64> = (1..=a.models as u64).map(|i| a.seed + i).collect();
    let models = seeds
        .iter()
        .map(|&s| train(&fc, &train_set, &TrainConfig { seed: s, ..tc.clone() }).map(|t| t.model))
        .collect::<Result<Vec<_>>>()?;
    let (best, _) = select_h_star(&models, &test_set)?;
    let synthetic = match a.augment {
        AugmentArg::Cds => {
            let s = a.seed + 1;
            let embedder = embedder_for(&a.symbols, &train_set, s, &mut run)?;
            let space = fit_space(&train_set, &symbolizer_config(&a.symbols, s), as_embedder(&embedder))?;
            let seqs = symbolize_all(&test_set, a.symbols.delta, &space, as_embedder(&embedder))?;
            plain_series(&synthesize_series(&test_set, &seqs, &cds_config(&a.synth, s, test_set.len())?)?.series)
        }
        AugmentArg::Cutmix => cutmix_corpus(&test_set, a.symbols.delta, parse_multiplier(&a.synth.budget)?, a.seed + 1)?,
        AugmentArg::Identical => test_set.clone(),
        AugmentArg::Original => return Err(Error::Usage("--augment original applies to eval-test1".into())),
    };
    let result = test2(&models[best], &format!("seed-{}", seeds[best]), &test_set, &synthetic)?;
    fs::write(run.artifact("h_star.json"), models[best].to_checkpoint()?)?;
    write_json_file(&run.artifact("test2.json"), &TestReport::from_test2(&result, &run.hash))?;
    run.finish()
}

fn cmd_hellinger(a: &HellingerArgs) -> Result<()> {
    let mut run = Run::new("metrics-hellinger", a, &a.out.out)?;
    let (f_train, train_set) = load_series(&a.train, &mut run)?;
    let (f_test, test_set) = load_series(&a.test, &mut run)?;
    let (f_syn, syn_set) = load_series(&a.synthetic, &mut run)?;
    same_features(&f_train, &f_test)?;
    same_features(&f_train, &f_syn)?;
    let cfg = SymbolizerConfig { k: a.k, delta: a.delta, seed: a.seed, ..SymbolizerConfig::default() };
    let space = fit_space(&train_set, &cfg, None)?;
    let tr = symbolize_all(&train_set, a.delta, &space, None)?;
    let te = symbolize_all(&test_set, a.delta, &space, None)?;
    let sy = symbolize_all(&syn_set, a.delta, &space, None)?;
    let rows = ngram_profile(&tr, &te, &sy, &a.orders)?;
    write_json_file(&run.artifact("hellinger.json"), &serde_json::json!({ "rows": rows, "config_hash": run.hash }))?;
    run.finish()
}

fn cmd_discriminative(a: &DiscriminativeArgs) -> Result<()> {
    let mut run = Run::new("metrics-discriminative", a, &a.out.out)?;
    let (f_orig, original) = load_series(&a.original, &mut run)?;
    let (f_syn, synthetic) = load_series(&a.synthetic, &mut run)?;
    same_features(&f_orig, &f_syn)?;
    let cfg = DiscriminativeConfig {
        runs: a.runs,
        seed: a.seed,
        max_per_class: a.max_per_class,
        ..DiscriminativeConfig::default()
    };
    let score = discriminative_score(&original, &synthetic, &cfg)?;
    let report = serde_json::json!({
        "mean": score.mean,
        "sd": score.sd,
        "per_run": score.per_run,
        "config_hash": run.hash,
    });
    write_json_file(&run.artifact("discriminative.json"), &report)?;
    run.finish()
}

fn cmd_sofa(a: &SofaArgs) -> Result<()> {
    let mut run = Run::new("sofa", a, &a.out.out)?;
    run.input(&a.input);
    let inputs: Vec<SofaInput> = read_ndjson_file(&a.input)?;
    write_sofa_csv(fs::File::create(run.artifact("sofa.csv"))?, &inputs)?;
    run.finish()
}

fn cmd_pca(a: &PcaArgs) -> Result<()> {
    let mut run = Run::new("pca", a, &a.out.out)?;
    let (f_orig, original) = load_series(&a.input, &mut run)?;
    let mut labelled: Vec<(DenseSeries, String)> = original.into_iter().map(|s| (s, "original".to_string())).collect();
    if let Some(path) = &a.synthetic {
        let (f_syn, synthetic) = load_series(path, &mut run)?;
        same_features(&f_orig, &f_syn)?;
        labelled.extend(synthetic.into_iter().map(|s| (s, "synthetic".to_string())));
    }
    let parts = match a.parts {
        PartsArg::Values => PcaParts { values: true, mask: false },
        PartsArg::Mask => PcaParts { values: false, mask: true },
        PartsArg::Both => PcaParts { values: true, mask: true },
    };
    let (pca, rows) = pca_export(&labelled, parts)?;
    write_pca_csv(fs::File::create(run.artifact("pca.csv"))?, &rows)?;
    write_json_file(&run.artifact("pca.json"), &pca)?;
    run.finish()
}

const REPORT_FILES: [&str; 4] = ["test1.json", "test2.json", "hellinger.json", "discriminative.json"];

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut run = Run::new("report", a, &a.out.out)?;
    let mut entries = Vec::new();
    for dir in &a.runs {
        for name in REPORT_FILES {
            let path = dir.join(name);
            if path.is_file() {
                run.input(&path);
                let content: serde_json::Value = read_json_file(&path)?;
                entries.push(serde_json::json!({ "run": dir.display().to_string(), "file": name, "content": content }));
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::Data("no reports found in the given run directories".into()));
    }
    let mut md = String::from("| run | report | value | se |\n|---|---|---|---|\n");
    for e in &entries {
        let c = &e["content"];
        let (value, se) = if let Some(eps) = c["epsilon_hat"].as_f64() {
            (format!("eps {eps:+.4}"), c["se"].as_f64().map_or(String::new(), |s| format!("{s:.4}")))
        } else if let Some(r) = c["ratio"].as_f64() {
            (format!("ratio {r:.4}"), String::new())
        } else if let Some(m) = c["mean"].as_f64() {
            (format!("score {m:.4}"), c["sd"].as_f64().map_or(String::new(), |s| format!("sd {s:.4}")))
        } else if let Some(rows) = c["rows"].as_array() {
            let cells: Vec<String> = rows
                .iter()
                .map(|r| format!("n={} S-Te {:.4}", r["order"], r["synthetic_test"].as_f64().unwrap_or(f64::NAN)))
                .collect();
            (cells.join("; "), String::new())
        } else {
            (String::new(), String::new())
        };
        md.push_str(&format!("| {} | {} | {} | {} |\n", e["run"].as_str().unwrap_or(""), e["file"].as_str().unwrap_or(""), value, se));
    }
    write_json_file(&run.artifact("report.json"), &serde_json::json!({ "reports": entries }))?;
    fs::write(run.artifact("report.md"), md)?;
    run.finish()
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Symbolize(a) => cmd_symbolize(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Cutmix(a) => cmd_cutmix(a),
        Command::Train(a) => cmd_train(a),
        Command::EvalTest1(a) => cmd_test1(a),
        Command::EvalTest2(a) => cmd_test2(a),
        Command::MetricsHellinger(a) => cmd_hellinger(a),
        Command::MetricsDiscriminative(a) => cmd_discriminative(a),
        Command::Sofa(a) => cmd_sofa(a),
        Command::Pca(a) => cmd_pca(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses a flat `key=value` file into flags. `#` starts a comment; `true`
/// turns a switch on and `false` leaves it off.
pub fn config_to_flags(text: &str) -> Result<Vec<String>> {
    let mut flags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected key=value", i + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(Error::Usage(format!("config line {}: invalid key", i + 1)));
        }
        match value.trim() {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            v => {
                flags.push(format!("--{key}"));
                flags.push(v.to_string());
            }
        }
    }
    Ok(flags)
}

/// Pulls `--config FILE` out of the arguments and splices the file's flags in
/// right after the subcommand, so later command-line flags override them.
fn expand_config(mut args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            let value = args.get(i + 1).cloned().ok_or_else(|| Error::Usage("--config needs a file".into()))?;
            path = Some(value);
            args.drain(i..i + 2);
        } else if let Some(v) = args[i].strip_prefix("--config=") {
            path = Some(v.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path).map_err(|e| Error::Usage(format!("cannot read config {path}: {e}")))?;
    let flags = config_to_flags(&text)?;
    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|p| p + 2)
        .ok_or_else(|| Error::Usage("missing subcommand".into()))?;
    args.splice(sub..sub, flags);
    Ok(args)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CTS_FORGE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Usage(format!("CTS_FORGE_THREADS must be a positive integer, got '{v}'")))?;
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn command() -> clap::Command {
    let config = clap::Arg::new("config")
        .long("config")
        .value_name("FILE")
        .global(true)
        .help("Flat key=value defaults for the subcommand's flags");
    Cli::command().arg(config).mut_subcommands(|s| s.args_override_self(true))
}

fn report_error(e: &Error) -> i32 {
    let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    eprintln!("{body}");
    e.exit_code()
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = match argv.into_iter().map(|a| a.into().into_string()).collect() {
        Ok(a) => a,
        Err(_) => return report_error(&Error::Usage("arguments must be valid UTF-8".into())),
    };
    let args = match expand_config(args).and_then(|a| configure_threads().map(|_| a)) {
        Ok(a) => a,
        Err(e) => return report_error(&e),
    };
    let cli = match command().try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                let body = serde_json::json!({ "error": { "kind": "usage", "message": e.to_string().trim() } });
                eprintln!("{body}");
            }
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

//! End-to-end steps shared by the command line and the examples.

use serde::{Deserialize, Serialize};

use crate::augment::{cutmix_dataset, CutMixConfig};
use crate::cds::{synthesize_series, CdsConfig, FragmentLimits};
use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::forecast::{train, ForecastConfig, ForecastModel, TrainConfig};
use crate::symbolize::{all_blocks, kmeans, random_centroids, symbolize_all, BlockEmbedder, Mode, SymbolSequence, SymbolSpace};
use crate::synthetic::{plain_series, SyntheticSeries};

/// How blocks become symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolizerConfig {
    pub mode: Mode,
    pub k: usize,
    pub delta: usize,
    pub seed: u64,
    /// Lloyd iterations in `embd` mode.
    pub max_iter: usize,
}

impl Default for SymbolizerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Input,
            k: 160,
            delta: 3,
            seed: 0,
            max_iter: 100,
        }
    }
}

/// Random input-space centroids, or k-means over embeddings.
pub fn fit_space(
    series: &[DenseSeries],
    cfg: &SymbolizerConfig,
    embedder: Option<&dyn BlockEmbedder>,
) -> Result<SymbolSpace> {
    let blocks = all_blocks(series, cfg.delta)?;
    match (cfg.mode, embedder) {
        (Mode::Input, _) => random_centroids(&blocks, cfg.k, cfg.seed),
        (Mode::Embd, Some(e)) => {
            let points = blocks.iter().map(|b| e.embed(b)).collect::<Result<Vec<_>>>()?;
            kmeans(&points, cfg.k, cfg.seed, cfg.max_iter, 1e-6)?.into_space()
        }
        (Mode::Embd, None) => Err(Error::param("embd mode needs a trained embedding model")),
    }
}

/// Trains the block embedder on the short-horizon task.
pub fn train_embedder(series: &[DenseSeries], delta: usize, hidden: usize, tc: &TrainConfig) -> Result<ForecastModel> {
    let cfg = ForecastConfig { hidden, ..ForecastConfig::three_to_three(delta) };
    Ok(train(&cfg, series, tc)?.model)
}

/// One compositional synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    pub symbolizer: SymbolizerConfig,
    pub window: usize,
    pub limits: FragmentLimits,
    /// Outputs per corpus series.
    pub budget_multiplier: usize,
    pub seed: u64,
}

impl Default for SynthesisPlan {
    fn default() -> Self {
        Self {
            symbolizer: SymbolizerConfig::default(),
            window: 1,
            limits: FragmentLimits::default(),
            budget_multiplier: 1,
            seed: 0,
        }
    }
}

/// Symbolic corpus and synthetic series of one run.
#[derive(Debug, Clone)]
pub struct SynthesisRun {
    pub space: SymbolSpace,
    pub sequences: Vec<SymbolSequence>,
    pub synthetic: Vec<SyntheticSeries>,
    pub exhausted: bool,
}

/// Symbolizes `corpus` in `space` and synthesizes `budget_multiplier × |corpus|` series.
pub fn synthesize_in_space(
    corpus: &[DenseSeries],
    space: &SymbolSpace,
    embedder: Option<&dyn BlockEmbedder>,
    plan: &SynthesisPlan,
) -> Result<SynthesisRun> {
    let sequences = symbolize_all(corpus, plan.symbolizer.delta, space, embedder)?;
    let cfg = CdsConfig {
        window: plan.window,
        limits: plan.limits,
        seed: plan.seed,
        budget: plan.budget_multiplier * corpus.len(),
        ..CdsConfig::default()
    };
    let out = synthesize_series(corpus, &sequences, &cfg)?;
    Ok(SynthesisRun {
        space: space.clone(),
        sequences,
        synthetic: out.series,
        exhausted: out.exhausted,
    })
}

/// Fits a symbol space on `corpus` and synthesizes from it.
pub fn synthesize(corpus: &[DenseSeries], embedder: Option<&dyn BlockEmbedder>, plan: &SynthesisPlan) -> Result<SynthesisRun> {
    let space = fit_space(corpus, &plan.symbolizer, embedder)?;
    synthesize_in_space(corpus, &space, embedder, plan)
}

/// CutMix control with `budget_multiplier × |corpus|` outputs.
pub fn cutmix_corpus(corpus: &[DenseSeries], block_len: usize, budget_multiplier: usize, seed: u64) -> Result<Vec<DenseSeries>> {
    let cfg = CutMixConfig {
        window_len: None,
        block_len,
        seed,
        budget: budget_multiplier * corpus.len(),
    };
    Ok(plain_series(&cutmix_dataset(corpus, &cfg)?))
}

/// Parses `5x` or `5` into a multiplier.
pub fn parse_multiplier(text: &str) -> Result<usize> {
    let t = text.trim().trim_end_matches(['x', 'X']);
    t.parse::<usize>()
        .ok()
        .filter(|&m| m > 0)
        .ok_or_else(|| Error::Usage(format!("invalid multiplier '{text}', expected e.g. 5x")))
}

/// Parses `3x3` into `(train seeds, symbolization seeds)`.
pub fn parse_seed_grid(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Usage(format!("invalid seed grid '{text}', expected e.g. 3x3"));
    let (a, b) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let a = a.trim().parse::<usize>().map_err(|_| bad())?;
    let b = b.trim().parse::<usize>().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::desymbolize::{desymbolize, BlockStore};
use super::index::{FragmentLimits, SynthesisIndex};
use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, Rng};
use crate::symbolize::{Symbol, SymbolSequence};
use crate::synthetic::{Lineage, SyntheticSeries};

/// One synthesized sequence `insert(t_c, f_b)` with the ids that justify it.
///
/// `fragment` is hosted by both `template_a` and `template_c`; `template_b` shares
/// the environment of `template_a` and hosts `fragment_b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draw {
    pub symbols: Vec<Symbol>,
    pub fragment: u32,
    pub fragment_b: u32,
    pub template_a: u32,
    pub template_b: u32,
    pub template_c: u32,
}

/// Streams synthetic symbol sequences from an index.
///
/// Passes follow the nesting of the reference loop (fragments, then `t_c`, then
/// `t_a`, then templates sharing the environment of `t_a`, then their fragments)
/// with seeded shuffles at every level. Each `(fragment, t_c)` pair contributes at
/// most one sequence per pass. The stream ends at the budget, or early when a full
/// pass yields nothing.
pub struct Synthesizer<'a> {
    index: &'a SynthesisIndex,
    rng: Rng,
    budget: usize,
    produced: usize,
    target_len: Option<usize>,
    exclude: Option<HashSet<Vec<Symbol>>>,
    frg_list: Vec<u32>,
    frg_pos: usize,
    tpl_c_list: Vec<u32>,
    c_pos: usize,
    pass_yield: usize,
    started: bool,
    exhausted: bool,
}

impl<'a> Synthesizer<'a> {
    pub fn new(index: &'a SynthesisIndex, seed: u64, budget: usize) -> Self {
        let frg_list = (0..index.n_fragments() as u32)
            .filter(|&f| index.frg_to_tpl(f).len() >= 2)
            .collect();
        Self {
            index,
            rng: rng_from(seed),
            budget,
            produced: 0,
            target_len: None,
            exclude: None,
            frg_list,
            frg_pos: 0,
            tpl_c_list: Vec::new(),
            c_pos: 0,
            pass_yield: 0,
            started: false,
            exhausted: false,
        }
    }

    /// Only yield sequences of this length.
    pub fn with_length(mut self, len: usize) -> Self {
        self.target_len = Some(len);
        self
    }

    /// Skip sequences already present in the indexed corpus.
    pub fn excluding_corpus(mut self) -> Self {
        self.exclude = Some(self.index.sequences.iter().cloned().collect());
        self
    }

    pub fn produced(&self) -> usize {
        self.produced
    }

    /// True when the stream ended before reaching the budget.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    fn search(&mut self, frg: u32, tpl_c: u32) -> Option<Draw> {
        let index = self.index;
        let mut tpl_a_list: Vec<u32> = self.tpl_c_list.iter().copied().filter(|&t| t != tpl_c).collect();
        tpl_a_list.shuffle(&mut self.rng);
        let s_c = index.insert_ids(tpl_c, frg).ok()?;
        for tpl_a in tpl_a_list {
            let env = index.template_environment(tpl_a);
            let s_a = index.insert_ids(tpl_a, frg).ok()?;
            for &tpl_b in index.env_to_tpl(env) {
                for &frg_b in index.tpl_to_frg(tpl_b) {
                    if frg_b == frg {
                        continue;
                    }
                    let Ok(s_syn) = index.insert_ids(tpl_c, frg_b) else {
                        continue;
                    };
                    if self.target_len.is_some_and(|l| l != s_syn.len()) {
                        continue;
                    }
                    if s_syn == s_a || s_syn == s_c {
                        continue;
                    }
                    if index.insert_ids(tpl_b, frg_b).is_ok_and(|s_b| s_b == s_syn) {
                        continue;
                    }
                    if self.exclude.as_ref().is_some_and(|ex| ex.contains(&s_syn)) {
                        continue;
                    }
                    return Some(Draw {
                        symbols: s_syn,
                        fragment: frg,
                        fragment_b: frg_b,
                        template_a: tpl_a,
                        template_b: tpl_b,
                        template_c: tpl_c,
                    });
                }
            }
        }
        None
    }
}

impl Iterator for Synthesizer<'_> {
    type Item = Draw;

    fn next(&mut self) -> Option<Draw> {
        if self.produced >= self.budget || self.exhausted || self.frg_list.is_empty() {
            if self.produced < self.budget {
                self.exhausted = true;
            }
            return None;
        }
        loop {
            if self.c_pos >= self.tpl_c_list.len() {
                if self.started {
                    self.frg_pos += 1;
                }
                if !self.started || self.frg_pos >= self.frg_list.len() {
                    if self.started && self.pass_yield == 0 {
                        self.exhausted = true;
                        return None;
                    }
                    self.started = true;
                    self.pass_yield = 0;
                    self.frg_pos = 0;
                    self.frg_list.shuffle(&mut self.rng);
                }
                let frg = self.frg_list[self.frg_pos];
                self.tpl_c_list = self.index.frg_to_tpl(frg).to_vec();
                self.tpl_c_list.shuffle(&mut self.rng);
                self.c_pos = 0;
            }
            let frg = self.frg_list[self.frg_pos];
            let tpl_c = self.tpl_c_list[self.c_pos];
            self.c_pos += 1;
            if let Some(draw) = self.search(frg, tpl_c) {
                self.produced += 1;
                self.pass_yield += 1;
                return Some(draw);
            }
        }
    }
}

/// Settings of one synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdsConfig {
    /// Environment window `w`.
    pub window: usize,
    pub limits: FragmentLimits,
    pub seed: u64,
    pub budget: usize,
    /// Keep only outputs as long as the corpus series.
    pub fixed_length: bool,
    pub exclude_corpus: bool,
}

impl Default for CdsConfig {
    fn default() -> Self {
        Self {
            window: 1,
            limits: FragmentLimits::default(),
            seed: 0,
            budget: 0,
            fixed_length: true,
            exclude_corpus: false,
        }
    }
}

/// Synthetic series plus stream statistics.
#[derive(Debug, Clone)]
pub struct CdsOutput {
    pub series: Vec<SyntheticSeries>,
    pub requested: usize,
    pub exhausted: bool,
}

/// Builds the index over `sequences`, streams synthetic symbol sequences and
/// realizes them from the raw blocks of `corpus`.
pub fn synthesize_series(
    corpus: &[DenseSeries],
    sequences: &[SymbolSequence],
    cfg: &CdsConfig,
) -> Result<CdsOutput> {
    let delta = sequences.first().map(|s| s.delta).ok_or_else(|| Error::data("empty symbol corpus"))?;
    let index = SynthesisIndex::build(sequences, cfg.window, cfg.limits)?;
    let store = BlockStore::new(corpus, delta)?;
    let mut synth = Synthesizer::new(&index, cfg.seed, cfg.budget);
    if cfg.fixed_length {
        let len = sequences[0].len();
        if sequences.iter().any(|s| s.len() != len) {
            return Err(Error::data("fixed-length synthesis needs equally long sequences"));
        }
        synth = synth.with_length(len);
    }
    if cfg.exclude_corpus {
        synth = synth.excluding_corpus();
    }
    let mut pick = rng_from(derive_seed(cfg.seed, "desymbolize", 0));
    let mut series = Vec::with_capacity(cfg.budget);
    for draw in synth.by_ref() {
        let lineage = store.resolve(&index, &draw, &mut pick)?;
        let mut out = desymbolize(&draw.symbols, &lineage, &store)?;
        out.stay_id = format!("cds-{}-{}", cfg.seed, series.len());
        series.push(SyntheticSeries {
            series: out,
            lineage: Lineage::Cds(lineage),
        });
    }
    Ok(CdsOutput {
        series,
        requested: cfg.budget,
        exhausted: synth.exhausted(),
    })
}

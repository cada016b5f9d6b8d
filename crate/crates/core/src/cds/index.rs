use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{enumerate_index_sets, environment_symbols, template_symbols};
use crate::error::{Error, Result};
use crate::symbolize::{Symbol, SymbolSequence};

type KeySet = indexmap::IndexSet<Vec<Symbol>>;

/// Separator between spans in a fragment key.
const SEP: Symbol = Symbol::MAX - 1;

/// Bounds on the index sets enumerated per sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FragmentLimits {
    pub max_spans: usize,
    pub max_span_len: usize,
}

impl Default for FragmentLimits {
    fn default() -> Self {
        Self {
            max_spans: 2,
            max_span_len: 2,
        }
    }
}

/// One (sequence, index set) split that produced a fragment/template pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub seq: u32,
    pub fragment: u32,
    pub template: u32,
    pub runs: Box<[(u16, u16)]>,
}

/// Fragment, template and environment maps over a symbol corpus.
///
/// Keys are symbol contents; ids are positions in first-seen order. Map lists
/// hold each partner once, in first-seen order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisIndex {
    pub window: usize,
    pub limits: FragmentLimits,
    pub(crate) stays: Vec<String>,
    pub(crate) sequences: Vec<Vec<Symbol>>,
    fragments: KeySet,
    templates: KeySet,
    environments: KeySet,
    template_env: Vec<u32>,
    frg_to_tpl: Vec<Vec<u32>>,
    tpl_to_frg: Vec<Vec<u32>>,
    env_to_tpl: Vec<Vec<u32>>,
    occurrences: Vec<Occurrence>,
    template_occ: Vec<Vec<u32>>,
    fragment_occ: Vec<Vec<u32>>,
}

fn intern(set: &mut KeySet, key: Vec<Symbol>) -> (u32, bool) {
    let (i, new) = set.insert_full(key);
    (i as u32, new)
}

impl SynthesisIndex {
    /// Enumerates every admissible split of every sequence and fills the maps.
    pub fn build(dataset: &[SymbolSequence], window: usize, limits: FragmentLimits) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::data("cannot index an empty corpus"));
        }
        if limits.max_spans == 0 || limits.max_span_len == 0 {
            return Err(Error::param("fragment limits must be positive"));
        }
        let mut index = Self {
            window,
            limits,
            stays: Vec::with_capacity(dataset.len()),
            sequences: Vec::with_capacity(dataset.len()),
            fragments: KeySet::new(),
            templates: KeySet::new(),
            environments: KeySet::new(),
            template_env: Vec::new(),
            frg_to_tpl: Vec::new(),
            tpl_to_frg: Vec::new(),
            env_to_tpl: Vec::new(),
            occurrences: Vec::new(),
            template_occ: Vec::new(),
            fragment_occ: Vec::new(),
        };
        let mut pairs: HashSet<(u32, u32)> = HashSet::new();
        let mut sets_by_len: Vec<Option<Vec<super::IndexSet>>> = Vec::new();

        for (seq_id, seq) in dataset.iter().enumerate() {
            let symbols = &seq.symbols;
            if symbols.iter().any(|&s| s >= SEP) {
                return Err(Error::data(format!("stay {}: reserved symbol id", seq.stay_id)));
            }
            if symbols.len() > u16::MAX as usize {
                return Err(Error::data(format!("stay {}: sequence too long", seq.stay_id)));
            }
            index.stays.push(seq.stay_id.clone());
            index.sequences.push(symbols.clone());
            if symbols.len() < 2 {
                continue;
            }
            if sets_by_len.len() <= symbols.len() {
                sets_by_len.resize(symbols.len() + 1, None);
            }
            let sets = sets_by_len[symbols.len()].get_or_insert_with(|| {
                enumerate_index_sets(symbols.len(), limits.max_spans, limits.max_span_len)
            });
            for set in sets.iter() {
                let mut frg_key = Vec::with_capacity(set.size() + set.runs.len());
                for (i, &(s, l)) in set.runs.iter().enumerate() {
                    if i > 0 {
                        frg_key.push(SEP);
                    }
                    frg_key.extend_from_slice(&symbols[s..s + l]);
                }
                let tpl_key = template_symbols(symbols, &set.runs);

                let (frg, frg_new) = intern(&mut index.fragments, frg_key);
                if frg_new {
                    index.frg_to_tpl.push(Vec::new());
                    index.fragment_occ.push(Vec::new());
                }
                let (tpl, tpl_new) = intern(&mut index.templates, tpl_key);
                if tpl_new {
                    let env_key = environment_symbols(index.templates.get_index(tpl as usize).unwrap(), window);
                    let (env, env_new) = intern(&mut index.environments, env_key);
                    if env_new {
                        index.env_to_tpl.push(Vec::new());
                    }
                    index.env_to_tpl[env as usize].push(tpl);
                    index.template_env.push(env);
                    index.tpl_to_frg.push(Vec::new());
                    index.template_occ.push(Vec::new());
                }
                if pairs.insert((frg, tpl)) {
                    index.frg_to_tpl[frg as usize].push(tpl);
                    index.tpl_to_frg[tpl as usize].push(frg);
                }
                let occ = index.occurrences.len() as u32;
                index.occurrences.push(Occurrence {
                    seq: seq_id as u32,
                    fragment: frg,
                    template: tpl,
                    runs: set.runs.iter().map(|&(s, l)| (s as u16, l as u16)).collect(),
                });
                index.template_occ[tpl as usize].push(occ);
                index.fragment_occ[frg as usize].push(occ);
            }
        }
        Ok(index)
    }

    pub fn n_fragments(&self) -> usize {
        self.fragments.len()
    }

    pub fn n_templates(&self) -> usize {
        self.templates.len()
    }

    pub fn n_environments(&self) -> usize {
        self.environments.len()
    }

    pub fn n_sequences(&self) -> usize {
        self.sequences.len()
    }

    /// Spans of a fragment.
    pub fn fragment_spans(&self, id: u32) -> Vec<&[Symbol]> {
        self.fragments[id as usize].split(|&s| s == SEP).collect()
    }

    /// Template symbols with [`SLOT`] markers.
    pub fn template_symbols(&self, id: u32) -> &[Symbol] {
        &self.templates[id as usize]
    }

    pub fn environment_symbols(&self, id: u32) -> &[Symbol] {
        &self.environments[id as usize]
    }

    pub fn fragment_id(&self, spans: &[Vec<Symbol>]) -> Option<u32> {
        let key: Vec<Symbol> = spans.join(&SEP);
        self.fragments.get_index_of(&key).map(|i| i as u32)
    }

    pub fn template_id(&self, symbols: &[Symbol]) -> Option<u32> {
        self.templates.get_index_of(symbols).map(|i| i as u32)
    }

    pub fn environment_id(&self, symbols: &[Symbol]) -> Option<u32> {
        self.environments.get_index_of(symbols).map(|i| i as u32)
    }

    /// Environment id of a template.
    pub fn template_environment(&self, tpl: u32) -> u32 {
        self.template_env[tpl as usize]
    }

    pub fn frg_to_tpl(&self, frg: u32) -> &[u32] {
        &self.frg_to_tpl[frg as usize]
    }

    pub fn tpl_to_frg(&self, tpl: u32) -> &[u32] {
        &self.tpl_to_frg[tpl as usize]
    }

    pub fn env_to_tpl(&self, env: u32) -> &[u32] {
        &self.env_to_tpl[env as usize]
    }

    pub fn occurrence(&self, id: u32) -> &Occurrence {
        &self.occurrences[id as usize]
    }

    /// Splits that produced the template.
    pub fn template_occurrences(&self, tpl: u32) -> &[u32] {
        &self.template_occ[tpl as usize]
    }

    /// Splits that produced the fragment.
    pub fn fragment_occurrences(&self, frg: u32) -> &[u32] {
        &self.fragment_occ[frg as usize]
    }

    pub fn stay(&self, seq: u32) -> &str {
        &self.stays[seq as usize]
    }

    pub fn sequence(&self, seq: u32) -> &[Symbol] {
        &self.sequences[seq as usize]
    }

    /// `insert(template, fragment)` over interned ids.
    pub fn insert_ids(&self, tpl: u32, frg: u32) -> Result<Vec<Symbol>> {
        let spans = self.fragment_spans(frg);
        super::insert_spans(self.template_symbols(tpl), spans.into_iter())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

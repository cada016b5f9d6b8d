use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::index::SynthesisIndex;
use super::synth::Draw;
use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::symbolize::Symbol;

/// Where the blocks of a synthetic sequence come from.
///
/// `template_runs` are the removed runs of the template's source stay;
/// `fragment_runs` are the runs of the fragment's source stay, in slot order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdsLineage {
    pub template_stay: String,
    pub template_runs: Vec<(usize, usize)>,
    pub fragment_stay: String,
    pub fragment_runs: Vec<(usize, usize)>,
    pub symbols: Vec<Symbol>,
}

/// Raw series addressable by stay id, cut into blocks of `delta` hours.
pub struct BlockStore<'a> {
    delta: usize,
    by_stay: HashMap<&'a str, &'a DenseSeries>,
}

impl<'a> BlockStore<'a> {
    pub fn new(corpus: &'a [DenseSeries], delta: usize) -> Result<Self> {
        if delta == 0 {
            return Err(Error::param("block length must be positive"));
        }
        let mut by_stay = HashMap::with_capacity(corpus.len());
        for s in corpus {
            if by_stay.insert(s.stay_id.as_str(), s).is_some() {
                return Err(Error::data(format!("duplicate stay id {}", s.stay_id)));
            }
        }
        Ok(Self { delta, by_stay })
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn get(&self, stay: &str) -> Result<&'a DenseSeries> {
        self.by_stay
            .get(stay)
            .copied()
            .ok_or_else(|| Error::data(format!("unresolved provenance: stay {stay}")))
    }

    /// Picks, uniformly at random, a source split for the template `t_c` and one
    /// for the fragment `f_b` of a draw.
    pub fn resolve(&self, index: &SynthesisIndex, draw: &Draw, rng: &mut Rng) -> Result<CdsLineage> {
        let pick = |occ: &[u32], rng: &mut Rng| -> Result<u32> {
            if occ.is_empty() {
                return Err(Error::data("unresolved provenance: no source split"));
            }
            Ok(occ[rng.random_range(0..occ.len())])
        };
        let t = index.occurrence(pick(index.template_occurrences(draw.template_c), rng)?);
        let f = index.occurrence(pick(index.fragment_occurrences(draw.fragment_b), rng)?);
        let runs = |r: &[(u16, u16)]| r.iter().map(|&(s, l)| (s as usize, l as usize)).collect();
        Ok(CdsLineage {
            template_stay: index.stay(t.seq).to_string(),
            template_runs: runs(&t.runs),
            fragment_stay: index.stay(f.seq).to_string(),
            fragment_runs: runs(&f.runs),
            symbols: draw.symbols.clone(),
        })
    }
}

fn check_runs(runs: &[(usize, usize)], n_blocks: usize, stay: &str) -> Result<()> {
    let mut end = 0;
    for (i, &(s, l)) in runs.iter().enumerate() {
        if l == 0 || s + l > n_blocks || (i > 0 && s <= end) {
            return Err(Error::data(format!("unresolved provenance: runs {runs:?} in stay {stay}")));
        }
        end = s + l;
    }
    Ok(())
}

/// Realizes a synthetic symbol sequence as a dense series.
///
/// Template positions copy the blocks of the template's source stay; each slot
/// copies the blocks of the matching fragment run of the fragment's source stay.
pub fn desymbolize(symbols: &[Symbol], lineage: &CdsLineage, store: &BlockStore<'_>) -> Result<DenseSeries> {
    let delta = store.delta;
    let tpl_src = store.get(&lineage.template_stay)?;
    let frg_src = store.get(&lineage.fragment_stay)?;
    check_runs(&lineage.template_runs, tpl_src.len() / delta, &lineage.template_stay)?;
    check_runs(&lineage.fragment_runs, frg_src.len() / delta, &lineage.fragment_stay)?;
    if lineage.template_runs.len() != lineage.fragment_runs.len() {
        return Err(Error::data("template slots and fragment spans differ in number"));
    }

    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut copy = |src: &DenseSeries, from_block: usize, to_block: usize| {
        values.extend_from_slice(&src.values[from_block * delta..to_block * delta]);
        mask.extend_from_slice(&src.mask[from_block * delta..to_block * delta]);
    };
    let mut pos = 0;
    for (&(ts, tl), &(fs, fl)) in lineage.template_runs.iter().zip(&lineage.fragment_runs) {
        copy(tpl_src, pos, ts);
        copy(frg_src, fs, fs + fl);
        pos = ts + tl;
    }
    copy(tpl_src, pos, tpl_src.len() / delta);

    if values.len() != symbols.len() * delta {
        return Err(Error::data(format!(
            "lineage realizes {} hours but the sequence needs {}",
            values.len(),
            symbols.len() * delta
        )));
    }
    Ok(DenseSeries {
        stay_id: format!("cds:{}:{}", lineage.template_stay, lineage.fragment_stay),
        values,
        mask,
    })
}

//! Compositional data synthesis over symbol sequences.
//!
//! A sequence is split by an index set into a *fragment* (the symbols at the
//! selected positions, grouped into maximal consecutive runs) and a *template*
//! (the remaining symbols with one slot per run). The *environment* of a template
//! keeps the symbols within a window around its slots. Fragments that occur in the
//! same environment are treated as interchangeable and are swapped into other
//! templates that host a shared fragment.
//!
//! [`SynthesisIndex`] holds the fragment/template/environment maps,
//! [`Synthesizer`] walks them to produce new symbol sequences and
//! [`desymbolize`] realizes those sequences as dense series by copying the raw
//! blocks the symbols came from.

mod desymbolize;
mod index;
mod synth;

pub use desymbolize::{desymbolize, BlockStore, CdsLineage};
pub use index::{FragmentLimits, Occurrence, SynthesisIndex};
pub use synth::{synthesize_series, CdsConfig, CdsOutput, Draw, Synthesizer};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolize::Symbol;

/// Slot marker inside templates and environments.
pub const SLOT: Symbol = Symbol::MAX;

/// Index set stored as maximal runs `(start, len)`, zero-based and increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet {
    pub runs: Vec<(usize, usize)>,
}

impl IndexSet {
    /// Builds an index set from arbitrary positions, merging consecutive ones.
    pub fn from_positions(positions: &[usize]) -> Self {
        let mut sorted = positions.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut runs: Vec<(usize, usize)> = Vec::new();
        for p in sorted {
            match runs.last_mut() {
                Some((start, len)) if *start + *len == p => *len += 1,
                _ => runs.push((p, 1)),
            }
        }
        Self { runs }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.runs.iter().any(|&(s, l)| i >= s && i < s + l)
    }

    pub fn size(&self) -> usize {
        self.runs.iter().map(|r| r.1).sum()
    }

    fn check(&self, len: usize) -> Result<()> {
        let mut prev_end: Option<usize> = None;
        for &(s, l) in &self.runs {
            if l == 0 || s + l > len || prev_end.is_some_and(|e| s <= e) {
                return Err(Error::param(format!("index set {:?} invalid for length {len}", self.runs)));
            }
            prev_end = Some(s + l);
        }
        if self.runs.is_empty() {
            return Err(Error::param("empty index set"));
        }
        Ok(())
    }
}

/// Symbols removed from a sequence, one span per maximal run of the index set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fragment {
    pub spans: Vec<Vec<Symbol>>,
}

/// Remaining symbols with [`SLOT`] in place of each removed run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Template {
    pub symbols: Vec<Symbol>,
}

impl Template {
    pub fn slot_count(&self) -> usize {
        self.symbols.iter().filter(|&&s| s == SLOT).count()
    }
}

/// Slot-adjacent context of a template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Environment {
    pub symbols: Vec<Symbol>,
}

pub fn fragment(seq: &[Symbol], idx: &IndexSet) -> Result<Fragment> {
    idx.check(seq.len())?;
    Ok(Fragment {
        spans: idx.runs.iter().map(|&(s, l)| seq[s..s + l].to_vec()).collect(),
    })
}

pub fn template(seq: &[Symbol], idx: &IndexSet) -> Result<Template> {
    idx.check(seq.len())?;
    Ok(Template {
        symbols: template_symbols(seq, &idx.runs),
    })
}

pub(crate) fn template_symbols(seq: &[Symbol], runs: &[(usize, usize)]) -> Vec<Symbol> {
    let mut out = Vec::with_capacity(seq.len());
    let mut pos = 0;
    for &(s, l) in runs {
        out.extend_from_slice(&seq[pos..s]);
        out.push(SLOT);
        pos = s + l;
    }
    out.extend_from_slice(&seq[pos..]);
    out
}

/// Environment of `t`: positions whose `w`-window contains a slot.
pub fn environment_of(t: &Template, w: usize) -> Environment {
    Environment {
        symbols: environment_symbols(&t.symbols, w),
    }
}

pub(crate) fn environment_symbols(t: &[Symbol], w: usize) -> Vec<Symbol> {
    let k = t.len();
    (0..k)
        .filter(|&i| {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(k.saturating_sub(1));
            t[lo..=hi].contains(&SLOT)
        })
        .map(|i| t[i])
        .collect()
}

/// Replaces the slots of `t`, in order, with the spans of `f`.
pub fn insert(t: &Template, f: &Fragment) -> Result<Vec<Symbol>> {
    insert_spans(&t.symbols, f.spans.iter().map(Vec::as_slice))
}

pub(crate) fn insert_spans<'a>(
    template: &[Symbol],
    spans: impl ExactSizeIterator<Item = &'a [Symbol]>,
) -> Result<Vec<Symbol>> {
    let slots = template.iter().filter(|&&s| s == SLOT).count();
    if slots != spans.len() {
        return Err(Error::param(format!(
            "template has {slots} slots but fragment has {} spans",
            spans.len()
        )));
    }
    let mut spans = spans;
    let mut out = Vec::with_capacity(template.len() + 4);
    for &s in template {
        if s == SLOT {
            out.extend_from_slice(spans.next().expect("counted"));
        } else {
            out.push(s);
        }
    }
    Ok(out)
}

/// All index sets of a length-`len` sequence with at most `max_spans` maximal
/// runs, each at most `max_span_len` long, excluding the full sequence.
pub fn enumerate_index_sets(len: usize, max_spans: usize, max_span_len: usize) -> Vec<IndexSet> {
    fn rec(
        from: usize,
        len: usize,
        spans_left: usize,
        max_span_len: usize,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<IndexSet>,
    ) {
        if spans_left == 0 {
            return;
        }
        for start in from..len {
            for l in 1..=max_span_len.min(len - start) {
                current.push((start, l));
                out.push(IndexSet { runs: current.clone() });
                // next run must leave a gap so runs stay maximal
                rec(start + l + 1, len, spans_left - 1, max_span_len, current, out);
                current.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(0, len, max_spans, max_span_len, &mut Vec::new(), &mut out);
    out.retain(|s| s.size() < len);
    out
}

/// Fragment/template pairs of a sequence for every admissible index set.
pub fn enumerate_fragments(
    seq: &[Symbol],
    max_spans: usize,
    max_span_len: usize,
) -> Vec<(IndexSet, Fragment, Template)> {
    if seq.len() < 2 {
        return Vec::new();
    }
    enumerate_index_sets(seq.len(), max_spans, max_span_len)
        .into_iter()
        .map(|idx| {
            let f = fragment(seq, &idx).expect("enumerated sets are valid");
            let t = template(seq, &idx).expect("enumerated sets are valid");
            (idx, f, t)
        })
        .collect()
}

//! Symbol n-gram distributions and the Hellinger distance between them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolize::{Symbol, SymbolSequence};

/// Counts of the order-`n` symbol grams of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramDistribution {
    pub order: usize,
    pub counts: BTreeMap<Vec<Symbol>, u64>,
    pub total: u64,
}

impl NgramDistribution {
    /// Grams never cross sequence boundaries.
    pub fn from_sequences<'a>(sequences: impl IntoIterator<Item = &'a [Symbol]>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::param("n-gram order must be positive"));
        }
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for seq in sequences {
            for gram in seq.windows(order) {
                *counts.entry(gram.to_vec()).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::data(format!("corpus has no {order}-grams")));
        }
        Ok(Self { order, counts, total })
    }

    pub fn from_corpus(corpus: &[SymbolSequence], order: usize) -> Result<Self> {
        Self::from_sequences(corpus.iter().map(|s| s.symbols.as_slice()), order)
    }

    pub fn probability(&self, gram: &[Symbol]) -> f64 {
        self.counts.get(gram).map_or(0.0, |&c| c as f64 / self.total as f64)
    }
}

/// `(1/√2)·‖√p − √q‖₂` over the union support.
pub fn hellinger(p: &NgramDistribution, q: &NgramDistribution) -> Result<f64> {
    if p.order != q.order {
        return Err(Error::param(format!("order {} compared with order {}", p.order, q.order)));
    }
    let mut sum = 0.0;
    for gram in p.counts.keys() {
        let d = p.probability(gram).sqrt() - q.probability(gram).sqrt();
        sum += d * d;
    }
    for gram in q.counts.keys() {
        if !p.counts.contains_key(gram) {
            sum += q.probability(gram);
        }
    }
    Ok((sum / 2.0).sqrt().min(1.0))
}

/// Hellinger distance between explicit probability vectors on a shared support.
pub fn hellinger_vectors(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::shape("probability vectors of different length"));
    }
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok((s / 2.0).sqrt())
}

/// Distances between train, test and synthetic corpora at one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramRow {
    pub order: usize,
    pub train_test: f64,
    pub synthetic_test: f64,
    pub synthetic_train: f64,
}

/// The H(Tr,Te), H(S,Te), H(S,Tr) table for each requested order.
pub fn ngram_profile(
    train: &[SymbolSequence],
    test: &[SymbolSequence],
    synthetic: &[SymbolSequence],
    orders: &[usize],
) -> Result<Vec<NgramRow>> {
    if train.is_empty() || test.is_empty() || synthetic.is_empty() {
        return Err(Error::data("n-gram profile needs three non-empty corpora"));
    }
    orders
        .iter()
        .map(|&n| {
            let tr = NgramDistribution::from_corpus(train, n)?;
            let te = NgramDistribution::from_corpus(test, n)?;
            let s = NgramDistribution::from_corpus(synthetic, n)?;
            Ok(NgramRow {
                order: n,
                train_test: hellinger(&tr, &te)?,
                synthetic_test: hellinger(&s, &te)?,
                synthetic_train: hellinger(&s, &tr)?,
            })
        })
        .collect()
}

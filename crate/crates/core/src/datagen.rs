//! Ground-truth compositional generator.
//!
//! Latent physiological states follow a Markov chain over blocks; each state
//! emits a block of `block_len` hours from its own mean pattern plus Gaussian
//! noise, and each cell is observed with a per-state, per-feature probability.
//! Emission is applied block by block, so composing states and then emitting
//! equals emitting each state and concatenating.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, Rng};
use crate::symbolize::{Symbol, SymbolSequence};

/// Emission of one latent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEmission {
    /// `block_len × |F|` mean pattern.
    pub mean: Vec<Vec<f64>>,
    pub noise: f64,
    /// Per-feature probability that a cell is observed.
    pub observe: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStateModel {
    pub states: Vec<String>,
    pub features: Vec<String>,
    pub block_len: usize,
    pub initial: Vec<f64>,
    /// Row-stochastic `|Z| × |Z|` transition matrix.
    pub transition: Vec<Vec<f64>>,
    pub emission: Vec<StateEmission>,
}

fn check_stochastic(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::data(format!("{what} has entries outside [0, 1]")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::data(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

fn draw_index(rng: &mut Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl LatentStateModel {
    /// Four states over six vital-sign-like features, three-hour blocks.
    pub fn fig1() -> Self {
        let states = ["healthy", "lung-failure", "cardiac-failure", "infection"];
        let features = ["hr", "sbp", "dbp", "mbp", "rr", "spo2"];
        let levels = [
            [0.0, 0.2, 0.2, 0.2, -0.2, 0.6],
            [0.8, 0.3, 0.1, 0.2, 1.8, -1.8],
            [-0.7, -1.6, -1.4, -1.5, 0.4, -0.3],
            [1.7, -0.6, -0.9, -0.8, 1.0, -0.2],
        ];
        let slopes = [
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.1, 0.0, 0.0, 0.0, 0.25, -0.15],
            [-0.1, -0.2, -0.15, -0.2, 0.0, 0.0],
            [0.25, -0.1, -0.1, -0.1, 0.1, 0.0],
        ];
        let observe = [
            [0.95, 0.9, 0.9, 0.9, 0.85, 0.9],
            [0.95, 0.9, 0.9, 0.9, 0.95, 0.95],
            [0.95, 0.95, 0.95, 0.95, 0.85, 0.9],
            [0.95, 0.9, 0.9, 0.9, 0.9, 0.9],
        ];
        let block_len = 3;
        let emission = (0..4)
            .map(|z| StateEmission {
                mean: (0..block_len)
                    .map(|t| (0..6).map(|f| levels[z][f] + slopes[z][f] * (t as f64 - 1.0)).collect())
                    .collect(),
                noise: 0.3,
                observe: observe[z].to_vec(),
            })
            .collect();
        Self {
            states: states.iter().map(|s| s.to_string()).collect(),
            features: features.iter().map(|s| s.to_string()).collect(),
            block_len,
            initial: vec![0.4, 0.2, 0.2, 0.2],
            transition: vec![
                vec![0.97, 0.01, 0.01, 0.01],
                vec![0.02, 0.96, 0.005, 0.015],
                vec![0.02, 0.005, 0.96, 0.015],
                vec![0.02, 0.01, 0.01, 0.96],
            ],
            emission,
        }
    }

    /// Same model with every noise scale replaced.
    pub fn with_noise(mut self, noise: f64) -> Self {
        self.emission.iter_mut().for_each(|e| e.noise = noise);
        self
    }

    /// Same model with every cell observed.
    pub fn fully_observed(mut self) -> Self {
        self.emission.iter_mut().for_each(|e| e.observe.iter_mut().for_each(|p| *p = 1.0));
        self
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn validate(&self) -> Result<()> {
        let z = self.states.len();
        let f = self.features.len();
        if z == 0 || f == 0 || self.block_len == 0 {
            return Err(Error::data("model needs states, features and a positive block length"));
        }
        if self.initial.len() != z || self.transition.len() != z || self.emission.len() != z {
            return Err(Error::shape("initial, transition and emission must cover every state"));
        }
        check_stochastic(&self.initial, "initial distribution")?;
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != z {
                return Err(Error::shape(format!("transition row {i} has {} entries", row.len())));
            }
            check_stochastic(row, &format!("transition row {i}"))?;
        }
        for (i, e) in self.emission.iter().enumerate() {
            if e.mean.len() != self.block_len || e.mean.iter().any(|r| r.len() != f) {
                return Err(Error::shape(format!("state {i} mean pattern is not {}x{f}", self.block_len)));
            }
            if !(e.noise >= 0.0 && e.noise.is_finite()) {
                return Err(Error::data(format!("state {i} noise scale must be non-negative")));
            }
            if e.observe.len() != f || e.observe.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::data(format!("state {i} observation probabilities must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the model's JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("model serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Latent path of `n_blocks` states.
    pub fn sample_path(&self, n_blocks: usize, rng: &mut Rng) -> Vec<Symbol> {
        let mut path = Vec::with_capacity(n_blocks);
        if n_blocks == 0 {
            return path;
        }
        let mut z = draw_index(rng, &self.initial);
        path.push(z as Symbol);
        for _ in 1..n_blocks {
            z = draw_index(rng, &self.transition[z]);
            path.push(z as Symbol);
        }
        path
    }

    /// Emits one block of `state`, appending rows to `values` and `mask`.
    pub fn emit_block(&self, state: Symbol, rng: &mut Rng, values: &mut Vec<Vec<f64>>, mask: &mut Vec<Vec<u8>>) {
        let e = &self.emission[state as usize];
        let normal = Normal::new(0.0, e.noise).expect("validated noise scale");
        for row in &e.mean {
            let mut v = vec![0.0; row.len()];
            let mut m = vec![0u8; row.len()];
            for (f, &mu) in row.iter().enumerate() {
                let observed = e.observe[f] >= 1.0 || rng.random::<f64>() < e.observe[f];
                let noise = if e.noise > 0.0 { normal.sample(rng) } else { 0.0 };
                if observed {
                    v[f] = mu + noise;
                    m[f] = 1;
                }
            }
            values.push(v);
            mask.push(m);
        }
    }

    /// Emits a whole latent path block by block.
    pub fn emit(&self, path: &[Symbol], rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<Vec<u8>>) {
        let mut values = Vec::with_capacity(path.len() * self.block_len);
        let mut mask = Vec::with_capacity(path.len() * self.block_len);
        for &z in path {
            self.emit_block(z, rng, &mut values, &mut mask);
        }
        (values, mask)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPath {
    pub stay_id: String,
    pub states: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    pub series: Vec<DenseSeries>,
    pub latent: Vec<LatentPath>,
    pub seed: u64,
    pub model_hash: String,
}

/// Samples `n_stays` stays of `hours` hours; stay `i` uses its own derived seed.
pub fn sample_corpus(model: &LatentStateModel, n_stays: usize, hours: usize, seed: u64) -> Result<GeneratedCorpus> {
    model.validate()?;
    if hours == 0 || !hours.is_multiple_of(model.block_len) {
        return Err(Error::param(format!(
            "T = {hours} is not a positive multiple of the block length {}",
            model.block_len
        )));
    }
    let n_blocks = hours / model.block_len;
    let stays: Vec<(DenseSeries, LatentPath)> = (0..n_stays)
        .into_par_iter()
        .map(|i| {
            let mut rng = derived_rng(seed, "stay", i as u64);
            let states = model.sample_path(n_blocks, &mut rng);
            let (values, mask) = model.emit(&states, &mut rng);
            let stay_id = format!("g{seed}-{i:05}");
            let series = DenseSeries { stay_id: stay_id.clone(), values, mask };
            (series, LatentPath { stay_id, states })
        })
        .collect();
    let (series, latent) = stays.into_iter().unzip();
    Ok(GeneratedCorpus { series, latent, seed, model_hash: model.hash() })
}

/// Ground-truth symbols: each block's latent state.
pub fn oracle_symbolize(corpus: &GeneratedCorpus, block_len: usize) -> Vec<SymbolSequence> {
    corpus
        .latent
        .iter()
        .map(|p| SymbolSequence {
            stay_id: p.stay_id.clone(),
            delta: block_len,
            symbols: p.states.clone(),
            provenance: (0..p.states.len()).map(|b| (p.stay_id.clone(), b)).collect(),
        })
        .collect()
}

/// Empirical transition frequencies pooled over all paths.
pub fn transition_frequencies(paths: &[LatentPath], n_states: usize) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0u64; n_states]; n_states];
    for p in paths {
        for w in p.states.windows(2) {
            counts[w[0] as usize][w[1] as usize] += 1;
        }
    }
    counts
        .into_iter()
        .map(|row| {
            let n: u64 = row.iter().sum();
            row.into_iter().map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::symbolize::{adjusted_rand_index, all_blocks, random_centroids, symbolize_all};

    #[test]
    fn preset_is_valid_and_hash_is_stable() {
        let m = LatentStateModel::fig1();
        m.validate().unwrap();
        assert_eq!(m.n_states(), 4);
        assert_eq!(m.hash(), LatentStateModel::fig1().hash());
        assert_ne!(m.hash(), m.clone().with_noise(0.0).hash());
    }

    #[test]
    fn non_stochastic_rows_are_rejected() {
        let mut m = LatentStateModel::fig1();
        m.transition[1][1] = 0.9;
        assert_eq!(sample_corpus(&m, 2, 48, 0).unwrap_err().kind(), "data");
        assert!(sample_corpus(&LatentStateModel::fig1(), 2, 47, 0).is_err());
    }

    #[test]
    fn noise_free_blocks_equal_their_means() {
        let m = LatentStateModel::fig1().with_noise(0.0).fully_observed();
        let c = sample_corpus(&m, 20, 48, 3).unwrap();
        for (s, p) in c.series.iter().zip(&c.latent) {
            assert_eq!(p.states.len(), 16);
            for (b, &z) in p.states.iter().enumerate() {
                assert_eq!(&s.values[3 * b..3 * b + 3], &m.emission[z as usize].mean[..]);
            }
            assert!(s.mask.iter().flatten().all(|&x| x == 1));
        }
    }

    #[test]
    fn identity_transitions_keep_the_state() {
        let mut m = LatentStateModel::fig1();
        m.transition = (0..4).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let c = sample_corpus(&m, 30, 48, 1).unwrap();
        for p in &c.latent {
            assert!(p.states.iter().all(|&z| z == p.states[0]));
        }
    }

    #[test]
    fn transition_frequencies_match_the_matrix() {
        let m = LatentStateModel::fig1();
        let mut rng = rng_from(11);
        let path = LatentPath { stay_id: "long".into(), states: m.sample_path(100_001, &mut rng) };
        let freq = transition_frequencies(&[path], 4);
        for i in 0..4 {
            for j in 0..4 {
                assert!((freq[i][j] - m.transition[i][j]).abs() < 0.01, "cell {i},{j}: {}", freq[i][j]);
            }
        }
    }

    #[test]
    fn emission_is_a_homomorphism_without_noise() {
        let m = LatentStateModel::fig1().with_noise(0.0).fully_observed();
        let a: Vec<Symbol> = vec![0, 2, 2, 1];
        let b: Vec<Symbol> = vec![3, 0];
        let mut rng = rng_from(0);
        let joined: Vec<Symbol> = a.iter().chain(&b).copied().collect();
        let (whole, _) = m.emit(&joined, &mut rng);
        let (mut left, _) = m.emit(&a, &mut rng);
        let (right, _) = m.emit(&b, &mut rng);
        left.extend(right);
        assert_eq!(whole, left);
    }

    #[test]
    fn oracle_symbols_follow_the_latent_path() {
        let m = LatentStateModel::fig1();
        let mut c = sample_corpus(&m, 10, 48, 5).unwrap();
        let seqs = oracle_symbolize(&c, 3);
        assert_eq!(seqs[0].symbols, c.latent[0].states);
        let alphabet: std::collections::BTreeSet<Symbol> = seqs.iter().flat_map(|s| s.symbols.clone()).collect();
        assert!(alphabet.len() <= 4);
        c.latent.reverse();
        assert_eq!(oracle_symbolize(&c, 3)[0].symbols, seqs[9].symbols);
    }

    #[test]
    fn zero_noise_symbolization_recovers_states() {
        let m = LatentStateModel::fig1().with_noise(0.0).fully_observed();
        let c = sample_corpus(&m, 50, 48, 2).unwrap();
        let space = random_centroids(&all_blocks(&c.series, 3).unwrap(), 4, 1).unwrap();
        let learned: Vec<usize> = symbolize_all(&c.series, 3, &space, None)
            .unwrap()
            .iter()
            .flat_map(|s| s.symbols.iter().map(|&x| x as usize))
            .collect();
        let truth: Vec<usize> = c.latent.iter().flat_map(|p| p.states.iter().map(|&x| x as usize)).collect();
        assert_eq!(adjusted_rand_index(&learned, &truth).unwrap(), 1.0);
    }

    #[test]
    fn corpus_is_deterministic() {
        let m = LatentStateModel::fig1();
        assert_eq!(sample_corpus(&m, 5, 48, 9).unwrap(), sample_corpus(&m, 5, 48, 9).unwrap());
    }
}

//! Real-versus-synthetic classification: `|0.5 − accuracy|` of a logistic model.

use serde::{Deserialize, Serialize};

use super::stats::sample_sd;
use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminativeConfig {
    pub runs: usize,
    pub seed: u64,
    /// Cap on series drawn from each corpus per run.
    pub max_per_class: usize,
    pub test_fraction: f64,
    pub l2: f64,
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for DiscriminativeConfig {
    fn default() -> Self {
        Self {
            runs: 10,
            seed: 0,
            max_per_class: 1000,
            test_fraction: 0.2,
            l2: 1e-2,
            iterations: 150,
            learning_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminativeScore {
    pub mean: f64,
    pub sd: f64,
    pub per_run: Vec<f64>,
}

/// Values, masks and absolute hour-to-hour changes, flattened.
pub fn series_features(s: &DenseSeries) -> Vec<f64> {
    let mut v: Vec<f64> = s.values.iter().flatten().copied().collect();
    v.extend(s.mask.iter().flatten().map(|&m| f64::from(m)));
    for w in s.values.windows(2) {
        v.extend(w[1].iter().zip(&w[0]).map(|(b, a)| (b - a).abs()));
    }
    v
}

/// L2-regularized logistic regression fitted by full-batch Adam on standardized inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    mean: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
}

impl Logistic {
    pub fn fit(x: &[Vec<f64>], y: &[bool], l2: f64, iterations: usize, lr: f64) -> Self {
        let n = x.len() as f64;
        let d = x[0].len();
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in x {
            for j in 0..d {
                scale[j] += (r[j] - mean[j]).powi(2) / n;
            }
        }
        scale.iter_mut().for_each(|s| *s = if *s > 1e-12 { 1.0 / s.sqrt() } else { 0.0 });
        let z: Vec<Vec<f64>> = x.iter().map(|r| (0..d).map(|j| (r[j] - mean[j]) * scale[j]).collect()).collect();
        let mut w = vec![0.0; d + 1];
        let (mut m1, mut m2) = (vec![0.0; d + 1], vec![0.0; d + 1]);
        let mut g = vec![0.0; d + 1];
        for t in 1..=iterations {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (r, &label) in z.iter().zip(y) {
                let logit = w[d] + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                let err = sigmoid(logit) - f64::from(u8::from(label));
                for j in 0..d {
                    g[j] += err * r[j] / n;
                }
                g[d] += err / n;
            }
            for j in 0..d {
                g[j] += l2 * w[j];
            }
            let (c1, c2) = (1.0 - 0.9f64.powi(t as i32), 1.0 - 0.999f64.powi(t as i32));
            for j in 0..=d {
                m1[j] = 0.9 * m1[j] + 0.1 * g[j];
                m2[j] = 0.999 * m2[j] + 0.001 * g[j] * g[j];
                w[j] -= lr * (m1[j] / c1) / ((m2[j] / c2).sqrt() + 1e-8);
            }
        }
        let bias = w.pop().unwrap_or(0.0);
        Self { mean, scale, weights: w, bias }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        let logit = self.bias
            + x.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .zip(&self.weights)
                .map(|(((v, m), s), w)| (v - m) * s * w)
                .sum::<f64>();
        logit > 0.0
    }
}

/// Random order keyed on stay id, so copies of a stay sit at the same rank.
fn keyed_order(series: &[DenseSeries], seed: u64) -> Vec<usize> {
    let mut idx: Vec<(u64, usize)> = series.iter().enumerate().map(|(i, s)| (derive_seed(seed, &s.stay_id, 0), i)).collect();
    idx.sort_unstable();
    idx.into_iter().map(|(_, i)| i).collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean and SD over runs of `|0.5 − held-out accuracy|`.
///
/// Each run draws equally many series from both corpora, splits them into a
/// stratified training and test part, and fits a fresh classifier.
pub fn discriminative_score(
    original: &[DenseSeries],
    synthetic: &[DenseSeries],
    cfg: &DiscriminativeConfig,
) -> Result<DiscriminativeScore> {
    let m = original.len().min(synthetic.len()).min(cfg.max_per_class);
    if m < 5 {
        return Err(Error::data(format!(
            "class imbalance: need at least 5 series per class, have {} original and {} synthetic",
            original.len(),
            synthetic.len()
        )));
    }
    if cfg.runs == 0 {
        return Err(Error::param("at least one run is required"));
    }
    let n_test = ((m as f64 * cfg.test_fraction).round() as usize).clamp(1, m - 1);
    let feats_o: Vec<Vec<f64>> = original.iter().map(series_features).collect();
    let feats_s: Vec<Vec<f64>> = synthetic.iter().map(series_features).collect();
    if feats_o.iter().chain(&feats_s).any(|f| f.len() != feats_o[0].len()) {
        return Err(Error::shape("series of different shapes"));
    }
    let mut per_run = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let run_seed = derive_seed(cfg.seed, "discriminative", run as u64);
        let io = keyed_order(original, run_seed);
        let is = keyed_order(synthetic, run_seed);
        let (mut xtr, mut ytr, mut xte, mut yte) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (k, (&a, &b)) in io.iter().zip(&is).take(m).enumerate() {
            let (x, y) = if k < n_test { (&mut xte, &mut yte) } else { (&mut xtr, &mut ytr) };
            x.push(feats_o[a].clone());
            y.push(false);
            x.push(feats_s[b].clone());
            y.push(true);
        }
        let clf = Logistic::fit(&xtr, &ytr, cfg.l2, cfg.iterations, cfg.learning_rate);
        let correct = xte.iter().zip(&yte).filter(|(x, &y)| clf.predict(x) == y).count();
        per_run.push((0.5 - correct as f64 / xte.len() as f64).abs());
    }
    let mean = per_run.iter().sum::<f64>() / per_run.len() as f64;
    Ok(DiscriminativeScore { mean, sd: sample_sd(&per_run), per_run })
}

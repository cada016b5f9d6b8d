//! The two domain-adaptation tests.
//!
//! Test 1 compares the original-test risk of models trained on synthetic data
//! with that of models trained on original data. Test 2 compares the risk of
//! one original-trained model on synthetic and on original test data.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean_se, sample_variance};
use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::forecast::{train, ForecastConfig, ForecastModel, TrainConfig};

/// One synthetic training corpus and the seed that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub seed: u64,
    pub series: Vec<DenseSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRisk {
    pub corpus: String,
    pub train_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbolization_seed: Option<u64>,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Test1Result {
    pub epsilon_hat: f64,
    pub se: f64,
    pub synthetic: Vec<RunRisk>,
    pub original: Vec<RunRisk>,
}

impl Test1Result {
    pub fn per_run(&self) -> Vec<RunRisk> {
        self.synthetic.iter().chain(&self.original).cloned().collect()
    }
}

/// Standard error of a difference of two independent means.
pub fn difference_se(a: &[f64], b: &[f64]) -> f64 {
    let va = if a.len() > 1 { sample_variance(a) / a.len() as f64 } else { 0.0 };
    let vb = if b.len() > 1 { sample_variance(b) / b.len() as f64 } else { 0.0 };
    (va + vb).sqrt()
}

fn check_disjoint(train: &[DenseSeries], test: &[DenseSeries]) -> Result<()> {
    let ids: HashSet<&str> = train.iter().map(|s| s.stay_id.as_str()).collect();
    if let Some(s) = test.iter().find(|s| ids.contains(s.stay_id.as_str())) {
        return Err(Error::data(format!("stay {} is in both the training and the test set", s.stay_id)));
    }
    Ok(())
}

/// Trains one model per job in parallel; any failure fails the batch with a count.
fn run_jobs(
    jobs: Vec<(RunRisk, &[DenseSeries])>,
    test: &[DenseSeries],
    model: &ForecastConfig,
    tc: &TrainConfig,
) -> Result<Vec<RunRisk>> {
    let total = jobs.len();
    let results: Vec<Result<RunRisk>> = jobs
        .into_par_iter()
        .map(|(mut run, data)| {
            let cfg = TrainConfig { seed: run.train_seed, ..tc.clone() };
            let trained = train(model, data, &cfg)?;
            run.mse = trained.model.rollout_mse(test)?;
            Ok(run)
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        let first = results.into_iter().find_map(|r| r.err()).expect("a failure exists");
        let msg = format!("{failed} of {total} training runs failed; first: {first}");
        return Err(match first {
            Error::Numeric(_) => Error::Numeric(msg),
            Error::Param(_) => Error::Param(msg),
            _ => Error::Data(msg),
        });
    }
    Ok(results.into_iter().map(|r| r.expect("checked")).collect())
}

/// Test 1: `ε̂ = mean(synthetic-trained risk) − mean(original-trained risk)`,
/// all risks measured on the original test set.
pub fn test1(
    train_original: &[DenseSeries],
    synthetic: &[SyntheticSet],
    test_original: &[DenseSeries],
    train_seeds: &[u64],
    model: &ForecastConfig,
    tc: &TrainConfig,
) -> Result<Test1Result> {
    if train_seeds.len() < 3 {
        return Err(Error::param("test 1 needs at least three training seeds"));
    }
    if synthetic.is_empty() || synthetic.iter().any(|s| s.series.is_empty()) {
        return Err(Error::data("test 1 needs non-empty synthetic corpora"));
    }
    if train_original.is_empty() || test_original.is_empty() {
        return Err(Error::data("test 1 needs original training and test data"));
    }
    check_disjoint(train_original, test_original)?;
    let mut jobs: Vec<(RunRisk, &[DenseSeries])> = Vec::new();
    for set in synthetic {
        for &seed in train_seeds {
            let run = RunRisk { corpus: "synthetic".into(), train_seed: seed, symbolization_seed: Some(set.seed), mse: 0.0 };
            jobs.push((run, &set.series));
        }
    }
    for &seed in train_seeds {
        let run = RunRisk { corpus: "original".into(), train_seed: seed, symbolization_seed: None, mse: 0.0 };
        jobs.push((run, train_original));
    }
    let runs = run_jobs(jobs, test_original, model, tc)?;
    let (synthetic, original): (Vec<RunRisk>, Vec<RunRisk>) = runs.into_iter().partition(|r| r.corpus == "synthetic");
    let syn: Vec<f64> = synthetic.iter().map(|r| r.mse).collect();
    let orig: Vec<f64> = original.iter().map(|r| r.mse).collect();
    Ok(Test1Result {
        epsilon_hat: mean_se(&syn).0 - mean_se(&orig).0,
        se: difference_se(&syn, &orig),
        synthetic,
        original,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Test2Result {
    pub ratio: f64,
    pub mse_on_original: f64,
    pub mse_on_synthetic: f64,
    pub model_id: String,
}

/// Test 2: risk of `h*` on synthetic test data over its risk on original test data.
pub fn test2(
    h_star: &ForecastModel,
    model_id: &str,
    test_original: &[DenseSeries],
    test_synthetic: &[DenseSeries],
) -> Result<Test2Result> {
    if test_original.is_empty() || test_synthetic.is_empty() {
        return Err(Error::data("test 2 needs non-empty original and synthetic test sets"));
    }
    let mse_on_original = h_star.rollout_mse(test_original)?;
    let mse_on_synthetic = h_star.rollout_mse(test_synthetic)?;
    if mse_on_original <= 0.0 {
        return Err(Error::numeric("zero risk on original test data; the ratio is undefined"));
    }
    Ok(Test2Result {
        ratio: mse_on_synthetic / mse_on_original,
        mse_on_original,
        mse_on_synthetic,
        model_id: model_id.to_string(),
    })
}

/// Index of the model with the lowest original-test risk; ties go to the first.
pub fn select_h_star(models: &[ForecastModel], test_original: &[DenseSeries]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, m) in models.iter().enumerate() {
        let r = m.rollout_mse(test_original)?;
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((i, r));
        }
    }
    best.ok_or_else(|| Error::data("no candidate models"))
}

/// Machine-readable report of either test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub epsilon_hat: Option<f64>,
    pub se: Option<f64>,
    pub ratio: Option<f64>,
    pub per_run: Vec<serde_json::Value>,
    pub config_hash: String,
    pub se_method: String,
}

impl TestReport {
    pub fn from_test1(r: &Test1Result, config_hash: &str) -> Self {
        Self {
            test: "1".into(),
            epsilon_hat: Some(r.epsilon_hat),
            se: Some(r.se),
            ratio: None,
            per_run: r.per_run().iter().map(|p| serde_json::to_value(p).expect("run serializes")).collect(),
            config_hash: config_hash.into(),
            se_method: "plain".into(),
        }
    }

    pub fn from_test2(r: &Test2Result, config_hash: &str) -> Self {
        Self {
            test: "2".into(),
            epsilon_hat: None,
            se: None,
            ratio: Some(r.ratio),
            per_run: vec![serde_json::to_value(r).expect("result serializes")],
            config_hash: config_hash.into(),
            se_method: "plain".into(),
        }
    }
}

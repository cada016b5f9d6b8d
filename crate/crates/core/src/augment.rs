//! CutMix on the time axis: the randomized, non-compositional control.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, Rng};
use crate::synthetic::{Lineage, SyntheticSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutMixConfig {
    /// Fixed window length in hours; `None` draws a random multiple of `block_len`.
    pub window_len: Option<usize>,
    pub block_len: usize,
    pub seed: u64,
    pub budget: usize,
}

impl Default for CutMixConfig {
    fn default() -> Self {
        Self {
            window_len: None,
            block_len: 3,
            seed: 0,
            budget: 0,
        }
    }
}

/// Replaces hours `[u, u + window_len)` of `a` with the same hours of `b`.
pub fn cutmix_at(a: &DenseSeries, b: &DenseSeries, u: usize, window_len: usize) -> Result<SyntheticSeries> {
    if !a.same_shape(b) {
        return Err(Error::shape(format!(
            "cutmix of {}x{} and {}x{} series",
            a.len(),
            a.n_features(),
            b.len(),
            b.n_features()
        )));
    }
    if window_len == 0 || window_len >= a.len() || u + window_len > a.len() {
        return Err(Error::param(format!(
            "cutmix window [{u}, {}) invalid for {} hours",
            u + window_len,
            a.len()
        )));
    }
    let mut out = a.clone();
    out.values[u..u + window_len].clone_from_slice(&b.values[u..u + window_len]);
    out.mask[u..u + window_len].clone_from_slice(&b.mask[u..u + window_len]);
    out.stay_id = format!("cutmix:{}:{}", a.stay_id, b.stay_id);
    Ok(SyntheticSeries {
        series: out,
        lineage: Lineage::Cutmix {
            a: a.stay_id.clone(),
            b: b.stay_id.clone(),
            u,
            window_len,
        },
    })
}

fn draw_window(hours: usize, cfg: &CutMixConfig, rng: &mut Rng) -> Result<(usize, usize)> {
    let len = match cfg.window_len {
        Some(l) => l,
        None => {
            let blocks = hours / cfg.block_len.max(1);
            if blocks < 2 {
                return Err(Error::param("series too short for a random cutmix window"));
            }
            cfg.block_len * rng.random_range(1..blocks)
        }
    };
    if len == 0 || len >= hours {
        return Err(Error::param(format!("cutmix window {len} invalid for {hours} hours")));
    }
    Ok((rng.random_range(0..=hours - len), len))
}

/// One CutMix sample with a window drawn from `cfg.seed`.
pub fn cutmix(a: &DenseSeries, b: &DenseSeries, cfg: &CutMixConfig) -> Result<SyntheticSeries> {
    let mut rng = derived_rng(cfg.seed, "cutmix-pair", 0);
    let (u, len) = draw_window(a.len(), cfg, &mut rng)?;
    cutmix_at(a, b, u, len)
}

/// `cfg.budget` CutMix samples from seeded random pairs of distinct series.
pub fn cutmix_dataset(data: &[DenseSeries], cfg: &CutMixConfig) -> Result<Vec<SyntheticSeries>> {
    if data.len() < 2 {
        return Err(Error::data("cutmix needs at least two series"));
    }
    (0..cfg.budget)
        .map(|i| {
            let mut rng = derived_rng(cfg.seed, "cutmix", i as u64);
            let a = rng.random_range(0..data.len());
            let mut b = rng.random_range(0..data.len() - 1);
            if b >= a {
                b += 1;
            }
            let (u, len) = draw_window(data[a].len(), cfg, &mut rng)?;
            let mut s = cutmix_at(&data[a], &data[b], u, len)?;
            s.series.stay_id = format!("cutmix-{}-{i}", cfg.seed);
            Ok(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(id: &str, offset: f64, hours: usize) -> DenseSeries {
        let values = (0..hours).map(|t| vec![offset + t as f64, offset]).collect();
        DenseSeries::new(id, values, vec![vec![1, 1]; hours]).unwrap()
    }

    #[test]
    fn self_mix_is_identity() {
        let a = series("a", 1.0, 12);
        let out = cutmix(&a, &a, &CutMixConfig { seed: 4, ..Default::default() }).unwrap();
        assert_eq!(out.series.values, a.values);
        assert_eq!(out.series.mask, a.mask);
    }

    #[test]
    fn long_window_differs_from_both_parents() {
        let a = series("a", 1.0, 12);
        let b = series("b", 50.0, 12);
        let out = cutmix_at(&a, &b, 0, 11).unwrap();
        assert_ne!(out.series.values, a.values);
        assert_ne!(out.series.values, b.values);
        assert_eq!(out.series.values[..11], b.values[..11]);
        assert_eq!(out.series.values[11], a.values[11]);
        assert!(cutmix_at(&a, &b, 0, 12).is_err());
        assert!(cutmix_at(&a, &series("c", 0.0, 9), 0, 3).is_err());
    }

    #[test]
    fn dataset_sizes_and_determinism() {
        let data: Vec<DenseSeries> = (0..5).map(|i| series(&format!("s{i}"), i as f64 * 10.0, 12)).collect();
        let cfg = CutMixConfig { seed: 2, budget: 20 * data.len(), ..Default::default() };
        let out = cutmix_dataset(&data, &cfg).unwrap();
        assert_eq!(out.len(), 100);
        assert_eq!(out, cutmix_dataset(&data, &cfg).unwrap());
        for s in &out {
            assert_eq!(s.series.len(), 12);
            s.series.validate().unwrap();
            if let Lineage::Cutmix { a, b, window_len, .. } = &s.lineage {
                assert_ne!(a, b);
                assert!(*window_len > 0 && *window_len < 12 && window_len % 3 == 0);
            }
        }
        let empty = CutMixConfig { budget: 0, ..cfg };
        assert!(cutmix_dataset(&data, &empty).unwrap().is_empty());
        assert!(cutmix_dataset(&data[..1], &empty).is_err());
    }
}

//! Synthetic series shared by the compositional engine and the CutMix control.

use serde::{Deserialize, Serialize};

use crate::cds::CdsLineage;
use crate::data::{DenseSeries, SeriesLine};

/// How a synthetic series was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Lineage {
    Cds(CdsLineage),
    Cutmix {
        a: String,
        b: String,
        u: usize,
        window_len: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub series: DenseSeries,
    pub lineage: Lineage,
}

impl SyntheticSeries {
    pub fn to_line(&self, features: &[String]) -> SeriesLine {
        let mut line = SeriesLine::from_series(&self.series, features);
        line.lineage = Some(serde_json::to_value(&self.lineage).expect("lineage serializes"));
        line
    }
}

/// Drops the lineage.
pub fn plain_series(items: &[SyntheticSeries]) -> Vec<DenseSeries> {
    items.iter().map(|s| s.series.clone()).collect()
}

//! Sparse observation records, feature standardization and the dense hourly encoding.
//!
//! Raw measurements arrive as `(stay, feature, time, value)` quadruplets. A
//! [`FeatureCatalog`] holds the z-score parameters fitted on training data, and
//! [`densify`] turns the records of each stay into an hourly value matrix plus an
//! observation mask. Hours without an observation are imputed with zero, which is
//! the feature mean after standardization.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sparse observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrupletRecord {
    pub stay_id: String,
    pub feature_id: String,
    #[serde(rename = "time_hours")]
    pub time: f64,
    pub value: f64,
}

impl QuadrupletRecord {
    pub fn new(stay_id: impl Into<String>, feature_id: impl Into<String>, time: f64, value: f64) -> Self {
        Self {
            stay_id: stay_id.into(),
            feature_id: feature_id.into(),
            time,
            value,
        }
    }
}

/// Reads records from a CSV with header `stay_id,feature_id,time_hours,value`.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<QuadrupletRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let expected = ["stay_id", "feature_id", "time_hours", "value"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::data(format!(
            "expected CSV header {}, found {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for row in reader.deserialize() {
        let record: QuadrupletRecord = row?;
        if record.time.is_nan() || record.time < 0.0 || !record.value.is_finite() {
            return Err(Error::data(format!(
                "invalid record for stay {} feature {}: time {} value {}",
                record.stay_id, record.feature_id, record.time, record.value
            )));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_records_csv_file(path: &Path) -> Result<Vec<QuadrupletRecord>> {
    read_records_csv(crate::io::open(path)?)
}

/// Standardization parameters of one retained feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub id: String,
    pub mean: f64,
    pub std: f64,
}

/// Ordered feature list with z-score parameters.
///
/// Standard deviations use the population form (denominator `N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub features: Vec<FeatureStats>,
    #[serde(default = "population")]
    pub std_denominator: String,
}

fn population() -> String {
    "N".to_string()
}

/// Why a feature was left out of the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    TooFewObservations,
    ZeroVariance,
}

/// Result of [`fit_catalog`]: the catalog plus the excluded features.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogFit {
    pub catalog: FeatureCatalog,
    pub excluded: Vec<(String, Exclusion)>,
}

impl FeatureCatalog {
    /// Catalog of already standardized features (mean 0, std 1).
    pub fn identity<S: AsRef<str>>(ids: &[S]) -> Self {
        Self {
            features: ids
                .iter()
                .map(|id| FeatureStats {
                    id: id.as_ref().to_string(),
                    mean: 0.0,
                    std: 1.0,
                })
                .collect(),
            std_denominator: population(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.features.iter().map(|f| f.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.features.iter().position(|f| f.id == id)
    }

    pub fn standardize(&self, feature: usize, value: f64) -> f64 {
        let s = &self.features[feature];
        (value - s.mean) / s.std
    }

    pub fn destandardize(&self, feature: usize, z: f64) -> f64 {
        let s = &self.features[feature];
        z * s.std + s.mean
    }
}

#[derive(Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }
}

/// Fits per-feature mean and population standard deviation in a single pass.
///
/// Features with fewer than two observations or zero variance are excluded and
/// reported. Features are ordered by identifier.
pub fn fit_catalog<'a>(records: impl IntoIterator<Item = &'a QuadrupletRecord>) -> Result<CatalogFit> {
    let mut acc: BTreeMap<&str, Welford> = BTreeMap::new();
    for r in records {
        acc.entry(r.feature_id.as_str()).or_default().push(r.value);
    }
    if acc.is_empty() {
        return Err(Error::data("no observations"));
    }
    let mut features = Vec::new();
    let mut excluded = Vec::new();
    for (id, w) in acc {
        if w.n < 2 {
            excluded.push((id.to_string(), Exclusion::TooFewObservations));
            continue;
        }
        let std = (w.m2 / w.n as f64).sqrt();
        if std.is_nan() || std <= 1e-12 * w.mean.abs().max(1.0) {
            excluded.push((id.to_string(), Exclusion::ZeroVariance));
            continue;
        }
        features.push(FeatureStats {
            id: id.to_string(),
            mean: w.mean,
            std,
        });
    }
    Ok(CatalogFit {
        catalog: FeatureCatalog {
            features,
            std_denominator: population(),
        },
        excluded,
    })
}

/// Hourly dense encoding of one stay: standardized values and an observation mask.
///
/// Rows are hours, columns follow the catalog order. `values[t][f]` is zero wherever
/// `mask[t][f]` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSeries {
    pub stay_id: String,
    pub values: Vec<Vec<f64>>,
    pub mask: Vec<Vec<u8>>,
}

impl DenseSeries {
    /// Builds a series and checks the shape and imputation invariants.
    pub fn new(stay_id: impl Into<String>, values: Vec<Vec<f64>>, mask: Vec<Vec<u8>>) -> Result<Self> {
        let series = Self {
            stay_id: stay_id.into(),
            values,
            mask,
        };
        series.validate()?;
        Ok(series)
    }

    /// Number of hours.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.mask.len() {
            return Err(Error::shape(format!(
                "stay {}: {} value rows but {} mask rows",
                self.stay_id,
                self.values.len(),
                self.mask.len()
            )));
        }
        let width = self.n_features();
        for (t, (row, mrow)) in self.values.iter().zip(&self.mask).enumerate() {
            if row.len() != width || mrow.len() != width {
                return Err(Error::shape(format!("stay {}: ragged row at hour {t}", self.stay_id)));
            }
            for (v, m) in row.iter().zip(mrow) {
                if *m > 1 {
                    return Err(Error::data(format!("stay {}: mask entry {m} is not binary", self.stay_id)));
                }
                if *m == 0 && *v != 0.0 {
                    return Err(Error::data(format!(
                        "stay {}: unobserved cell at hour {t} holds {v}",
                        self.stay_id
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::data(format!("stay {}: non-finite value at hour {t}", self.stay_id)));
                }
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &DenseSeries) -> bool {
        self.len() == other.len() && self.n_features() == other.n_features()
    }
}

/// Outcome of [`densify`], including what was discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct DensifyOutput {
    pub series: Vec<DenseSeries>,
    /// Effective horizon after truncation to a multiple of the block length.
    pub hours: usize,
    /// Stays whose observations end before the horizon.
    pub dropped_short: usize,
    /// Stays with at least one hour without any observation.
    pub dropped_gaps: usize,
    /// Records whose feature is not in the catalog.
    pub unknown_records: usize,
}

/// Truncates a horizon to the largest multiple of `block_len`.
pub fn truncate_to_blocks(hours: usize, block_len: usize) -> usize {
    if block_len == 0 {
        hours
    } else {
        hours - hours % block_len
    }
}

/// Encodes records as dense hourly series.
///
/// Each hour `[h, h+1)` keeps the earliest observation per feature; ties on equal
/// timestamps are broken by input order. The horizon is truncated to a multiple of
/// `block_len`. Stays not covering every hour of the horizon are dropped.
pub fn densify<'a>(
    records: impl IntoIterator<Item = &'a QuadrupletRecord>,
    catalog: &FeatureCatalog,
    hours: usize,
    block_len: usize,
) -> Result<DensifyOutput> {
    if block_len == 0 {
        return Err(Error::param("block length must be positive"));
    }
    let hours = truncate_to_blocks(hours, block_len);
    if hours == 0 {
        return Err(Error::param("horizon shorter than one block"));
    }
    let lookup: BTreeMap<&str, usize> = catalog
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| (f.id.as_str(), i))
        .collect();

    let mut by_stay: BTreeMap<&str, Vec<(f64, usize, f64)>> = BTreeMap::new();
    let mut unknown_records = 0;
    for r in records {
        if r.time.is_nan() || r.time < 0.0 {
            return Err(Error::data(format!("negative time {} for stay {}", r.time, r.stay_id)));
        }
        match lookup.get(r.feature_id.as_str()) {
            Some(&f) => by_stay.entry(r.stay_id.as_str()).or_default().push((r.time, f, r.value)),
            None => unknown_records += 1,
        }
    }

    let width = catalog.len();
    let mut out = DensifyOutput {
        series: Vec::new(),
        hours,
        dropped_short: 0,
        dropped_gaps: 0,
        unknown_records,
    };
    for (stay, mut obs) in by_stay {
        // stable: equal timestamps keep input order
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let last_time = obs.last().map_or(0.0, |o| o.0);
        if last_time < (hours - 1) as f64 {
            out.dropped_short += 1;
            continue;
        }
        let mut values = vec![vec![0.0; width]; hours];
        let mut mask = vec![vec![0u8; width]; hours];
        for &(time, f, value) in &obs {
            let h = time.floor() as usize;
            if h >= hours {
                break;
            }
            if mask[h][f] == 0 {
                mask[h][f] = 1;
                values[h][f] = catalog.standardize(f, value);
            }
        }
        if mask.iter().any(|row| row.iter().all(|&m| m == 0)) {
            out.dropped_gaps += 1;
            continue;
        }
        out.series.push(DenseSeries {
            stay_id: stay.to_string(),
            values,
            mask,
        });
    }
    Ok(out)
}

/// Fraction of imputed cells, per feature and overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub per_feature: Vec<f64>,
    pub overall: f64,
}

pub fn sparsity(series: &[DenseSeries]) -> Result<SparsityReport> {
    let first = series.first().ok_or_else(|| Error::data("sparsity of an empty series list"))?;
    let width = first.n_features();
    let mut observed = vec![0usize; width];
    let mut rows = 0usize;
    for s in series {
        if s.n_features() != width {
            return Err(Error::shape("series with differing feature counts"));
        }
        rows += s.len();
        for mrow in &s.mask {
            for (o, &m) in observed.iter_mut().zip(mrow) {
                *o += m as usize;
            }
        }
    }
    if rows == 0 || width == 0 {
        return Err(Error::data("sparsity of empty series"));
    }
    let per_feature = observed.iter().map(|&o| 1.0 - o as f64 / rows as f64).collect();
    let total: usize = observed.iter().sum();
    Ok(SparsityReport {
        per_feature,
        overall: 1.0 - total as f64 / (rows * width) as f64,
    })
}

/// NDJSON line for one dense series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesLine {
    pub stay_id: String,
    #[serde(rename = "T")]
    pub hours: usize,
    pub features: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub mask: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<serde_json::Value>,
}

impl SeriesLine {
    pub fn from_series(series: &DenseSeries, features: &[String]) -> Self {
        Self {
            stay_id: series.stay_id.clone(),
            hours: series.len(),
            features: features.to_vec(),
            values: series.values.clone(),
            mask: series.mask.clone(),
            lineage: None,
        }
    }

    pub fn into_series(self) -> Result<DenseSeries> {
        if self.hours != self.values.len() {
            return Err(Error::data(format!(
                "stay {}: T={} but {} rows",
                self.stay_id,
                self.hours,
                self.values.len()
            )));
        }
        DenseSeries::new(self.stay_id, self.values, self.mask)
    }
}

/// Reads a series NDJSON file, returning the feature list and the series.
pub fn read_series_file(path: &Path) -> Result<(Vec<String>, Vec<DenseSeries>)> {
    let lines: Vec<SeriesLine> = crate::io::read_ndjson_file(path)?;
    let features = lines.first().map(|l| l.features.clone()).unwrap_or_default();
    let mut series = Vec::with_capacity(lines.len());
    for line in lines {
        if line.features != features {
            return Err(Error::data(format!("stay {}: feature list differs", line.stay_id)));
        }
        series.push(line.into_series()?);
    }
    Ok((features, series))
}

pub fn write_series_file(path: &Path, features: &[String], series: &[DenseSeries]) -> Result<()> {
    crate::io::write_ndjson_file(path, series.iter().map(|s| SeriesLine::from_series(s, features)))
}

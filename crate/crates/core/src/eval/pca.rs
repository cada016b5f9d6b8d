//! Two-component PCA of flattened series for scatter plots.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DenseSeries;
use crate::error::{Error, Result};

/// Which parts of the dense representation enter the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaParts {
    pub values: bool,
    pub mask: bool,
}

impl Default for PcaParts {
    fn default() -> Self {
        Self { values: true, mask: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaRow {
    pub id: String,
    pub pc1: f64,
    pub pc2: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit loading vectors, largest-magnitude loading positive.
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
}

impl Pca {
    /// Fits on the rows of `x` (one observation per row).
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let n = x.len();
        if n < 3 {
            return Err(Error::data("PCA needs at least three observations"));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(Error::shape("observations of different length"));
        }
        if d < 2 {
            return Err(Error::data("PCA needs at least two dimensions"));
        }
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);
        let scale = 1.0 / (n - 1) as f64;
        // eigenvectors of the smaller of the covariance and the Gram matrix
        let (vals, vecs) = if d <= n {
            let cov = centered.transpose() * &centered * scale;
            let e = SymmetricEigen::new(cov);
            (e.eigenvalues, e.eigenvectors)
        } else {
            let gram = &centered * centered.transpose() * scale;
            let e = SymmetricEigen::new(gram);
            let v = centered.transpose() * &e.eigenvectors;
            (e.eigenvalues, v)
        };
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
        if vals[order[0]] <= 1e-12 * (1.0 + vals.iter().map(|v| v.abs()).sum::<f64>()) {
            return Err(Error::data("observations do not vary; PCA rank is 0"));
        }
        let mut components: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut eigenvalues = [0.0; 2];
        for k in 0..2 {
            let col = order[k];
            let mut v: Vec<f64> = vecs.column(col).iter().copied().collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|a| *a /= norm);
            }
            let big = v.iter().enumerate().fold(0, |best, (i, a)| if a.abs() > v[best].abs() { i } else { best });
            if v[big] < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
            eigenvalues[k] = vals[col].max(0.0);
            components[k] = v;
        }
        Ok(Self { mean, components, eigenvalues })
    }

    pub fn project(&self, row: &[f64]) -> (f64, f64) {
        let dot = |c: &[f64]| c.iter().zip(row).zip(&self.mean).map(|((w, x), m)| w * (x - m)).sum::<f64>();
        (dot(&self.components[0]), dot(&self.components[1]))
    }

    pub fn reconstruct(&self, pc1: f64, pc2: f64) -> Vec<f64> {
        (0..self.mean.len())
            .map(|j| self.mean[j] + pc1 * self.components[0][j] + pc2 * self.components[1][j])
            .collect()
    }
}

fn features(s: &DenseSeries, parts: PcaParts) -> Vec<f64> {
    let mut v = Vec::new();
    if parts.values {
        v.extend(s.values.iter().flatten());
    }
    if parts.mask {
        v.extend(s.mask.iter().flatten().map(|&m| f64::from(m)));
    }
    v
}

/// Fits PCA on the labelled series and projects each onto the top two components.
pub fn pca_export(series: &[(DenseSeries, String)], parts: PcaParts) -> Result<(Pca, Vec<PcaRow>)> {
    if !parts.values && !parts.mask {
        return Err(Error::param("PCA over neither values nor mask"));
    }
    let x: Vec<Vec<f64>> = series.iter().map(|(s, _)| features(s, parts)).collect();
    let pca = Pca::fit(&x)?;
    let rows = series
        .iter()
        .zip(&x)
        .map(|((s, label), row)| {
            let (pc1, pc2) = pca.project(row);
            PcaRow { id: s.stay_id.clone(), pc1, pc2, label: label.clone() }
        })
        .collect();
    Ok((pca, rows))
}

/// Writes `id,pc1,pc2,label` rows.
pub fn write_pca_csv<W: Write>(out: W, rows: &[PcaRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

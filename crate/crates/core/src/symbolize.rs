//! Block segmentation and nearest-centroid symbolization.
//!
//! A series of `T` hours is cut into `T / Δ` non-overlapping blocks. A
//! [`SymbolSpace`] partitions block space by nearest centroid; each cell is one
//! symbol. Centroids are either sampled blocks in input space (values followed by
//! mask bits) or k-means centroids over block embeddings.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Symbol identifier, an index into the centroid list.
pub type Symbol = u32;

/// A `Δ`-hour slice of a dense series.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stay_id: String,
    pub block_index: usize,
    pub data: Vec<Vec<f64>>,
    pub mask: Vec<Vec<u8>>,
}

impl Block {
    /// Block length in hours.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Input-space vector: standardized values row by row, then the mask bits.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.data.iter().flatten().copied().collect();
        v.extend(self.mask.iter().flatten().map(|&m| f64::from(m)));
        v
    }
}

/// Cuts a series into consecutive non-overlapping blocks of `delta` hours.
pub fn segment(series: &DenseSeries, delta: usize) -> Result<Vec<Block>> {
    if delta == 0 {
        return Err(Error::param("block length must be positive"));
    }
    if !series.len().is_multiple_of(delta) {
        return Err(Error::param(format!(
            "series {} has {} hours, not a multiple of block length {delta}",
            series.stay_id,
            series.len()
        )));
    }
    Ok((0..series.len() / delta)
        .map(|b| Block {
            stay_id: series.stay_id.clone(),
            block_index: b,
            data: series.values[b * delta..(b + 1) * delta].to_vec(),
            mask: series.mask[b * delta..(b + 1) * delta].to_vec(),
        })
        .collect())
}

/// Domain of the centroids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Flattened blocks (values and mask).
    Input,
    /// Learned block embeddings.
    Embd,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(Mode::Input),
            "embd" => Ok(Mode::Embd),
            other => Err(Error::Usage(format!("unknown symbolization mode {other:?}"))),
        }
    }
}

/// Nearest-centroid partition of block space under the Euclidean metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSpace {
    pub mode: Mode,
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
}

impl SymbolSpace {
    /// Builds a space and checks its invariants.
    pub fn new(mode: Mode, seed: u64, centroids: Vec<Vec<f64>>) -> Result<Self> {
        let k = centroids.len();
        if k < 2 {
            return Err(Error::param("a symbol space needs at least two centroids"));
        }
        let dim = centroids[0].len();
        if dim == 0 || centroids.iter().any(|c| c.len() != dim) {
            return Err(Error::shape("centroids must share a positive dimension"));
        }
        let mut seen = HashSet::with_capacity(k);
        for c in &centroids {
            if !seen.insert(bit_key(c)) {
                return Err(Error::param("centroids must be pairwise distinct"));
            }
        }
        Ok(Self {
            mode,
            k,
            seed,
            embedding_dim: (mode == Mode::Embd).then_some(dim),
            centroids,
        })
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }
}

fn bit_key(v: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same point
    v.iter().map(|x| if *x == 0.0 { 0 } else { x.to_bits() }).collect()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Samples `k` pairwise distinct blocks uniformly without replacement as centroids.
///
/// Blocks are visited in a seeded random order; a block whose vector duplicates an
/// already chosen centroid is skipped.
pub fn random_centroids(blocks: &[Block], k: usize, seed: u64) -> Result<SymbolSpace> {
    if blocks.len() < k {
        return Err(Error::param(format!("{} blocks cannot provide {k} centroids", blocks.len())));
    }
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.shuffle(&mut rng_from(seed));
    let mut seen = HashSet::with_capacity(k);
    let mut centroids = Vec::with_capacity(k);
    for i in order {
        let v = blocks[i].flatten();
        if seen.insert(bit_key(&v)) {
            centroids.push(v);
            if centroids.len() == k {
                break;
            }
        }
    }
    if centroids.len() < k {
        return Err(Error::data(format!(
            "only {} distinct blocks available for {k} centroids",
            centroids.len()
        )));
    }
    SymbolSpace::new(Mode::Input, seed, centroids)
}

/// Outcome of a Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Inertia after the seeding assignment and after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&0.0)
    }

    /// Symbol space over embeddings.
    pub fn into_space(self) -> Result<SymbolSpace> {
        SymbolSpace::new(Mode::Embd, self.seed, self.centroids)
    }
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Iterates until the largest centroid shift drops below `tol` or `max_iter`
/// iterations have run. An emptied cluster is re-seeded with the point farthest
/// from its assigned centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    let dim = points.first().map_or(0, Vec::len);
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::shape("k-means points must share a positive dimension"));
    }
    let mut distinct = HashSet::new();
    for p in points {
        distinct.insert(bit_key(p));
        if distinct.len() >= k.max(2) {
            break;
        }
    }
    if distinct.len() < 2 {
        return Err(Error::data("degenerate k-means input: all points identical"));
    }
    if distinct.len() < k {
        return Err(Error::data(format!("fewer than {k} distinct points")));
    }

    let mut rng = rng_from(seed);
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    chosen = Some(i);
                    break;
                }
                target -= d;
            }
            // rounding can leave the target past the last positive weight
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive total"))
        } else {
            return Err(Error::data(format!("fewer than {k} distinct points")));
        };
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centroids.last().unwrap()));
        }
    }

    let mut assignments = vec![0usize; points.len()];
    let mut dists = vec![0.0; points.len()];
    let assign_all = |centroids: &[Vec<f64>], assignments: &mut [usize], dists: &mut [f64]| -> f64 {
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, centroids);
            assignments[i] = j;
            dists[i] = d;
            inertia += d;
        }
        inertia
    };
    let mut inertia_history = vec![assign_all(&centroids, &mut assignments, &mut dists)];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assignments) {
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(sq_dist(&new, &centroids[j]).sqrt());
            centroids[j] = new;
        }
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let far = dists
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("non-empty input");
            shift = shift.max(sq_dist(&points[far], &centroids[j]).sqrt());
            centroids[j] = points[far].clone();
            dists[far] = 0.0;
        }
        inertia_history.push(assign_all(&centroids, &mut assignments, &mut dists));
        if shift < tol {
            break;
        }
    }
    Ok(KMeansFit {
        centroids,
        assignments,
        inertia_history,
        iterations,
        seed,
    })
}

/// Nearest centroid, ties broken by the lowest index.
pub fn assign(vector: &[f64], space: &SymbolSpace) -> Result<Symbol> {
    if vector.len() != space.dim() {
        return Err(Error::shape(format!(
            "vector of dimension {} against centroids of dimension {}",
            vector.len(),
            space.dim()
        )));
    }
    Ok(nearest(vector, &space.centroids).0 as Symbol)
}

/// Maps blocks to vectors in the space of a learned representation.
pub trait BlockEmbedder {
    fn embed(&self, block: &Block) -> Result<Vec<f64>>;
}

/// Embeds a block as its input-space vector; lets k-means run over raw blocks.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlattenEmbedder;

impl BlockEmbedder for FlattenEmbedder {
    fn embed(&self, block: &Block) -> Result<Vec<f64>> {
        Ok(block.flatten())
    }
}

/// Symbols of one series with a link from each position back to its raw block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    pub stay_id: String,
    pub delta: usize,
    pub symbols: Vec<Symbol>,
    pub provenance: Vec<(String, usize)>,
}

impl SymbolSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Symbolizes one series block by block.
pub fn symbolize(
    series: &DenseSeries,
    delta: usize,
    space: &SymbolSpace,
    embedder: Option<&dyn BlockEmbedder>,
) -> Result<SymbolSequence> {
    let blocks = segment(series, delta)?;
    let mut symbols = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let v = match (space.mode, embedder) {
            (Mode::Input, _) => block.flatten(),
            (Mode::Embd, Some(e)) => e.embed(block)?,
            (Mode::Embd, None) => return Err(Error::param("embedding symbol space requires an embedder")),
        };
        symbols.push(assign(&v, space)?);
    }
    Ok(SymbolSequence {
        stay_id: series.stay_id.clone(),
        delta,
        symbols,
        provenance: blocks.into_iter().map(|b| (b.stay_id, b.block_index)).collect(),
    })
}

pub fn symbolize_all(
    series: &[DenseSeries],
    delta: usize,
    space: &SymbolSpace,
    embedder: Option<&dyn BlockEmbedder>,
) -> Result<Vec<SymbolSequence>> {
    series.iter().map(|s| symbolize(s, delta, space, embedder)).collect()
}

/// Segments every series and concatenates the blocks.
pub fn all_blocks(series: &[DenseSeries], delta: usize) -> Result<Vec<Block>> {
    let mut out = Vec::new();
    for s in series {
        out.extend(segment(s, delta)?);
    }
    Ok(out)
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("labelings of different length"));
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if (max - expected).abs() < f64::EPSILON {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn series(hours: usize, width: usize) -> DenseSeries {
        let values = (0..hours).map(|t| (0..width).map(|f| (t * width + f) as f64).collect()).collect();
        let mask = vec![vec![1u8; width]; hours];
        DenseSeries::new("s", values, mask).unwrap()
    }

    fn space_1d(points: &[f64]) -> SymbolSpace {
        SymbolSpace::new(Mode::Embd, 0, points.iter().map(|&p| vec![p]).collect()).unwrap()
    }

    #[test]
    fn segment_counts_and_bounds() {
        assert_eq!(segment(&series(48, 2), 3).unwrap().len(), 16);
        let one = segment(&series(3, 2), 3).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].data, series(3, 2).values);
        assert!(segment(&series(6, 1), 4).is_err());
        assert!(segment(&series(6, 1), 0).is_err());
    }

    #[test]
    fn random_centroids_cover_all_when_k_equals_blocks() {
        let blocks = segment(&series(12, 2), 3).unwrap();
        let space = random_centroids(&blocks, 4, 5).unwrap();
        let mut got: Vec<Vec<f64>> = space.centroids.clone();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let want: Vec<Vec<f64>> = blocks.iter().map(Block::flatten).collect();
        assert_eq!(got, want);
        assert_eq!(random_centroids(&blocks, 3, 9).unwrap(), random_centroids(&blocks, 3, 9).unwrap());
        assert!(random_centroids(&blocks, 5, 0).is_err());
    }

    #[test]
    fn assignment_ties_go_to_lowest_index() {
        let space = space_1d(&[0.0, 10.0]);
        assert_eq!(assign(&[3.0], &space).unwrap(), 0);
        assert_eq!(assign(&[5.0], &space).unwrap(), 0);
        assert_eq!(assign(&[10.0], &space).unwrap(), 1);
        assert!(assign(&[1.0, 2.0], &space).is_err());
    }

    #[test]
    fn kmeans_exact_fit_and_single_cluster() {
        let pts = vec![vec![0.0], vec![10.0]];
        let fit = kmeans(&pts, 2, 1, 50, 1e-9).unwrap();
        let mut c: Vec<f64> = fit.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 10.0]);
        assert_eq!(fit.inertia(), 0.0);

        let pts = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 9.0]];
        let fit = kmeans(&pts, 1, 1, 50, 1e-12).unwrap();
        assert!((fit.centroids[0][0] - 3.0).abs() < 1e-12);
        assert!((fit.centroids[0][1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_rejects_degenerate_input() {
        let pts = vec![vec![1.0]; 10];
        assert!(matches!(kmeans(&pts, 2, 0, 10, 1e-6), Err(Error::Data(_))));
        let pts = vec![vec![1.0], vec![2.0]];
        assert!(kmeans(&pts, 3, 0, 10, 1e-6).is_err());
    }

    #[test]
    fn kmeans_recovers_separated_gaussians() {
        let means = [[0.0, 0.0], [100.0, 0.0]];
        for seed in 0..20u64 {
            let mut rng = rng_from(1000 + seed);
            let noise = Normal::new(0.0, 1.0).unwrap();
            let mut pts = Vec::new();
            let mut labels = Vec::new();
            for (l, m) in means.iter().enumerate() {
                for _ in 0..50 {
                    pts.push(vec![m[0] + noise.sample(&mut rng), m[1] + noise.sample(&mut rng)]);
                    labels.push(l);
                }
            }
            // brute-force oracle: sample means of each true group
            let truth: Vec<[f64; 2]> = (0..2)
                .map(|l| {
                    let g: Vec<&Vec<f64>> = pts.iter().zip(&labels).filter(|(_, &x)| x == l).map(|(p, _)| p).collect();
                    [g.iter().map(|p| p[0]).sum::<f64>() / 50.0, g.iter().map(|p| p[1]).sum::<f64>() / 50.0]
                })
                .collect();
            let fit = kmeans(&pts, 2, seed, 100, 1e-9).unwrap();
            for t in &truth {
                let best = fit.centroids.iter().map(|c| sq_dist(c, t).sqrt()).fold(f64::INFINITY, f64::min);
                assert!(best < 3.0, "seed {seed}: centroid {best} away from true mean");
            }
        }
    }

    #[test]
    fn symbolize_maps_blocks_to_centroids_in_order() {
        let s = series(9, 1);
        let blocks = segment(&s, 3).unwrap();
        let space = SymbolSpace::new(
            Mode::Input,
            0,
            vec![blocks[1].flatten(), blocks[2].flatten(), blocks[0].flatten()],
        )
        .unwrap();
        let seq = symbolize(&s, 3, &space, None).unwrap();
        assert_eq!(seq.symbols, vec![2, 0, 1]);
        assert_eq!(seq.provenance[2], ("s".to_string(), 2));

        let embd = SymbolSpace::new(Mode::Embd, 0, space.centroids.clone()).unwrap();
        assert!(symbolize(&s, 3, &embd, None).is_err());
        assert_eq!(symbolize(&s, 3, &embd, Some(&FlattenEmbedder)).unwrap().symbols, vec![2, 0, 1]);
    }

    #[test]
    fn permuting_blocks_permutes_symbols() {
        let s = series(12, 2);
        let blocks = segment(&s, 3).unwrap();
        let space = random_centroids(&blocks, 4, 3).unwrap();
        let seq = symbolize(&s, 3, &space, None).unwrap();
        let perm = [2usize, 0, 3, 1];
        let mut p = s.clone();
        for (dst, &src) in perm.iter().enumerate() {
            p.values[dst * 3..dst * 3 + 3].clone_from_slice(&s.values[src * 3..src * 3 + 3]);
            p.mask[dst * 3..dst * 3 + 3].clone_from_slice(&s.mask[src * 3..src * 3 + 3]);
        }
        let pseq = symbolize(&p, 3, &space, None).unwrap();
        let expected: Vec<Symbol> = perm.iter().map(|&i| seq.symbols[i]).collect();
        assert_eq!(pseq.symbols, expected);
    }

    #[test]
    fn ari_identity_and_relabeling() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1, 2], &[2, 2, 0, 0, 1]).unwrap(), 1.0);
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert!(ari < 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lloyd_inertia_never_increases(pts in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 8..60), k in 2usize..6, seed in 0u64..1000) {
                let pts: Vec<Vec<f64>> = pts.into_iter().map(|(x, y)| vec![x, y]).collect();
                if let Ok(fit) = kmeans(&pts, k, seed, 50, 0.0) {
                    for w in fit.inertia_history.windows(2) {
                        prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", fit.inertia_history);
                    }
                }
            }

            #[test]
            fn assignment_is_the_argmin(x in -20.0f64..20.0, y in -20.0f64..20.0) {
                let space = SymbolSpace::new(Mode::Embd, 0, vec![vec![0.0, 0.0], vec![5.0, 1.0], vec![-3.0, 7.0]]).unwrap();
                let s = assign(&[x, y], &space).unwrap() as usize;
                let d = sq_dist(&[x, y], &space.centroids[s]);
                for c in &space.centroids {
                    prop_assert!(d <= sq_dist(&[x, y], c));
                }
            }
        }
    }
}

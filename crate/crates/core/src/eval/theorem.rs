//! Exhaustive check of the density-ratio risk bound on finite domains.
//!
//! For any two input densities sharing one conditional `f(y|x)`, and any
//! non-negative loss, every hypothesis satisfies
//! `C̲·E_Q[ℓ] ≤ E_P[ℓ] ≤ C̄·E_Q[ℓ]` with `C̲ = min f_P/f_Q`, `C̄ = max f_P/f_Q`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// A finite covariate-shift instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheckCase {
    pub f_p: Vec<f64>,
    pub f_q: Vec<f64>,
    /// `conditional[x][y] = f(y|x)`, shared by both distributions.
    pub conditional: Vec<Vec<f64>>,
    /// `loss[y][ŷ] ≥ 0`.
    pub loss: Vec<Vec<f64>>,
    /// Each hypothesis maps every `x` to a label.
    pub hypotheses: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub c_low: f64,
    pub c_high: f64,
    /// `(E_P[ℓ], E_Q[ℓ])` per hypothesis.
    pub risks: Vec<(f64, f64)>,
    pub violations: usize,
    pub holds: bool,
}

fn check_probabilities(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::data(format!("{what} has negative or non-finite entries")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::data(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Every map from `n_x` inputs to `n_y` labels.
pub fn all_hypotheses(n_x: usize, n_y: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n_x {
        out = out
            .into_iter()
            .flat_map(|h| {
                (0..n_y).map(move |y| {
                    let mut g = h.clone();
                    g.push(y);
                    g
                })
            })
            .collect();
    }
    out
}

/// Tight density-ratio constants; `0/0` counts as 1 and `p/0` as infinity.
pub fn ratio_bounds(f_p: &[f64], f_q: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&p, &q) in f_p.iter().zip(f_q) {
        let r = if p == 0.0 && q == 0.0 {
            1.0
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            p / q
        };
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

fn expected_risk(f: &[f64], case: &TheoremCheckCase, h: &[usize]) -> f64 {
    f.iter()
        .enumerate()
        .map(|(x, &fx)| fx * case.conditional[x].iter().enumerate().map(|(y, &c)| c * case.loss[y][h[x]]).sum::<f64>())
        .sum()
}

/// Computes the tight constants and checks the bound for every hypothesis.
pub fn verify_theorem1(case: &TheoremCheckCase) -> Result<TheoremReport> {
    let n_x = case.f_p.len();
    if n_x == 0 || case.f_q.len() != n_x || case.conditional.len() != n_x {
        return Err(Error::shape("densities and conditional must cover the same inputs"));
    }
    check_probabilities(&case.f_p, "f_P")?;
    check_probabilities(&case.f_q, "f_Q")?;
    let n_y = case.loss.len();
    for (x, row) in case.conditional.iter().enumerate() {
        if row.len() != n_y {
            return Err(Error::shape("conditional rows must cover every label"));
        }
        check_probabilities(row, &format!("f(y|x={x})"))?;
    }
    if case.loss.iter().any(|r| r.len() != n_y || r.iter().any(|&l| l < 0.0 || !l.is_finite())) {
        return Err(Error::data("loss table must be square, finite and non-negative"));
    }
    if case.hypotheses.iter().any(|h| h.len() != n_x || h.iter().any(|&y| y >= n_y)) {
        return Err(Error::shape("hypothesis outside the label set"));
    }
    let (c_low, c_high) = ratio_bounds(&case.f_p, &case.f_q);
    let mut risks = Vec::with_capacity(case.hypotheses.len());
    let mut violations = 0;
    for h in &case.hypotheses {
        let rp = expected_risk(&case.f_p, case, h);
        let rq = expected_risk(&case.f_q, case, h);
        let tol = 1e-12 * (1.0 + rp.abs() + rq.abs());
        let lower_ok = c_low * rq <= rp + tol;
        let upper_ok = c_high.is_infinite() || rp <= c_high * rq + tol;
        if !(lower_ok && upper_ok) {
            violations += 1;
        }
        risks.push((rp, rq));
    }
    let constants_ok = c_low <= 1.0 + 1e-12 && c_high >= 1.0 - 1e-12;
    Ok(TheoremReport {
        c_low,
        c_high,
        risks,
        violations,
        holds: violations == 0 && constants_ok,
    })
}

fn random_simplex(rng: &mut Rng, n: usize, zero_prob: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < zero_prob { 0.0 } else { rng.random::<f64>() })
            .collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            let mut p: Vec<f64> = w.iter().map(|v| v / s).collect();
            // absorb rounding so the vector sums to 1 within 1e-9
            let r: f64 = 1.0 - p.iter().sum::<f64>();
            if let Some(last) = p.iter_mut().rev().find(|v| **v > 0.0) {
                *last += r;
            }
            return p;
        }
    }
}

/// Random instance with `|X| ≤ max_x`, `|Y| ≤ max_y` and all hypotheses.
pub fn random_case(rng: &mut Rng, max_x: usize, max_y: usize) -> TheoremCheckCase {
    let n_x = rng.random_range(1..=max_x);
    let n_y = rng.random_range(1..=max_y);
    TheoremCheckCase {
        f_p: random_simplex(rng, n_x, 0.15),
        f_q: random_simplex(rng, n_x, 0.15),
        conditional: (0..n_x).map(|_| random_simplex(rng, n_y, 0.2)).collect(),
        loss: (0..n_y).map(|_| (0..n_y).map(|_| rng.random_range(0.0..5.0)).collect()).collect(),
        hypotheses: all_hypotheses(n_x, n_y),
    }
}

/// Runs `n` random cases; returns the number that failed.
pub fn randomized_suite(n: usize, seed: u64) -> Result<usize> {
    let mut rng = crate::rng::derived_rng(seed, "theorem-suite", 0);
    let mut failed = 0;
    for _ in 0..n {
        if !verify_theorem1(&random_case(&mut rng, 6, 4))?.holds {
            failed += 1;
        }
    }
    Ok(failed)
}

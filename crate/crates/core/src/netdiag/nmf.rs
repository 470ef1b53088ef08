use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmfOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop once the objective improves by less than this fraction.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for NmfOptions {
    fn default() -> Self {
        NmfOptions {
            restarts: 5,
            max_iterations: 500,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl NmfOptions {
    pub fn with_seed(seed: u64) -> Self {
        NmfOptions {
            seed,
            ..NmfOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfResult {
    /// `rows × k`.
    pub w: Matrix,
    /// `k × cols`.
    pub h: Matrix,
    /// `‖A − WH‖_F / ‖A‖_F`.
    pub relative_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart: usize,
    /// Squared Frobenius objective after every update of the winning
    /// restart, starting from the initial factors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

/// Lee-Seung multiplicative updates for `min ‖A − WH‖_F²` over
/// non-negative `W` (`rows × k`) and `H` (`k × cols`), best of
/// `opts.restarts` random initializations.
///
/// Initial entries are uniform on `(0, 2√(mean(A)/k))`, so `E[WH]` matches
/// the mean of `A`; each restart draws from its own substream of
/// `opts.seed`.
pub fn nmf(a: &Matrix, k: usize, opts: &NmfOptions) -> Result<NmfResult> {
    if a.data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::validation("NMF input must be finite and non-negative"));
    }
    let n = a.rows.min(a.cols);
    if k < 1 || k >= n {
        return Err(Error::validation(format!(
            "NMF rank must satisfy 1 <= k < {n}, got {k}"
        )));
    }
    if opts.restarts < 1 {
        return Err(Error::validation("NMF needs at least one restart"));
    }
    let norm2: f64 = a.data.iter().map(|v| v * v).sum();
    if norm2 == 0.0 {
        return Ok(NmfResult {
            w: Matrix::zeros(a.rows, k),
            h: Matrix::zeros(k, a.cols),
            relative_error: 0.0,
            iterations: 0,
            converged: true,
            restart: 0,
            objective_trace: vec![0.0],
        });
    }
    let master = RandomSource::new(opts.seed);
    let runs: Vec<NmfResult> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = master.split(r as u64);
            run(a, k, opts, norm2, &mut rng, r)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.relative_error < best.relative_error { r } else { best })
        .expect("at least one restart");
    Ok(best)
}

/// `‖A − WH‖_F / ‖A‖_F` minimized by [`nmf`].
pub fn structure_score(a: &Matrix, k: usize, opts: &NmfOptions) -> Result<f64> {
    Ok(nmf(a, k, opts)?.relative_error)
}

fn run(a: &Matrix, k: usize, opts: &NmfOptions, norm2: f64, rng: &mut RandomSource, restart: usize) -> NmfResult {
    let mean = a.data.iter().sum::<f64>() / a.data.len() as f64;
    let scale = 2.0 * (mean / k as f64).sqrt();
    let mut w = Matrix::zeros(a.rows, k);
    let mut h = Matrix::zeros(k, a.cols);
    for v in w.data.iter_mut().chain(h.data.iter_mut()) {
        *v = scale * rng.uniform();
    }
    let mut obj = objective(a, &w, &h);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        update_h(a, &w, &mut h);
        update_w(a, &mut w, &h);
        iterations += 1;
        let next = objective(a, &w, &h);
        debug_assert!(
            next <= obj * (1.0 + 1e-9) + 1e-24 * norm2,
            "NMF objective increased: {obj} -> {next}"
        );
        trace.push(next);
        let change = (obj - next) / obj.max(f64::MIN_POSITIVE);
        obj = next;
        if change < opts.tolerance || obj <= 1e-24 * norm2 {
            converged = true;
            break;
        }
    }
    NmfResult {
        w,
        h,
        relative_error: (obj / norm2).sqrt(),
        iterations,
        converged,
        restart,
        objective_trace: trace,
    }
}

fn objective(a: &Matrix, w: &Matrix, h: &Matrix) -> f64 {
    let wh = w.mul(h);
    a.data
        .iter()
        .zip(&wh.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// `H ← H ⊙ (WᵀA) ⊘ (WᵀWH)`; an entry whose denominator vanishes (its
/// factor column is zero) is left unchanged.
fn update_h(a: &Matrix, w: &Matrix, h: &mut Matrix) {
    let wt = w.transpose();
    let num = wt.mul(a);
    let den = wt.mul(w).mul(h);
    for ((hv, nv), dv) in h.data.iter_mut().zip(&num.data).zip(&den.data) {
        if *dv > 0.0 {
            *hv *= nv / dv;
        }
    }
}

/// `W ← W ⊙ (AHᵀ) ⊘ (WHHᵀ)`.
fn update_w(a: &Matrix, w: &mut Matrix, h: &Matrix) {
    let ht = h.transpose();
    let num = a.mul(&ht);
    let den = w.mul(&h.mul(&ht));
    for ((wv, nv), dv) in w.data.iter_mut().zip(&num.data).zip(&den.data) {
        if *dv > 0.0 {
            *wv *= nv / dv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = RandomSource::new(seed);
        let mut m = Matrix::zeros(rows, cols);
        for v in &mut m.data {
            *v = rng.uniform();
        }
        m
    }

    fn svd_relative_error(a: &Matrix, k: usize) -> f64 {
        let m = nalgebra::DMatrix::from_row_slice(a.rows, a.cols, &a.data);
        let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        let total: f64 = s.iter().map(|v| v * v).sum();
        let tail: f64 = s[k..].iter().map(|v| v * v).sum();
        (tail / total).sqrt()
    }

    fn assert_monotone(trace: &[f64]) {
        let floor = 1e-20 * trace[0];
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + floor, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn rank_one_is_recovered() {
        let u = [1.0, 2.0, 0.5, 3.0, 1.5];
        let v = [0.2, 1.0, 2.0, 0.7, 1.1];
        let mut a = Matrix::zeros(5, 5);
        for i in 0..5 {
            for j in 0..5 {
                a.set(i, j, u[i] * v[j]);
            }
        }
        let opts = NmfOptions {
            max_iterations: 5000,
            tolerance: 1e-14,
            ..NmfOptions::default()
        };
        let r = nmf(&a, 1, &opts).unwrap();
        assert!(r.relative_error < 1e-6, "{}", r.relative_error);
        assert_monotone(&r.objective_trace);
    }

    #[test]
    fn zero_matrix_has_zero_error() {
        let r = nmf(&Matrix::zeros(4, 4), 2, &NmfOptions::default()).unwrap();
        assert_eq!(r.relative_error, 0.0);
        assert!(r.w.data.iter().chain(&r.h.data).all(|v| *v == 0.0));
    }

    #[test]
    fn factors_are_non_negative_and_error_consistent() {
        let a = random_matrix(8, 8, 3);
        let r = nmf(&a, 2, &NmfOptions::with_seed(1)).unwrap();
        assert!(r.w.data.iter().chain(&r.h.data).all(|v| *v >= 0.0));
        let wh = r.w.mul(&r.h);
        let num: f64 = a.data.iter().zip(&wh.data).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = a.data.iter().map(|x| x * x).sum();
        assert!(((num / den).sqrt() - r.relative_error).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&r.relative_error));
    }

    #[test]
    fn never_beats_the_svd_truncation() {
        for seed in 0..20 {
            let a = random_matrix(10, 10, 100 + seed);
            let r = nmf(&a, 2, &NmfOptions::with_seed(seed)).unwrap();
            assert!(r.relative_error >= svd_relative_error(&a, 2) - 1e-12);
            assert_monotone(&r.objective_trace);
        }
    }

    #[test]
    fn score_is_scale_invariant() {
        let a = random_matrix(10, 10, 7);
        let base = structure_score(&a, 2, &NmfOptions::with_seed(2)).unwrap();
        for c in [10.0, 0.1] {
            let mut scaled = a.clone();
            scaled.data.iter_mut().for_each(|v| *v *= c);
            let s = structure_score(&scaled, 2, &NmfOptions::with_seed(2)).unwrap();
            assert!((s - base).abs() < 1e-3, "{s} vs {base}");
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let a = random_matrix(4, 4, 1);
        assert!(nmf(&a, 0, &NmfOptions::default()).is_err());
        assert!(nmf(&a, 4, &NmfOptions::default()).is_err());
        let mut neg = a.clone();
        neg.set(0, 0, -1.0);
        assert!(nmf(&neg, 2, &NmfOptions::default()).is_err());
    }
}

//! Univariate goodness-of-fit: rescaled inter-event times, the
//! Kolmogorov-Smirnov statistic against Exp(1), Q-Q data, and raw and
//! Pearson residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSequence;
use crate::models::{LatentPath, ModelSpec, PiecewiseIntensity};
use crate::quad::adaptive_simpson;

mod lowess;

pub use lowess::{lowess, lowess_with, LowessOptions};

/// Absolute tolerance for the `∫ √λ` term of the Pearson residual.
pub const PEARSON_QUAD_TOL: f64 = 1e-6;

/// Compensator increments `Λ_m` between consecutive events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledTimes {
    values: Vec<f64>,
}

impl RescaledTimes {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((m, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::validation(format!(
                "rescaled time {m} is {v}; values must be >= 0"
            )));
        }
        Ok(RescaledTimes { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `Λ_m = ∫_{t_{m-1}}^{t_m} λ(s) ds` with `t₀ = 0`. The path is required
/// exactly when the model is modulated.
pub fn rescaled_times(
    spec: &ModelSpec,
    seq: &EventSequence,
    path: Option<&LatentPath>,
) -> Result<RescaledTimes> {
    let f = PiecewiseIntensity::new(spec, seq, path)?;
    let values = f.compensator_increments();
    if let Some(m) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(m, "non-finite compensator increment"));
    }
    RescaledTimes::new(values)
}

fn exp_cdf(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// `sup_x |F̂(x) − F(x)|` against the Exp(1) CDF, evaluated exactly at the
/// order statistics.
pub fn ks_statistic(rescaled: &RescaledTimes) -> Result<f64> {
    if rescaled.is_empty() {
        return Err(Error::Undefined(
            "K-S statistic of an empty sample".to_string(),
        ));
    }
    let mut xs = rescaled.values.clone();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = exp_cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Asymptotic p-value of a one-sample K-S statistic `d` from `n` values,
/// with Stephens' small-sample correction
/// `λ = (√n + 0.12 + 0.11/√n) d`, `p = 2 Σ (-1)^{k-1} exp(-2 k² λ²)`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Large-sample critical value `c(level)/√n` of the K-S statistic; the
/// constant is 1.63 at level 0.01, 1.36 at 0.05 and 1.22 at 0.10.
pub fn ks_critical_value(n: usize, level: f64) -> f64 {
    let c = (-0.5 * (level / 2.0).ln()).sqrt();
    c / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqData {
    /// `(theoretical, empirical)` quantiles, empirical ascending.
    pub points: Vec<(f64, f64)>,
}

/// Empirical order statistics against Exp(1) quantiles at plotting
/// positions `(i − 0.5)/n`.
pub fn qq_data(rescaled: &RescaledTimes) -> QqData {
    let mut xs = rescaled.values.clone();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let points = xs
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let p = (i as f64 + 0.5) / n;
            (-(-p).ln_1p(), x)
        })
        .collect();
    QqData { points }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPair {
    pub raw: f64,
    pub pearson: f64,
}

/// `R(t) = N(t) − ∫₀ᵗ λ̂(s) ds`.
pub fn raw_residual(
    spec: &ModelSpec,
    seq: &EventSequence,
    path: Option<&LatentPath>,
    t: f64,
) -> Result<f64> {
    let n = seq.counting_process(t)?;
    let f = PiecewiseIntensity::new(spec, seq, path)?;
    Ok(n as f64 - f.compensator(t)?)
}

/// `PR(t) = Σ_{t_m ≤ t} λ̂(t_m)^{-1/2} − ∫₀ᵗ √λ̂(s) ds`.
///
/// The integral is computed by adaptive Simpson quadrature on each smooth
/// piece of the intensity (pieces break at events and latent transitions)
/// with the absolute tolerance [`PEARSON_QUAD_TOL`] shared across pieces
/// in proportion to their length.
pub fn pearson_residual(
    spec: &ModelSpec,
    seq: &EventSequence,
    path: Option<&LatentPath>,
    t: f64,
) -> Result<f64> {
    Ok(residual_trajectory(spec, seq, path, &[t])?[0].pearson)
}

/// Raw and Pearson residuals at `t`.
pub fn residuals_at(
    spec: &ModelSpec,
    seq: &EventSequence,
    path: Option<&LatentPath>,
    t: f64,
) -> Result<ResidualPair> {
    Ok(residual_trajectory(spec, seq, path, &[t])?[0])
}

/// Raw and Pearson residual processes on a sorted grid of times in
/// `[0, T]`, in one sweep over the intensity pieces.
pub fn residual_trajectory(
    spec: &ModelSpec,
    seq: &EventSequence,
    path: Option<&LatentPath>,
    grid: &[f64],
) -> Result<Vec<ResidualPair>> {
    for &t in grid {
        seq.check_time(t)?;
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("residual grid must be sorted"));
    }
    let f = PiecewiseIntensity::new(spec, seq, path)?;
    let rates = f.event_rates();
    if let Some(m) = rates.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::ZeroIntensity { index: m });
    }
    let horizon = seq.horizon();
    let times = seq.times();
    let pieces = f.pieces();

    let sqrt_integral = |p: &crate::models::IntensityPiece, to: f64| -> Result<f64> {
        if to <= p.start {
            return Ok(0.0);
        }
        if p.excitation == 0.0 {
            return Ok(p.base.sqrt() * (to - p.start));
        }
        let tol = PEARSON_QUAD_TOL * (to - p.start) / horizon;
        adaptive_simpson(|s| p.rate(s).sqrt(), p.start, to, tol.max(1e-15))
    };

    let mut out = Vec::with_capacity(grid.len());
    let mut k = 0usize; // next piece
    let mut done_comp = 0.0; // ∫λ over completed pieces
    let mut done_sqrt = 0.0; // ∫√λ over completed pieces
    let mut ev = 0usize; // events counted so far
    let mut weight = 0.0; // Σ λ(t_m)^{-1/2} over counted events
    for &t in grid {
        while k < pieces.len() && pieces[k].end <= t {
            done_comp += pieces[k].integral();
            done_sqrt += sqrt_integral(&pieces[k], pieces[k].end)?;
            k += 1;
        }
        while ev < times.len() && times[ev] <= t {
            weight += 1.0 / rates[ev].sqrt();
            ev += 1;
        }
        let (mut comp, mut sq) = (done_comp, done_sqrt);
        if k < pieces.len() && pieces[k].start < t {
            comp += pieces[k].integral_to(t);
            sq += sqrt_integral(&pieces[k], t)?;
        }
        out.push(ResidualPair {
            raw: ev as f64 - comp,
            pearson: weight - sq,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{hawkes_compensator, GeneratorMatrix, HawkesParams, MmhpParams, PoissonParams};
    use crate::rng::RandomSource;
    use crate::simulate::{simulate_hawkes, simulate_mmhp, simulate_poisson};

    fn poisson(l: f64) -> ModelSpec {
        ModelSpec::Poisson(PoissonParams::new(l).unwrap())
    }

    /// Brute-force sup distance: scan a dense grid plus both one-sided
    /// limits at every sample point.
    fn brute_ks(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let ecdf = |x: f64| xs.iter().filter(|&&v| v <= x).count() as f64 / n;
        let ecdf_left = |x: f64| xs.iter().filter(|&&v| v < x).count() as f64 / n;
        let mut d: f64 = 0.0;
        for &x in xs {
            d = d.max((ecdf(x) - exp_cdf(x)).abs());
            d = d.max((ecdf_left(x) - exp_cdf(x)).abs());
        }
        for k in 0..20_000 {
            let x = k as f64 * 0.001;
            d = d.max((ecdf(x) - exp_cdf(x)).abs());
        }
        d
    }

    #[test]
    fn poisson_rescaling_is_rate_times_gap() {
        let seq = EventSequence::new(vec![0.5, 1.5], 3.0).unwrap();
        let r = rescaled_times(&poisson(2.0), &seq, None).unwrap();
        assert_eq!(r.values(), &[1.0, 2.0]);
    }

    #[test]
    fn hawkes_rescaled_times_telescope() {
        let h = HawkesParams::new(1.0, 1.6, 1.9).unwrap();
        let seq = simulate_hawkes(&h, 50.0, &mut RandomSource::new(2)).unwrap();
        let r = rescaled_times(&ModelSpec::Hawkes(h), &seq, None).unwrap();
        let total: f64 = r.values().iter().sum();
        let last = *seq.times().last().unwrap();
        assert!((total - hawkes_compensator(&h, &seq, last).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn ks_examples() {
        let n = 100;
        let xs: Vec<f64> = (1..=n)
            .map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln())
            .collect();
        let d = ks_statistic(&RescaledTimes::new(xs.clone()).unwrap()).unwrap();
        assert!((d - 0.005).abs() < 1e-12, "{d}");
        assert!((brute_ks(&xs) - 0.005).abs() < 1e-9);

        let d = ks_statistic(&RescaledTimes::new(vec![2f64.ln()]).unwrap()).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!((brute_ks(&[2f64.ln()]) - 0.5).abs() < 1e-12);

        let d = ks_statistic(&RescaledTimes::new(vec![1e9; 5]).unwrap()).unwrap();
        assert!((d - 1.0).abs() < 1e-12);

        assert!(matches!(
            ks_statistic(&RescaledTimes::new(vec![]).unwrap()),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn ks_agrees_with_brute_force_on_samples() {
        let mut rng = RandomSource::new(31);
        for n in [1usize, 2, 7, 40] {
            let xs: Vec<f64> = (0..n).map(|_| rng.exponential(0.8)).collect();
            let d = ks_statistic(&RescaledTimes::new(xs.clone()).unwrap()).unwrap();
            assert!((d - brute_ks(&xs)).abs() < 1e-9);
        }
    }

    #[test]
    fn critical_value_and_p_value_are_consistent() {
        assert!((ks_critical_value(1, 0.01) - 1.6276).abs() < 1e-3);
        let n = 400;
        let d = ks_critical_value(n, 0.01);
        let p = ks_p_value(d, n);
        assert!((p - 0.01).abs() < 2e-3, "{p}");
        assert_eq!(ks_p_value(0.0, 10), 1.0);
    }

    #[test]
    fn qq_examples() {
        let q = qq_data(&RescaledTimes::new(vec![0.693]).unwrap());
        assert_eq!(q.points.len(), 1);
        assert!((q.points[0].0 - 2f64.ln()).abs() < 1e-15);
        assert_eq!(q.points[0].1, 0.693);

        let q = qq_data(&RescaledTimes::new(vec![3.0, 1.0, 2.0]).unwrap());
        assert!(q.points.windows(2).all(|w| w[0].1 <= w[1].1));

        let n = 50;
        let xs: Vec<f64> = (1..=n).rev().map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln()).collect();
        let q = qq_data(&RescaledTimes::new(xs).unwrap());
        assert!(q.points.iter().all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn pearson_poisson_closed_form() {
        let times: Vec<f64> = (1..=10).map(|k| k as f64 * 0.29).collect();
        let seq = EventSequence::new(times, 3.0).unwrap();
        let pr = pearson_residual(&poisson(4.0), &seq, None, 3.0).unwrap();
        assert!((pr + 1.0).abs() < 1e-12, "{pr}");
    }

    /// `∫ √(a + c e^{-βs}) ds` in closed form: with `u = √(a + c e^{-βs})`,
    /// the antiderivative is `(2/β)(√a·arcoth(u/√a) − u)`.
    fn sqrt_hawkes_piece(a: f64, c: f64, beta: f64, len: f64) -> f64 {
        let anti = |s: f64| {
            let u = (a + c * (-beta * s).exp()).sqrt();
            let x = u / a.sqrt();
            let arcoth = 0.5 * ((x + 1.0) / (x - 1.0)).ln();
            2.0 / beta * (a.sqrt() * arcoth - u)
        };
        anti(len) - anti(0.0)
    }

    #[test]
    fn pearson_hawkes_matches_closed_form_integral() {
        let h = HawkesParams::new(1.0, 1.6, 1.9).unwrap();
        let spec = ModelSpec::Hawkes(h);
        let seq = simulate_hawkes(&h, 20.0, &mut RandomSource::new(12)).unwrap();
        let f = PiecewiseIntensity::new(&spec, &seq, None).unwrap();
        let mut integral = 0.0;
        for p in f.pieces() {
            integral += if p.excitation == 0.0 {
                p.base.sqrt() * p.len()
            } else {
                sqrt_hawkes_piece(p.base, p.excitation, p.decay, p.len())
            };
        }
        let weights: f64 = f.event_rates().iter().map(|r| 1.0 / r.sqrt()).sum();
        let pr = pearson_residual(&spec, &seq, None, 20.0).unwrap();
        assert!((pr - (weights - integral)).abs() < 1e-6);
    }

    #[test]
    fn residual_trajectory_matches_pointwise() {
        let p = MmhpParams::new(1.0, 1.1, 1.6, 1.9, GeneratorMatrix::new(0.2, 0.4).unwrap()).unwrap();
        let (seq, path) = simulate_mmhp(&p, 40.0, &mut RandomSource::new(6)).unwrap();
        let spec = ModelSpec::Mmhp(p);
        let grid = [0.0, 3.3, 10.0, 25.5, 40.0];
        let traj = residual_trajectory(&spec, &seq, Some(&path), &grid).unwrap();
        for (t, r) in grid.iter().zip(&traj) {
            let raw = raw_residual(&spec, &seq, Some(&path), *t).unwrap();
            let pr = pearson_residual(&spec, &seq, Some(&path), *t).unwrap();
            assert!((r.raw - raw).abs() < 1e-9);
            assert!((r.pearson - pr).abs() < 1e-6);
        }
        assert_eq!(traj[0], ResidualPair { raw: 0.0, pearson: 0.0 });
    }

    #[test]
    fn residual_signs_on_empty_sequence() {
        let seq = EventSequence::empty(5.0).unwrap();
        let spec = poisson(2.0);
        assert_eq!(raw_residual(&spec, &seq, None, 0.0).unwrap(), 0.0);
        assert!(raw_residual(&spec, &seq, None, 5.0).unwrap() < 0.0);
        assert!(pearson_residual(&spec, &seq, None, 5.0).unwrap() < 0.0);
    }

    #[test]
    fn zero_intensity_is_an_error() {
        let seq = EventSequence::new(vec![1.0], 2.0).unwrap();
        let spec = ModelSpec::Poisson(PoissonParams::degenerate());
        assert!(matches!(
            pearson_residual(&spec, &seq, None, 2.0),
            Err(Error::ZeroIntensity { index: 0 })
        ));
    }

    #[test]
    fn raw_residual_is_centered_and_biased_under_misspecification() {
        let lambda = 2.0;
        let horizon = 25.0;
        let runs = 1000;
        let mut sum_true = 0.0;
        let mut sum_double = 0.0;
        for seed in 0..runs {
            let seq = simulate_poisson(lambda, horizon, &mut RandomSource::new(seed)).unwrap();
            sum_true += raw_residual(&poisson(lambda), &seq, None, horizon).unwrap();
            sum_double += raw_residual(&poisson(2.0 * lambda), &seq, None, horizon).unwrap();
        }
        let mean_true = sum_true / runs as f64;
        let se = (lambda * horizon / runs as f64).sqrt();
        assert!(mean_true.abs() < 3.0 * se, "{mean_true}");
        let mean_double = sum_double / runs as f64;
        assert!((mean_double + lambda * horizon).abs() < 3.0 * se, "{mean_double}");
        let seq = simulate_poisson(lambda, horizon, &mut RandomSource::new(1)).unwrap();
        assert_eq!(
            raw_residual(&poisson(1.3), &seq, None, 7.0).unwrap(),
            raw_residual(&poisson(1.3), &seq, None, 7.0).unwrap()
        );
    }

    #[test]
    fn pearson_variance_does_not_depend_on_rate() {
        let horizon = 10.0;
        for lambda in [1.0, 100.0] {
            let prs: Vec<f64> = (0..1000)
                .map(|seed| {
                    let seq = simulate_poisson(lambda, horizon, &mut RandomSource::new(seed)).unwrap();
                    pearson_residual(&poisson(lambda), &seq, None, horizon).unwrap()
                })
                .collect();
            let mean = prs.iter().sum::<f64>() / prs.len() as f64;
            let var = prs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (prs.len() - 1) as f64;
            assert!((var - horizon).abs() < 0.1 * horizon, "λ={lambda}: var {var}");
        }
    }
}

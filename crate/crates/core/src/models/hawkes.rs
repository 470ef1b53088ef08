use super::{HawkesParams, PoissonParams};
use crate::error::{Error, Result};
use crate::events::EventSequence;

/// `λ(t) = λ₁ + α Σ_{t_m < t} exp(-β (t - t_m))`.
///
/// The sum is strict, so the intensity at an event time excludes that
/// event's own jump.
pub fn hawkes_intensity(params: &HawkesParams, seq: &EventSequence, t: f64) -> Result<f64> {
    seq.check_time(t)?;
    let prior = &seq.times()[..seq.count_before(t)];
    let sum: f64 = prior.iter().map(|&tm| (-params.beta * (t - tm)).exp()).sum();
    Ok(params.lambda1 + params.alpha * sum)
}

/// `∫₀ᵗ λ(s) ds = λ₁ t + (α/β) Σ_{t_m < t} (1 - exp(-β (t - t_m)))`.
pub fn hawkes_compensator(params: &HawkesParams, seq: &EventSequence, t: f64) -> Result<f64> {
    seq.check_time(t)?;
    let prior = &seq.times()[..seq.count_before(t)];
    let sum: f64 = prior
        .iter()
        .map(|&tm| -(-params.beta * (t - tm)).exp_m1())
        .sum();
    Ok(params.lambda1 * t + params.alpha / params.beta * sum)
}

/// The recursion `A_1 = 0`, `A_m = exp(-β (t_m - t_{m-1})) (1 + A_{m-1})`,
/// so that `λ(t_m) = λ₁ + α A_m`.
pub fn excitation_sums(beta: f64, times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut a = 0.0;
    for (m, &t) in times.iter().enumerate() {
        if m > 0 {
            a = (-beta * (t - times[m - 1])).exp() * (1.0 + a);
        }
        out.push(a);
    }
    out
}

/// `M log λ − λ T`. An empty sequence at λ = 0 gives 0.
pub fn loglik_poisson(params: &PoissonParams, seq: &EventSequence) -> f64 {
    let m = seq.len() as f64;
    let log_term = if seq.is_empty() { 0.0 } else { m * params.lambda.ln() };
    log_term - params.lambda * seq.horizon()
}

pub fn loglik_hawkes(params: &HawkesParams, seq: &EventSequence) -> Result<f64> {
    let times = seq.times();
    let horizon = seq.horizon();
    let mut a = 0.0;
    let mut log_sum = 0.0;
    let mut tail = 0.0;
    for (m, &t) in times.iter().enumerate() {
        if m > 0 {
            a = (-params.beta * (t - times[m - 1])).exp() * (1.0 + a);
        }
        let rate = params.lambda1 + params.alpha * a;
        log_sum += rate.ln();
        if !log_sum.is_finite() {
            return Err(Error::numeric(m, format!("Hawkes intensity {rate} at event {m}")));
        }
        tail += -(-params.beta * (horizon - t)).exp_m1();
    }
    let ll = log_sum - params.lambda1 * horizon - params.alpha / params.beta * tail;
    if !ll.is_finite() {
        return Err(Error::numeric(times.len(), "non-finite Hawkes log-likelihood"));
    }
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;
    use crate::rng::RandomSource;
    use crate::simulate::simulate_hawkes;

    fn case_one() -> HawkesParams {
        HawkesParams::new(1.0, 1.6, 1.9).unwrap()
    }

    #[test]
    fn intensity_examples() {
        let p = case_one();
        let empty = EventSequence::empty(10.0).unwrap();
        assert_eq!(hawkes_intensity(&p, &empty, 5.0).unwrap(), 1.0);
        let one = EventSequence::new(vec![0.5], 10.0).unwrap();
        assert_eq!(hawkes_intensity(&p, &one, 0.5).unwrap(), 1.0);
        let v = hawkes_intensity(&p, &one, 1.5).unwrap();
        let naive = 1.0 + 1.6 * (-1.9f64).exp();
        assert!((v - naive).abs() < 1e-15);
        assert!((v - 1.23931).abs() < 5e-6);
        assert!(hawkes_intensity(&p, &one, 10.5).is_err());
    }

    #[test]
    fn compensator_examples() {
        let seq = EventSequence::new(vec![0.5, 2.0, 6.0], 10.0).unwrap();
        let no_jump = HawkesParams {
            lambda1: 1.0,
            alpha: 0.0,
            beta: 1.9,
        };
        assert_eq!(hawkes_compensator(&no_jump, &seq, 7.0).unwrap(), 7.0);

        let p = case_one();
        let one = EventSequence::new(vec![0.5], 10.0).unwrap();
        let c = hawkes_compensator(&p, &one, 1.5).unwrap();
        let closed = 1.5 + 1.6 / 1.9 * (1.0 - (-1.9f64).exp());
        assert!((c - closed).abs() < 1e-14);
        assert!((c - 2.216153).abs() < 5e-6);
        // The intensity at 0.5 itself excludes the jump; integrate its right
        // limit so the integrand is smooth on the closed interval.
        let quad = adaptive_simpson(
            |s| {
                if s > 0.5 {
                    hawkes_intensity(&p, &one, s).unwrap()
                } else {
                    1.0 + 1.6
                }
            },
            0.5,
            1.5,
            1e-11,
        )
        .unwrap()
            + 0.5;
        assert!((c - quad).abs() < 1e-8);
    }

    #[test]
    fn recursion_matches_naive_double_loop() {
        let p = case_one();
        let mut rng = RandomSource::new(7);
        let seq = simulate_hawkes(&p, 60.0, &mut rng).unwrap();
        assert!(seq.len() >= 100, "{}", seq.len());
        let a = excitation_sums(p.beta, seq.times());
        let mut worst: f64 = 0.0;
        for (m, &tm) in seq.times().iter().enumerate() {
            let naive: f64 = seq.times()[..m]
                .iter()
                .map(|&tk| (-p.beta * (tm - tk)).exp())
                .sum();
            worst = worst.max((a[m] - naive).abs());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn poisson_loglik_examples() {
        let seq3 = EventSequence::new(vec![1.0, 2.0, 3.0], 10.0).unwrap();
        assert_eq!(loglik_poisson(&PoissonParams::new(1.0).unwrap(), &seq3), -10.0);
        let seq5 = EventSequence::new(vec![0.5, 1.0, 2.0, 3.0, 3.5], 4.0).unwrap();
        let ll = loglik_poisson(&PoissonParams::new(2.0).unwrap(), &seq5);
        assert!((ll - (5.0 * 2f64.ln() - 8.0)).abs() < 1e-14);
        assert!((ll + 4.53426).abs() < 5e-6);
        // argmax over a grid sits at M/T.
        let best = (1..=1000)
            .map(|k| k as f64 * 0.005)
            .max_by(|a, b| {
                let la = loglik_poisson(&PoissonParams::new(*a).unwrap(), &seq5);
                let lb = loglik_poisson(&PoissonParams::new(*b).unwrap(), &seq5);
                la.total_cmp(&lb)
            })
            .unwrap();
        assert!((best - 1.25).abs() < 1e-12);
    }

    #[test]
    fn tiny_alpha_reduces_to_poisson() {
        let seq = EventSequence::new(vec![0.3, 1.1, 1.2, 4.0, 7.7], 9.0).unwrap();
        let h = HawkesParams::new(0.8, 1e-12, 1.9).unwrap();
        let p = PoissonParams::new(0.8).unwrap();
        let diff = (loglik_hawkes(&h, &seq).unwrap() - loglik_poisson(&p, &seq)).abs();
        assert!(diff < 1e-6);
    }

    #[test]
    fn loglik_equals_log_intensities_minus_compensator() {
        let p = case_one();
        let mut rng = RandomSource::new(11);
        let seq = simulate_hawkes(&p, 30.0, &mut rng).unwrap();
        let mut direct = -hawkes_compensator(&p, &seq, seq.horizon()).unwrap();
        for &t in seq.times() {
            direct += hawkes_intensity(&p, &seq, t).unwrap().ln();
        }
        assert!((loglik_hawkes(&p, &seq).unwrap() - direct).abs() < 1e-9);
    }
}

//! Fits Poisson, Hawkes, MMPP and MMHP models to one simulated MMHP stream
//! and compares log-likelihood, AIC and K-S goodness of fit.
use std::time::Instant;

use ppdiag::diagnostics::{ks_statistic, rescaled_times};
use ppdiag::fit::{fit_model, FitOptions};
use ppdiag::simulate::simulate_mmhp;
use ppdiag::{GeneratorMatrix, MmhpParams, ModelKind, ModelSpec, RandomSource};

fn parameter_count(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Poisson => 1,
        ModelKind::Hawkes => 3,
        ModelKind::Mmpp => 4,
        ModelKind::Mmhp => 6,
    }
}

fn main() -> ppdiag::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let truth = MmhpParams::new(1.0, 1.1, 1.6, 1.9, GeneratorMatrix::new(0.2, 0.4)?)?;
    let (seq, _) = simulate_mmhp(&truth, 100.0, &mut RandomSource::new(seed))?;
    println!("{} events; true log-likelihood {:.3}", seq.len(), ModelSpec::Mmhp(truth).loglik(&seq)?);

    let opts = FitOptions::with_seed(seed);
    println!("{:8} {:>11} {:>10} {:>7} {:>9}", "model", "loglik", "AIC", "K-S", "time");
    for kind in ModelKind::ALL {
        let clock = Instant::now();
        let fit = fit_model(kind, &seq, &opts)?;
        let elapsed = clock.elapsed();
        let ks = ks_statistic(&rescaled_times(&fit.model, &seq, fit.latent_path.as_ref())?)?;
        let aic = 2.0 * parameter_count(kind) as f64 - 2.0 * fit.loglik;
        println!(
            "{:8} {:>11.3} {:>10.3} {:>7.4} {:>9.1?}",
            kind.as_str(),
            fit.loglik,
            aic,
            ks,
            elapsed
        );
        if !fit.converged {
            println!("         (optimizer hit its evaluation budget)");
        }
    }
    Ok(())
}

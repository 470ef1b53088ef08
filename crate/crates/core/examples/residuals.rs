//! Raw and Pearson residuals at the end of the window for models fitted to
//! replicate MMHP streams, with a LOWESS trend of each model's Pearson
//! residual against the event count. Poisson and Hawkes fits reproduce the
//! event count exactly at their maximum likelihood estimates, so their raw
//! residuals sit at zero.
use ppdiag::diagnostics::{lowess, residuals_at};
use ppdiag::fit::{fit_model, FitOptions};
use ppdiag::simulate::simulate_mmhp;
use ppdiag::{GeneratorMatrix, MmhpParams, ModelKind, RandomSource};

fn main() -> ppdiag::Result<()> {
    let replicates: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let truth = MmhpParams::new(0.5, 0.5, 3.0, 4.0, GeneratorMatrix::new(0.05, 0.1)?)?;
    let horizon = 200.0;
    let kinds = [ModelKind::Poisson, ModelKind::Hawkes, ModelKind::Mmpp];
    let mut counts = Vec::new();
    let mut pearson: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    println!("{:>4} {:>6}  R(T) / PR(T) for poisson, hawkes, mmpp", "rep", "events");
    for rep in 0..replicates {
        let (seq, _) = simulate_mmhp(&truth, horizon, &mut RandomSource::new(rep))?;
        if seq.len() < ModelKind::Mmpp.min_events() {
            continue;
        }
        counts.push(seq.len() as f64);
        let mut row = format!("{rep:>4} {:>6}", seq.len());
        for (k, kind) in kinds.iter().enumerate() {
            let fit = fit_model(*kind, &seq, &FitOptions::with_seed(rep))?;
            let r = residuals_at(&fit.model, &seq, fit.latent_path.as_ref(), horizon)?;
            pearson[k].push(r.pearson);
            row.push_str(&format!("  {:>7.3} / {:>7.3}", r.raw, r.pearson));
        }
        println!("{row}");
    }
    for (k, kind) in kinds.iter().enumerate() {
        let trend = lowess(&counts, &pearson[k], 2.0 / 3.0)?;
        let (lo, hi) = (trend.first().unwrap(), trend.last().unwrap());
        println!(
            "{} Pearson LOWESS: {:.3} at {} events, {:.3} at {} events",
            kind.as_str(),
            lo.1,
            lo.0,
            hi.1,
            hi.0
        );
    }
    Ok(())
}

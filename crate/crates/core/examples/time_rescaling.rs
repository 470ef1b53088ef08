//! Simulates a bursty MMHP stream and checks its rescaled inter-event
//! times against Exp(1) under the generating model and under a constant
//! rate Poisson model with the same mean.
use ppdiag::diagnostics::{ks_critical_value, ks_p_value, ks_statistic, rescaled_times};
use ppdiag::simulate::simulate_mmhp;
use ppdiag::{GeneratorMatrix, MmhpParams, ModelSpec, PoissonParams, RandomSource};

fn main() -> ppdiag::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let params = MmhpParams::new(1.0, 1.1, 1.6, 1.9, GeneratorMatrix::new(0.2, 0.4)?)?;
    let horizon = 100.0;
    let (seq, path) = simulate_mmhp(&params, horizon, &mut RandomSource::new(seed))?;
    println!(
        "{} events, {:.1} time units in the active state",
        seq.len(),
        path.occupancy(1)
    );

    let flat = ModelSpec::Poisson(PoissonParams::new(seq.len() as f64 / horizon)?);
    let candidates = [
        ("generating MMHP", ModelSpec::Mmhp(params), Some(&path)),
        ("flat Poisson", flat, None),
    ];
    let critical = ks_critical_value(seq.len(), 0.01);
    println!("K-S critical value at level 0.01: {critical:.4}");
    for (name, spec, latent) in candidates {
        let r = rescaled_times(&spec, &seq, latent)?;
        let d = ks_statistic(&r)?;
        let mean = r.values().iter().sum::<f64>() / r.len() as f64;
        println!(
            "{name:16} K-S {d:.4}  p {:.4}  mean rescaled gap {mean:.3}{}",
            ks_p_value(d, r.len()),
            if d > critical { "  (rejected)" } else { "" }
        );
    }
    Ok(())
}

//! Writes a Q-Q plot and an intensity plot for a fitted Hawkes model to the
//! directory given as the first argument (default `plots`).
use std::path::PathBuf;

use ppdiag::diagnostics::{qq_data, rescaled_times};
use ppdiag::fit::{fit_model, FitOptions};
use ppdiag::models::intensity_path;
use ppdiag::simulate::simulate_hawkes;
use ppdiag::svg::Plot;
use ppdiag::{HawkesParams, ModelKind, RandomSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "plots".into()));
    std::fs::create_dir_all(&dir)?;
    let truth = HawkesParams::new(0.5, 0.8, 1.2)?;
    let seq = simulate_hawkes(&truth, 60.0, &mut RandomSource::new(5))?;
    let fit = fit_model(ModelKind::Hawkes, &seq, &FitOptions::with_seed(5))?;

    let qq = qq_data(&rescaled_times(&fit.model, &seq, None)?);
    let svg = Plot::new("Q-Q of rescaled times", "Exp(1) quantile", "rescaled gap")
        .points("fitted Hawkes", &qq.points)
        .diagonal()
        .render();
    std::fs::write(dir.join("qq.svg"), svg)?;

    let grid: Vec<f64> = (0..=600).map(|i| 0.1 * i as f64).collect();
    let fitted = intensity_path(&fit.model, &seq, None, &grid)?;
    let generating = intensity_path(&ppdiag::ModelSpec::Hawkes(truth), &seq, None, &grid)?;
    let zip = |v: &[f64]| grid.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    let svg = Plot::new("Conditional intensity", "time", "intensity")
        .line("fitted", &zip(&fitted))
        .line("generating", &zip(&generating))
        .render();
    std::fs::write(dir.join("intensity.svg"), svg)?;
    println!("{} events; wrote qq.svg and intensity.svg to {}", seq.len(), dir.display());
    Ok(())
}

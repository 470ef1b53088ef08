//! Simulates a two-block network of MMHP pairs, fits the homogeneous and
//! block network models, and compares their Pearson residual structure
//! scores against the data-generating model.
use std::time::Instant;

use ppdiag::fit::{fit_network_from, FitOptions, NetworkFitResult, NetworkModelKind};
use ppdiag::netdiag::{ks_matrix, pearson_matrix, residual_structure_scores, NmfOptions};
use ppdiag::simulate::{simulate_network, BlockAlphaSpec, NetworkBaseParams};
use ppdiag::{GeneratorMatrix, Partition, RandomSource};

fn main() -> ppdiag::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let base = NetworkBaseParams {
        lambda0: 0.05,
        lambda1: 0.08,
        beta: 22.0,
        q: GeneratorMatrix::new(0.01, 0.04)?,
    };
    let partition = Partition::new(vec![(1..=4).collect(), (5..=10).collect()], 10)?;
    let spec = BlockAlphaSpec::new(partition.clone(), 20.0, 0.5)?;
    let sim = simulate_network(&base, &spec, 10, 500.0, &RandomSource::new(seed))?;
    println!("simulated {} events", sim.log.len());

    let opts = FitOptions::with_seed(seed);
    let clock = Instant::now();
    let homogeneous = fit_network_from(&sim.log, &NetworkModelKind::Homogeneous, &opts, None)?;
    println!("homogeneous fit: loglik {:.3} in {:.1?}", homogeneous.shared_loglik, clock.elapsed());
    let clock = Instant::now();
    let block = fit_network_from(
        &sim.log,
        &NetworkModelKind::Block { partition },
        &opts,
        Some(&homogeneous),
    )?;
    println!("block fit: loglik {:.3} in {:.1?}", block.shared_loglik, clock.elapsed());
    if let Some(alphas) = &block.block_alphas {
        println!("block alphas: {alphas:?}");
    }
    let truth = NetworkFitResult::from_truth(&base, &spec, &sim.log)?;

    let nmf = NmfOptions::with_seed(seed);
    println!("{:<12} {:>10} {:>10} {:>10} {:>10}", "model", "PR+", "PR-", "KS within", "KS between");
    for (name, fit) in [("homogeneous", &homogeneous), ("block", &block), ("true", &truth)] {
        let pearson = pearson_matrix(fit, &sim.log, 500.0, None)?;
        let scores = residual_structure_scores(&pearson.matrix, 2, &nmf)?;
        let ks = ks_matrix(fit, &sim.log, None)?.matrix;
        let same = |p| spec.partition.same_block(p);
        println!(
            "{:<12} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
            name,
            scores.positive,
            scores.negative,
            ks.mean_where(same).unwrap_or(f64::NAN),
            ks.mean_where(|p| !same(p)).unwrap_or(f64::NAN),
        );
    }
    Ok(())
}

//! Structure scores (relative NMF reconstruction error) of a block-patterned
//! matrix and of a sparse scattered one, for a few ranks.
use ppdiag::netdiag::{nmf, structure_score, Matrix, NmfOptions};
use ppdiag::RandomSource;

fn main() -> ppdiag::Result<()> {
    let n = 10;
    let mut rng = RandomSource::new(3);
    let mut block = Matrix::zeros(n, n);
    let mut noise = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let level = if (i < 4) == (j < 4) { 2.0 } else { 0.2 };
            block.set(i, j, level + 0.1 * rng.uniform());
            noise.set(i, j, if rng.uniform() < 0.2 { 3.0 * rng.uniform() } else { 0.0 });
        }
    }
    let opts = NmfOptions::with_seed(1);
    for k in 1..=3 {
        println!(
            "k = {k}: block score {:.3}, noise score {:.3}",
            structure_score(&block, k, &opts)?,
            structure_score(&noise, k, &opts)?
        );
    }
    let fit = nmf(&block, 2, &opts)?;
    println!(
        "rank-2 factorization of the block matrix: {} iterations, restart {}, objective {:.4e} -> {:.4e}",
        fit.iterations,
        fit.restart,
        fit.objective_trace.first().unwrap(),
        fit.objective_trace.last().unwrap()
    );
    Ok(())
}

//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL
//! line; passing numbers as arguments (`cargo test --test acceptance -- 1 7`)
//! runs only those criteria.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use ppdiag::diagnostics::{ks_p_value, ks_statistic, raw_residual, rescaled_times, residuals_at};
use ppdiag::fit::{fit_model, fit_network_from, FitOptions, NetworkFitResult, NetworkModelKind};
use ppdiag::models::{hawkes_compensator, loglik_hawkes, LatentPath};
use ppdiag::netdiag::{ks_matrix, nmf, pearson_matrix, residual_structure_scores, Matrix, NmfOptions};
use ppdiag::simulate::{
    simulate_hawkes, simulate_mmhp, simulate_mmpp, simulate_network, simulate_poisson, BlockAlphaSpec,
    NetworkBaseParams,
};
use ppdiag::{
    EventSequence, GeneratorMatrix, HawkesParams, MmhpParams, MmppParams, ModelKind, ModelSpec, Partition,
    PoissonParams, RandomSource,
};
use sha2::{Digest, Sha256};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bursty_mmhp() -> MmhpParams {
    MmhpParams::new(1.0, 1.1, 1.6, 1.9, GeneratorMatrix::new(0.2, 0.4).unwrap()).unwrap()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ks_p(spec: &ModelSpec, seq: &EventSequence, path: Option<&LatentPath>) -> f64 {
    let r = rescaled_times(spec, seq, path).unwrap();
    ks_p_value(ks_statistic(&r).unwrap(), r.len())
}

fn rescaling_sanity() -> Outcome {
    let horizon = 100.0;
    let mmhp = bursty_mmhp();
    let hawkes = HawkesParams::new(mmhp.lambda1(), mmhp.alpha(), mmhp.beta()).unwrap();
    let mmpp = MmppParams::new(1.0, 5.0, mmhp.q()).unwrap();
    let mut passes = BTreeMap::new();
    for seed in 0..100u64 {
        let mut rng = RandomSource::new(seed);
        let seq = simulate_poisson(1.0, horizon, &mut rng).unwrap();
        let p = ks_p(&ModelSpec::Poisson(PoissonParams::new(1.0).unwrap()), &seq, None);
        *passes.entry("poisson").or_insert(0) += (p >= 0.01) as usize;

        let seq = simulate_hawkes(&hawkes, horizon, &mut rng).unwrap();
        let p = ks_p(&ModelSpec::Hawkes(hawkes), &seq, None);
        *passes.entry("hawkes").or_insert(0) += (p >= 0.01) as usize;

        let (seq, path) = simulate_mmpp(&mmpp, horizon, &mut rng).unwrap();
        let p = ks_p(&ModelSpec::Mmpp(mmpp), &seq, Some(&path));
        *passes.entry("mmpp").or_insert(0) += (p >= 0.01) as usize;

        let (seq, path) = simulate_mmhp(&mmhp, horizon, &mut rng).unwrap();
        let p = ks_p(&ModelSpec::Mmhp(mmhp), &seq, Some(&path));
        *passes.entry("mmhp").or_insert(0) += (p >= 0.01) as usize;
    }
    let pass = passes.values().all(|&n| n >= 95);
    outcome(pass, format!("K-S passes at level 0.01 out of 100: {passes:?}"))
}

fn pearson_calibration() -> Outcome {
    let spec = ModelSpec::Poisson(PoissonParams::new(1.0).unwrap());
    let mut rng = RandomSource::new(2);
    let values: Vec<f64> = (0..1000)
        .map(|_| {
            let seq = simulate_poisson(1.0, 50.0, &mut rng).unwrap();
            residuals_at(&spec, &seq, None, 50.0).unwrap().pearson
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let pass = mean.abs() <= 0.5 && (45.0..=55.0).contains(&var);
    outcome(pass, format!("mean PR(T) {mean:.4}, variance {var:.3}"))
}

struct Replicate {
    ks: BTreeMap<&'static str, f64>,
    raw: BTreeMap<&'static str, f64>,
}

fn mmhp_replicates() -> &'static [Replicate] {
    static CELL: std::sync::OnceLock<Vec<Replicate>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let params = bursty_mmhp();
        (0..50u64)
            .map(|seed| {
                let mut rng = RandomSource::new(1000 + seed);
                let (seq, path) = simulate_mmhp(&params, 100.0, &mut rng).unwrap();
                let truth = ModelSpec::Mmhp(params);
                let mut ks = BTreeMap::new();
                let mut raw = BTreeMap::new();
                let r = rescaled_times(&truth, &seq, Some(&path)).unwrap();
                ks.insert("true", ks_statistic(&r).unwrap());
                raw.insert("true", raw_residual(&truth, &seq, Some(&path), 100.0).unwrap());
                let opts = FitOptions::with_seed(seed);
                for kind in ModelKind::ALL {
                    let fit = fit_model(kind, &seq, &opts).unwrap();
                    let path = fit.latent_path.as_ref();
                    let r = rescaled_times(&fit.model, &seq, path).unwrap();
                    ks.insert(kind.as_str(), ks_statistic(&r).unwrap());
                    raw.insert(kind.as_str(), raw_residual(&fit.model, &seq, path, 100.0).unwrap());
                }
                Replicate { ks, raw }
            })
            .collect()
    })
}

fn ks_ordering() -> Outcome {
    let reps = mmhp_replicates();
    let n = reps.len() as f64;
    let share = |other: &str| reps.iter().filter(|r| r.ks["mmhp"] < r.ks[other]).count() as f64 / n;
    let (poisson, hawkes) = (share("poisson"), share("hawkes"));
    let pass = poisson >= 0.9 && hawkes >= 0.75;
    outcome(
        pass,
        format!("fitted MMHP K-S below Poisson in {:.0}%, below Hawkes in {:.0}%", 100.0 * poisson, 100.0 * hawkes),
    )
}

fn residual_signs() -> Outcome {
    let reps = mmhp_replicates();
    let medians: BTreeMap<&str, f64> = ["true", "poisson", "hawkes", "mmpp", "mmhp"]
        .into_iter()
        .map(|m| (m, median(&reps.iter().map(|r| r.raw[m]).collect::<Vec<_>>())))
        .collect();
    let truth = medians["true"].abs();
    let nearest = medians.iter().all(|(m, v)| *m == "true" || truth < v.abs());
    let pass = medians["hawkes"] > 0.0 && medians["mmpp"] > 0.0 && nearest;
    let listed: Vec<String> = medians.iter().map(|(m, v)| format!("{m} {v:.3e}")).collect();
    outcome(pass, format!("median R(T): {}", listed.join(", ")))
}

struct NetworkReplicate {
    homogeneous: (f64, f64),
    block: (f64, f64),
    ks_within: f64,
    ks_between: f64,
}

fn network_replicates() -> &'static [NetworkReplicate] {
    static CELL: std::sync::OnceLock<Vec<NetworkReplicate>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let base = NetworkBaseParams {
            lambda0: 0.05,
            lambda1: 0.08,
            beta: 22.0,
            q: GeneratorMatrix::new(0.01, 0.04).unwrap(),
        };
        let partition = Partition::new(vec![(1..=4).collect(), (5..=10).collect()], 10).unwrap();
        let spec = BlockAlphaSpec::new(partition.clone(), 20.0, 0.5).unwrap();
        (0..10u64)
            .map(|seed| {
                let sim = simulate_network(&base, &spec, 10, 500.0, &RandomSource::new(seed + 1)).unwrap();
                let opts = FitOptions::with_seed(seed);
                let homogeneous = fit_network_from(&sim.log, &NetworkModelKind::Homogeneous, &opts, None).unwrap();
                let block = fit_network_from(
                    &sim.log,
                    &NetworkModelKind::Block {
                        partition: partition.clone(),
                    },
                    &opts,
                    Some(&homogeneous),
                )
                .unwrap();
                let scores = |fit: &NetworkFitResult| {
                    let pr = pearson_matrix(fit, &sim.log, 500.0, None).unwrap();
                    let s = residual_structure_scores(&pr.matrix, 2, &NmfOptions::with_seed(seed)).unwrap();
                    (s.positive, s.negative)
                };
                let ks = ks_matrix(&homogeneous, &sim.log, None).unwrap().matrix;
                let rep = NetworkReplicate {
                    homogeneous: scores(&homogeneous),
                    block: scores(&block),
                    ks_within: ks.mean_where(|p| partition.same_block(p)).unwrap(),
                    ks_between: ks.mean_where(|p| !partition.same_block(p)).unwrap(),
                };
                println!(
                    "  network replicate {seed}: homogeneous PR+ {:.3} PR- {:.3}, block PR+ {:.3} PR- {:.3}, \
                     homogeneous K-S within {:.3} between {:.3}",
                    rep.homogeneous.0, rep.homogeneous.1, rep.block.0, rep.block.1, rep.ks_within, rep.ks_between
                );
                rep
            })
            .collect()
    })
}

fn structure_scores() -> Outcome {
    let reps = network_replicates();
    let ordered = reps
        .iter()
        .filter(|r| r.homogeneous.0 > r.block.0 && r.homogeneous.1 > r.block.1)
        .count();
    let n = reps.len() as f64;
    let homogeneous_neg = reps.iter().map(|r| r.homogeneous.1).sum::<f64>() / n;
    let block_neg = reps.iter().map(|r| r.block.1).sum::<f64>() / n;
    let pass = ordered >= 9 && homogeneous_neg > 0.7 && block_neg < 0.6;
    outcome(
        pass,
        format!(
            "homogeneous above block on both scores in {ordered}/10; mean PR- score homogeneous {homogeneous_neg:.3}, block {block_neg:.3}"
        ),
    )
}

fn block_pattern() -> Outcome {
    let reps = network_replicates();
    let worse = reps.iter().filter(|r| r.ks_between > r.ks_within).count();
    outcome(worse >= 9, format!("between-block mean K-S above within-block in {worse}/10"))
}

fn naive_hawkes_intensity(p: &HawkesParams, times: &[f64], t: f64) -> f64 {
    p.lambda1()
        + times
            .iter()
            .take_while(|&&s| s < t)
            .map(|&s| p.alpha() * (-p.beta() * (t - s)).exp())
            .sum::<f64>()
}

/// Composite Gauss-Legendre (5 nodes) on each inter-event interval, where
/// the intensity is smooth, split into `panels` equal panels.
fn gauss_compensator(p: &HawkesParams, times: &[f64], horizon: f64, panels: usize) -> f64 {
    const NODES: [(f64, f64); 5] = [
        (0.0, 0.568_888_888_888_888_9),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let mut knots = vec![0.0];
    knots.extend(times.iter().copied().filter(|&t| t < horizon));
    knots.push(horizon);
    let mut total = 0.0;
    for w in knots.windows(2) {
        let h = (w[1] - w[0]) / panels as f64;
        for k in 0..panels {
            let mid = w[0] + (k as f64 + 0.5) * h;
            for (x, weight) in NODES {
                total += 0.5 * h * weight * naive_hawkes_intensity(p, times, mid + 0.5 * h * x);
            }
        }
    }
    total
}

fn random_hawkes(rng: &mut RandomSource) -> (HawkesParams, EventSequence) {
    let beta = 0.2 + 5.0 * rng.uniform();
    let alpha = beta * 0.9 * rng.uniform();
    let lambda1 = 0.1 + 2.0 * rng.uniform();
    let horizon = 5.0 + 45.0 * rng.uniform();
    let params = HawkesParams::new(lambda1, alpha, beta).unwrap();
    let seq = simulate_hawkes(&params, horizon, rng).unwrap();
    (params, seq)
}

fn naive_loglik(p: &HawkesParams, seq: &EventSequence) -> f64 {
    let times = seq.times();
    let mut sum = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let mut rate = p.lambda1();
        for &s in &times[..i] {
            rate += p.alpha() * (-p.beta() * (t - s)).exp();
        }
        sum += rate.ln();
    }
    let compensator = p.lambda1() * seq.horizon()
        + times
            .iter()
            .map(|&s| p.alpha() / p.beta() * (1.0 - (-p.beta() * (seq.horizon() - s)).exp()))
            .sum::<f64>();
    sum - compensator
}

fn svd_rank_error(a: &Matrix, k: usize) -> f64 {
    let m = DMatrix::from_row_slice(a.rows, a.cols, &a.data);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let tail: f64 = sv[k..].iter().map(|s| s * s).sum();
    (tail / total).sqrt()
}

fn random_matrix(rng: &mut RandomSource) -> Matrix {
    let rows = 3 + (rng.next_u64() % 8) as usize;
    let cols = 3 + (rng.next_u64() % 8) as usize;
    Matrix {
        rows,
        cols,
        data: (0..rows * cols).map(|_| 5.0 * rng.uniform()).collect(),
    }
}

fn deterministic_oracles() -> Outcome {
    let mut rng = RandomSource::new(7);
    let mut worst_comp: f64 = 0.0;
    for _ in 0..100 {
        let (p, seq) = random_hawkes(&mut rng);
        let closed = hawkes_compensator(&p, &seq, seq.horizon()).unwrap();
        let quad = gauss_compensator(&p, seq.times(), seq.horizon(), 64);
        worst_comp = worst_comp.max((closed - quad).abs());
    }
    let mut worst_ll: f64 = 0.0;
    for _ in 0..100 {
        let (p, seq) = random_hawkes(&mut rng);
        let fast = loglik_hawkes(&p, &seq).unwrap();
        worst_ll = worst_ll.max((fast - naive_loglik(&p, &seq)).abs());
    }
    let mut increases = 0;
    let mut runs = 0;
    let mut svd_violations = 0;
    let mut worst_gap = f64::INFINITY;
    for i in 0..50u64 {
        let a = random_matrix(&mut rng);
        let k = 1 + (rng.next_u64() % 2) as usize;
        let mut best = f64::INFINITY;
        for restart in 0..3 {
            let opts = NmfOptions {
                restarts: 1,
                max_iterations: 300,
                tolerance: 1e-10,
                seed: 100 * i + restart,
            };
            let r = nmf(&a, k, &opts).unwrap();
            runs += 1;
            increases += r.objective_trace.windows(2).filter(|w| w[1] > w[0]).count();
            best = best.min(r.relative_error);
        }
        let svd = svd_rank_error(&a, k);
        worst_gap = worst_gap.min(best - svd);
        if best < svd - 1e-12 {
            svd_violations += 1;
        }
    }
    let pass = worst_comp <= 1e-6 && worst_ll <= 1e-9 && increases == 0 && svd_violations == 0;
    outcome(
        pass,
        format!(
            "compensator vs quadrature max error {worst_comp:.2e}; loglik recursion vs double loop max error \
             {worst_ll:.2e}; NMF objective increases {increases} over {runs} runs; NMF below rank-k SVD error \
             in {svd_violations}/50 (smallest gap {worst_gap:.2e})"
        ),
    )
}

fn ppdiag(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_ppdiag"))
        .args(args)
        .output()
        .expect("run ppdiag")
        .status
        .code()
        .unwrap_or(-1)
}

fn cohort_pipeline(out: &Path) -> Result<(), String> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/cohort");
    let s = |p: PathBuf| p.display().to_string();
    let sim = out.join("sim");
    let fit = out.join("fit");
    let events = s(sim.join("events.csv"));
    let steps: Vec<(&str, Vec<String>)> = vec![
        (
            "simulate",
            vec!["simulate".into(), "--config".into(), s(fixtures.join("simulate.toml")), "--out".into(), s(sim.clone())],
        ),
        (
            "fit",
            vec![
                "fit".into(),
                "--events".into(),
                events.clone(),
                "--network".into(),
                "homogeneous,block,heterogeneous".into(),
                "--blocks".into(),
                "1,2,3;4,5,6".into(),
                "--config".into(),
                s(fixtures.join("fit.toml")),
                "--out".into(),
                s(fit.clone()),
            ],
        ),
        ("diagnose", {
            let mut a = vec!["diagnose".into(), "--events".into(), events.clone()];
            for f in ["homogeneous", "block", "heterogeneous"] {
                a.extend(["--model".into(), s(fit.join(format!("{f}_fit.json")))]);
            }
            a.extend(["--model".into(), s(sim.join("true_fit.json"))]);
            a.extend(["--out".into(), s(out.join("diagnose"))]);
            a
        }),
        ("netdiag", {
            let mut a = vec!["netdiag".into(), "--events".into(), events.clone()];
            for f in ["homogeneous", "block", "heterogeneous"] {
                a.extend(["--fit".into(), s(fit.join(format!("{f}_fit.json")))]);
            }
            a.extend(["--fit".into(), s(sim.join("true_fit.json"))]);
            a.extend([
                "--order".into(),
                s(fixtures.join("order.txt")),
                "--blocks".into(),
                "1,2,3;4,5,6".into(),
                "--out".into(),
                s(out.join("netdiag")),
            ]);
            a
        }),
    ];
    for (name, args) in &steps {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let code = ppdiag(&refs);
        if code != 0 {
            return Err(format!("{name} exited with {code}"));
        }
    }
    Ok(())
}

/// sha256 of every CSV and SVG under `root`, keyed by relative path.
fn digests(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for dir in ["sim", "fit", "diagnose", "netdiag"] {
        let mut entries: Vec<_> = std::fs::read_dir(root.join(dir)).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if ext == "csv" || ext == "svg" {
                let bytes = std::fs::read(&path).unwrap();
                let name = format!("{dir}/{}", path.file_name().unwrap().to_string_lossy());
                out.insert(name, format!("{:x}", Sha256::digest(&bytes)));
            }
        }
    }
    out
}

fn cohort_fixture() -> Outcome {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    for dir in [&first, &second] {
        if let Err(e) = cohort_pipeline(dir.path()) {
            return outcome(false, format!("cohort pipeline failed: {e}"));
        }
    }
    let a = digests(first.path());
    let b = digests(second.path());
    if a != b {
        let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
        return outcome(false, format!("reruns differ in {differing:?}"));
    }
    let pinned_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/cohort/expected.sha256");
    let pinned: BTreeMap<String, String> = std::fs::read_to_string(&pinned_path)
        .unwrap_or_default()
        .lines()
        .filter_map(|l| l.split_once("  "))
        .map(|(h, f)| (f.to_string(), h.to_string()))
        .collect();
    if pinned != a {
        if std::env::var_os("PPDIAG_PIN_COHORT").is_some() {
            let text: String = a.iter().map(|(f, h)| format!("{h}  {f}\n")).collect();
            std::fs::write(&pinned_path, text).unwrap();
        }
        let differing: Vec<&String> = a.keys().chain(pinned.keys()).filter(|k| a.get(*k) != pinned.get(*k)).collect();
        return outcome(false, format!("outputs differ from the pinned digests in {differing:?}"));
    }
    outcome(true, format!("{} CSV and SVG outputs byte-identical across reruns and equal to the pinned digests", a.len()))
}

type Criterion = (u32, &'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "time rescaling sanity", rescaling_sanity, Some(Duration::from_secs(120))),
        (2, "Pearson residual calibration", pearson_calibration, Some(Duration::from_secs(60))),
        (3, "K-S ordering on replicate MMHP streams", ks_ordering, Some(Duration::from_secs(30 * 60))),
        (4, "raw residual signs on replicate MMHP streams", residual_signs, None),
        (5, "structure scores of the two-block network", structure_scores, Some(Duration::from_secs(60 * 60))),
        (6, "between-block K-S pattern of the homogeneous fit", block_pattern, None),
        (7, "deterministic oracles", deterministic_oracles, None),
        (8, "cohort-like fixture pipeline", cohort_fixture, None),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let clock = Instant::now();
        let Outcome { mut pass, mut detail } = check();
        let elapsed = clock.elapsed();
        if let Some(limit) = budget {
            if elapsed > limit {
                pass = false;
                detail.push_str(&format!("; over the {:?} budget", limit));
            }
        }
        println!(
            "{} criterion {id} ({name}): {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        failed += (!pass) as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

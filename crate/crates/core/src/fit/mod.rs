//! Maximum-likelihood fitting of the univariate models and of the three
//! network variants.
//!
//! Every fit maximizes the exact (or sub-grid) log-likelihood over an
//! unconstrained reparameterization with the Nelder-Mead simplex method:
//! rates enter through their logarithms and the active-state rate of the
//! modulated models as `λ₁ = λ₀ + e^η`, so any returned parameter set is
//! valid and has `λ₁ > λ₀`. Each fit runs several starts; the deterministic
//! starts come first and the remaining ones are uniform `(−1, 1)`
//! perturbations in parameter space, cycling through the deterministic
//! starts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSequence;
use crate::models::{
    decode_latent_path, loglik_hawkes, loglik_mmhp, loglik_mmpp, loglik_poisson, GeneratorMatrix,
    HawkesParams, LatentPath, MmhpParams, MmppParams, ModelKind, ModelSpec, PoissonParams,
};
use crate::optim::{minimize, SimplexOptions};
use crate::rng::RandomSource;

mod network;

pub use network::{fit_network, fit_network_from, NetworkFitResult, NetworkModelKind, PairFailure, PairModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Objective evaluations allowed per start.
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    pub multistart_count: usize,
    /// Seed of the stream that draws perturbed starts.
    pub seed: u64,
    /// Heterogeneous network fits: pairs with fewer events than this use
    /// the homogeneous estimate.
    pub min_pair_events: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 2000,
            relative_tolerance: 1e-6,
            multistart_count: 10,
            seed: 0,
            min_pair_events: ModelKind::Mmhp.min_events(),
        }
    }
}

impl FitOptions {
    pub fn with_seed(seed: u64) -> Self {
        FitOptions {
            seed,
            ..FitOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance.is_finite()) {
            return Err(Error::validation(format!(
                "relative_tolerance must be > 0, got {}",
                self.relative_tolerance
            )));
        }
        if self.multistart_count < 1 {
            return Err(Error::validation("multistart_count must be at least 1"));
        }
        if self.max_iterations < 1 {
            return Err(Error::validation("max_iterations must be at least 1"));
        }
        Ok(())
    }

    fn simplex(&self) -> SimplexOptions {
        SimplexOptions {
            max_evaluations: self.max_iterations,
            relative_tolerance: self.relative_tolerance,
            // Likelihood surfaces have flat directions (e.g. ln α → −∞ on
            // data without excitation), so only the objective spread counts.
            step_tolerance: f64::INFINITY,
            ..SimplexOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start_loglik: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelSpec,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub start_index: usize,
    /// Boundary estimate, e.g. λ̂ = 0 for an empty sequence.
    #[serde(default)]
    pub degenerate: bool,
    /// Viterbi path of the fitted chain, for modulated models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_path: Option<LatentPath>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub starts: Vec<StartOutcome>,
}

/// Closed-form MLE `λ̂ = M/T`. An empty sequence gives the boundary value
/// `λ̂ = 0`, flagged as degenerate.
pub fn fit_poisson(seq: &EventSequence) -> Result<FitResult> {
    if seq.is_empty() {
        return Ok(FitResult {
            model: ModelSpec::Poisson(PoissonParams::degenerate()),
            loglik: 0.0,
            converged: true,
            iterations: 0,
            start_index: 0,
            degenerate: true,
            latent_path: None,
            starts: Vec::new(),
        });
    }
    let params = PoissonParams::new(seq.len() as f64 / seq.horizon())?;
    Ok(FitResult {
        model: ModelSpec::Poisson(params),
        loglik: loglik_poisson(&params, seq),
        converged: true,
        iterations: 0,
        start_index: 0,
        degenerate: false,
        latent_path: None,
        starts: Vec::new(),
    })
}

fn require_events(seq: &EventSequence, kind: ModelKind) -> Result<()> {
    let required = kind.min_events();
    if seq.len() < required {
        return Err(Error::UnderIdentified {
            found: seq.len(),
            required,
        });
    }
    Ok(())
}

/// Outcome of a multistart search over an unconstrained parameter vector.
pub(crate) struct Search {
    pub theta: Vec<f64>,
    pub start_index: usize,
    pub iterations: usize,
    pub converged: bool,
    pub starts: Vec<StartOutcome>,
}

/// Maximizes `loglik` from the deterministic starts plus perturbations up
/// to `opts.multistart_count` starts in total. The winner is the best
/// converged start; it is an error when no start converges.
pub(crate) fn multistart<F>(
    label: &str,
    loglik: F,
    deterministic: &[Vec<f64>],
    opts: &FitOptions,
    stream: u64,
) -> Result<Search>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    opts.validate()?;
    let mut rng = RandomSource::new(opts.seed).split(stream);
    let mut starts: Vec<Vec<f64>> = deterministic
        .iter()
        .take(opts.multistart_count)
        .cloned()
        .collect();
    let mut k = 0;
    while starts.len() < opts.multistart_count {
        let base = &deterministic[k % deterministic.len()];
        starts.push(base.iter().map(|v| v + 2.0 * rng.uniform() - 1.0).collect());
        k += 1;
    }
    let simplex = opts.simplex();
    let runs: Vec<(Vec<f64>, StartOutcome)> = starts
        .par_iter()
        .map(|x0| {
            let m = minimize(|x| -loglik(x), x0, &simplex);
            let start_loglik = loglik(x0);
            (
                m.x,
                StartOutcome {
                    start_loglik,
                    loglik: -m.value,
                    converged: m.converged,
                    iterations: m.evaluations,
                },
            )
        })
        .collect();
    let winner = runs
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| o.converged && o.loglik.is_finite())
        .max_by(|a, b| a.1 .1.loglik.total_cmp(&b.1 .1.loglik).then(b.0.cmp(&a.0)));
    let Some((index, (theta, outcome))) = winner else {
        let best = runs
            .iter()
            .map(|(_, o)| o.loglik)
            .fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NonConvergence(format!(
            "{label}: none of {} starts converged within {} evaluations (best loglik {best})",
            runs.len(),
            opts.max_iterations
        )));
    };
    Ok(Search {
        theta: theta.clone(),
        start_index: index,
        iterations: outcome.iterations,
        converged: true,
        starts: runs.iter().map(|(_, o)| o.clone()).collect(),
    })
}

const HAWKES_STREAM: u64 = 1;
const MMPP_STREAM: u64 = 2;
const MMHP_STREAM: u64 = 3;

fn hawkes_from(theta: &[f64]) -> Result<HawkesParams> {
    HawkesParams::new(theta[0].exp(), theta[1].exp(), theta[2].exp())
}

fn mmpp_from(theta: &[f64]) -> Result<MmppParams> {
    let lambda0 = theta[0].exp();
    MmppParams::new(
        lambda0,
        lambda0 + theta[1].exp(),
        GeneratorMatrix::new(theta[2].exp(), theta[3].exp())?,
    )
}

pub(crate) fn mmhp_from(theta: &[f64]) -> Result<MmhpParams> {
    let lambda0 = theta[0].exp();
    MmhpParams::new(
        lambda0,
        lambda0 + theta[1].exp(),
        theta[2].exp(),
        theta[3].exp(),
        GeneratorMatrix::new(theta[4].exp(), theta[5].exp())?,
    )
}

pub(crate) fn mmhp_theta(p: &MmhpParams) -> Vec<f64> {
    vec![
        p.lambda0().ln(),
        (p.lambda1() - p.lambda0()).max(1e-3 * p.lambda0()).ln(),
        p.alpha().ln(),
        p.beta().ln(),
        p.q().q01().ln(),
        p.q().q10().ln(),
    ]
}

fn or_neg_inf(v: Result<f64>) -> f64 {
    match v {
        Ok(v) if v.is_finite() => v,
        _ => f64::NEG_INFINITY,
    }
}

/// MLE over `(ln λ₁, ln α, ln β)`. Starts: the moment start
/// `λ₁ = 0.5·M/T, α = β = 1`, and the near-Poisson point
/// `λ₁ = M/T, α = 10⁻³, β = 1` so the fit never ends below the Poisson fit.
pub fn fit_hawkes(seq: &EventSequence, opts: &FitOptions) -> Result<FitResult> {
    require_events(seq, ModelKind::Hawkes)?;
    let rate = seq.len() as f64 / seq.horizon();
    let starts = vec![
        vec![(0.5 * rate).ln(), 0.0, 0.0],
        vec![rate.ln(), 1e-3f64.ln(), 0.0],
    ];
    let search = multistart(
        "hawkes",
        |x| or_neg_inf(hawkes_from(x).and_then(|p| loglik_hawkes(&p, seq))),
        &starts,
        opts,
        HAWKES_STREAM,
    )?;
    let params = hawkes_from(&search.theta)?;
    Ok(FitResult {
        model: ModelSpec::Hawkes(params),
        loglik: loglik_hawkes(&params, seq)?,
        converged: search.converged,
        iterations: search.iterations,
        start_index: search.start_index,
        degenerate: false,
        latent_path: None,
        starts: search.starts,
    })
}

/// MLE over `(ln λ₀, η, ln q01, ln q10)` with `λ₁ = λ₀ + e^η`. Starts:
/// `λ₀ = 0.5·M/T, λ₁ = 1.5·M/T, q01 = q10 = 10/T`, and the near-Poisson
/// point `λ₀ = M/T, λ₁ = 1.001·M/T`.
pub fn fit_mmpp(seq: &EventSequence, opts: &FitOptions) -> Result<FitResult> {
    require_events(seq, ModelKind::Mmpp)?;
    let horizon = seq.horizon();
    let rate = seq.len() as f64 / horizon;
    let q = (10.0 / horizon).ln();
    let starts = vec![
        vec![(0.5 * rate).ln(), rate.ln(), q, q],
        vec![rate.ln(), (1e-3 * rate).ln(), q, q],
    ];
    let search = multistart(
        "mmpp",
        |x| or_neg_inf(mmpp_from(x).and_then(|p| loglik_mmpp(&p, seq))),
        &starts,
        opts,
        MMPP_STREAM,
    )?;
    let params = mmpp_from(&search.theta)?;
    let model = ModelSpec::Mmpp(params);
    let latent_path = Some(decode_latent_path(&model, seq)?);
    Ok(FitResult {
        loglik: loglik_mmpp(&params, seq)?,
        model,
        converged: search.converged,
        iterations: search.iterations,
        start_index: search.start_index,
        degenerate: false,
        latent_path,
        starts: search.starts,
    })
}

/// MLE over `(ln λ₀, η, ln α, ln β, ln q01, ln q10)`. Deterministic
/// starts, in order: the fitted MMPP with a negligible jump size (so the
/// fit never ends below the MMPP fit), the fitted Hawkes process as the
/// active state with `λ₀ = λ₁/2`, and the moment start
/// `λ₀ = 0.5·M/T, λ₁ = M/T, α = 1, β = 2, q01 = q10 = 10/T`. The winning
/// model's Viterbi path is cached.
pub fn fit_mmhp(seq: &EventSequence, opts: &FitOptions) -> Result<FitResult> {
    require_events(seq, ModelKind::Mmhp)?;
    let horizon = seq.horizon();
    let rate = seq.len() as f64 / horizon;
    let q = (10.0 / horizon).ln();
    let sub_opts = FitOptions {
        multistart_count: opts.multistart_count.min(2),
        ..*opts
    };
    let mut starts = Vec::with_capacity(3);
    if let Ok(fit) = fit_mmpp(seq, &sub_opts) {
        if let ModelSpec::Mmpp(p) = fit.model {
            starts.push(vec![
                p.lambda0().ln(),
                (p.lambda1() - p.lambda0()).ln(),
                (1e-4 * rate).ln(),
                0.0,
                p.q().q01().ln(),
                p.q().q10().ln(),
            ]);
        }
    }
    if let Ok(fit) = fit_hawkes(seq, &sub_opts) {
        if let ModelSpec::Hawkes(h) = fit.model {
            starts.push(vec![
                (0.5 * h.lambda1()).ln(),
                (0.5 * h.lambda1()).ln(),
                h.alpha().ln(),
                h.beta().ln(),
                q,
                q,
            ]);
        }
    }
    starts.push(vec![
        (0.5 * rate).ln(),
        (0.5 * rate).ln(),
        0.0,
        2f64.ln(),
        q,
        q,
    ]);
    let search = multistart(
        "mmhp",
        |x| or_neg_inf(mmhp_from(x).and_then(|p| loglik_mmhp(&p, seq))),
        &starts,
        opts,
        MMHP_STREAM,
    )?;
    let params = mmhp_from(&search.theta)?;
    let model = ModelSpec::Mmhp(params);
    let latent_path = Some(decode_latent_path(&model, seq)?);
    Ok(FitResult {
        loglik: loglik_mmhp(&params, seq)?,
        model,
        converged: search.converged,
        iterations: search.iterations,
        start_index: search.start_index,
        degenerate: false,
        latent_path,
        starts: search.starts,
    })
}

pub fn fit_model(kind: ModelKind, seq: &EventSequence, opts: &FitOptions) -> Result<FitResult> {
    match kind {
        ModelKind::Poisson => fit_poisson(seq),
        ModelKind::Hawkes => fit_hawkes(seq, opts),
        ModelKind::Mmpp => fit_mmpp(seq, opts),
        ModelKind::Mmhp => fit_mmhp(seq, opts),
    }
}

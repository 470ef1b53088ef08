use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_mmhp, mmhp_from, mmhp_theta, multistart, or_neg_inf, FitOptions, StartOutcome};
use crate::error::{Error, Result};
use crate::events::{EventSequence, NetworkEventLog, PairIndex, Partition};
use crate::models::{loglik_mmhp, GeneratorMatrix, MmhpParams, ModelSpec};
use crate::simulate::{BlockAlphaSpec, NetworkBaseParams};

const HOMOGENEOUS_STREAM: u64 = 11;
const BLOCK_STREAM: u64 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkModelKind {
    /// One parameter set shared by every ordered pair.
    Homogeneous,
    /// Shared `λ₀, λ₁, β, Q`; one jump size per (sender block, receiver
    /// block) cell.
    Block { partition: Partition },
    /// Independent parameters per pair.
    Heterogeneous,
}

impl NetworkModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            NetworkModelKind::Homogeneous => "homogeneous",
            NetworkModelKind::Block { .. } => "block",
            NetworkModelKind::Heterogeneous => "heterogeneous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub pair: PairIndex,
    pub model: ModelSpec,
    /// The pair carries the homogeneous estimate instead of its own fit.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub pair: PairIndex,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFitResult {
    pub kind: NetworkModelKind,
    pub node_count: usize,
    /// Every ordered pair, sender-major.
    pub pairs: Vec<PairModel>,
    /// Network log-likelihood: the sum of the pair log-likelihoods.
    pub shared_loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Fitted jump size per block cell (row = sender block).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_alphas: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<PairFailure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub starts: Vec<StartOutcome>,
}

impl NetworkFitResult {
    pub fn model_for(&self, pair: PairIndex) -> Option<&ModelSpec> {
        self.pairs
            .binary_search_by(|m| m.pair.cmp(&pair))
            .ok()
            .map(|i| &self.pairs[i].model)
    }

    pub fn fallback_pairs(&self) -> impl Iterator<Item = PairIndex> + '_ {
        self.pairs.iter().filter(|m| m.fallback).map(|m| m.pair)
    }

    /// The data-generating block model, in fit form.
    pub fn from_truth(
        base: &NetworkBaseParams,
        alpha_spec: &BlockAlphaSpec,
        log: &NetworkEventLog,
    ) -> Result<Self> {
        let partition = alpha_spec.partition.clone();
        check_partition(&partition, log)?;
        let k = partition.block_count();
        let block_alphas: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| {
                        if a == b {
                            alpha_spec.within_alpha
                        } else {
                            alpha_spec.between_alpha
                        }
                    })
                    .collect()
            })
            .collect();
        let data = log.project_all();
        let pairs: Vec<PairModel> = data
            .iter()
            .map(|(pair, _)| {
                Ok(PairModel {
                    pair: *pair,
                    model: ModelSpec::Mmhp(base.with_alpha(alpha_spec.alpha(*pair))?),
                    fallback: false,
                })
            })
            .collect::<Result<_>>()?;
        let shared_loglik = total_loglik(&pairs, &data)?;
        Ok(NetworkFitResult {
            kind: NetworkModelKind::Block { partition },
            node_count: log.node_count(),
            pairs,
            shared_loglik,
            converged: true,
            iterations: 0,
            block_alphas: Some(block_alphas),
            failures: Vec::new(),
            starts: Vec::new(),
        })
    }
}

fn check_partition(partition: &Partition, log: &NetworkEventLog) -> Result<()> {
    if partition.node_count() != log.node_count() {
        return Err(Error::validation(format!(
            "partition covers {} nodes, the log has {}",
            partition.node_count(),
            log.node_count()
        )));
    }
    Ok(())
}

fn total_loglik(pairs: &[PairModel], data: &[(PairIndex, EventSequence)]) -> Result<f64> {
    let parts: Vec<Result<f64>> = pairs
        .par_iter()
        .zip(data.par_iter())
        .map(|(m, (_, seq))| m.model.loglik(seq))
        .collect();
    parts.into_iter().sum()
}

/// Sum over pairs of `loglik_mmhp`, reduced in pair order so the value
/// does not depend on scheduling.
fn summed_loglik<F>(data: &[(PairIndex, EventSequence)], params_for: F) -> f64
where
    F: Fn(PairIndex) -> Result<MmhpParams> + Sync,
{
    let parts: Vec<f64> = data
        .par_iter()
        .map(|(pair, seq)| or_neg_inf(params_for(*pair).and_then(|p| loglik_mmhp(&p, seq))))
        .collect();
    parts.into_iter().sum()
}

/// Fits one of the network variants by maximizing the network
/// log-likelihood, the sum over ordered pairs of the pair MMHP
/// log-likelihoods.
pub fn fit_network(
    log: &NetworkEventLog,
    kind: &NetworkModelKind,
    opts: &FitOptions,
) -> Result<NetworkFitResult> {
    fit_network_from(log, kind, opts, None)
}

/// As [`fit_network`]; block and heterogeneous fits reuse `homogeneous`
/// (a homogeneous fit of the same log) as their warm start and fallback
/// instead of fitting it again.
pub fn fit_network_from(
    log: &NetworkEventLog,
    kind: &NetworkModelKind,
    opts: &FitOptions,
    homogeneous: Option<&NetworkFitResult>,
) -> Result<NetworkFitResult> {
    opts.validate()?;
    let data = log.project_all();
    if data.is_empty() {
        return Err(Error::validation("network has no ordered pairs"));
    }
    let shared = |owned: &mut Option<NetworkFitResult>| -> Result<MmhpParams> {
        let fit = match homogeneous {
            Some(h) if h.kind == NetworkModelKind::Homogeneous => h,
            Some(_) => return Err(Error::Usage("warm start must be a homogeneous fit".into())),
            None => owned.insert(fit_homogeneous(log, &data, opts)?),
        };
        match &fit.pairs[0].model {
            ModelSpec::Mmhp(p) => Ok(*p),
            _ => Err(Error::Usage("homogeneous fit must hold MMHP models".into())),
        }
    };
    match kind {
        NetworkModelKind::Homogeneous => fit_homogeneous(log, &data, opts),
        NetworkModelKind::Block { partition } => {
            check_partition(partition, log)?;
            let mut owned = None;
            let start = shared(&mut owned)?;
            fit_block(log, &data, partition, &start, opts)
        }
        NetworkModelKind::Heterogeneous => {
            let mut owned = None;
            let start = shared(&mut owned)?;
            fit_heterogeneous(log, &data, &start, opts)
        }
    }
}

fn fit_homogeneous(
    log: &NetworkEventLog,
    data: &[(PairIndex, EventSequence)],
    opts: &FitOptions,
) -> Result<NetworkFitResult> {
    let horizon = log.horizon();
    let rate = (log.len().max(1) as f64) / (data.len() as f64 * horizon);
    let q = (10.0 / horizon).ln();
    let starts = vec![vec![(0.5 * rate).ln(), (0.5 * rate).ln(), 0.0, 2f64.ln(), q, q]];
    let search = multistart(
        "homogeneous network",
        |x| match mmhp_from(x) {
            Ok(p) => summed_loglik(data, |_| Ok(p)),
            Err(_) => f64::NEG_INFINITY,
        },
        &starts,
        opts,
        HOMOGENEOUS_STREAM,
    )?;
    let params = mmhp_from(&search.theta)?;
    let pairs: Vec<PairModel> = data
        .iter()
        .map(|(pair, _)| PairModel {
            pair: *pair,
            model: ModelSpec::Mmhp(params),
            fallback: false,
        })
        .collect();
    Ok(NetworkFitResult {
        kind: NetworkModelKind::Homogeneous,
        node_count: log.node_count(),
        shared_loglik: total_loglik(&pairs, data)?,
        pairs,
        converged: search.converged,
        iterations: search.iterations,
        block_alphas: None,
        failures: Vec::new(),
        starts: search.starts,
    })
}

/// Block parameters: `(ln λ₀, η, ln β, ln q01, ln q10, ln α_11, ln α_12, …)`.
fn block_params(theta: &[f64], k: usize) -> Result<(f64, f64, f64, GeneratorMatrix, Vec<f64>)> {
    let lambda0 = theta[0].exp();
    let lambda1 = lambda0 + theta[1].exp();
    let q = GeneratorMatrix::new(theta[3].exp(), theta[4].exp())?;
    let alphas: Vec<f64> = theta[5..5 + k * k].iter().map(|v| v.exp()).collect();
    Ok((lambda0, lambda1, theta[2].exp(), q, alphas))
}

fn fit_block(
    log: &NetworkEventLog,
    data: &[(PairIndex, EventSequence)],
    partition: &Partition,
    start: &MmhpParams,
    opts: &FitOptions,
) -> Result<NetworkFitResult> {
    let k = partition.block_count();
    let cell = |pair: PairIndex| partition.block_of(pair.sender()) * k + partition.block_of(pair.receiver());
    let base = mmhp_theta(start);
    let mut first = vec![base[0], base[1], base[3], base[4], base[5]];
    first.extend(std::iter::repeat_n(base[2], k * k));

    // Second start: jump sizes scaled by each cell's share of the events,
    // capped below the stationarity boundary.
    let mut counts = vec![0.0; k * k];
    let mut sizes = vec![0.0; k * k];
    for (pair, seq) in data {
        counts[cell(*pair)] += seq.len() as f64;
        sizes[cell(*pair)] += 1.0;
    }
    let overall = counts.iter().sum::<f64>() / sizes.iter().sum::<f64>();
    let mut second = first.clone();
    for c in 0..k * k {
        if sizes[c] > 0.0 && overall > 0.0 {
            let ratio = (counts[c] / sizes[c] / overall).max(1e-3);
            let alpha = (start.alpha() * ratio).min(0.95 * start.beta());
            second[5 + c] = alpha.ln();
        }
    }

    let search = multistart(
        "block network",
        |x| match block_params(x, k) {
            Ok((l0, l1, beta, q, alphas)) => summed_loglik(data, |pair| {
                MmhpParams::new(l0, l1, alphas[cell(pair)], beta, q)
            }),
            Err(_) => f64::NEG_INFINITY,
        },
        &[first, second],
        opts,
        BLOCK_STREAM,
    )?;
    let (l0, l1, beta, q, alphas) = block_params(&search.theta, k)?;
    let pairs: Vec<PairModel> = data
        .iter()
        .map(|(pair, _)| {
            Ok(PairModel {
                pair: *pair,
                model: ModelSpec::Mmhp(MmhpParams::new(l0, l1, alphas[cell(*pair)], beta, q)?),
                fallback: false,
            })
        })
        .collect::<Result<_>>()?;
    Ok(NetworkFitResult {
        kind: NetworkModelKind::Block {
            partition: partition.clone(),
        },
        node_count: log.node_count(),
        shared_loglik: total_loglik(&pairs, data)?,
        pairs,
        converged: search.converged,
        iterations: search.iterations,
        block_alphas: Some(alphas.chunks(k).map(|r| r.to_vec()).collect()),
        failures: Vec::new(),
        starts: search.starts,
    })
}

fn fit_heterogeneous(
    log: &NetworkEventLog,
    data: &[(PairIndex, EventSequence)],
    shared: &MmhpParams,
    opts: &FitOptions,
) -> Result<NetworkFitResult> {
    let outcomes: Vec<(PairModel, usize, Option<PairFailure>)> = data
        .par_iter()
        .map(|(pair, seq)| {
            let fallback = PairModel {
                pair: *pair,
                model: ModelSpec::Mmhp(*shared),
                fallback: true,
            };
            if seq.len() < opts.min_pair_events {
                return (fallback, 0, None);
            }
            let pair_opts = FitOptions {
                seed: opts.seed ^ crate::simulate::pair_stream(*pair),
                ..*opts
            };
            match fit_mmhp(seq, &pair_opts) {
                Ok(fit) => (
                    PairModel {
                        pair: *pair,
                        model: fit.model,
                        fallback: false,
                    },
                    fit.iterations,
                    None,
                ),
                Err(e) => (
                    fallback,
                    0,
                    Some(PairFailure {
                        pair: *pair,
                        message: e.to_string(),
                    }),
                ),
            }
        })
        .collect();
    let iterations = outcomes.iter().map(|o| o.1).sum();
    let failures: Vec<PairFailure> = outcomes.iter().filter_map(|o| o.2.clone()).collect();
    let pairs: Vec<PairModel> = outcomes.into_iter().map(|o| o.0).collect();
    Ok(NetworkFitResult {
        kind: NetworkModelKind::Heterogeneous,
        node_count: log.node_count(),
        shared_loglik: total_loglik(&pairs, data)?,
        pairs,
        converged: failures.is_empty(),
        iterations,
        block_alphas: None,
        failures,
        starts: Vec::new(),
    })
}

use serde::{Deserialize, Serialize};

use super::{read_input, FitArgs, ReportHeader};
use crate::error::{Error, Result};
use crate::events::{EventSequence, NetworkEventLog, NodeId, Partition};
use crate::fit::{fit_model, fit_network_from, FitOptions, NetworkFitResult, NetworkModelKind};
use crate::io::{self, EventTable, ModelFile, NetworkFitFile};
use crate::models::ModelKind;

/// Effective configuration of a fit run, hashed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRunConfig {
    pub events: String,
    pub horizon: f64,
    pub jitter_ties: bool,
    pub models: Vec<String>,
    pub network: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<NodeId>>>,
    pub options: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loglik: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub config: FitRunConfig,
    pub event_count: usize,
    pub models: Vec<FitOutcome>,
}

/// Fits every requested model, writing one model file per success plus
/// `fit_report.json` and `fit_summary.csv`. A model that fails is recorded
/// in the report without stopping the others; the first failure is then
/// returned as the command's error.
pub fn cmd_fit(args: &FitArgs) -> Result<FitReport> {
    let mut options = match &args.config {
        Some(path) => io::read_toml::<FitOptions>(path)?,
        None => FitOptions::default(),
    };
    if let Some(seed) = args.seed {
        options.seed = seed;
    }
    options.validate()?;
    let table = read_input(&args.input, None, None)?;
    let blocks = args.blocks.as_deref().map(parse_blocks).transpose()?;

    let (models, network) = match &table {
        EventTable::Univariate(_) => {
            if !args.network.is_empty() || blocks.is_some() {
                return Err(Error::validation(
                    "network models need a `time,sender,receiver` events file",
                ));
            }
            let models = if args.models.is_empty() {
                ModelKind::ALL.to_vec()
            } else {
                args.models.iter().map(|m| m.parse()).collect::<Result<Vec<ModelKind>>>()?
            };
            (models, Vec::new())
        }
        EventTable::Network(log) => {
            if !args.models.is_empty() {
                return Err(Error::validation(
                    "single-stream models need a `time` events file; use --network for a network log",
                ));
            }
            let network = if args.network.is_empty() {
                vec![if blocks.is_some() { "block" } else { "homogeneous" }.to_string()]
            } else {
                args.network.iter().map(|s| s.trim().to_ascii_lowercase()).collect()
            };
            for name in &network {
                if !["homogeneous", "block", "heterogeneous"].contains(&name.as_str()) {
                    return Err(Error::validation(format!("unknown network model {name:?}")));
                }
            }
            if network.iter().any(|n| n == "block") {
                match &blocks {
                    Some(b) => {
                        Partition::new(b.clone(), log.node_count())?;
                    }
                    None => return Err(Error::validation("the block model needs --blocks")),
                }
            }
            (Vec::new(), network)
        }
    };

    let config = FitRunConfig {
        events: args.input.events.display().to_string(),
        horizon: table.horizon(),
        jitter_ties: args.input.jitter_ties,
        models: models.iter().map(|m| m.to_string()).collect(),
        network: network.clone(),
        blocks: blocks.clone(),
        options,
    };
    let event_count = table.len();
    io::ensure_dir(&args.out)?;
    let mut failures = Vec::new();
    let outcomes = match table {
        EventTable::Univariate(seq) => fit_single(&seq, &models, &options, args, &mut failures)?,
        EventTable::Network(ref log) => {
            fit_networks(log, &network, blocks, &options, args, &mut failures)?
        }
    };
    let report = FitReport {
        header: ReportHeader::new("fit", Some(options.seed), &config),
        event_count,
        config,
        models: outcomes,
    };
    io::write_json(&args.out.join("fit_report.json"), &report)?;
    io::write_lines(
        &args.out.join("fit_summary.csv"),
        "model,loglik,converged,iterations,status",
        report.models.iter().map(|o| {
            format!(
                "{},{},{},{},{}",
                o.model,
                o.loglik.map(io::fmt_f64).unwrap_or_else(|| io::NA.into()),
                o.converged.map(|c| c.to_string()).unwrap_or_else(|| io::NA.into()),
                o.iterations.map(|c| c.to_string()).unwrap_or_else(|| io::NA.into()),
                if o.error.is_some() { "error" } else { "ok" }
            )
        }),
    )?;
    for o in &report.models {
        match (&o.loglik, &o.error) {
            (Some(ll), _) => println!("{:<14} loglik {ll:.6}", o.model),
            (None, Some(e)) => println!("{:<14} failed: {e}", o.model),
            _ => {}
        }
    }
    match failures.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn fit_single(
    seq: &EventSequence,
    models: &[ModelKind],
    options: &FitOptions,
    args: &FitArgs,
    failures: &mut Vec<Error>,
) -> Result<Vec<FitOutcome>> {
    let mut outcomes = Vec::new();
    for &kind in models {
        match fit_model(kind, seq, options) {
            Ok(fit) => {
                let name = format!("{kind}.json");
                let outcome = FitOutcome {
                    model: kind.to_string(),
                    file: Some(name.clone()),
                    loglik: Some(fit.loglik),
                    converged: Some(fit.converged),
                    iterations: Some(fit.iterations),
                    parameters: serde_json::to_value(fit.model).ok(),
                    error: None,
                };
                io::write_json(&args.out.join(name), &ModelFile::from_fit(fit, seq.horizon()))?;
                outcomes.push(outcome);
            }
            Err(e) => {
                outcomes.push(failed(kind.as_str(), &e));
                failures.push(e);
            }
        }
    }
    Ok(outcomes)
}

fn fit_networks(
    log: &NetworkEventLog,
    names: &[String],
    blocks: Option<Vec<Vec<NodeId>>>,
    options: &FitOptions,
    args: &FitArgs,
    failures: &mut Vec<Error>,
) -> Result<Vec<FitOutcome>> {
    let (homogeneous, mut homogeneous_error) =
        match fit_network_from(log, &NetworkModelKind::Homogeneous, options, None) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e)),
        };
    let homogeneous_message = homogeneous_error.as_ref().map(|e| e.to_string());
    let mut outcomes = Vec::new();
    for name in names {
        let result: Result<NetworkFitResult> = match (name.as_str(), &homogeneous) {
            ("homogeneous", Some(h)) => Ok(h.clone()),
            ("homogeneous", None) => Err(homogeneous_error
                .take()
                .unwrap_or_else(|| Error::NonConvergence(homogeneous_message.clone().unwrap_or_default()))),
            (_, None) => Err(Error::NonConvergence(format!(
                "homogeneous warm start failed: {}",
                homogeneous_message.clone().unwrap_or_default()
            ))),
            (other, Some(h)) => {
                let kind = if other == "block" {
                    NetworkModelKind::Block {
                        partition: Partition::new(
                            blocks.clone().expect("checked above"),
                            log.node_count(),
                        )?,
                    }
                } else {
                    NetworkModelKind::Heterogeneous
                };
                fit_network_from(log, &kind, options, Some(h))
            }
        };
        match result {
            Ok(fit) => {
                let file = format!("{name}_fit.json");
                let parameters = match name.as_str() {
                    "homogeneous" => serde_json::to_value(fit.pairs[0].model).ok(),
                    "block" => serde_json::to_value(serde_json::json!({
                        "shared": fit.pairs[0].model,
                        "block_alphas": fit.block_alphas,
                    }))
                    .ok(),
                    _ => serde_json::to_value(serde_json::json!({
                        "fallback_pairs": fit.fallback_pairs().count(),
                        "failures": fit.failures.len(),
                    }))
                    .ok(),
                };
                outcomes.push(FitOutcome {
                    model: name.clone(),
                    file: Some(file.clone()),
                    loglik: Some(fit.shared_loglik),
                    converged: Some(fit.converged),
                    iterations: Some(fit.iterations),
                    parameters,
                    error: None,
                });
                io::write_json(
                    &args.out.join(file),
                    &NetworkFitFile::new(name.clone(), fit, log.horizon()),
                )?;
            }
            Err(e) => {
                outcomes.push(failed(name, &e));
                failures.push(e);
            }
        }
    }
    Ok(outcomes)
}

fn failed(model: &str, e: &Error) -> FitOutcome {
    FitOutcome {
        model: model.into(),
        file: None,
        loglik: None,
        converged: None,
        iterations: None,
        parameters: None,
        error: Some(e.to_string()),
    }
}

/// `"1,2,3;4,5"` → `[[1,2,3],[4,5]]`.
pub(super) fn parse_blocks(text: &str) -> Result<Vec<Vec<NodeId>>> {
    text.split(';')
        .map(|block| {
            block
                .split(',')
                .map(|id| {
                    id.trim()
                        .parse()
                        .map_err(|_| Error::validation(format!("bad node id {id:?} in --blocks")))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_parse() {
        assert_eq!(parse_blocks("1,2;3").unwrap(), vec![vec![1, 2], vec![3]]);
        assert!(parse_blocks("1,x").is_err());
    }
}

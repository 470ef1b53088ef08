use serde::{Deserialize, Serialize};

use super::fit::parse_blocks;
use super::{check_horizon, read_input, stem, unique_names, write_svg, NetdiagArgs, ReportHeader};
use crate::error::{Error, Result};
use crate::events::{NodeId, Partition};
use crate::io::{self, fmt_f64, NetworkFitFile};
use crate::netdiag::{
    check_permutation, decode_paths, ks_matrix, pearson_matrix, split_residuals, structure_score,
    NmfOptions,
};
use crate::svg::{heatmap, ColorScale};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetdiagRunConfig {
    pub events: String,
    pub horizon: f64,
    pub jitter_ties: bool,
    pub fits: Vec<String>,
    pub k: usize,
    pub order: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<NodeId>>>,
    pub nmf: NmfOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScores {
    pub name: String,
    pub label: String,
    pub source: String,
    /// Structure score of the underestimation matrix PR⁺.
    pub positive: f64,
    /// Structure score of the overestimation matrix PR⁻.
    pub negative: f64,
    pub ks_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_mean_within_block: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_mean_between_block: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetdiagReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub config: NetdiagRunConfig,
    pub models: Vec<NetworkScores>,
}

/// K-S and Pearson residual matrices of every network fit with heatmaps,
/// the PR⁺/PR⁻ split, and the structure scores of both parts in
/// `structure_scores.csv`. Matrix files and heatmaps follow the display
/// order; scores do not depend on it.
pub fn cmd_netdiag(args: &NetdiagArgs) -> Result<NetdiagReport> {
    let fits: Vec<NetworkFitFile> = args.fits.iter().map(|p| NetworkFitFile::read(p)).collect::<Result<_>>()?;
    let horizon = fits[0].horizon;
    let node_count = fits[0].fit.node_count;
    for (path, f) in args.fits.iter().zip(&fits) {
        check_horizon(path, horizon, f.horizon)?;
        if f.fit.node_count != node_count {
            return Err(Error::validation(format!(
                "{} covers {} nodes, {} covers {node_count}",
                path.display(),
                f.fit.node_count,
                args.fits[0].display()
            )));
        }
    }
    let log = read_input(&args.input, Some(horizon), Some(node_count))?.into_network()?;
    check_horizon(&args.fits[0], log.horizon(), horizon)?;
    let order = match &args.order {
        Some(path) => {
            let order = io::read_order(path)?;
            check_permutation(&order, node_count)?;
            order
        }
        None => (1..=node_count).collect(),
    };
    let blocks = args.blocks.as_deref().map(parse_blocks).transpose()?;
    let partition = blocks.clone().map(|b| Partition::new(b, node_count)).transpose()?;
    if args.k < 1 || args.k >= node_count {
        return Err(Error::validation(format!(
            "--k must satisfy 1 <= k < {node_count}, got {}",
            args.k
        )));
    }
    let nmf = NmfOptions::with_seed(args.seed);
    let config = NetdiagRunConfig {
        events: args.input.events.display().to_string(),
        horizon,
        jitter_ties: args.input.jitter_ties,
        fits: args.fits.iter().map(|p| p.display().to_string()).collect(),
        k: args.k,
        order: order.clone(),
        blocks,
        nmf,
    };
    io::ensure_dir(&args.out)?;
    let names = unique_names(fits.iter().zip(&args.fits).map(|(f, p)| {
        if f.label.is_empty() {
            stem(p)
        } else {
            f.label.clone()
        }
    }));

    let mut models = Vec::new();
    for ((file, source), name) in fits.iter().zip(&args.fits).zip(&names) {
        let out = |suffix: &str| args.out.join(format!("{name}_{suffix}"));
        let paths = decode_paths(&file.fit, &log)?;
        let ks = ks_matrix(&file.fit, &log, Some(&paths))?;
        let pearson = pearson_matrix(&file.fit, &log, horizon, Some(&paths))?;
        let (pos, neg) = split_residuals(&pearson.matrix);
        let positive = structure_score(&pos, args.k, &nmf)?;
        let negative = structure_score(&neg, args.k, &nmf)?;

        let ks_shown = ks.matrix.reordered(&order)?;
        let pearson_shown = pearson.matrix.reordered(&order)?;
        io::write_pair_matrix(&out("ks.csv"), &ks_shown, &order)?;
        write_svg(
            &out("ks.svg"),
            &heatmap(&ks_shown, &order, ColorScale::Sequential, &format!("K-S statistics: {name}")),
        )?;
        io::write_pair_matrix(&out("pearson.csv"), &pearson_shown, &order)?;
        write_svg(
            &out("pearson.svg"),
            &heatmap(
                &pearson_shown,
                &order,
                ColorScale::Diverging,
                &format!("Pearson residuals: {name}"),
            ),
        )?;
        let (pos_shown, neg_shown) = split_residuals(&pearson_shown);
        io::write_matrix(&out("pr_plus.csv"), &pos_shown, &order)?;
        io::write_matrix(&out("pr_minus.csv"), &neg_shown, &order)?;

        let (within, between) = match &partition {
            Some(p) => (
                ks.matrix.mean_where(|pair| p.same_block(pair)),
                ks.matrix.mean_where(|pair| !p.same_block(pair)),
            ),
            None => (None, None),
        };
        let warnings = ks
            .warnings
            .iter()
            .map(|w| format!("K-S {}: {}", w.pair, w.message))
            .chain(pearson.warnings.iter().map(|w| format!("Pearson {}: {}", w.pair, w.message)))
            .collect();
        models.push(NetworkScores {
            name: name.clone(),
            label: file.label.clone(),
            source: source.display().to_string(),
            positive,
            negative,
            ks_mean: ks.matrix.mean(),
            ks_mean_within_block: within,
            ks_mean_between_block: between,
            warnings,
            artifacts: ["ks.csv", "ks.svg", "pearson.csv", "pearson.svg", "pr_plus.csv", "pr_minus.csv"]
                .iter()
                .map(|s| format!("{name}_{s}"))
                .collect(),
        });
    }
    io::write_lines(
        &args.out.join("structure_scores.csv"),
        "model,positive,negative",
        models
            .iter()
            .map(|m| format!("{},{},{}", m.name, fmt_f64(m.positive), fmt_f64(m.negative))),
    )?;
    let report = NetdiagReport {
        header: ReportHeader::new("netdiag", Some(args.seed), &config),
        config,
        models,
    };
    io::write_json(&args.out.join("netdiag_report.json"), &report)?;
    println!("{:<14} {:>8} {:>8}", "model", "PR+", "PR-");
    for m in &report.models {
        println!("{:<14} {:>8.4} {:>8.4}", m.name, m.positive, m.negative);
    }
    Ok(report)
}

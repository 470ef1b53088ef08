use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_horizon, read_input, stem, unique_names, write_svg, DiagnoseArgs, ReportHeader};
use crate::diagnostics::{
    ks_critical_value, ks_p_value, ks_statistic, lowess, qq_data, rescaled_times, residual_trajectory,
    residuals_at, ResidualPair,
};
use crate::error::{Error, Result};
use crate::events::{EventSequence, NetworkEventLog};
use crate::io::{self, fmt_f64, ModelFile, NetworkFitFile};
use crate::models::{decode_latent_path, intensity_path, LatentPath, ModelSpec};
use crate::netdiag::decode_paths;
use crate::svg::Plot;

const LOWESS_SPAN: f64 = 2.0 / 3.0;

enum Loaded {
    Single(ModelFile),
    Network(NetworkFitFile),
}

impl Loaded {
    fn read(path: &Path) -> Result<Self> {
        let value: serde_json::Value = io::read_json(path)?;
        if value.get("label").is_some() {
            NetworkFitFile::read(path).map(Loaded::Network)
        } else {
            ModelFile::read(path).map(Loaded::Single)
        }
    }

    fn horizon(&self) -> f64 {
        match self {
            Loaded::Single(m) => m.horizon,
            Loaded::Network(n) => n.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseRunConfig {
    pub events: String,
    pub horizon: f64,
    pub jitter_ties: bool,
    pub models: Vec<String>,
    pub grid_points: usize,
}

/// Diagnostics of one single-stream model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub name: String,
    pub source: String,
    pub model: ModelSpec,
    pub loglik: f64,
    pub event_count: usize,
    /// `None` when there are no events.
    pub ks_statistic: Option<f64>,
    pub ks_p_value: Option<f64>,
    /// Critical value of the K-S test at level 0.01.
    pub ks_critical_01: Option<f64>,
    pub raw_residual: f64,
    pub pearson_residual: f64,
    pub artifacts: Vec<String>,
}

/// Per-pair diagnostics summary of one network model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDiagnostics {
    pub name: String,
    pub source: String,
    pub label: String,
    pub pair_count: usize,
    pub mean_ks: Option<f64>,
    pub mean_raw_residual: f64,
    pub mean_pearson_residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub config: DiagnoseRunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ModelDiagnostics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub networks: Vec<NetworkDiagnostics>,
    /// Figures comparing the models, with their sibling CSVs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparison: Vec<String>,
}

/// Residual of one model at one point of the comparison scatter.
struct ScatterPoint {
    events: f64,
    residual: ResidualPair,
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<DiagnoseReport> {
    if args.grid_points < 2 {
        return Err(Error::Usage("--grid-points must be at least 2".into()));
    }
    let loaded: Vec<Loaded> = args.models.iter().map(|p| Loaded::read(p)).collect::<Result<_>>()?;
    let horizon = loaded[0].horizon();
    for (path, l) in args.models.iter().zip(&loaded) {
        check_horizon(path, horizon, l.horizon())?;
    }
    let nodes = loaded.iter().find_map(|l| match l {
        Loaded::Network(n) => Some(n.fit.node_count),
        Loaded::Single(_) => None,
    });
    let table = read_input(&args.input, Some(horizon), nodes)?;
    for path in &args.models {
        check_horizon(path, table.horizon(), horizon)?;
    }
    let names = unique_names(loaded.iter().zip(&args.models).map(|(l, p)| match l {
        Loaded::Network(n) if !n.label.is_empty() => n.label.clone(),
        _ => stem(p),
    }));
    let config = DiagnoseRunConfig {
        events: args.input.events.display().to_string(),
        horizon,
        jitter_ties: args.input.jitter_ties,
        models: args.models.iter().map(|p| p.display().to_string()).collect(),
        grid_points: args.grid_points,
    };
    io::ensure_dir(&args.out)?;

    let mut report = DiagnoseReport {
        header: ReportHeader::new("diagnose", None, &config),
        config,
        models: Vec::new(),
        networks: Vec::new(),
        comparison: Vec::new(),
    };
    let mut scatter: Vec<(String, Vec<ScatterPoint>)> = Vec::new();
    match table {
        io::EventTable::Univariate(seq) => {
            for ((path, l), name) in args.models.iter().zip(&loaded).zip(&names) {
                let Loaded::Single(file) = l else {
                    return Err(Error::validation(format!(
                        "{} is a network fit; the events are a single stream",
                        path.display()
                    )));
                };
                let (diag, points) = diagnose_single(&seq, file, path, name, args)?;
                report.models.push(diag);
                scatter.push((name.clone(), points));
            }
        }
        io::EventTable::Network(log) => {
            for ((path, l), name) in args.models.iter().zip(&loaded).zip(&names) {
                let Loaded::Network(file) = l else {
                    return Err(Error::validation(format!(
                        "{} is a single-stream model; the events are a network log",
                        path.display()
                    )));
                };
                let (diag, points) = diagnose_network(&log, file, path, name, &args.out)?;
                report.networks.push(diag);
                scatter.push((name.clone(), points));
            }
        }
    }
    if scatter.len() > 1 {
        report.comparison = write_comparison(&args.out, &scatter, report.networks.is_empty())?;
    }
    io::write_json(&args.out.join("diagnose_report.json"), &report)?;
    for m in &report.models {
        println!(
            "{:<14} KS {}  R(T) {:.4}  PR(T) {:.4}",
            m.name,
            m.ks_statistic.map_or("NA".into(), |d| format!("{d:.4}")),
            m.raw_residual,
            m.pearson_residual
        );
    }
    for n in &report.networks {
        println!(
            "{:<14} mean KS {}  mean PR(T) {:.4}",
            n.name,
            n.mean_ks.map_or("NA".into(), |d| format!("{d:.4}")),
            n.mean_pearson_residual
        );
    }
    Ok(report)
}

fn plug_in_path(file: &ModelFile, seq: &EventSequence) -> Result<Option<LatentPath>> {
    if !file.model.is_modulated() {
        return Ok(None);
    }
    match file.latent_path() {
        Some(p) if p.horizon() == seq.horizon() => Ok(Some(p.clone())),
        _ => decode_latent_path(&file.model, seq).map(Some),
    }
}

fn diagnose_single(
    seq: &EventSequence,
    file: &ModelFile,
    source: &Path,
    name: &str,
    args: &DiagnoseArgs,
) -> Result<(ModelDiagnostics, Vec<ScatterPoint>)> {
    let out = |suffix: &str| args.out.join(format!("{name}_{suffix}"));
    let spec = &file.model;
    let path = plug_in_path(file, seq)?;
    let path = path.as_ref();
    let horizon = seq.horizon();
    let mut artifacts = Vec::new();

    let rescaled = rescaled_times(spec, seq, path)?;
    io::write_lines(
        &out("rescaled.csv"),
        "index,rescaled",
        rescaled.values().iter().enumerate().map(|(i, v)| format!("{},{}", i + 1, fmt_f64(*v))),
    )?;
    artifacts.push(format!("{name}_rescaled.csv"));
    let (ks, p, crit) = if rescaled.is_empty() {
        (None, None, None)
    } else {
        let d = ks_statistic(&rescaled)?;
        let n = rescaled.len();
        (Some(d), Some(ks_p_value(d, n)), Some(ks_critical_value(n, 0.01)))
    };
    let qq = qq_data(&rescaled);
    io::write_lines(
        &out("qq.csv"),
        "theoretical,empirical",
        qq.points.iter().map(|(a, b)| format!("{},{}", fmt_f64(*a), fmt_f64(*b))),
    )?;
    let title = format!("Q-Q of rescaled times: {name}");
    write_svg(
        &out("qq.svg"),
        &Plot::new(&title, "Exp(1) quantile", "rescaled inter-event time")
            .points("", &qq.points)
            .diagonal()
            .render(),
    )?;
    artifacts.extend([format!("{name}_qq.csv"), format!("{name}_qq.svg")]);

    let n = args.grid_points;
    let grid: Vec<f64> = (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect();
    let rates = intensity_path(spec, seq, path, &grid)?;
    let curve: Vec<(f64, f64)> = grid.iter().copied().zip(rates.iter().copied()).collect();
    io::write_lines(
        &out("intensity.csv"),
        "time,intensity",
        curve.iter().map(|(t, r)| format!("{},{}", fmt_f64(*t), fmt_f64(*r))),
    )?;
    write_svg(
        &out("intensity.svg"),
        &Plot::new(&format!("Fitted intensity: {name}"), "time", "intensity")
            .line("", &curve)
            .render(),
    )?;
    artifacts.extend([format!("{name}_intensity.csv"), format!("{name}_intensity.svg")]);

    let at_end = residuals_at(spec, seq, path, horizon)?;
    let trajectory = residual_trajectory(spec, seq, path, seq.times())?;
    let points = trajectory
        .into_iter()
        .enumerate()
        .map(|(m, residual)| ScatterPoint {
            events: (m + 1) as f64,
            residual,
        })
        .collect();
    let diag = ModelDiagnostics {
        name: name.into(),
        source: source.display().to_string(),
        model: *spec,
        loglik: spec.loglik(seq)?,
        event_count: seq.len(),
        ks_statistic: ks,
        ks_p_value: p,
        ks_critical_01: crit,
        raw_residual: at_end.raw,
        pearson_residual: at_end.pearson,
        artifacts,
    };
    Ok((diag, points))
}

fn diagnose_network(
    log: &NetworkEventLog,
    file: &NetworkFitFile,
    source: &Path,
    name: &str,
    out: &Path,
) -> Result<(NetworkDiagnostics, Vec<ScatterPoint>)> {
    let fit = &file.fit;
    let paths = decode_paths(fit, log)?;
    let data = log.project_all();
    let horizon = log.horizon();
    let rows: Vec<(String, Result<(Option<f64>, ResidualPair)>)> = data
        .par_iter()
        .zip(paths.par_iter())
        .map(|((pair, seq), (_, path))| {
            let label = format!("{},{}", pair.sender(), pair.receiver());
            let result = (|| {
                let model = fit
                    .model_for(*pair)
                    .ok_or_else(|| Error::validation(format!("fit has no model for pair {pair}")))?;
                let ks = if seq.is_empty() {
                    None
                } else {
                    Some(ks_statistic(&rescaled_times(model, seq, path.as_ref())?)?)
                };
                Ok((ks, residuals_at(model, seq, path.as_ref(), horizon)?))
            })();
            (label, result)
        })
        .collect();
    let mut lines = Vec::new();
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    let mut ks_values = Vec::new();
    for ((label, result), (_, seq)) in rows.into_iter().zip(&data) {
        match result {
            Ok((ks, r)) => {
                lines.push(format!(
                    "{label},{},{},{},{}",
                    seq.len(),
                    ks.map(fmt_f64).unwrap_or_else(|| io::NA.into()),
                    fmt_f64(r.raw),
                    fmt_f64(r.pearson)
                ));
                ks_values.extend(ks);
                points.push(ScatterPoint {
                    events: seq.len() as f64,
                    residual: r,
                });
            }
            Err(e) => {
                lines.push(format!("{label},{},NA,NA,NA", seq.len()));
                warnings.push(format!("pair ({label}): {e}"));
            }
        }
    }
    let csv = format!("{name}_pairs.csv");
    io::write_lines(&out.join(&csv), "sender,receiver,events,ks,raw,pearson", lines)?;
    let mean = |f: fn(&ScatterPoint) -> f64| {
        if points.is_empty() {
            0.0
        } else {
            points.iter().map(f).sum::<f64>() / points.len() as f64
        }
    };
    let diag = NetworkDiagnostics {
        name: name.into(),
        source: source.display().to_string(),
        label: file.label.clone(),
        pair_count: data.len(),
        mean_ks: (!ks_values.is_empty()).then(|| ks_values.iter().sum::<f64>() / ks_values.len() as f64),
        mean_raw_residual: mean(|p| p.residual.raw),
        mean_pearson_residual: mean(|p| p.residual.pearson),
        warnings,
        artifacts: vec![csv],
    };
    Ok((diag, points))
}

/// Residual against event count for every model, with a LOWESS line per
/// model: `residuals.csv`, `residuals_raw.svg` and `residuals_pearson.svg`.
fn write_comparison(
    out: &Path,
    scatter: &[(String, Vec<ScatterPoint>)],
    trajectory: bool,
) -> Result<Vec<String>> {
    let x_label = if trajectory { "events so far" } else { "events of the pair" };
    let mut rows = Vec::new();
    let mut smooth_rows = Vec::new();
    let mut raw_plot = Plot::new("Raw residuals", x_label, "raw residual");
    let mut pearson_plot = Plot::new("Pearson residuals", x_label, "Pearson residual");
    for (name, points) in scatter {
        let xs: Vec<f64> = points.iter().map(|p| p.events).collect();
        let raw: Vec<(f64, f64)> = points.iter().map(|p| (p.events, p.residual.raw)).collect();
        let pearson: Vec<(f64, f64)> = points.iter().map(|p| (p.events, p.residual.pearson)).collect();
        for p in points {
            rows.push(format!(
                "{name},{},{},{}",
                fmt_f64(p.events),
                fmt_f64(p.residual.raw),
                fmt_f64(p.residual.pearson)
            ));
        }
        raw_plot = raw_plot.points(name, &raw);
        pearson_plot = pearson_plot.points(name, &pearson);
        let ys_raw: Vec<f64> = raw.iter().map(|p| p.1).collect();
        let ys_pearson: Vec<f64> = pearson.iter().map(|p| p.1).collect();
        if let (Ok(a), Ok(b)) = (lowess(&xs, &ys_raw, LOWESS_SPAN), lowess(&xs, &ys_pearson, LOWESS_SPAN)) {
            for ((x, r), (_, p)) in a.iter().zip(&b) {
                smooth_rows.push(format!("{name},{},{},{}", fmt_f64(*x), fmt_f64(*r), fmt_f64(*p)));
            }
            raw_plot = raw_plot.line(name, &a);
            pearson_plot = pearson_plot.line(name, &b);
        }
    }
    io::write_lines(&out.join("residuals.csv"), "model,events,raw,pearson", rows)?;
    io::write_lines(&out.join("residuals_lowess.csv"), "model,events,raw,pearson", smooth_rows)?;
    write_svg(&out.join("residuals_raw.svg"), &raw_plot.render())?;
    write_svg(&out.join("residuals_pearson.svg"), &pearson_plot.render())?;
    Ok(["residuals.csv", "residuals_lowess.csv", "residuals_raw.svg", "residuals_pearson.svg"]
        .map(String::from)
        .to_vec())
}

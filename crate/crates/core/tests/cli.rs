use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ppdiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppdiag"))
        .args(args)
        .output()
        .expect("run ppdiag")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&ppdiag(&["--help"])), 0);
    assert_eq!(code(&ppdiag(&[])), 1);
    assert_eq!(code(&ppdiag(&["diagnose", "--events", "x.csv"])), 1);
    let out = ppdiag(&["frobnicate"]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_input_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppdiag(&["fit", "--events", "/nonexistent/events.csv", "--out", s(dir.path())]);
    assert_eq!(code(&out), 3);
}

#[test]
fn exploding_simulation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("boom.toml");
    std::fs::write(
        &config,
        "seed = 1\nhorizon = 1000.0\n\n[model]\nkind = \"hawkes\"\nlambda1 = 1.0\nalpha = 3.0\nbeta = 1.0\n",
    )
    .unwrap();
    let out = ppdiag(&["simulate", "--config", s(&config), "--out", s(&dir.path().join("sim"))]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_config_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "seed = 1\nhorizon = 10.0\nhorizonn = 3\n").unwrap();
    let out = ppdiag(&["simulate", "--config", s(&config), "--out", s(dir.path())]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn malformed_partition_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(code(&ppdiag(&["simulate", "--config", s(&fixture("cohort/simulate.toml")), "--out", s(&sim)])), 0);
    let events = sim.join("events.csv");
    for blocks in ["1,2,3;3,4,5,6", "1,2;4,5,6", "1,2,3;4,5,6,7", "1,x;2"] {
        let out = ppdiag(&[
            "fit",
            "--events",
            s(&events),
            "--network",
            "block",
            "--blocks",
            blocks,
            "--out",
            s(&dir.path().join("fit")),
        ]);
        assert_eq!(code(&out), 1, "blocks {blocks}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn under_identified_model_fails_while_others_are_fitted() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("events.csv");
    std::fs::write(&events, "time\n1.5\n4.0\n7.25\n").unwrap();
    let out_dir = dir.path().join("fit");
    let out = ppdiag(&["fit", "--events", s(&events), "--horizon", "10", "--out", s(&out_dir)]);
    assert_eq!(code(&out), 1);
    let summary = lines(&out_dir.join("fit_summary.csv"));
    assert_eq!(summary[0], "model,loglik,converged,iterations,status");
    let status: Vec<(&str, &str)> = summary[1..]
        .iter()
        .map(|l| (l.split(',').next().unwrap(), l.rsplit(',').next().unwrap()))
        .collect();
    assert_eq!(status.len(), 4);
    for (model, st) in status {
        match model {
            "poisson" | "hawkes" => assert_eq!(st, "ok", "{model}"),
            _ => assert_ne!(st, "ok", "{model}"),
        }
    }
    assert!(out_dir.join("poisson.json").exists());
    assert!(out_dir.join("hawkes.json").exists());
    assert!(!out_dir.join("mmhp.json").exists());
}

fn univariate_pipeline(root: &Path) {
    let sim = root.join("sim");
    let fit = root.join("fit");
    let diag = root.join("diag");
    let config = fixture("bursty_mmhp.toml");
    assert_eq!(code(&ppdiag(&["simulate", "--config", s(&config), "--out", s(&sim)])), 0);
    let events = sim.join("events.csv");
    let out = ppdiag(&["fit", "--events", s(&events), "--models", "poisson,hawkes", "--seed", "3", "--out", s(&fit)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = ppdiag(&[
        "diagnose",
        "--events",
        s(&events),
        "--model",
        s(&fit.join("poisson.json")),
        "--model",
        s(&fit.join("hawkes.json")),
        "--model",
        s(&sim.join("true_model.json")),
        "--grid-points",
        "201",
        "--out",
        s(&diag),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn univariate_pipeline_outputs() {
    let dir = tempfile::tempdir().unwrap();
    univariate_pipeline(dir.path());
    let events = lines(&dir.path().join("sim/events.csv"));
    assert_eq!(events[0], "time");
    let m = events.len() - 1;
    assert!(m > 50);

    let diag = dir.path().join("diag");
    for name in ["poisson", "hawkes", "true_model"] {
        let rescaled = lines(&diag.join(format!("{name}_rescaled.csv")));
        assert_eq!(rescaled.len() - 1, m, "{name}");
        let qq = lines(&diag.join(format!("{name}_qq.csv")));
        assert_eq!(qq.len() - 1, m);
        let svg = std::fs::read_to_string(diag.join(format!("{name}_qq.svg"))).unwrap();
        let points = svg.split("<g class=\"points\"").nth(1).unwrap().split("</g>").next().unwrap();
        assert_eq!(points.matches("<circle").count(), m, "{name}");
        assert!(svg.contains("class=\"reference\""));

        let intensity = lines(&diag.join(format!("{name}_intensity.csv")));
        assert_eq!(intensity[0], "time,intensity");
        assert_eq!(intensity.len() - 1, 201);
        let first: f64 = intensity[1].split(',').next().unwrap().parse().unwrap();
        let last: f64 = intensity[201].split(',').next().unwrap().parse().unwrap();
        assert_eq!((first, last), (0.0, 100.0));
        assert!(intensity[1..]
            .iter()
            .all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() > 0.0));
    }
    let residuals = lines(&diag.join("residuals.csv"));
    assert!(residuals.len() > 3 * m);
    assert!(diag.join("residuals_lowess.csv").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(diag.join("diagnose_report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    univariate_pipeline(a.path());
    univariate_pipeline(b.path());
    for sub in ["sim", "fit", "diag"] {
        let mut names: Vec<_> = std::fs::read_dir(a.path().join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            let name = Path::new(&name);
            if name.extension().is_some_and(|e| e == "csv" || e == "svg") {
                let x = std::fs::read(a.path().join(sub).join(name)).unwrap();
                let y = std::fs::read(b.path().join(sub).join(name)).unwrap();
                assert!(x == y, "{sub}/{} differs", name.display());
            }
        }
    }
}

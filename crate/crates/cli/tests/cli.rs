use std::process::{Command, Output};

use serde_json::Value;

fn alphapred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alphapred")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Header lines, column names and records of an emitted CSV.
fn parse_csv(text: &str) -> (Vec<String>, Vec<String>, Vec<Vec<String>>) {
    let meta: Vec<String> = text.lines().filter(|l| l.starts_with('#')).map(String::from).collect();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let cols = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (meta, cols, rows)
}

fn meta_value(meta: &[String], key: &str) -> Option<String> {
    let prefix = format!("# {key}: ");
    meta.iter().find_map(|l| l.strip_prefix(&prefix).map(String::from))
}

#[test]
fn missing_alpha_is_a_config_error() {
    let out = alphapred(&["risk", "--d", "3", "--vx", "1", "--vy", "1", "--density", "uniform"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_values_are_config_errors() {
    for args in [
        &["risk", "--d", "2", "--alpha", "0"][..],
        &["risk", "--d", "3", "--alpha", "0", "--n", "10"],
        &["risk", "--d", "3", "--alpha", "0", "--n", "1.5e3.2"],
        &["risk", "--d", "3", "--alpha", "2"],
        &["risk", "--d", "3", "--alpha", "0", "--mu-grid", "0,x"],
        &["dominate", "--d", "3", "--alpha", "0", "--density", "plugin"],
        &["figure1"],
        &["verify", "--only", "nothing"],
        &["risk", "--d", "3", "--alpha", "0", "--config", "/nonexistent/config.json"],
    ] {
        assert_eq!(alphapred(args).status.code(), Some(2), "{args:?}");
    }
    assert_eq!(alphapred(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn invariant_risk_matches_closed_form() {
    let out = alphapred(&["risk", "--d", "3", "--alpha", "0", "--vx", "1", "--vy", "1", "--density", "uniform", "--n", "1e6", "--seed", "7", "--mu-grid", "0,1,10"]);
    assert_eq!(out.status.code(), Some(0));
    let (meta, cols, rows) = parse_csv(&stdout(&out));
    assert_eq!(cols, ["mu_norm", "density_kind", "risk", "stderr", "n"]);
    let exact = 4.0 * (1.0 - (2.0f64 / 3.0).powf(0.75));
    let closed: f64 = meta_value(&meta, "closed_form").unwrap().parse().unwrap();
    assert!((closed - exact).abs() < 1e-14);
    assert_eq!(rows.len(), 3);
    for row in rows {
        let (risk, se): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
        assert!((risk - exact).abs() <= 3.0 * se, "{risk} ± {se} vs {exact}");
        assert_eq!(row[4], "1000000");
    }
}

#[test]
fn identical_runs_give_identical_bytes() {
    let args = ["dominate", "--d", "4", "--alpha", "0.2", "--n", "2e4", "--seed", "11", "--mu-grid", "0,3"];
    let a = alphapred(&args);
    let b = alphapred(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let mut one_thread = args.to_vec();
    one_thread.extend(["--threads", "1"]);
    assert_eq!(alphapred(&one_thread).stdout, a.stdout);
}

#[test]
fn csv_and_json_agree_exactly() {
    for args in [
        &["risk", "--d", "3", "--alpha", "0.5", "--density", "harmonic", "--n", "5e3", "--mu-grid", "0,2"][..],
        &["figure1", "--d", "4"],
        &["appendix", "--points", "1", "--mtp2-pairs", "100"],
    ] {
        let csv_out = alphapred(args);
        let mut json_args = args.to_vec();
        json_args.extend(["--format", "json"]);
        let json_out = alphapred(&json_args);
        assert_eq!(csv_out.status.code(), Some(0), "{args:?}");
        assert_eq!(json_out.status.code(), Some(0), "{args:?}");
        let (meta, cols, rows) = parse_csv(&stdout(&csv_out));
        let doc: Value = serde_json::from_str(&stdout(&json_out)).unwrap();
        let json_cols: Vec<&str> = doc["meta"]["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
        assert_eq!(cols, json_cols);
        assert_eq!(meta_value(&meta, "seed").unwrap(), doc["meta"]["seed"].to_string());
        let json_rows = doc["rows"].as_array().unwrap();
        assert_eq!(rows.len(), json_rows.len());
        for (row, obj) in rows.iter().zip(json_rows) {
            for (col, cell) in cols.iter().zip(row) {
                let v = &obj[col.as_str()];
                match v {
                    Value::Number(n) if n.is_f64() => assert_eq!(cell.parse::<f64>().unwrap(), n.as_f64().unwrap(), "{col}"),
                    Value::Number(n) => assert_eq!(cell, &n.to_string()),
                    Value::String(s) => assert_eq!(cell, s),
                    Value::Bool(b) => assert_eq!(cell, &b.to_string()),
                    Value::Null => assert!(cell.is_empty()),
                    other => panic!("unexpected {other}"),
                }
            }
        }
    }
}

#[test]
fn figure1_rows() {
    let out = alphapred(&["figure1", "--d", "5"]);
    let (meta, cols, rows) = parse_csv(&stdout(&out));
    assert_eq!(cols, ["alpha", "bound", "branch", "kappa", "c_beta"]);
    assert!(rows.len() >= 400);
    assert_eq!(meta_value(&meta, "schema").unwrap(), "figure1/1");
    let at0 = rows.iter().find(|r| r[0].parse::<f64>().unwrap() == 0.0).unwrap();
    assert!((at0[1].parse::<f64>().unwrap() - 1.4).abs() < 1e-15);
    let alphas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(alphas.windows(2).all(|w| w[0] < w[1]));

    let (_, _, rows) = parse_csv(&stdout(&alphapred(&["figure1", "--d", "3"])));
    let half = rows.iter().find(|r| r[0].parse::<f64>().unwrap() == 0.5).unwrap();
    assert!((half[1].parse::<f64>().unwrap() - 5.0 / 4.5).abs() < 1e-15);
    assert_eq!(half[2], "integer_case");
}

#[test]
fn domination_verdicts() {
    let out = alphapred(&["dominate", "--d", "5", "--alpha", "0", "--n", "1e5"]);
    assert_eq!(out.status.code(), Some(0));
    let (meta, _, rows) = parse_csv(&stdout(&out));
    assert_eq!(meta_value(&meta, "verdict").unwrap(), "PASS");
    assert_eq!(meta_value(&meta, "threshold").unwrap(), "1.4");
    assert_eq!(rows.len(), 7);

    let out = alphapred(&["dominate", "--d", "5", "--alpha", "0", "--n", "1e4", "--density", "constant"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(meta_value(&parse_csv(&stdout(&out)).0, "verdict").unwrap(), "NEUTRAL");

    let out = alphapred(&["dominate", "--d", "3", "--alpha", "0", "--n", "1e3", "--mu-grid", "8,16"]);
    let verdict = meta_value(&parse_csv(&stdout(&out)).0, "verdict").unwrap();
    assert!(verdict == "INCONCLUSIVE" || verdict == "PASS", "{verdict}");
}

#[test]
fn superharmonic_check_passes_up_to_t_max() {
    let out = alphapred(&["superharmonic", "--d", "4", "--nu", "2", "--c", "0.5", "--v", "1", "--t-count", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let (meta, _, rows) = parse_csv(&stdout(&out));
    let tm: f64 = meta_value(&meta, "t_max").unwrap().parse().unwrap();
    assert!((tm - (3.0f64 / 8.0).sqrt()).abs() < 1e-15);
    assert_eq!(rows.len(), 4 * 41);
    assert!(rows.iter().all(|r| r[4] == "true"));
}

#[test]
fn verify_filters_and_fault_injection() {
    let out = alphapred(&["verify", "--only", "appendix", "--points", "1", "--mtp2-pairs", "200", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["group"] == "appendix" && r["pass"] == true));

    let out = alphapred(&["verify", "--only", "squares,heat"]);
    assert_eq!(out.status.code(), Some(0));

    let out = alphapred(&["verify", "--only", "squares", "--inject-fault"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(err.contains("squares"), "{err}");
    let (_, _, rows) = parse_csv(&stdout(&out));
    assert_eq!(rows[0][5], "false");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"d": 3, "alpha": 0, "density": "uniform", "n": 2e3, "seed": 5, "mu_grid": "0"}"#).unwrap();
    let path = dir.path().join("out.json");
    let out = alphapred(&[
        "risk", "--config", cfg.to_str().unwrap(), "--seed", "6", "--format", "json", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["meta"]["seed"], 6);
    assert_eq!(doc["meta"]["config"]["n"], 2000);
    assert_eq!(doc["meta"]["config"]["vy"], 1.0);
    assert_eq!(doc["rows"][0]["n"], 2000);
}

//! End-to-end runs of the `skewgof` binary. Every JSON document it writes is
//! checked against `schemas/reports.schema.json`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::{Draft, JSONSchema};
use serde_json::Value;
use tempfile::TempDir;

const SN_SPEC: &str = r#"{"family":"sn","xi":[1.0,-1.0],"omega":[[2.0,0.5],[0.5,1.0]],"alpha":[3.0,-1.0]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skewgof"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Validates `doc` against one report definition of the bundled schema.
fn check_schema(doc: &Value, definition: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/reports.schema.json");
    let mut schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!(schema["definitions"].get(definition).is_some(), "no definition {definition}");
    schema["$ref"] = Value::String(format!("#/definitions/{definition}"));
    let compiled = JSONSchema::options().with_draft(Draft::Draft7).compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{definition} does not match the schema:\n{}", msgs.join("\n"));
    };
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn sample_to(dir: &Path, name: &str, spec: &str, n: usize, seed: u64) -> PathBuf {
    let out = dir.join(name);
    let o = run(&[
        "sample",
        "--spec",
        spec,
        "-n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

/// Drops the wall-clock fields so two runs can be compared.
fn strip_time(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_s");
            map.values_mut().for_each(strip_time);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_time),
        _ => {}
    }
}

#[test]
fn sample_is_deterministic_in_the_seed() {
    let a = run(&["sample", "--spec", SN_SPEC, "-n", "40", "--seed", "9"]);
    let b = run(&["sample", "--spec", SN_SPEC, "-n", "40", "--seed", "9"]);
    let c = run(&["sample", "--spec", SN_SPEC, "-n", "40", "--seed", "10"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r.split(',').count() == 2));
}

#[test]
fn fit_recovers_the_sampled_law() {
    let dir = TempDir::new().unwrap();
    let data = sample_to(dir.path(), "x.csv", SN_SPEC, 2000, 1);
    let report = dir.path().join("fit.json");
    let o = run(&["fit", path_str(&data), "--family", "sn", "--out", path_str(&report)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = read_json(&report);
    check_schema(&doc, "FitReport");
    assert_eq!(doc["data"]["n"], 2000);
    assert_eq!(doc["data"]["header"], false);
    let params = &doc["fit"]["params"];
    assert_eq!(params["family"], "sn");
    let xi: Vec<f64> = serde_json::from_value(params["xi"].clone()).unwrap();
    let omega: Vec<Vec<f64>> = serde_json::from_value(params["omega"].clone()).unwrap();
    let alpha: Vec<f64> = serde_json::from_value(params["alpha"].clone()).unwrap();
    assert!((xi[0] - 1.0).abs() < 0.25 && (xi[1] + 1.0).abs() < 0.25, "xi {xi:?}");
    assert!((omega[0][0] - 2.0).abs() < 0.5 && (omega[1][1] - 1.0).abs() < 0.3, "omega {omega:?}");
    assert!(alpha[0] > 1.5 && alpha[0] < 6.0 && alpha[1] < 0.0, "alpha {alpha:?}");
}

#[test]
fn data_errors_name_the_row_and_column() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["fit", path_str(&empty), "--family", "sn"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1.0,2.0\n3.0,oops\n5.0,6.0\n").unwrap();
    let o = run(&["fit", path_str(&bad), "--family", "sn"]);
    assert_eq!(code(&o), 3);
    let msg = stderr(&o);
    assert!(msg.contains("row 3") && msg.contains("column 2") && msg.contains("'b'"), "{msg}");

    let o = run(&["fit", dir.path().join("absent.csv").to_str().unwrap(), "--family", "sn"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn drop_missing_skips_and_reports_rows() {
    let dir = TempDir::new().unwrap();
    let data = sample_to(dir.path(), "x.csv", SN_SPEC, 60, 2);
    let mut lines: Vec<String> = std::fs::read_to_string(&data).unwrap().lines().map(String::from).collect();
    lines[4] = "NA,1.0".into();
    lines[10] = "0.5,".into();
    let holes = dir.path().join("holes.csv");
    std::fs::write(&holes, lines.join("\n") + "\n").unwrap();

    let o = run(&["fit", path_str(&holes), "--family", "sn"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("--drop-missing"), "{}", stderr(&o));

    let o = run(&["fit", path_str(&holes), "--family", "sn", "--drop-missing"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    check_schema(&doc, "FitReport");
    assert_eq!(doc["data"]["n"], 58);
    assert_eq!(doc["data"]["dropped_rows"], serde_json::json!([5, 11]));
}

#[test]
fn named_columns_and_row_filter() {
    let ais = fixture("ais_like.csv");
    let o = run(&["fit", path_str(&ais), "--family", "sl", "--columns", "BMI,Bfat,SSF,LBM", "--filter", "sex=female"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    check_schema(&doc, "FitReport");
    assert_eq!(doc["data"]["header"], true);
    assert_eq!(doc["data"]["n"], 24);
    assert_eq!(doc["data"]["p"], 4);
    assert_eq!(doc["data"]["columns"], serde_json::json!(["BMI", "Bfat", "SSF", "LBM"]));

    let o = run(&["fit", path_str(&ais), "--family", "sl", "--columns", "BMI,height"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("height"));

    // positions count from 1
    let o = run(&["fit", path_str(&fixture("wind_like.csv")), "--family", "sn", "--columns", "2,3,4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["data"]["columns"], serde_json::json!(["gh", "kw", "vs"]));
    assert_eq!(doc["data"]["n"], 30);
}

#[test]
fn twin_pairs_with_missing_bmi_are_dropped() {
    let twins = fixture("twin_like.csv");
    let args = ["fit", path_str(&twins), "--family", "sn", "--columns", "bmi1,bmi2", "--filter", "zygosity=MZFF"];
    let o = run(&args);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("row 8"), "{}", stderr(&o));
    let o = bin().args(args).arg("--drop-missing").output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["data"]["n"], 11);
    assert_eq!(doc["data"]["dropped_rows"], serde_json::json!([8, 20]));
}

#[test]
fn gof_dispatches_composite_and_simple_modes() {
    let dir = TempDir::new().unwrap();
    let spec = r#"{"family":"sl","xi":[0.0,0.0],"omega":[[1.0,0.0],[0.0,1.0]],"alpha":[3.0,0.0]}"#;
    let data = sample_to(dir.path(), "x.csv", spec, 50, 3);

    let o = run(&["gof", path_str(&data), "--family", "sl", "--bootstrap", "19", "-m", "80", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    check_schema(&doc, "GofReport");
    let out = &doc["outcome"];
    assert_eq!(out["mode"], "composite");
    assert!(out["critical_value"].is_null());
    let p = out["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert_eq!(out["statistic"]["m"], 80);

    let o = run(&[
        "gof",
        path_str(&data),
        "--family",
        "sl",
        "--mode",
        "simple",
        "--lambda0",
        r#"{"family":"sl","alpha_star":3.0}"#,
        "--replications",
        "19",
        "-m",
        "80",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    check_schema(&doc, "GofReport");
    let out = &doc["outcome"];
    assert_eq!(out["mode"], "simple");
    assert!(out["p_value"].is_null());
    assert!(out["critical_value"].as_f64().unwrap() > 0.0);
    assert_eq!(out["shape"], serde_json::json!({"family": "sl", "alpha_star": 3.0}));

    let o = run(&["gof", path_str(&data), "--family", "sl", "--mode", "simple"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn gof_is_reproducible_with_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let data = sample_to(dir.path(), "x.csv", SN_SPEC, 40, 5);
    let args = ["gof", path_str(&data), "--family", "sn", "--bootstrap", "9", "-m", "60", "--seed", "77"];
    let mut a: Value = serde_json::from_slice(&run(&args).stdout).unwrap();
    let mut b: Value = serde_json::from_slice(&run(&args).stdout).unwrap();
    strip_time(&mut a);
    strip_time(&mut b);
    assert_eq!(a, b);
    assert_eq!(a["outcome"]["run"]["seed"], 77);
}

#[test]
fn study_with_no_cells_writes_an_empty_report() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "[global]\nout = \"res\"\n[study]\nname = \"nothing\"\nfamily = \"sn\"\n").unwrap();
    let o = run(&["study", path_str(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = read_json(&dir.path().join("res/nothing.json"));
    check_schema(&doc, "StudyFile");
    assert_eq!(doc["cells"], serde_json::json!([]));
    let csv = std::fs::read_to_string(dir.path().join("res/nothing.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn study_writes_table_and_power_curve() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(
        &cfg,
        r#"
[global]
seed = 12
[study]
name = "tiny"
family = "sn"
replications = 20
plot = true
x_label = "alpha*"
[[cell]]
n = 30
x = 0.0
alpha_star = 0.0
[[cell]]
n = 30
x = 3.0
alpha_star = 3.0
[[cell]]
label = "broken"
n = 30
x = 5.0
truth = "gh"
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["study", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = read_json(&out.join("tiny.json"));
    check_schema(&doc, "StudyFile");
    let cells = doc["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 3);
    assert_eq!(cells[0]["report"]["protocol"], "warp-speed");
    assert_eq!(cells[0]["report"]["config"]["replications"], 20);
    assert!(cells[2]["error"].as_str().unwrap().contains("'g'"));

    let csv = std::fs::read_to_string(out.join("tiny.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("label,x,n,m,truth,rate"));
    assert!(rows[3].starts_with("\"broken\""));

    let svg = std::fs::read_to_string(out.join("tiny.svg")).unwrap();
    assert!(svg.contains(r#"class="delta""#) && svg.contains("stroke-dasharray"));
    assert_eq!(svg.matches("<circle").count(), 2);
    assert!(svg.contains("alpha*"));
}

#[test]
fn oracle_check_reports_each_oracle() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("oracles.json");
    let o = run(&[
        "oracle-check",
        "--instances",
        "3",
        "--draws",
        "20000",
        "--n-sim",
        "4000",
        "--out",
        path_str(&report),
    ]);
    let doc = read_json(&report);
    check_schema(&doc, "OracleCheckReport");
    let passed = doc["passed"].as_bool().unwrap();
    assert_eq!(code(&o), if passed { 0 } else { 4 });
    let oracles = doc["oracles"].as_array().unwrap();
    assert_eq!(oracles.len(), 5);
    assert_eq!(oracles[0]["instances"].as_array().unwrap().len(), 3);
    let all = oracles.iter().all(|r| r["passed"].as_bool().unwrap());
    assert_eq!(all, passed);
}

#[test]
fn exit_codes_follow_the_error_class() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert!(String::from_utf8_lossy(&run(&["--version"]).stdout).starts_with("skewgof "));

    let dir = TempDir::new().unwrap();
    let data = sample_to(dir.path(), "x.csv", SN_SPEC, 30, 6);
    let x = path_str(&data);
    assert_eq!(code(&run(&["fit", x])), 2);
    assert_eq!(code(&run(&["fit", x, "--family", "normal"])), 2);
    assert_eq!(code(&run(&["fit", x, "--family", "sn", "--kernel", "cauchy"])), 2);
    assert_eq!(code(&run(&["gof", x, "--family", "sn", "--delta", "1.5"])), 2);
    assert_eq!(code(&run(&["sample", "--spec", "{\"family\":\"sn\"}", "-n", "5"])), 3);
    let singular = r#"{"family":"sn","xi":[0,0],"omega":[[1,1],[1,1]],"alpha":[0,0]}"#;
    assert_eq!(code(&run(&["sample", "--spec", singular, "-n", "5"])), 3);
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[study]\nname='x'\nfamily='sn'\nprotocol='sideways'\n").unwrap();
    assert_eq!(code(&run(&["study", path_str(&cfg)])), 3);
}

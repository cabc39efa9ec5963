use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_panel-markov"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixtures_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn verify_reports_every_check() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["verify"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    for name in ["integrity", "stochasticity", "entropy", "ck_product", "second_order_agreement", "trend_ratio", "diagonal_dominance"] {
        assert!(text.contains(&format!("PASS {name}")), "{text}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 7);
}

#[test]
fn verify_missing_fixture_is_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("fx");
    std::fs::create_dir(&dir).unwrap();
    std::fs::copy(fixtures_dir().join("manifest.json"), dir.join("manifest.json")).unwrap();
    let o = bin().args(["verify", "--fixtures"]).arg(&dir).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env_out");
    let o = bin()
        .args(["simulate", "--entities", "50", "--years", "2000:2001"])
        .env("PANEL_MARKOV_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("panel.csv").exists());
    assert!(out.join("simulation.json").exists());
}

#[test]
fn simulate_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |seed: &'static str| ["simulate", "--entities", "400", "--years", "2000:2003", "--seed", seed];
    run(&args("3"), &tmp.path().join("a"));
    run(&args("3"), &tmp.path().join("b"));
    run(&args("4"), &tmp.path().join("c"));
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("panel.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn simulate_from_rounded_table() {
    let tmp = tempfile::tempdir().unwrap();
    let table = fixtures_dir().join("table05_first_order_1998_1999.csv");
    let o = bin()
        .args(["simulate", "--entities", "300", "--matrix"])
        .arg(&table)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let bad = tmp.path().join("bad.csv");
    let text = std::fs::read_to_string(&table).unwrap().replacen(",0.6403,", ",0.6503,", 1);
    std::fs::write(&bad, text).unwrap();
    let o = bin().args(["simulate", "--matrix"]).arg(&bad).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn analyze_json_format_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    run(&["simulate", "--entities", "500", "--years", "2000:2002"], &tmp.path().join("sim"));
    let panel = tmp.path().join("sim/panel.csv");
    let out = tmp.path().join("json");
    let o = bin()
        .args(["analyze", "--format", "json", "--trend-weight", "origin", "--trend-exclude-entry-exit", "--input"])
        .arg(&panel)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("matrices/F_2000_2001.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["trend"]["weight"], "origin");
    assert_eq!(manifest["trend"]["exclude_entry_exit"], true);
    assert_eq!(manifest["matrices"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["csv_matrix_decimals"], 4);
}

#[test]
fn analyze_custom_scheme() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = tmp.path().join("p.csv");
    std::fs::write(&panel, "entity_id,year,size\na,2000,3\na,2001,40\nb,2000,30\nb,2001,2\n").unwrap();
    let scheme = tmp.path().join("s.toml");
    std::fs::write(&scheme, "boundaries = [0, 10]\n").unwrap();
    let o = bin()
        .args(["analyze", "--input"])
        .arg(&panel)
        .arg("--scheme")
        .arg(&scheme)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(tmp.path().join("o/matrices/F_2000_2001.csv")).unwrap();
    assert_eq!(table, "Size,0,1,2\n0,,0.0000,0.0000\n1,,0.0000,1.0000\n2,,1.0000,0.0000\n");
}

#[test]
fn ck_from_fixtures_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["ck"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS ck 1998:2000"));
    for f in ["product_1998_2000.csv", "direct_1998_2000.csv", "deviations_1998_2000.csv", "ck_report_1998_2000.json"] {
        assert!(tmp.path().join("ck").join(f).exists(), "{f}");
    }
}

#[test]
fn ck_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["ck", "--years", "1998:1999"], tmp.path()).status.code(), Some(4));
    assert_eq!(run(&["ck", "--tolerance-ck", "1e-6"], tmp.path()).status.code(), Some(6));
    assert_eq!(run(&["ck", "--tolerance-ck", "0"], tmp.path()).status.code(), Some(4));
    assert_eq!(run(&["ck", "--years", "2001:2003"], tmp.path()).status.code(), Some(3));
}

#[test]
fn ck_on_simulated_panel() {
    let tmp = tempfile::tempdir().unwrap();
    run(&["simulate", "--entities", "100000", "--years", "2000:2002", "--seed", "9"], tmp.path());
    let o = bin()
        .args(["ck", "--years", "2000:2002", "--tolerance-ck", "0.02", "--input"])
        .arg(tmp.path().join("panel.csv"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use classe_core::netlist::load_json;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_classe-pa"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn single_stage_design_reports_trap_windows() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "one.json");
    let o = run(&["design", "--stages", "1", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.matches("R1 < f0 < R2").count(), 2, "{text}");
    assert!(text.contains("r_load"));
    let n = load_json(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(n.fets().count(), 1);
}

#[test]
fn two_stage_design_has_two_fets() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "two.json");
    assert!(run(&["design", "--stages", "2", "--out", &out]).status.success());
    let n = load_json(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(n.fets().count(), 2);
}

#[test]
fn zero_output_power_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let o = run(&["design", "--pout", "0", "--out", &path(&dir, "x.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--pout"));
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["design", "--stages", "3"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", &path(&dir, "missing.json")]).status.code(), Some(1));
    assert_eq!(run(&["design", "--q", "2", "--out", &path(&dir, "q.json")]).status.code(), Some(2));
    assert_eq!(run(&["design", "--stage-gain", "40", "--out", &path(&dir, "g.json")]).status.code(), Some(2));
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, b"{\"version\": 7}").unwrap();
    assert_eq!(run(&["analyze", &bad]).status.code(), Some(2));
    let ladder = fixture("ladder.json");
    let ladder = ladder.to_str().unwrap();
    let s2p = path(&dir, "l.s2p");
    assert_eq!(run(&["analyze", ladder, "--from", "4e9", "--to", "1e9", "--out", &s2p]).status.code(), Some(2));
    // a passive ladder has no transistor to switch
    assert_eq!(run(&["transient", ladder, "--pin", "0", "--out", &path(&dir, "w.csv")]).status.code(), Some(2));
    let one = fixture("one_stage.json");
    let csv = path(&dir, "s.csv");
    assert_eq!(run(&["sweep", one.to_str().unwrap(), "--step", "0", "--out", &csv]).status.code(), Some(2));
    assert_eq!(run(&["sweep", one.to_str().unwrap(), "--from", "-50", "--out", &csv]).status.code(), Some(2));
}

#[test]
fn analyze_writes_one_line_per_point() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "a.s2p");
    let o = run(&["analyze", fixture("one_stage.json").to_str().unwrap(), "--from", "1e9", "--to", "4e9", "--points", "301", "--out", &out]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("# ")).collect::<Vec<_>>(), vec!["# HZ S RI R 50"]);
    let data = text.lines().filter(|l| !l.starts_with('!') && !l.starts_with('#')).count();
    assert_eq!(data, 301);
}

#[test]
fn sweep_writes_one_row_per_input_power() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "s.csv");
    let o = run(&["sweep", fixture("one_stage.json").to_str().unwrap(), "--from", "-10", "--to", "20", "--step", "1", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 32);
    assert_eq!(text.lines().next(), Some("pin_dbm,gain_db,pout_dbm,pae"));
}

#[test]
fn tuning_a_detuned_netlist_improves_monotonically() {
    let dir = TempDir::new().unwrap();
    let n = load_json(&std::fs::read(fixture("one_stage.json")).unwrap()).unwrap();
    let v = n.component("MIN_SH1").unwrap().element.primary_value().unwrap();
    let detuned = n.set_component_value("MIN_SH1", 2.0 * v).unwrap();
    let input = path(&dir, "detuned.json");
    std::fs::write(&input, classe_core::netlist::save_json(&detuned)).unwrap();
    let (report, saved) = (path(&dir, "tune.json"), path(&dir, "tuned.json"));
    let o = run(&["tune", &input, "--objective", "s21", "--budget", "200", "--out", &report, "--save", &saved]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let t: Vec<f64> = r["trajectory"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(!t.is_empty() && t.len() <= 200);
    assert!(t.windows(2).all(|w| w[1] >= w[0]));
    assert!(t.last().unwrap() > &(t[0] + 1.0), "{} -> {}", t[0], t.last().unwrap());
    assert!(load_json(&std::fs::read(&saved).unwrap()).is_ok());
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let one = fixture("one_stage.json");
    let one = one.to_str().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["design".into(), "--stages".into(), "2".into(), "--out".into()],
        vec!["analyze".into(), one.into(), "--points".into(), "51".into(), "--out".into()],
        vec!["transient".into(), one.into(), "--pin".into(), "5".into(), "--out".into()],
        vec!["sweep".into(), one.into(), "--from".into(), "0".into(), "--to".into(), "4".into(), "--step".into(), "2".into(), "--out".into()],
    ];
    for (k, args) in cases.into_iter().enumerate() {
        let outs: Vec<Vec<u8>> = (0..2)
            .map(|i| {
                let out = path(&dir, &format!("{k}_{i}"));
                let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
                a.push(&out);
                assert!(run(&a).status.success());
                std::fs::read(&out).unwrap()
            })
            .collect();
        assert_eq!(outs[0], outs[1], "{args:?}");
    }
}

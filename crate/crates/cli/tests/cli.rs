use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kgflrw::dynamics::{parse_trace_csv, TRACE_HEADER};
use kgflrw::hypotheses::HypothesisReport;
use kgflrw::odelab::{OracleRow, ORACLE_CSV_HEADER};

fn kgflrw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgflrw")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn kv<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("missing `{key}` in\n{text}"))
}

#[test]
fn check_reports_theorem_one_bound() {
    let o = kgflrw(&["check", "minkowski-m0-u2-A3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let t: f64 = kv(&text, "T_bound").parse().unwrap();
    assert!((t - std::f64::consts::PI.powi(2)).abs() < 1e-12);
    let report = HypothesisReport::from_kv(&text).unwrap();
    assert_eq!(report.to_kv(), text);
}

#[test]
fn check_csv_round_trips() {
    let o = kgflrw(&["check", "desitter-thm2-A6", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    let (header, row) = (lines.next().unwrap(), lines.next().unwrap());
    let report = HypothesisReport::from_csv_row(header, row).unwrap();
    assert_eq!(report.to_csv_row(), row);
}

#[test]
fn exit_codes() {
    assert_eq!(kgflrw(&["check", "small-data-A0.1"]).status.code(), Some(3));
    assert_eq!(kgflrw(&["check", "bigrip"]).status.code(), Some(3));
    assert_eq!(kgflrw(&["check", "no-such-scenario"]).status.code(), Some(2));
    assert_eq!(kgflrw(&["check", "small-data-A0.1", "--set", "nonlin.eps=3"]).status.code(), Some(2));
    assert_eq!(kgflrw(&["check", "small-data-A0.1", "--set", "grid.bogus=1"]).status.code(), Some(2));
    let long = kgflrw(&["simulate", "linear-minkowski", "--set", "run.t_end=8"]);
    assert_eq!(long.status.code(), Some(5));
    assert_eq!(kv(&stdout(&long), "termination"), "wrap_around_abort");
}

#[test]
fn short_table_horizon_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = String::from("t,a,adot,addot\n");
    for i in 0..=40 {
        let t = 2.0 * i as f64 / 40.0;
        let a = (0.5 * t).exp();
        table.push_str(&format!("{t},{a},{},{}\n", 0.5 * a, 0.25 * a));
    }
    fs::write(dir.path().join("ds.csv"), table).unwrap();
    let cfg = "scale.family = tabulated\nscale.table_path = ds.csv\nphys.m = 0\nnonlin.family = realabs\n\
               nonlin.p = 2\nnonlin.eps = 1\ngrid.n = 1\ngrid.N = 32\ngrid.half_width = 3.141592653589793\n\
               data0.kind = homogeneous\ndata0.amplitude = 3\nrun.t_end = 1\n";
    let path = dir.path().join("short.cfg");
    fs::write(&path, cfg).unwrap();
    let o = kgflrw(&["check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert_eq!(kv(&stdout(&o), "thm1_outcome"), "horizon_too_short");
}

#[test]
fn simulate_writes_trace_summary_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = kgflrw(&["simulate", "minkowski-m0-u2-A3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary, stdout(&o));
    assert_eq!(kv(&summary, "blowup_detected"), "true");
    let t_star: f64 = kv(&summary, "T_star").parse().unwrap();
    assert!((t_star - 1.7173).abs() < 1e-3);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with(TRACE_HEADER));
    assert!(parse_trace_csv(&trace).unwrap().len() > 100);
    HypothesisReport::from_kv(&fs::read_to_string(out.join("report.txt")).unwrap()).unwrap();
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(kgflrw(&["simulate", "desitter-thm1-gauss", "--out", d.to_str().unwrap()]).status.code(), Some(0));
    }
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
}

#[test]
fn oracle_csv_round_trips_and_is_deterministic() {
    let a = stdout(&kgflrw(&["oracle-ode", "oracle-concavity-worked"]));
    let b = stdout(&kgflrw(&["oracle-ode", "oracle-concavity-worked"]));
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some(ORACLE_CSV_HEADER));
    let rows: Vec<OracleRow> = lines.map(|l| OracleRow::from_csv(l, 0.0).unwrap()).collect();
    assert_eq!(rows.len(), 101);
    assert!((rows[0].t_vanish - 1.214_325_323_943_79).abs() < 1e-6);
    assert!((rows[0].t_bound - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    assert_eq!(rows[0].to_csv(), a.lines().nth(1).unwrap());
}

#[test]
fn sweep_writes_frontier_and_point_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = kgflrw(&[
        "sweep",
        "small-data-A0.1",
        "--axis",
        "data0.amplitude=0.5:3:6",
        "--jobs",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let frontier = fs::read_to_string(out.join("frontier.csv")).unwrap();
    assert_eq!(frontier, stdout(&o));
    let lines: Vec<&str> = frontier.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[1].contains(",none,"));
    assert!(lines[6].contains(",Thm1,") || lines[6].contains(",both,"));
    assert!(out.join("point-005").join("trace.csv").exists());
    assert!(!out.join("point-000").join("trace.csv").exists());
    assert!(out.join("point-000").join("report.txt").exists());
}

#[test]
fn scenarios_lists_and_shows_bundled_configs() {
    let list = stdout(&kgflrw(&["scenarios"]));
    assert!(list.lines().count() >= 10);
    let shown = kgflrw(&["scenarios", "--show", "bigrip"]);
    assert!(stdout(&shown).contains("scale.sigma"));
    assert_eq!(kgflrw(&["scenarios", "--show", "missing"]).status.code(), Some(2));
}

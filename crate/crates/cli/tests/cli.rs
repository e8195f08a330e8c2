use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chowfilter"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
}

/// Nothing but the named files, in particular no leftover temporaries.
fn assert_only(dir: &Path, expected: &[&str]) {
    let mut names: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    let mut expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
    expected.sort();
    assert_eq!(names, expected);
}

#[test]
fn pq_run_writes_results_row_and_selector() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("pq");
    let scn = scenario("pq_subcube.toml");
    let o = run(&[
        "pq-run",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--eta",
        "0.5",
        "--eps",
        "0.2",
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("summary scenario=pq-subcube seed=7 mode=pq"));

    let (header, rows) = csv_rows(&out.join("results.csv"));
    assert_eq!(header.len(), chowfilter::bench::RESULT_COLUMNS.len());
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][column(&header, "mode")], "pq");
    assert_eq!(rows[0][column(&header, "seed")], "7");
    let rej: f64 = rows[0][column(&header, "rejection_train")].parse().unwrap();
    assert!((0.0..=1.0).contains(&rej));

    let selector: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("selector.json")).unwrap()).unwrap();
    assert!(selector.is_object());
    let log = fs::read_to_string(out.join("run.log")).unwrap();
    assert!(log.contains("config:"));
    assert!(log.trim_end().lines().last().unwrap().starts_with("summary "));
    assert_only(&out, &["classifier.json", "results.csv", "run.log", "run_record.json", "selector.json"]);
}

#[test]
fn pq_run_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let scn = scenario("pq_subcube.toml");
    let selectors: Vec<String> = ["a", "b"]
        .iter()
        .map(|sub| {
            let out = dir.path().join(sub);
            let o =
                run(&["pq-run", "--scenario", scn.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "11"]);
            assert!(o.status.success());
            fs::read_to_string(out.join("selector.json")).unwrap()
        })
        .collect();
    assert_eq!(selectors[0], selectors[1]);
}

#[test]
fn oracle_check_passes_at_d10() {
    let o = run(&["oracle-check", "--d", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.starts_with("check ")).all(|l| l.contains(": ok")));
    assert!(text.contains("5 of 5 checks passed"));
}

#[test]
fn oracle_check_rejects_large_dimension() {
    assert_eq!(run(&["oracle-check", "--d", "25"]).status.code(), Some(2));
    assert_eq!(run(&["oracle-check", "--d", "0"]).status.code(), Some(2));
}

#[test]
fn tds_run_accepts_identical_marginals() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("tds");
    let scn = scenario("tds_identical.toml");
    let o = run(&[
        "tds-run",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--theta",
        "0",
        "--slack-R",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("decision=ACCEPT"), "{text}");
    let verdict: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["decision"], "ACCEPT");
}

#[test]
fn tds_run_rejects_flipped_cloud() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("tds");
    let scn = scenario("tds_flip_cloud.toml");
    let o = run(&["tds-run", "--scenario", scn.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("decision=REJECT"));
}

#[test]
fn sweep_two_etas_three_seeds() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    let scn = scenario("pq_subcube.toml");
    let o = run(&[
        "bench-sweep",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "pq",
        "--grid",
        "eta=0.3,0.5",
        "--seeds",
        "3",
        "--workers",
        "2",
        "--emit-plot-data",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out.join("trials.csv"));
    assert_eq!(rows.len(), 6);
    let seeds: Vec<&str> = rows.iter().map(|r| r[column(&header, "seed")].as_str()).collect();
    assert_eq!(seeds, ["7", "8", "9", "7", "8", "9"]);
    assert!(rows[..3].iter().all(|r| r[column(&header, "overrides")] == "eta=0.3"));
    assert!(rows.iter().all(|r| r[column(&header, "error")].is_empty()));

    let (sh, summary) = csv_rows(&out.join("summary.csv"));
    assert_eq!(summary.len(), 2);
    assert!(summary.iter().all(|r| r[column(&sh, "trials")] == "3" && r[column(&sh, "failures")] == "0"));
    let plot = fs::read_to_string(out.join("sweep_rejection_train.dat")).unwrap();
    assert_eq!(plot.lines().count(), 2);
    assert!(plot.starts_with("0.3 "));
}

#[test]
fn sweep_rows_do_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let scn = scenario("pq_subcube.toml");
    let tables: Vec<Vec<Vec<String>>> = ["1", "4"]
        .iter()
        .map(|w| {
            let out = dir.path().join(w);
            let o = run(&[
                "bench-sweep",
                "--scenario",
                scn.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--mode",
                "pq",
                "--grid",
                "eps=0.2,0.3",
                "--seeds",
                "2",
                "--workers",
                w,
            ]);
            assert!(o.status.success());
            let (header, rows) = csv_rows(&out.join("trials.csv"));
            let skip = column(&header, "runtime_ms");
            rows.into_iter()
                .map(|r| r.into_iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| v).collect())
                .collect()
        })
        .collect();
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn empty_grid_gives_header_only_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("empty");
    let scn = scenario("pq_subcube.toml");
    let o = run(&[
        "bench-sweep",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "pq",
        "--grid",
        "eta=",
    ]);
    assert_eq!(o.status.code(), Some(0));
    for table in ["trials.csv", "summary.csv"] {
        let (header, rows) = csv_rows(&out.join(table));
        assert!(!header.is_empty());
        assert!(rows.is_empty());
    }
}

#[test]
fn icf_rejection_shrinks_with_slack() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("icf");
    let scn = scenario("icf_gaussian.toml");
    let o = run(&[
        "bench-sweep",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "icf",
        "--grid",
        "slack-R=1.5,2,4",
        "--seeds",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out.join("summary.csv"));
    let col = column(&header, "rejection_train_mean");
    let rej: Vec<f64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
    assert_eq!(rej.len(), 3);
    assert!(rej.windows(2).all(|w| w[1] <= w[0]), "rejection by R: {rej:?}");
}

#[test]
fn invalid_arguments_exit_2_without_partial_output() {
    let dir = TempDir::new().unwrap();
    let scn = scenario("pq_subcube.toml");
    let s = scn.to_str().unwrap();

    let out = dir.path().join("beta");
    let o = run(&["pq-run", "--scenario", s, "--out", out.to_str().unwrap(), "--beta", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert_only(&out, &["run.log"]);
    assert!(fs::read_to_string(out.join("run.log")).unwrap().contains("error:"));

    let out = dir.path().join("eps");
    assert_eq!(
        run(&["pq-run", "--scenario", s, "--out", out.to_str().unwrap(), "--eps", "1.5"]).status.code(),
        Some(2)
    );
    if out.exists() {
        assert!(!out.join("results.csv").exists());
    }

    assert_eq!(
        run(&["pq-run", "--scenario", "/nonexistent.toml", "--out", dir.path().to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["pq-run", "--scenario", s]).status.code(), Some(2));
    assert_eq!(run(&["pq-run", "--scenario", s, "--out", "x", "--eta", "abc"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn unknown_grid_key_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bad");
    let scn = scenario("pq_subcube.toml");
    let o = run(&[
        "bench-sweep",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "pq",
        "--grid",
        "gamma=1,2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("trials.csv").exists());
}

#[test]
fn malformed_scenario_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "name = \"bad\"\ndim = 0\n").unwrap();
    let o = run(&["pq-run", "--scenario", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

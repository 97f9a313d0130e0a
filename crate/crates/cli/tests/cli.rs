use std::path::Path;
use std::process::{Command, Output};

fn panelkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panelkit"))
        .args(args)
        .env_remove("PANELKIT_DATA")
        .output()
        .unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn replicate_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = panelkit(&["replicate", "--fixture", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), 6);
    assert_eq!(fa, fb);
}

#[test]
fn missing_data_source_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = panelkit(&["replicate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no data source"));
}

#[test]
fn bad_config_value_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "fixture = true\nlag = zero\n").unwrap();
    let out = panelkit(&["fit", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    std::fs::write(data.join("bad.csv"), "country,year,value\nFrance,2010,1.0\n").unwrap();
    let out = panelkit(&["ingest", "--data", data.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "fixture = true\nformat = csv\nmodels = TOTAL, FUND-GOV\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = panelkit(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "markdown",
        "--estimator",
        "within",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = files(&out_dir).into_iter().map(|f| f.0).collect();
    assert_eq!(names, ["provenance.txt", "table5.md"]);
    let table = std::fs::read_to_string(out_dir.join("table5.md")).unwrap();
    assert!(table.starts_with("| model |"));
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn test_subcommand_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = panelkit(&["test", "--fixture", "--models", "TOTAL", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("model,honda_ind,honda_time,"));
    assert!(stdout.lines().nth(1).unwrap().starts_with("TOTAL,"));
}

#[test]
fn ingest_round_trips_through_data_directory() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = panelkit(&["ingest", "--fixture", "--out", first.to_str().unwrap()]);
    assert!(out.status.success());
    std::fs::remove_file(first.join("coverage.csv")).unwrap();
    let second = dir.path().join("second");
    let out = panelkit(&["ingest", "--data", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(first.join("study_panel.csv")).unwrap(),
        std::fs::read(second.join("study_panel.csv")).unwrap()
    );
}

#[test]
fn mc_subcommand_is_seeded() {
    let args = ["mc", "--reps", "20", "--experiments", "honda-size,hausman-power", "--seed", "7"];
    let (a, b) = (panelkit(&args), panelkit(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(panelkit(&["mc", "--experiments", "nope"]).status.code(), Some(1));
}

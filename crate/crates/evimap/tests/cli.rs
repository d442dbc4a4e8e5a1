use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn evimap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evimap")).args(args).env_remove("EVIMAP_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: [&str; 6] = ["--burn-in", "200", "--samples", "400", "--seed", "3"];

#[test]
fn validate_bundled_fixture() {
    let o = evimap(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "41 trials, 45 comparisons, 100 reports, 7 indications");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(evimap(&[]).status.code(), Some(2));
    assert_eq!(evimap(&["synth", "--model", "xx", "--outcome", "os"]).status.code(), Some(2));
    assert_eq!(evimap(&["validate", "--trials", "t.csv"]).status.code(), Some(2));
    assert_eq!(evimap(&["--version"]).status.code(), Some(0));
}

#[test]
fn invalid_data_lists_every_error() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    let o = dir.path().join("o.csv");
    fs::write(&t, "trial_id,subtrial_id,indication,start_date,end_date,comparator_class,n_control,n_comparator\nT1,,COL,2001-01-01,,CHM,0,10\n").unwrap();
    fs::write(
        &o,
        "trial_id,subtrial_id,outcome,cutoff_date,hr,ci_lower,ci_upper,events_control,events_comparator,is_final,assessment_method\nT2,,OS,2003-01-01,0.8,0.6,1.1,,,true,\n",
    )
    .unwrap();
    let out = evimap(&["validate", "--trials", t.to_str().unwrap(), "--outcomes", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("2 validation error(s)"), "{err}");
    assert!(err.contains("n_control") && err.contains("T2"), "{err}");

    let missing = evimap(&["validate", "--trials", "/nonexistent/t.csv", "--outcomes", o.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn metrics_csv_has_one_row_per_report() {
    let o = evimap(&["metrics"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 101);
    assert!(text.lines().next().unwrap().starts_with("trial_id"));
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_result_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cp.json");
    let draws = dir.path().join("draws");
    let mut args = vec![
        "synth",
        "--model",
        "cp",
        "--outcome",
        "os",
        "--as-of",
        "2019-12-31",
        "--out",
        out.to_str().unwrap(),
        "--dump-draws",
        draws.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let o = evimap(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["n_datapoints"], 38);
    let m = manifest(&dir.path().join("cp.json.manifest.json"));
    assert_eq!(m["seed"], 3);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert!(draws.join("d.csv").exists());

    // Same seed, same posterior.
    let again = dir.path().join("cp2.json");
    args[8] = again.to_str().unwrap();
    args.truncate(9);
    args.extend(SMALL);
    assert_eq!(evimap(&args).status.code(), Some(0));
    let strip = |p: &Path| {
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("result").unwrap()
    };
    assert_eq!(strip(&out), strip(&again));
}

#[test]
fn cumulative_then_plot_from_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cells = dir.path().join("cells");
    let mut args = vec!["cumulative", "--indication", "GLIO", "--keep-draws", "--out", cells.to_str().unwrap()];
    args.extend(SMALL);
    let o = evimap(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(cells.join("manifest.json").exists());
    let rollup = fs::read_to_string(cells.join("rollup.csv")).unwrap();
    // 3 OS + 2 PFS timepoints, three models each.
    assert_eq!(rollup.lines().count(), 1 + 5 * 3);

    let svg = dir.path().join("mc.svg");
    let o = evimap(&[
        "plot",
        "--kind",
        "synth-ridgeline",
        "--variant",
        "model-compare",
        "--in",
        cells.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("data-role=\"DENSITY_CURVE\"").count(), 3 * 3);
}

#[test]
fn timeline_plot() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("t.svg");
    let o = evimap(&["plot", "--kind", "timeline", "--variant", "maturity-os", "--out", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.contains("data-role=\"MATURITY_CIRCLE_PAIR\""));
    assert!(dir.path().join("t.svg.manifest.json").exists());
}

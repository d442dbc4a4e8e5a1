use std::fs;

use evimap::io::{fixture_csv, outcomes_to_csv, trials_to_csv};
use evimap::output::{cell_files, read_cells, runs_from_files, write_cells};
use evimap::pipeline::{cumulative, KeepDraws};
use evimap::{fixture, load_dataset, parse_dataset, LoadError};
use evimap_core::dataset::Table;
use evimap_core::{ErrorKind, Indication, McmcConfig, Outcome};
use proptest::prelude::*;

const TRIAL_HEADER: &str = "trial_id,subtrial_id,indication,start_date,end_date,comparator_class,n_control,n_comparator";
const OUTCOME_HEADER: &str =
    "trial_id,subtrial_id,outcome,cutoff_date,hr,ci_lower,ci_upper,events_control,events_comparator,is_final,assessment_method";

fn one_trial() -> String {
    format!("{TRIAL_HEADER}\nT1,,COL,2001-01-01,,CHM,100,100\n")
}

#[test]
fn fixture_census() {
    let ds = fixture();
    assert_eq!(ds.unique_trials(), 41);
    assert_eq!(ds.trials().len(), 45);
    assert_eq!(ds.reports().len(), 100);
    assert_eq!(ds.indications().len(), 7);
}

#[test]
fn empty_outcomes_table_is_valid() {
    let ds = parse_dataset(&one_trial(), OUTCOME_HEADER).unwrap();
    assert_eq!(ds.trials().len(), 1);
    assert!(ds.reports().is_empty());
}

#[test]
fn every_error_is_reported_with_its_row() {
    let outcomes = format!(
        "{OUTCOME_HEADER}\n\
         T1,,OS,2003-01-01,0.8,0.9,1.1,,,true,\n\
         T1,,PFS,2003-13-01,0.8,0.6,1.1,,,true,\n\
         T9,,PFS,2004-01-01,0.8,0.6,1.1,,,true,\n"
    );
    let errs = parse_dataset(&one_trial(), &outcomes).unwrap_err();
    let rows: Vec<(Table, usize)> = errs.iter().map(|e| (e.table, e.row)).collect();
    assert_eq!(rows, [(Table::Outcomes, 2), (Table::Outcomes, 3), (Table::Outcomes, 4)]);
    assert!(matches!(errs[0].kind, ErrorKind::CiOrderViolation { .. }));
    assert!(matches!(errs[1].kind, ErrorKind::BadDate(_)));
    assert!(matches!(errs[2].kind, ErrorKind::DanglingReport(_)));
}

#[test]
fn missing_column_named() {
    let trials = "trial_id,indication,start_date,end_date,comparator_class,n_control,n_comparator\nT1,COL,2001-01-01,,CHM,1,1\n";
    let errs = parse_dataset(trials, OUTCOME_HEADER).unwrap_err();
    assert_eq!(errs.len(), 1);
    assert_eq!(errs[0].column, "subtrial_id");
    assert!(matches!(errs[0].kind, ErrorKind::MissingColumn));
}

#[test]
fn csv_round_trip() {
    let ds = fixture();
    let again = parse_dataset(&trials_to_csv(&ds), &outcomes_to_csv(&ds)).unwrap();
    assert_eq!(again.trials(), ds.trials());
    assert_eq!(again.reports(), ds.reports());
}

#[test]
fn load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let (t, o) = fixture_csv();
    let (tp, op) = (dir.path().join("t.csv"), dir.path().join("o.csv"));
    fs::write(&tp, t).unwrap();
    fs::write(&op, o).unwrap();
    assert_eq!(load_dataset(&tp, &op).unwrap().reports().len(), 100);
    let missing = dir.path().join("nope.csv");
    assert!(matches!(load_dataset(&missing, &op), Err(LoadError::Io { .. })));
}

#[test]
fn cell_files_round_trip() {
    let ds = fixture();
    let cfg = McmcConfig { chains: 2, burn_in: 200, samples_per_chain: 400, thin: 1, seed: 5 };
    let cells = cumulative(&ds, Outcome::Os, Indication::Glio, &cfg, KeepDraws::Pooled).unwrap();
    assert_eq!(cells.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    write_cells(dir.path(), &cells).unwrap();
    let back = runs_from_files(read_cells(dir.path()).unwrap());
    assert_eq!(back.len(), 1);
    assert_eq!(cell_files(&back[0]).len(), cell_files(&cells).len());
    for (a, b) in back[0].iter().zip(&cells) {
        assert_eq!(a.timepoint, b.timepoint);
        for (m, r) in &b.results {
            let (x, y) = (a.results[m].as_ref().unwrap(), r.as_ref().unwrap());
            assert_eq!(x.pooled_effect[&Indication::Glio].draws, y.pooled_effect[&Indication::Glio].draws);
        }
    }
}

#[test]
fn parallel_cells_match_sequential() {
    let ds = fixture();
    let cfg = McmcConfig { chains: 2, burn_in: 200, samples_per_chain: 400, thin: 1, seed: 9 };
    let par = cumulative(&ds, Outcome::Pfs, Indication::Ren, &cfg, KeepDraws::All).unwrap();
    let seq = evimap_core::run_cumulative(&ds, Outcome::Pfs, Indication::Ren, &cfg).unwrap();
    assert_eq!(par, seq);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // Row order in the outcome table does not change the loaded dataset.
    #[test]
    fn outcome_row_order_irrelevant(seed in any::<u64>()) {
        let (t, o) = fixture_csv();
        let mut lines: Vec<&str> = o.lines().skip(1).filter(|l| !l.is_empty()).collect();
        let mut s = seed;
        for i in (1..lines.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            lines.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = format!("{OUTCOME_HEADER}\n{}\n", lines.join("\n"));
        let a = parse_dataset(t, &shuffled).unwrap();
        let b = fixture();
        let mut ra = a.reports().to_vec();
        let mut rb = b.reports().to_vec();
        ra.sort_by(evimap_core::dataset::report_order);
        rb.sort_by(evimap_core::dataset::report_order);
        prop_assert_eq!(ra, rb);
    }

    #[test]
    fn numeric_fields_survive_export(hr in 0.2f64..3.0, w in 0.01f64..1.0) {
        let (l, u) = (hr * (1.0 - w / 2.0), hr * (1.0 + w));
        let outcomes = format!("{OUTCOME_HEADER}\nT1,,OS,2003-01-01,{hr},{l},{u},,,true,\n");
        let ds = parse_dataset(&one_trial(), &outcomes).unwrap();
        let again = parse_dataset(&trials_to_csv(&ds), &outcomes_to_csv(&ds)).unwrap();
        prop_assert_eq!(again.reports(), ds.reports());
    }
}

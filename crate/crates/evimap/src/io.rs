//! CSV ingestion and export of the two dataset tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use csv::{ReaderBuilder, StringRecord, WriterBuilder};
use evimap_core::dataset::Table;
use evimap_core::{Dataset, ErrorKind, OutcomeReport, TrialRecord, ValidationError};

pub const TRIAL_COLUMNS: [&str; 8] = [
    "trial_id",
    "subtrial_id",
    "indication",
    "start_date",
    "end_date",
    "comparator_class",
    "n_control",
    "n_comparator",
];

pub const OUTCOME_COLUMNS: [&str; 11] = [
    "trial_id",
    "subtrial_id",
    "outcome",
    "cutoff_date",
    "hr",
    "ci_lower",
    "ci_upper",
    "events_control",
    "events_comparator",
    "is_final",
    "assessment_method",
];

const FIXTURE_TRIALS: &str = include_str!("../data/trials.csv");
const FIXTURE_OUTCOMES: &str = include_str!("../data/outcomes.csv");

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} validation error(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<ValidationError>),
}

/// The bundled reference dataset.
pub fn fixture() -> Dataset {
    parse_dataset(FIXTURE_TRIALS, FIXTURE_OUTCOMES).expect("bundled fixture is valid")
}

pub fn fixture_csv() -> (&'static str, &'static str) {
    (FIXTURE_TRIALS, FIXTURE_OUTCOMES)
}

pub fn load_dataset(trials: &Path, outcomes: &Path) -> Result<Dataset, LoadError> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|source| LoadError::Io { path: p.to_path_buf(), source });
    parse_dataset(&read(trials)?, &read(outcomes)?).map_err(LoadError::Invalid)
}

/// Parse and validate both tables, collecting every error before failing.
pub fn parse_dataset(trials_csv: &str, outcomes_csv: &str) -> Result<Dataset, Vec<ValidationError>> {
    let mut errs = Vec::new();
    let trials = parse_table(Table::Trials, trials_csv, &TRIAL_COLUMNS, trial_row, &mut errs);
    let reports = parse_table(Table::Outcomes, outcomes_csv, &OUTCOME_COLUMNS, outcome_row, &mut errs);
    let validated = Dataset::validate(trials, reports);
    match validated {
        Ok(ds) if errs.is_empty() => Ok(ds),
        Ok(_) => Err(sorted(errs)),
        Err(more) => {
            errs.extend(more);
            Err(sorted(errs))
        }
    }
}

fn sorted(mut errs: Vec<ValidationError>) -> Vec<ValidationError> {
    errs.sort_by_key(|e| (e.table as u8, e.row));
    errs
}

/// One data row with its header lookup.
struct Row<'a> {
    table: Table,
    line: usize,
    rec: &'a StringRecord,
    cols: &'a [Option<usize>],
    names: &'a [&'static str],
    errs: Vec<ValidationError>,
}

impl Row<'_> {
    fn err(&mut self, col: &str, kind: ErrorKind) {
        self.errs.push(ValidationError::new(self.table, self.line, col, kind));
    }

    fn raw(&self, col: &str) -> Option<&str> {
        let k = self.names.iter().position(|c| *c == col).expect("known column");
        let s = self.cols[k].and_then(|i| self.rec.get(i))?.trim();
        (!s.is_empty()).then_some(s)
    }

    fn opt<T>(&mut self, col: &str, parse: impl Fn(&str) -> Option<T>, bad: fn(String) -> ErrorKind) -> Option<T> {
        let s = self.raw(col)?.to_string();
        let v = parse(&s);
        if v.is_none() {
            self.err(col, bad(s));
        }
        v
    }

    fn req<T>(&mut self, col: &str, parse: impl Fn(&str) -> Option<T>, bad: fn(String) -> ErrorKind) -> Option<T> {
        if self.raw(col).is_none() {
            self.err(col, ErrorKind::MissingValue);
            return None;
        }
        self.opt(col, parse, bad)
    }

    fn text(&mut self, col: &str) -> Option<String> {
        self.req(col, |s| Some(s.to_string()), ErrorKind::BadValue)
    }

    fn date(&mut self, col: &str, required: bool) -> Option<NaiveDate> {
        let p = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok();
        if required { self.req(col, p, ErrorKind::BadDate) } else { self.opt(col, p, ErrorKind::BadDate) }
    }

    fn code<T: FromStr>(&mut self, col: &str, required: bool) -> Option<T> {
        let p = |s: &str| s.parse::<T>().ok();
        if required { self.req(col, p, ErrorKind::BadValue) } else { self.opt(col, p, ErrorKind::BadValue) }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "t" | "yes" | "y" | "1" => Some(true),
        "false" | "f" | "no" | "n" | "0" => Some(false),
        _ => None,
    }
}

fn parse_table<T>(
    table: Table,
    text: &str,
    names: &'static [&'static str],
    build: fn(&mut Row) -> Option<T>,
    errs: &mut Vec<ValidationError>,
) -> Vec<(usize, T)> {
    let mut rdr = ReaderBuilder::new().flexible(true).from_reader(text.trim_start_matches('\u{feff}').as_bytes());
    let header = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            errs.push(ValidationError::new(table, 1, "*", ErrorKind::BadValue(e.to_string())));
            return Vec::new();
        }
    };
    let cols: Vec<Option<usize>> = names
        .iter()
        .map(|n| header.iter().position(|h| h.trim().eq_ignore_ascii_case(n)))
        .collect();
    let mut missing = false;
    for (n, c) in names.iter().zip(&cols) {
        if c.is_none() {
            errs.push(ValidationError::new(table, 1, n, ErrorKind::MissingColumn));
            missing = true;
        }
    }
    if missing {
        return Vec::new();
    }

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                errs.push(ValidationError::new(table, line, "*", ErrorKind::BadValue(e.to_string())));
                continue;
            }
        };
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut row = Row { table, line, rec: &rec, cols: &cols, names, errs: Vec::new() };
        let v = build(&mut row);
        let row_errs = std::mem::take(&mut row.errs);
        match v {
            Some(v) if row_errs.is_empty() => out.push((line, v)),
            _ => errs.extend(row_errs),
        }
    }
    out
}

fn trial_row(r: &mut Row) -> Option<TrialRecord> {
    let trial_id = r.text("trial_id");
    let subtrial_id = r.raw("subtrial_id").map(str::to_string);
    let indication = r.code("indication", true);
    let start_date = r.date("start_date", true);
    let end_date = r.date("end_date", false);
    let comparator_class = r.code("comparator_class", true);
    let n_control = r.code::<u32>("n_control", true);
    let n_comparator = r.code::<u32>("n_comparator", true);
    Some(TrialRecord {
        trial_id: trial_id?,
        subtrial_id,
        indication: indication?,
        start_date: start_date?,
        end_date,
        comparator_class: comparator_class?,
        n_control: n_control?,
        n_comparator: n_comparator?,
    })
}

fn outcome_row(r: &mut Row) -> Option<OutcomeReport> {
    let positive = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
    let trial_id = r.text("trial_id");
    let subtrial_id = r.raw("subtrial_id").map(str::to_string);
    let outcome = r.code("outcome", true);
    let cutoff_date = r.date("cutoff_date", true);
    let hr = r.req("hr", positive, ErrorKind::BadValue);
    let ci_lower = r.req("ci_lower", positive, ErrorKind::BadValue);
    let ci_upper = r.req("ci_upper", positive, ErrorKind::BadValue);
    let events_control = r.code::<u32>("events_control", false);
    let events_comparator = r.code::<u32>("events_comparator", false);
    let is_final = r.req("is_final", parse_bool, ErrorKind::BadValue);
    let assessment_method = r.code("assessment_method", false);
    Some(OutcomeReport {
        trial_id: trial_id?,
        subtrial_id,
        outcome: outcome?,
        cutoff_date: cutoff_date?,
        hr: hr?,
        ci_lower: ci_lower?,
        ci_upper: ci_upper?,
        events_control,
        events_comparator,
        is_final: is_final?,
        assessment_method,
    })
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub fn trials_to_csv(ds: &Dataset) -> String {
    let mut w = WriterBuilder::new().from_writer(Vec::new());
    w.write_record(TRIAL_COLUMNS).expect("in-memory write");
    for t in ds.trials() {
        w.write_record([
            t.trial_id.clone(),
            opt_str(&t.subtrial_id),
            t.indication.to_string(),
            t.start_date.to_string(),
            opt_str(&t.end_date),
            t.comparator_class.to_string(),
            t.n_control.to_string(),
            t.n_comparator.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn outcomes_to_csv(ds: &Dataset) -> String {
    let mut w = WriterBuilder::new().from_writer(Vec::new());
    w.write_record(OUTCOME_COLUMNS).expect("in-memory write");
    for r in ds.reports() {
        w.write_record([
            r.trial_id.clone(),
            opt_str(&r.subtrial_id),
            r.outcome.to_string(),
            r.cutoff_date.to_string(),
            // Shortest representation that parses back to the same f64.
            format!("{}", r.hr),
            format!("{}", r.ci_lower),
            format!("{}", r.ci_upper),
            opt_str(&r.events_control),
            opt_str(&r.events_comparator),
            r.is_final.to_string(),
            opt_str(&r.assessment_method),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

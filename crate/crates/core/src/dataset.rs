//! Trial evidence base: comparisons, outcome reports and their validation.
//!
//! Validation never stops at the first problem. [`Dataset::validate`] walks
//! every record and returns the full list of [`ValidationError`]s, each naming
//! the table, row and column it came from.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::effects::{effect_from_hr_ci, EffectError, EffectEstimate};

/// Error returned when a short code does not name any variant.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {what} code {code:?}")]
pub struct UnknownCode {
    pub what: &'static str,
    pub code: String,
}

macro_rules! code_enum {
    ($(#[$meta:meta])* $name:ident, $what:literal, { $($variant:ident => $code:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "UPPERCASE")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }

        impl FromStr for $name {
            type Err = UnknownCode;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let t = s.trim();
                $(if t.eq_ignore_ascii_case($code) {
                    return Ok($name::$variant);
                })+
                Err(UnknownCode { what: $what, code: s.to_string() })
            }
        }
    };
}

code_enum!(
    /// Licensed indication. Declaration order is the canonical tie-break order.
    Indication, "indication", {
        Col => "COL",
        Ren => "REN",
        Bre => "BRE",
        Nsclc => "NSCLC",
        Oftpp => "OFTPP",
        Cer => "CER",
        Glio => "GLIO",
    }
);

impl Indication {
    pub fn long_name(self) -> &'static str {
        match self {
            Indication::Col => "colorectal cancer",
            Indication::Ren => "renal cell carcinoma",
            Indication::Bre => "breast cancer",
            Indication::Nsclc => "non-small cell lung cancer",
            Indication::Oftpp => "ovarian, fallopian tube or peritoneal cancer",
            Indication::Cer => "cervical cancer",
            Indication::Glio => "glioblastoma",
        }
    }
}

code_enum!(Outcome, "outcome", { Os => "OS", Pfs => "PFS" });

code_enum!(
    /// Treatment class of the control arm.
    ComparatorClass, "comparator class", {
        Chm => "CHM",
        Pbo => "PBO",
        Tar => "TAR",
        Imm => "IMM",
        Hor => "HOR",
        Rad => "RAD",
    }
);

impl ComparatorClass {
    pub fn is_chemotherapy(self) -> bool {
        self == ComparatorClass::Chm
    }
}

code_enum!(AssessmentMethod, "assessment method", { Irc => "IRC", Irf => "IRF", Inv => "INV" });

/// Identifies one randomized comparison: a trial, or one independent
/// sub-trial of it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialKey {
    pub trial_id: String,
    pub subtrial_id: Option<String>,
}

impl TrialKey {
    pub fn new(trial_id: &str, subtrial_id: Option<&str>) -> Self {
        TrialKey {
            trial_id: trial_id.to_string(),
            subtrial_id: subtrial_id.map(ToString::to_string),
        }
    }

    /// Display label, `TRIAL` or `TRIAL:SUB`.
    pub fn label(&self) -> String {
        match &self.subtrial_id {
            Some(s) => alloc::format!("{}:{}", self.trial_id, s),
            None => self.trial_id.clone(),
        }
    }
}

impl fmt::Display for TrialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub subtrial_id: Option<String>,
    pub indication: Indication,
    pub start_date: NaiveDate,
    pub end_date: Option<NaiveDate>,
    pub comparator_class: ComparatorClass,
    pub n_control: u32,
    pub n_comparator: u32,
}

impl TrialRecord {
    pub fn key(&self) -> TrialKey {
        TrialKey {
            trial_id: self.trial_id.clone(),
            subtrial_id: self.subtrial_id.clone(),
        }
    }

    pub fn n_total(&self) -> u32 {
        self.n_control + self.n_comparator
    }
}

/// One reported hazard ratio. "Comparator" is the bevacizumab-containing arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub trial_id: String,
    pub subtrial_id: Option<String>,
    pub outcome: Outcome,
    pub cutoff_date: NaiveDate,
    pub hr: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub events_control: Option<u32>,
    pub events_comparator: Option<u32>,
    pub is_final: bool,
    pub assessment_method: Option<AssessmentMethod>,
}

impl OutcomeReport {
    pub fn key(&self) -> TrialKey {
        TrialKey {
            trial_id: self.trial_id.clone(),
            subtrial_id: self.subtrial_id.clone(),
        }
    }

    pub fn effect(&self) -> Result<EffectEstimate, EffectError> {
        effect_from_hr_ci(self.hr, self.ci_lower, self.ci_upper)
    }
}

/// Which input table a validation error belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Table {
    Trials,
    Outcomes,
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Table::Trials => "trials",
            Table::Outcomes => "outcomes",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ErrorKind {
    #[error("missing column")]
    MissingColumn,
    #[error("missing value")]
    MissingValue,
    #[error("bad date {0:?}, expected YYYY-MM-DD")]
    BadDate(String),
    #[error("bad value {0:?}")]
    BadValue(String),
    #[error("value must be positive")]
    NonPositive,
    #[error("CI order violated: need ci_lower {ci_lower} <= hr {hr} <= ci_upper {ci_upper}")]
    CiOrderViolation { hr: f64, ci_lower: f64, ci_upper: f64 },
    #[error("degenerate CI: ci_lower equals ci_upper")]
    DegenerateInterval,
    #[error("report refers to unknown comparison {0}")]
    DanglingReport(String),
    #[error("duplicate report for {0}")]
    DuplicateReport(String),
    #[error("duplicate comparison {0}")]
    DuplicateTrial(String),
    #[error("end_date precedes start_date")]
    DateOrder,
    #[error("{events} events exceed arm size {n}")]
    EventsExceedArm { events: u32, n: u32 },
    #[error("more than one final report for {0}")]
    MultipleFinal(String),
}

/// A single validation failure. `row` is the 1-based line in the source
/// table, with the header on line 1.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{table} row {row}, column {column}: {kind}")]
pub struct ValidationError {
    pub table: Table,
    pub row: usize,
    pub column: String,
    pub kind: ErrorKind,
}

impl ValidationError {
    pub fn new(table: Table, row: usize, column: &str, kind: ErrorKind) -> Self {
        ValidationError {
            table,
            row,
            column: column.to_string(),
            kind,
        }
    }
}

/// Validated, immutable evidence base.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trials: Vec<TrialRecord>,
    reports: Vec<OutcomeReport>,
    index: BTreeMap<TrialKey, usize>,
}

impl Dataset {
    /// Validate records in table order, numbering rows from 2.
    pub fn new(
        trials: Vec<TrialRecord>,
        reports: Vec<OutcomeReport>,
    ) -> Result<Self, Vec<ValidationError>> {
        let t = trials.into_iter().enumerate().map(|(i, r)| (i + 2, r)).collect();
        let o = reports.into_iter().enumerate().map(|(i, r)| (i + 2, r)).collect();
        Self::validate(t, o)
    }

    /// Validate records tagged with their source row numbers. Every check runs
    /// on every record; all failures are returned together.
    pub fn validate(
        trials: Vec<(usize, TrialRecord)>,
        reports: Vec<(usize, OutcomeReport)>,
    ) -> Result<Self, Vec<ValidationError>> {
        let mut errs = Vec::new();
        let mut index = BTreeMap::new();

        for (pos, (row, t)) in trials.iter().enumerate() {
            let err = |col: &str, kind| ValidationError::new(Table::Trials, *row, col, kind);
            if index.insert(t.key(), pos).is_some() {
                errs.push(err("trial_id", ErrorKind::DuplicateTrial(t.key().label())));
            }
            if t.n_control == 0 {
                errs.push(err("n_control", ErrorKind::NonPositive));
            }
            if t.n_comparator == 0 {
                errs.push(err("n_comparator", ErrorKind::NonPositive));
            }
            if matches!(t.end_date, Some(end) if end < t.start_date) {
                errs.push(err("end_date", ErrorKind::DateOrder));
            }
        }
        // Duplicates resolve to the first occurrence.
        for (pos, (_, t)) in trials.iter().enumerate().rev() {
            index.insert(t.key(), pos);
        }

        let mut seen = BTreeSet::new();
        let mut finals = BTreeSet::new();
        for (row, r) in &reports {
            let err = |col: &str, kind| ValidationError::new(Table::Outcomes, *row, col, kind);
            let key = r.key();
            match index.get(&key) {
                None => errs.push(err("trial_id", ErrorKind::DanglingReport(key.label()))),
                Some(&pos) => {
                    let t = &trials[pos].1;
                    for (col, ev, n) in [
                        ("events_control", r.events_control, t.n_control),
                        ("events_comparator", r.events_comparator, t.n_comparator),
                    ] {
                        if let Some(e) = ev {
                            if e > n {
                                errs.push(err(col, ErrorKind::EventsExceedArm { events: e, n }));
                            }
                        }
                    }
                }
            }

            let mut positive = true;
            for (col, v) in [("hr", r.hr), ("ci_lower", r.ci_lower), ("ci_upper", r.ci_upper)] {
                if !(v > 0.0 && v.is_finite()) {
                    errs.push(err(col, ErrorKind::NonPositive));
                    positive = false;
                }
            }
            if positive {
                let order = ErrorKind::CiOrderViolation {
                    hr: r.hr,
                    ci_lower: r.ci_lower,
                    ci_upper: r.ci_upper,
                };
                if r.ci_lower > r.hr {
                    errs.push(err("ci_lower", order));
                } else if r.hr > r.ci_upper {
                    errs.push(err("ci_upper", order));
                } else if r.ci_lower == r.ci_upper {
                    errs.push(err("ci_upper", ErrorKind::DegenerateInterval));
                }
            }

            let what = alloc::format!("{} {} {}", key.label(), r.outcome, r.cutoff_date);
            if !seen.insert((key.clone(), r.outcome, r.cutoff_date)) {
                errs.push(err("cutoff_date", ErrorKind::DuplicateReport(what)));
            }
            if r.is_final && !finals.insert((key.clone(), r.outcome)) {
                let what = alloc::format!("{} {}", key.label(), r.outcome);
                errs.push(err("is_final", ErrorKind::MultipleFinal(what)));
            }
        }

        if !errs.is_empty() {
            errs.sort_by_key(|e| (e.table as u8, e.row));
            return Err(errs);
        }
        Ok(Dataset {
            trials: trials.into_iter().map(|(_, t)| t).collect(),
            reports: reports.into_iter().map(|(_, r)| r).collect(),
            index,
        })
    }

    /// Comparisons in input order.
    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    /// Reports in input order.
    pub fn reports(&self) -> &[OutcomeReport] {
        &self.reports
    }

    pub fn trial(&self, key: &TrialKey) -> Option<&TrialRecord> {
        self.index.get(key).map(|&i| &self.trials[i])
    }

    /// The comparison a report belongs to. Always resolves in a validated
    /// dataset.
    pub fn trial_of(&self, r: &OutcomeReport) -> &TrialRecord {
        let i = self.index.get(&r.key()).expect("validated dataset has referential integrity");
        &self.trials[*i]
    }

    /// Number of distinct trial ids (sub-trials counted once).
    pub fn unique_trials(&self) -> usize {
        self.trials.iter().map(|t| t.trial_id.as_str()).collect::<BTreeSet<_>>().len()
    }

    /// Indications with at least one comparison, in canonical order.
    pub fn indications(&self) -> Vec<Indication> {
        let set: BTreeSet<_> = self.trials.iter().map(|t| t.indication).collect();
        set.into_iter().collect()
    }

    /// Reports for one indication and outcome with cutoff on or before
    /// `as_of`, ordered by cutoff date, then trial id, then sub-trial id.
    pub fn reports_for(
        &self,
        indication: Indication,
        outcome: Outcome,
        as_of: Option<NaiveDate>,
    ) -> Vec<&OutcomeReport> {
        let mut out: Vec<&OutcomeReport> = self
            .reports
            .iter()
            .filter(|r| r.outcome == outcome)
            .filter(|r| as_of.map_or(true, |d| r.cutoff_date <= d))
            .filter(|r| self.trial_of(r).indication == indication)
            .collect();
        out.sort_by(|a, b| report_order(a, b));
        out
    }
}

/// Total order on reports: cutoff, trial id, sub-trial id, outcome.
pub fn report_order(a: &OutcomeReport, b: &OutcomeReport) -> core::cmp::Ordering {
    (a.cutoff_date, &a.trial_id, &a.subtrial_id, a.outcome).cmp(&(
        b.cutoff_date,
        &b.trial_id,
        &b.subtrial_id,
        b.outcome,
    ))
}

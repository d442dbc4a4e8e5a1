//! Cumulative meta-analysis: year-end timepoints, evidence snapshots, and
//! one synthesis per (timepoint, model) cell.
//!
//! A snapshot holds one datapoint per comparison. Under the default
//! [`SnapshotPolicy::FinalOnly`] that is the comparison's final report once
//! its cutoff has passed; interim reports are plotted but never pooled.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::dataset::{report_order, Dataset, Indication, Outcome, OutcomeReport, TrialKey};
use crate::synthesis::{run_synthesis, Datapoint, McmcConfig, Model, ModelSpec, SynthesisError, SynthesisResult};

/// Years whose all-indication snapshot has fewer datapoints than this are not
/// analysed.
pub const MIN_POOLED_DATAPOINTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CumulativeError {
    #[error("no {outcome} reports for {indication}")]
    NoEvidence { indication: Indication, outcome: Outcome },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SnapshotPolicy {
    /// Final reports only, one per comparison.
    #[default]
    FinalOnly,
    /// The latest report per comparison, interim or final.
    LatestAny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    All,
    Only(Indication),
}

impl Scope {
    fn admits(self, i: Indication) -> bool {
        match self {
            Scope::All => true,
            Scope::Only(j) => i == j,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimepointPlan {
    pub indication: Indication,
    pub outcome: Outcome,
    pub timepoints: Vec<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub as_of: NaiveDate,
    pub outcome: Outcome,
    pub scope: Scope,
    /// Ordered by indication, then report cutoff, then trial id.
    pub datapoints: Vec<Datapoint>,
    /// Cutoff of the report behind each datapoint.
    pub cutoffs: Vec<NaiveDate>,
    pub total: usize,
    pub per_indication: BTreeMap<Indication, usize>,
}

impl Snapshot {
    pub fn count(&self, i: Indication) -> usize {
        self.per_indication.get(&i).copied().unwrap_or(0)
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.datapoints.iter().map(|d| d.label.as_str()).collect()
    }
}

pub fn year_end(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 12, 31).expect("valid year")
}

pub fn snapshot(ds: &Dataset, outcome: Outcome, as_of: NaiveDate, scope: Scope) -> Snapshot {
    snapshot_with(ds, outcome, as_of, scope, SnapshotPolicy::default())
}

pub fn snapshot_with(
    ds: &Dataset,
    outcome: Outcome,
    as_of: NaiveDate,
    scope: Scope,
    policy: SnapshotPolicy,
) -> Snapshot {
    let mut latest: BTreeMap<TrialKey, &OutcomeReport> = BTreeMap::new();
    for r in ds.reports() {
        if r.outcome != outcome || r.cutoff_date > as_of {
            continue;
        }
        if policy == SnapshotPolicy::FinalOnly && !r.is_final {
            continue;
        }
        if !scope.admits(ds.trial_of(r).indication) {
            continue;
        }
        let slot = latest.entry(r.key()).or_insert(r);
        if r.cutoff_date > slot.cutoff_date {
            *slot = r;
        }
    }

    let mut chosen: Vec<(Indication, &OutcomeReport)> =
        latest.into_values().map(|r| (ds.trial_of(r).indication, r)).collect();
    chosen.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| report_order(a.1, b.1)));

    let mut per_indication = BTreeMap::new();
    let mut datapoints = Vec::with_capacity(chosen.len());
    let mut cutoffs = Vec::with_capacity(chosen.len());
    for (ind, r) in chosen {
        // Validated reports always have a proper interval.
        let e = r.effect().expect("validated report");
        datapoints.push(Datapoint::from_effect(&e, ind, &r.key().label()));
        cutoffs.push(r.cutoff_date);
        *per_indication.entry(ind).or_insert(0) += 1;
    }
    Snapshot {
        as_of,
        outcome,
        scope,
        total: datapoints.len(),
        datapoints,
        cutoffs,
        per_indication,
    }
}

pub fn plan_timepoints(ds: &Dataset, indication: Indication, outcome: Outcome) -> Result<TimepointPlan, CumulativeError> {
    plan_timepoints_with(ds, indication, outcome, SnapshotPolicy::default())
}

/// Year-ends of the years in which a report that can enter a snapshot (a
/// final report under `FinalOnly`) was cut off, skipping years where the
/// all-indication snapshot is smaller than [`MIN_POOLED_DATAPOINTS`].
pub fn plan_timepoints_with(
    ds: &Dataset,
    indication: Indication,
    outcome: Outcome,
    policy: SnapshotPolicy,
) -> Result<TimepointPlan, CumulativeError> {
    let reports = ds.reports_for(indication, outcome, None);
    if reports.is_empty() {
        return Err(CumulativeError::NoEvidence { indication, outcome });
    }
    let years: BTreeSet<i32> = reports
        .iter()
        .filter(|r| policy == SnapshotPolicy::LatestAny || r.is_final)
        .map(|r| r.cutoff_date.year())
        .collect();
    let timepoints = years
        .into_iter()
        .map(year_end)
        .filter(|&d| snapshot_with(ds, outcome, d, Scope::All, policy).total >= MIN_POOLED_DATAPOINTS)
        .collect();
    Ok(TimepointPlan { indication, outcome, timepoints })
}

/// One synthesis to run: a model on the snapshot it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellJob {
    pub timepoint_index: usize,
    pub timepoint: NaiveDate,
    pub indication: Indication,
    pub model: Model,
    pub data: Vec<Datapoint>,
    pub spec: ModelSpec,
    pub cfg: McmcConfig,
}

impl CellJob {
    /// Run with chains in sequence.
    pub fn run(&self) -> Result<SynthesisResult, SynthesisError> {
        self.check()?;
        run_synthesis(&self.data, &self.spec, &self.cfg)
    }

    /// Errors a cell raises before any sampling: IP needs the target
    /// indication to have data.
    pub fn check(&self) -> Result<(), SynthesisError> {
        if !self.data.iter().any(|d| d.indication == self.indication) {
            return Err(SynthesisError::EmptyIndication(self.indication));
        }
        Ok(())
    }
}

/// Results for one timepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeCell {
    pub timepoint: NaiveDate,
    pub indication: Indication,
    pub outcome: Outcome,
    /// The all-indication snapshot used by CP and HMA.
    pub pooled: Snapshot,
    /// The within-indication snapshot used by IP.
    pub within: Snapshot,
    /// Within-indication datapoints that were not in the previous timepoint.
    pub new_studies: Vec<Datapoint>,
    pub results: BTreeMap<Model, Result<SynthesisResult, SynthesisError>>,
}

impl CumulativeCell {
    pub fn new_study_names(&self) -> Vec<String> {
        self.new_studies.iter().map(|d| d.label.clone()).collect()
    }
}

/// Seed for the cell at (timepoint index, model index): independent of the
/// order in which cells are executed.
pub fn cell_seed(seed: u64, timepoint_index: usize, model: Model) -> u64 {
    let model_index = Model::ALL.iter().position(|m| *m == model).expect("known model") as u64;
    splitmix64(splitmix64(seed) ^ splitmix64(((timepoint_index as u64) << 8) | model_index))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Plan, snapshots and jobs for a cumulative run, before any sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeWork {
    pub plan: TimepointPlan,
    pub pooled: Vec<Snapshot>,
    pub within: Vec<Snapshot>,
    /// In (timepoint, model) order.
    pub jobs: Vec<CellJob>,
}

pub fn prepare_cumulative(
    ds: &Dataset,
    outcome: Outcome,
    indication: Indication,
    cfg: &McmcConfig,
) -> Result<CumulativeWork, CumulativeError> {
    let plan = plan_timepoints(ds, indication, outcome)?;
    let mut work = CumulativeWork { plan: plan.clone(), pooled: Vec::new(), within: Vec::new(), jobs: Vec::new() };
    for (k, &tp) in plan.timepoints.iter().enumerate() {
        let pooled = snapshot(ds, outcome, tp, Scope::All);
        let within = snapshot(ds, outcome, tp, Scope::Only(indication));
        for model in Model::ALL {
            let data = match model {
                Model::Ip => within.datapoints.clone(),
                _ => pooled.datapoints.clone(),
            };
            work.jobs.push(CellJob {
                timepoint_index: k,
                timepoint: tp,
                indication,
                model,
                data,
                spec: ModelSpec::new(model),
                cfg: McmcConfig { seed: cell_seed(cfg.seed, k, model), ..cfg.clone() },
            });
        }
        work.pooled.push(pooled);
        work.within.push(within);
    }
    Ok(work)
}

impl CumulativeWork {
    /// Attach job results, given in job order, to their timepoints.
    pub fn assemble(self, results: Vec<Result<SynthesisResult, SynthesisError>>) -> Vec<CumulativeCell> {
        assert_eq!(results.len(), self.jobs.len(), "one result per job");
        let mut cells: Vec<CumulativeCell> = Vec::with_capacity(self.plan.timepoints.len());
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for (k, (pooled, within)) in self.pooled.into_iter().zip(self.within).enumerate() {
            let new_studies = within.datapoints.iter().filter(|d| !seen.contains(&d.label)).cloned().collect();
            seen.extend(within.datapoints.iter().map(|d| d.label.clone()));
            cells.push(CumulativeCell {
                timepoint: self.plan.timepoints[k],
                indication: self.plan.indication,
                outcome: self.plan.outcome,
                pooled,
                within,
                new_studies,
                results: BTreeMap::new(),
            });
        }
        for (job, res) in self.jobs.iter().zip(results) {
            cells[job.timepoint_index].results.insert(job.model, res);
        }
        cells
    }
}

/// Run every (timepoint, model) cell in sequence. A failing cell records its
/// error and the others still run.
pub fn run_cumulative(
    ds: &Dataset,
    outcome: Outcome,
    indication: Indication,
    cfg: &McmcConfig,
) -> Result<Vec<CumulativeCell>, CumulativeError> {
    let work = prepare_cumulative(ds, outcome, indication, cfg)?;
    let results = work.jobs.iter().map(CellJob::run).collect();
    Ok(work.assemble(results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ComparatorClass, OutcomeReport, TrialRecord};
    use alloc::vec;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn toy() -> Dataset {
        let trial = |id: &str, ind| TrialRecord {
            trial_id: id.into(),
            subtrial_id: None,
            indication: ind,
            start_date: d("2000-01-01"),
            end_date: None,
            comparator_class: ComparatorClass::Chm,
            n_control: 100,
            n_comparator: 100,
        };
        let rep = |id: &str, cutoff: &str, fin: bool, hr: f64| OutcomeReport {
            trial_id: id.into(),
            subtrial_id: None,
            outcome: Outcome::Os,
            cutoff_date: d(cutoff),
            hr,
            ci_lower: hr * 0.8,
            ci_upper: hr * 1.25,
            events_control: None,
            events_comparator: None,
            is_final: fin,
            assessment_method: None,
        };
        Dataset::new(
            vec![trial("A", Indication::Col), trial("B", Indication::Col), trial("C", Indication::Ren)],
            vec![
                rep("A", "2003-03-01", false, 0.7),
                rep("A", "2004-03-01", true, 0.8),
                rep("B", "2003-06-01", true, 0.9),
                rep("C", "2005-01-01", false, 1.1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn final_only_snapshots() {
        let ds = toy();
        let s = snapshot(&ds, Outcome::Os, year_end(2003), Scope::All);
        assert_eq!(s.total, 1);
        let s = snapshot(&ds, Outcome::Os, year_end(2005), Scope::All);
        assert_eq!(s.total, 2);
        assert_eq!(s.count(Indication::Ren), 0);
        assert_eq!(s.labels().into_iter().collect::<Vec<_>>(), vec!["A", "B"]);
        // Ordered by cutoff: B (2003) then A (2004).
        assert!((s.datapoints[1].y - libm::log(0.8)).abs() < 1e-12);
        let s = snapshot_with(&ds, Outcome::Os, year_end(2003), Scope::All, SnapshotPolicy::LatestAny);
        assert_eq!(s.total, 2);
        let s = snapshot_with(&ds, Outcome::Os, year_end(2005), Scope::Only(Indication::Ren), SnapshotPolicy::LatestAny);
        assert_eq!((s.total, s.count(Indication::Ren)), (1, 1));
        assert_eq!(snapshot(&ds, Outcome::Os, year_end(1999), Scope::All).total, 0);
    }

    #[test]
    fn plan_needs_two_pooled_datapoints() {
        let ds = toy();
        // 2003 has one final datapoint in total, so only 2004 remains.
        let p = plan_timepoints(&ds, Indication::Col, Outcome::Os).unwrap();
        assert_eq!(p.timepoints, vec![year_end(2004)]);
        // REN has reports but none final.
        assert!(plan_timepoints(&ds, Indication::Ren, Outcome::Os).unwrap().timepoints.is_empty());
        assert_eq!(
            plan_timepoints(&ds, Indication::Glio, Outcome::Os),
            Err(CumulativeError::NoEvidence { indication: Indication::Glio, outcome: Outcome::Os })
        );
    }

    #[test]
    fn cell_seeds_distinct_and_stable() {
        let mut seen = BTreeSet::new();
        for k in 0..20 {
            for m in Model::ALL {
                assert!(seen.insert(cell_seed(7, k, m)));
            }
        }
        assert_eq!(cell_seed(7, 3, Model::Hma), cell_seed(7, 3, Model::Hma));
        assert_ne!(cell_seed(7, 3, Model::Hma), cell_seed(8, 3, Model::Hma));
    }

    #[test]
    fn ip_cell_without_target_data_fails_alone() {
        let ds = toy();
        let mut work = prepare_cumulative(&ds, Outcome::Os, Indication::Col, &McmcConfig::default()).unwrap();
        for j in &mut work.jobs {
            if j.model == Model::Ip {
                j.data.clear();
            }
        }
        assert_eq!(work.jobs[0].check(), Err(SynthesisError::EmptyIndication(Indication::Col)));
        assert!(work.jobs[1].check().is_ok());
    }
}

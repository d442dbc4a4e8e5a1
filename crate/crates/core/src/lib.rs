//! Evidence-map core: trial evidence types, effect metrics, hierarchical
//! meta-analysis by Gibbs sampling, cumulative snapshots and plot specs.
//!
//! Everything here is pure and allocation-only; file IO, the CLI and thread
//! pools live in the `evimap` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cumulative;
pub mod dataset;
pub mod effects;
pub mod math;
pub mod synthesis;
pub mod viz;

pub use cumulative::{
    plan_timepoints, run_cumulative, snapshot, CumulativeCell, CumulativeError, Scope, Snapshot,
    SnapshotPolicy, TimepointPlan,
};
pub use dataset::{
    AssessmentMethod, ComparatorClass, Dataset, ErrorKind, Indication, Outcome, OutcomeReport,
    TrialKey, TrialRecord, ValidationError,
};
pub use effects::{
    assign_bin, ci_width, effect_from_hr_ci, maturity, relative_uncertainty, BinIndex, BinKey,
    EffectError, EffectEstimate, SizeBin, Z_975,
};
pub use synthesis::{
    deviance, fit_stats, gelman_rubin, run_synthesis, summarize, Datapoint, FitStats, McmcConfig,
    Model, ModelSpec, PosteriorSummary, SynthesisError, SynthesisResult,
};

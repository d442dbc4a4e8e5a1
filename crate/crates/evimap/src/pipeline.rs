//! Parallel drivers. Results are identical to the sequential core functions:
//! every chain and cell owns its seed, and outputs are reassembled in index
//! order.

use std::thread;

use evimap_core::cumulative::{prepare_cumulative, CellJob};
use evimap_core::synthesis::{combine_chains, run_chain};
use evimap_core::viz::ViolinCell;
use evimap_core::{
    CumulativeCell, CumulativeError, Datapoint, Dataset, Indication, McmcConfig, Model, ModelSpec, Outcome,
    SynthesisError, SynthesisResult,
};
use rayon::prelude::*;

/// Which raw draws survive a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeepDraws {
    None,
    /// Pooled effects only, enough for the posterior plots.
    Pooled,
    All,
}

impl KeepDraws {
    fn apply(self, r: &mut SynthesisResult) {
        match self {
            KeepDraws::None => r.strip_draws(false),
            KeepDraws::Pooled => r.strip_draws(true),
            KeepDraws::All => {}
        }
    }
}

/// One synthesis with a thread per chain.
pub fn synthesize(data: &[Datapoint], spec: &ModelSpec, cfg: &McmcConfig) -> Result<SynthesisResult, SynthesisError> {
    evimap_core::synthesis::check_inputs(data, spec, cfg)?;
    let chains = thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.chains).map(|c| s.spawn(move || run_chain(data, spec, cfg, c))).collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect::<Result<Vec<_>, _>>()
    })?;
    combine_chains(data, spec, chains)
}

fn run_job(job: &CellJob, keep: KeepDraws) -> Result<SynthesisResult, SynthesisError> {
    let mut r = job.run()?;
    keep.apply(&mut r);
    Ok(r)
}

/// Cumulative analysis for one (outcome, indication) with cells in parallel.
pub fn cumulative(
    ds: &Dataset,
    outcome: Outcome,
    indication: Indication,
    cfg: &McmcConfig,
    keep: KeepDraws,
) -> Result<Vec<CumulativeCell>, CumulativeError> {
    let work = prepare_cumulative(ds, outcome, indication, cfg)?;
    let results = work.jobs.par_iter().map(|j| run_job(j, keep)).collect();
    Ok(work.assemble(results))
}

pub struct RunOutput {
    pub outcome: Outcome,
    pub indication: Indication,
    pub cells: Result<Vec<CumulativeCell>, CumulativeError>,
}

/// Every (outcome, indication) in the dataset, all cells in one pool.
/// Returned in outcome then indication order.
pub fn cumulative_all(ds: &Dataset, outcomes: &[Outcome], cfg: &McmcConfig, keep: KeepDraws) -> Vec<RunOutput> {
    let mut runs = Vec::new();
    for &outcome in outcomes {
        for indication in ds.indications() {
            runs.push((outcome, indication, prepare_cumulative(ds, outcome, indication, cfg)));
        }
    }
    let jobs: Vec<(usize, &CellJob)> = runs
        .iter()
        .enumerate()
        .filter_map(|(k, (_, _, w))| w.as_ref().ok().map(|w| (k, w)))
        .flat_map(|(k, w)| w.jobs.iter().map(move |j| (k, j)))
        .collect();
    let mut results: Vec<(usize, Result<SynthesisResult, SynthesisError>)> =
        jobs.par_iter().map(|(k, j)| (*k, run_job(j, keep))).collect();

    let mut out = Vec::with_capacity(runs.len());
    let mut rest = results.drain(..);
    for (outcome, indication, work) in runs {
        let cells = work.map(|w| {
            let n = w.jobs.len();
            let mine: Vec<_> = rest.by_ref().take(n).map(|(_, r)| r).collect();
            w.assemble(mine)
        });
        out.push(RunOutput { outcome, indication, cells });
    }
    out
}

/// Split-violin input from the last timepoint of each indication's OS and
/// PFS runs. Indications missing either outcome are skipped; a model whose
/// cell failed or kept no draws yields empty draws, which the plot rejects.
pub fn final_violin_cells(runs: &[Vec<CumulativeCell>]) -> Vec<ViolinCell> {
    let last = |ind: Indication, o: Outcome| {
        runs.iter().filter_map(|r| r.last()).find(|c| c.indication == ind && c.outcome == o)
    };
    let mut inds: Vec<Indication> = runs.iter().filter_map(|r| r.first()).map(|c| c.indication).collect();
    inds.sort();
    inds.dedup();
    let draws = |c: &CumulativeCell, m: Model| -> Vec<f64> {
        match c.results.get(&m) {
            Some(Ok(r)) => r.pooled_effect.get(&c.indication).map(|s| s.draws.clone()).unwrap_or_default(),
            _ => Vec::new(),
        }
    };
    let mut out = Vec::new();
    for ind in inds {
        let (Some(os), Some(pfs)) = (last(ind, Outcome::Os), last(ind, Outcome::Pfs)) else {
            continue;
        };
        for m in Model::ALL {
            out.push(ViolinCell { indication: ind, model: m, os_draws: draws(os, m), pfs_draws: draws(pfs, m) });
        }
    }
    out
}

//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use evimap_core::cumulative::{snapshot_with, year_end, CumulativeCell, Scope, SnapshotPolicy};
use evimap_core::viz::{
    build_ridgeline, build_split_violin, build_synth_ridgeline, build_timeline, render_svg, PlotSpec, RidgeOrder,
    SynthMode, TimelineVariant,
};
use evimap_core::{Dataset, Indication, McmcConfig, Model, ModelSpec, Outcome};
use serde::Serialize;

use crate::io::{self, LoadError};
use crate::output::{self, InputDigest, RunManifest, SynthReport};
use crate::pipeline::{self, KeepDraws};

#[derive(Debug, Parser)]
#[command(name = "evimap", version, about = "Evidence maps and cumulative Bayesian synthesis of multi-indication trial data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Load and validate the dataset, then print a census.
    Validate(DataArgs),
    /// Per-report effect, uncertainty and maturity metrics as CSV.
    Metrics(MetricsArgs),
    /// One synthesis at a single timepoint.
    Synth(SynthArgs),
    /// Re-run the synthesis at every timepoint evidence arrived.
    Cumulative(CumulativeArgs),
    /// Render a figure as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Trials table; the bundled dataset is used when both tables are omitted.
    #[arg(long, requires = "outcomes")]
    pub trials: Option<PathBuf>,
    /// Outcome reports table.
    #[arg(long, requires = "trials")]
    pub outcomes: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct McmcArgs {
    /// Falls back to EVIMAP_SEED, then 1.
    #[arg(long, env = "EVIMAP_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub chains: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burn_in: usize,
    /// Iterations kept per chain, before thinning.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
}

impl McmcArgs {
    fn config(&self) -> McmcConfig {
        McmcConfig {
            chains: self.chains,
            burn_in: self.burn_in,
            samples_per_chain: self.samples,
            thin: self.thin,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Ip,
    Cp,
    Hma,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Ip => Model::Ip,
            ModelArg::Cp => Model::Cp,
            ModelArg::Hma => Model::Hma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeArg {
    Os,
    Pfs,
    Both,
}

impl OutcomeArg {
    fn outcomes(self) -> Vec<Outcome> {
        match self {
            OutcomeArg::Os => vec![Outcome::Os],
            OutcomeArg::Pfs => vec![Outcome::Pfs],
            OutcomeArg::Both => vec![Outcome::Os, Outcome::Pfs],
        }
    }

    fn single(self) -> Result<Outcome> {
        match self {
            OutcomeArg::Os => Ok(Outcome::Os),
            OutcomeArg::Pfs => Ok(Outcome::Pfs),
            OutcomeArg::Both => bail!("this command needs a single outcome, os or pfs"),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    /// Only final reports enter a snapshot.
    #[default]
    FinalOnly,
    /// Latest report per comparison, interim or final.
    LatestAny,
}

impl From<PolicyArg> for SnapshotPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::FinalOnly => SnapshotPolicy::FinalOnly,
            PolicyArg::LatestAny => SnapshotPolicy::LatestAny,
        }
    }
}

fn parse_indication(s: &str) -> Result<Indication, String> {
    s.parse::<Indication>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, value_enum)]
    pub outcome: OutcomeArg,
    /// Evidence cutoff, YYYY-MM-DD. Defaults to the end of the last year with a report.
    #[arg(long)]
    pub as_of: Option<NaiveDate>,
    /// Restrict the evidence to one indication.
    #[arg(long, value_parser = parse_indication)]
    pub indication: Option<Indication>,
    #[arg(long, value_enum, default_value_t = PolicyArg::FinalOnly)]
    pub policy: PolicyArg,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// Write one CSV of draws per parameter into this directory.
    #[arg(long)]
    pub dump_draws: Option<PathBuf>,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CumulativeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = OutcomeArg::Both)]
    pub outcome: OutcomeArg,
    /// Target indication; all indications when omitted.
    #[arg(long, value_parser = parse_indication)]
    pub indication: Option<Indication>,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// Keep pooled-effect draws in the cell files, for posterior plots.
    #[arg(long)]
    pub keep_draws: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKindArg {
    Timeline,
    Ridgeline,
    SynthRidgeline,
    Violin,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlotArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub kind: PlotKindArg,
    /// Timeline: plain, size, uncertainty, uncertainty-relative, maturity-os,
    /// maturity-pfs. Synthesis ridgeline: ip-vs-study or model-compare.
    #[arg(long)]
    pub variant: Option<String>,
    /// Ridgeline row order: by-year or by-effect.
    #[arg(long, default_value = "by-year")]
    pub order: String,
    #[arg(long, value_enum, default_value_t = OutcomeArg::Os)]
    pub outcome: OutcomeArg,
    #[arg(long, value_parser = parse_indication)]
    pub indication: Option<Indication>,
    /// Directory written by `cumulative --keep-draws`; without it posterior
    /// plots run the cumulative analysis first.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failure that maps to exit code 1 after printing every validation error.
#[derive(Debug, thiserror::Error)]
#[error("dataset failed validation")]
struct Invalid;

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<Invalid>().is_none() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(1)
        }
    }
}

struct Loaded {
    ds: Dataset,
    inputs: Vec<InputDigest>,
}

fn load(args: &DataArgs) -> Result<Loaded> {
    let (ds, inputs) = match (&args.trials, &args.outcomes) {
        (Some(t), Some(o)) => {
            let ds = match io::load_dataset(t, o) {
                Ok(ds) => ds,
                Err(LoadError::Invalid(errs)) => {
                    for e in &errs {
                        eprintln!("{e}");
                    }
                    eprintln!("{} validation error(s)", errs.len());
                    return Err(Invalid.into());
                }
                Err(e) => return Err(e.into()),
            };
            let digest = |role, p: &Path| -> Result<InputDigest> {
                Ok(InputDigest::of(role, &p.display().to_string(), &fs::read(p)?))
            };
            (ds, vec![digest("trials", t)?, digest("outcomes", o)?])
        }
        _ => {
            let (t, o) = io::fixture_csv();
            let ds = io::fixture();
            (
                ds,
                vec![
                    InputDigest::of("trials", "<bundled>/trials.csv", t.as_bytes()),
                    InputDigest::of("outcomes", "<bundled>/outcomes.csv", o.as_bytes()),
                ],
            )
        }
    };
    Ok(Loaded { ds, inputs })
}

fn manifest(cli: &Cli, inputs: Vec<InputDigest>, seed: Option<u64>) -> Result<RunManifest> {
    let flags = serde_json::to_value(&cli.command)?;
    let name = flags.as_object().and_then(|o| o.keys().next().cloned()).unwrap_or_default();
    Ok(RunManifest::new(&name, flags, inputs, seed))
}

fn emit(text: &str, out: Option<&Path>, m: &RunManifest) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            m.write_beside(p)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate(a) => {
            let l = load(a)?;
            let comparisons = l.ds.trials().len();
            println!(
                "{} trials, {} comparisons, {} reports, {} indications",
                l.ds.unique_trials(),
                comparisons,
                l.ds.reports().len(),
                l.ds.indications().len()
            );
            Ok(())
        }
        Command::Metrics(a) => {
            let l = load(&a.data)?;
            let m = manifest(cli, l.inputs, None)?;
            emit(&output::metrics_csv(&l.ds)?, a.out.as_deref(), &m)
        }
        Command::Synth(a) => synth(cli, a),
        Command::Cumulative(a) => cumulative(cli, a),
        Command::Plot(a) => plot(cli, a),
    }
}

fn last_year_end(ds: &Dataset) -> NaiveDate {
    use chrono::Datelike;
    let y = ds.reports().iter().map(|r| r.cutoff_date.year()).max().unwrap_or(2000);
    year_end(y)
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let l = load(&a.data)?;
    let outcome = a.outcome.single()?;
    let as_of = a.as_of.unwrap_or_else(|| last_year_end(&l.ds));
    let scope = a.indication.map_or(Scope::All, Scope::Only);
    let snap = snapshot_with(&l.ds, outcome, as_of, scope, a.policy.into());
    let spec = ModelSpec::new(a.model.into());
    let cfg = a.mcmc.config();
    let mut result = pipeline::synthesize(&snap.datapoints, &spec, &cfg)?;
    if let Err(e) = result.check_convergence() {
        eprintln!("warning: {e}");
    }
    let m = manifest(cli, l.inputs, Some(cfg.seed))?;
    if let Some(dir) = &a.dump_draws {
        output::dump_draws(dir, &result)?;
        m.write_in_dir(dir)?;
    }
    result.strip_draws(false);
    let report = SynthReport {
        model: spec.model,
        outcome,
        as_of,
        indication: a.indication,
        n_datapoints: snap.total,
        per_indication: snap.per_indication.clone(),
        result,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(&text, a.out.as_deref(), &m)
}

fn cumulative(cli: &Cli, a: &CumulativeArgs) -> Result<()> {
    let l = load(&a.data)?;
    let cfg = a.mcmc.config();
    let keep = if a.keep_draws { KeepDraws::Pooled } else { KeepDraws::None };
    let targets: Vec<Indication> = match a.indication {
        Some(i) => vec![i],
        None => l.ds.indications(),
    };
    let runs: Vec<_> = pipeline::cumulative_all(&l.ds, &a.outcome.outcomes(), &cfg, keep)
        .into_iter()
        .filter(|r| targets.contains(&r.indication))
        .collect();

    fs::create_dir_all(&a.out)?;
    let mut ok: Vec<&[CumulativeCell]> = Vec::new();
    for r in &runs {
        match &r.cells {
            Ok(cells) => {
                output::write_cells(&a.out, cells)?;
                for c in cells {
                    for (model, res) in &c.results {
                        match res {
                            Ok(s) if !s.convergence.converged => eprintln!(
                                "warning: {} {} {} {model}: max split R-hat {:.3}",
                                c.indication, c.outcome, c.timepoint, s.convergence.max_rhat
                            ),
                            Err(e) => eprintln!("warning: {} {} {} {model}: {e}", c.indication, c.outcome, c.timepoint),
                            _ => {}
                        }
                    }
                }
                ok.push(cells);
            }
            Err(e) => eprintln!("note: {e}"),
        }
    }
    fs::write(a.out.join(output::ROLLUP_FILE), output::rollup_csv(&ok)?)?;
    manifest(cli, l.inputs, Some(cfg.seed))?.write_in_dir(&a.out)?;
    Ok(())
}

fn posterior_runs(ds: &Dataset, a: &PlotArgs, outcomes: &[Outcome]) -> Result<Vec<Vec<CumulativeCell>>> {
    let runs = match &a.input {
        Some(dir) => output::runs_from_files(output::read_cells(dir)?),
        None => pipeline::cumulative_all(ds, outcomes, &a.mcmc.config(), KeepDraws::Pooled)
            .into_iter()
            .filter_map(|r| r.cells.ok())
            .collect(),
    };
    Ok(runs
        .into_iter()
        .filter(|cells| {
            cells.first().is_some_and(|c| {
                outcomes.contains(&c.outcome) && a.indication.is_none_or(|i| i == c.indication)
            })
        })
        .collect())
}

fn plot(cli: &Cli, a: &PlotArgs) -> Result<()> {
    let l = load(&a.data)?;
    let mut spec: PlotSpec = match a.kind {
        PlotKindArg::Timeline => {
            let v: TimelineVariant = a.variant.as_deref().unwrap_or("plain").parse().map_err(anyhow::Error::msg)?;
            build_timeline(&l.ds, v)
        }
        PlotKindArg::Ridgeline => {
            let o: RidgeOrder = a.order.parse().map_err(anyhow::Error::msg)?;
            build_ridgeline(&l.ds, o)
        }
        PlotKindArg::SynthRidgeline => {
            let mode: SynthMode = a.variant.as_deref().unwrap_or("ip-vs-study").parse().map_err(anyhow::Error::msg)?;
            let runs = posterior_runs(&l.ds, a, &[a.outcome.single()?])?;
            build_synth_ridgeline(&runs, mode)?
        }
        PlotKindArg::Violin => {
            let runs = posterior_runs(&l.ds, a, &[Outcome::Os, Outcome::Pfs])?;
            build_split_violin(&pipeline::final_violin_cells(&runs))?
        }
    };
    if let Some(i) = a.indication {
        spec.panels.retain(|p| p.indication == Some(i));
    }
    let m = manifest(cli, l.inputs, Some(a.mcmc.seed))?;
    emit(&render_svg(&spec), Some(&a.out), &m)
}

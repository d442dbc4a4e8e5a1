//! File outputs: run manifests, JSON results, CSV roll-ups and draw dumps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use csv::Writer;
use evimap_core::cumulative::{CumulativeCell, Snapshot};
use evimap_core::{
    assign_bin, ci_width, maturity, relative_uncertainty, BinKey, Dataset, Datapoint, Indication, Model, Outcome,
    PosteriorSummary, SynthesisResult,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ROLLUP_FILE: &str = "rollup.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(role: &str, path: &str, bytes: &[u8]) -> Self {
        InputDigest { role: role.into(), path: path.into(), sha256: hex::encode(Sha256::digest(bytes)) }
    }
}

/// Provenance of one CLI run. Two runs whose manifests agree apart from the
/// timestamp produce identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub flags: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, flags: serde_json::Value, inputs: Vec<InputDigest>, seed: Option<u64>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            flags,
            inputs,
            seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    /// Equal in everything but the timestamp.
    pub fn same_run(&self, other: &RunManifest) -> bool {
        RunManifest { timestamp: String::new(), ..self.clone() } == RunManifest { timestamp: String::new(), ..other.clone() }
    }

    /// `manifest.json` inside a directory output.
    pub fn write_in_dir(&self, dir: &Path) -> Result<PathBuf> {
        let p = dir.join(MANIFEST_FILE);
        write_json(&p, self)?;
        Ok(p)
    }

    /// `FILE.manifest.json` next to a file output.
    pub fn write_beside(&self, file: &Path) -> Result<PathBuf> {
        let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        let p = file.with_file_name(name);
        write_json(&p, self)?;
        Ok(p)
    }
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Per-report metrics table.
pub fn metrics_csv(ds: &Dataset) -> Result<String> {
    let mut w = Writer::from_writer(Vec::new());
    w.write_record([
        "trial_id",
        "subtrial_id",
        "outcome",
        "cutoff_date",
        "ln_hr",
        "se",
        "ci_width",
        "rel_uncertainty",
        "maturity_control",
        "maturity_comparator",
        "bin_ci_width",
        "bin_rel_unc",
        "bin_maturity_control",
        "bin_maturity_comparator",
    ])?;
    for r in ds.reports() {
        let t = ds.trial_of(r);
        let e = r.effect()?;
        let width = ci_width(r.ci_lower, r.ci_upper);
        let rel = relative_uncertainty(&e).ok();
        let key = match r.outcome {
            Outcome::Os => BinKey::MaturityOs,
            Outcome::Pfs => BinKey::MaturityPfs,
        };
        let mc = r.events_control.map(|ev| maturity(ev, t.n_control));
        let mb = r.events_comparator.map(|ev| maturity(ev, t.n_comparator));
        let bin = |v: Option<f64>, k| v.map(|x| assign_bin(x, k).label()).unwrap_or_default();
        w.write_record([
            r.trial_id.clone(),
            r.subtrial_id.clone().unwrap_or_default(),
            r.outcome.to_string(),
            r.cutoff_date.to_string(),
            format!("{}", e.ln_hr),
            format!("{}", e.se),
            format!("{width}"),
            fmt_opt(rel),
            fmt_opt(mc),
            fmt_opt(mb),
            assign_bin(width, BinKey::CiWidth).label(),
            // Undefined relative uncertainty displays as EXTREME.
            assign_bin(rel.unwrap_or(f64::NAN), BinKey::RelUnc).label(),
            bin(mc, key),
            bin(mb, key),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Output of the `synth` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub model: Model,
    pub outcome: Outcome,
    pub as_of: NaiveDate,
    pub indication: Option<Indication>,
    pub n_datapoints: usize,
    pub per_indication: BTreeMap<Indication, usize>,
    pub result: SynthesisResult,
}

fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// One CSV of draws per parameter, rows in chain order.
pub fn dump_draws(dir: &Path, r: &SynthesisResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut params: Vec<(String, &PosteriorSummary)> = Vec::new();
    if r.model == Model::Cp {
        // Every indication shares the one effect.
        params.extend(r.pooled_effect.values().next().map(|s| ("d".to_string(), s)));
    } else {
        params.extend(r.pooled_effect.iter().map(|(i, s)| (format!("d[{i}]"), s)));
    }
    params.extend(r.within_sd.iter().map(|(i, s)| (format!("tau[{i}]"), s)));
    params.extend(r.between_sd.iter().map(|s| ("tau_d".to_string(), s)));
    params.extend(r.overall_mean.iter().map(|s| ("m_d".to_string(), s)));
    params.extend(r.study_effects.iter().map(|(l, s)| (format!("delta[{l}]"), s)));

    let mut written = Vec::new();
    for (name, s) in params {
        if s.draws.is_empty() {
            continue;
        }
        let p = dir.join(format!("{}.csv", file_safe(&name)));
        let mut w = Writer::from_path(&p)?;
        w.write_record(["draw", &name])?;
        for (k, v) in s.draws.iter().enumerate() {
            w.write_record([k.to_string(), format!("{v}")])?;
        }
        w.flush()?;
        written.push(p);
    }
    Ok(written)
}

/// One (timepoint, model) cell of a cumulative run, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFile {
    pub indication: Indication,
    pub outcome: Outcome,
    pub timepoint: NaiveDate,
    pub model: Model,
    pub pooled: Snapshot,
    pub within: Snapshot,
    pub new_studies: Vec<Datapoint>,
    pub result: Option<SynthesisResult>,
    pub error: Option<String>,
}

impl CellFile {
    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_{}_{}.json",
            self.indication.code().to_ascii_lowercase(),
            self.outcome.code().to_ascii_lowercase(),
            self.timepoint,
            self.model.code().to_ascii_lowercase()
        )
    }
}

pub fn cell_files(cells: &[CumulativeCell]) -> Vec<CellFile> {
    let mut out = Vec::new();
    for c in cells {
        for (m, r) in &c.results {
            out.push(CellFile {
                indication: c.indication,
                outcome: c.outcome,
                timepoint: c.timepoint,
                model: *m,
                pooled: c.pooled.clone(),
                within: c.within.clone(),
                new_studies: c.new_studies.clone(),
                result: r.as_ref().ok().cloned(),
                error: r.as_ref().err().map(ToString::to_string),
            });
        }
    }
    out
}

/// Rebuild cumulative runs from cell files, one run per (outcome,
/// indication) in that order, cells by timepoint. Failed cells are left out
/// of `results`.
pub fn runs_from_files(files: Vec<CellFile>) -> Vec<Vec<CumulativeCell>> {
    let mut grouped: BTreeMap<(Outcome, Indication), BTreeMap<NaiveDate, CumulativeCell>> = BTreeMap::new();
    for f in files {
        let cell = grouped.entry((f.outcome, f.indication)).or_default().entry(f.timepoint).or_insert_with(|| {
            CumulativeCell {
                timepoint: f.timepoint,
                indication: f.indication,
                outcome: f.outcome,
                pooled: f.pooled.clone(),
                within: f.within.clone(),
                new_studies: f.new_studies.clone(),
                results: BTreeMap::new(),
            }
        });
        if let Some(r) = f.result {
            cell.results.insert(f.model, Ok(r));
        }
    }
    grouped.into_values().map(|m| m.into_values().collect()).collect()
}

pub fn write_cells(dir: &Path, cells: &[CumulativeCell]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for f in cell_files(cells) {
        let p = dir.join(f.file_name());
        // Compact: cells may carry tens of thousands of draws.
        let file = fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &f)?;
        out.push(p);
    }
    Ok(out)
}

pub fn read_cells(dir: &Path) -> Result<Vec<CellFile>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.file_name().is_some_and(|n| n != MANIFEST_FILE))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

pub const ROLLUP_COLUMNS: [&str; 19] = [
    "indication",
    "outcome",
    "timepoint",
    "model",
    "n_datapoints",
    "n_indication",
    "effect_median",
    "effect_lower95",
    "effect_upper95",
    "within_sd_median",
    "within_sd_lower95",
    "within_sd_upper95",
    "between_sd_median",
    "between_sd_lower95",
    "between_sd_upper95",
    "dbar",
    "pd",
    "dic",
    "max_rhat",
];

/// Table-style roll-up: one row per (timepoint, model). Failed cells keep
/// their counts and leave the estimates blank.
pub fn rollup_csv(runs: &[&[CumulativeCell]]) -> Result<String> {
    let mut w = Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = ROLLUP_COLUMNS.to_vec();
    header.push("error");
    w.write_record(&header)?;
    for cells in runs {
        for c in cells.iter() {
            for (m, r) in &c.results {
                let n = match m {
                    Model::Ip => c.within.total,
                    _ => c.pooled.total,
                };
                let mut row = vec![
                    c.indication.to_string(),
                    c.outcome.to_string(),
                    c.timepoint.to_string(),
                    m.to_string(),
                    n.to_string(),
                    c.pooled.count(c.indication).to_string(),
                ];
                match r {
                    Ok(res) => {
                        let tri = |s: Option<&PosteriorSummary>| match s {
                            Some(s) => [format!("{}", s.median), format!("{}", s.lower95), format!("{}", s.upper95)],
                            None => Default::default(),
                        };
                        row.extend(tri(res.pooled_effect.get(&c.indication)));
                        row.extend(tri(res.within_sd.get(&c.indication)));
                        row.extend(tri(res.between_sd.as_ref()));
                        row.extend([
                            format!("{}", res.fit.dbar),
                            format!("{}", res.fit.pd),
                            format!("{}", res.fit.dic),
                            format!("{}", res.convergence.max_rhat),
                            String::new(),
                        ]);
                    }
                    Err(e) => {
                        row.extend(std::iter::repeat_n(String::new(), 13));
                        row.push(e.to_string());
                    }
                }
                w.write_record(&row)?;
            }
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

//! Posterior plots from cumulative and final syntheses.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::ridgeline::{x_range, GRID, PEAK_ROWS};
use super::{
    kde, normal_density, ticks, Axis, Colour, DensityCurve, Geometry, LegendEntry, Mark, MarkKind, Panel,
    PlotKind, PlotSpec, RowLabel, Shade, Side, Style, VizError,
};
use crate::cumulative::CumulativeCell;
use crate::dataset::{Indication, Outcome};
use crate::synthesis::{quantile_sorted, Model};

const KDE_GRID: usize = 256;
/// Widest half-violin spans this fraction of the slot between centres.
const VIOLIN_HALF_WIDTH: f64 = 0.45;
const BOX_WIDTH: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SynthMode {
    /// New study's reported estimate against the cumulative IP posterior.
    IpVsStudy,
    /// IP, CP and HMA posteriors of the target indication.
    ModelCompare,
}

impl core::str::FromStr for SynthMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "ip-vs-study" | "study" => Ok(SynthMode::IpVsStudy),
            "model-compare" | "models" => Ok(SynthMode::ModelCompare),
            _ => Err(format!("unknown synthesis plot mode {s:?}")),
        }
    }
}

pub fn model_colour(m: Model) -> Colour {
    match m {
        Model::Ip => Colour::Blue,
        Model::Cp => Colour::Red,
        Model::Hma => Colour::Green,
    }
}

fn pooled_draws<'a>(cell: &'a CumulativeCell, model: Model) -> Result<Option<&'a [f64]>, VizError> {
    let Some(Ok(res)) = cell.results.get(&model) else {
        return Ok(None);
    };
    let Some(s) = res.pooled_effect.get(&cell.indication) else {
        return Ok(None);
    };
    if s.draws.is_empty() {
        return Err(VizError::MissingDraws(format!(
            "{} {} {} at {}",
            cell.indication, cell.outcome, model, cell.timepoint
        )));
    }
    Ok(Some(&s.draws))
}

/// One panel per run, one row per timepoint; the first timepoint is the top
/// row.
pub fn build_synth_ridgeline(runs: &[Vec<CumulativeCell>], mode: SynthMode) -> Result<PlotSpec, VizError> {
    let title = match mode {
        SynthMode::IpVsStudy => "Cumulative IP synthesis against new study estimates",
        SynthMode::ModelCompare => "Cumulative synthesis by model",
    };
    let mut spec = PlotSpec::empty(PlotKind::SynthRidgeline, title);
    spec.legend = match mode {
        SynthMode::IpVsStudy => alloc::vec![
            LegendEntry {
                kind: MarkKind::DensityCurve,
                style: Style::shaded(Colour::Black, Shade::Light),
                size_bin: None,
                text: "New study".into(),
            },
            LegendEntry {
                kind: MarkKind::DensityCurve,
                style: Style::shaded(Colour::Black, Shade::Dark),
                size_bin: None,
                text: "IP posterior".into(),
            },
        ],
        SynthMode::ModelCompare => Model::ALL
            .iter()
            .map(|m| LegendEntry {
                kind: MarkKind::DensityCurve,
                style: Style::solid(model_colour(*m)),
                size_bin: None,
                text: m.code().into(),
            })
            .collect(),
    };

    for cells in runs.iter().filter(|c| !c.is_empty()) {
        let ind = cells[0].indication;
        let outcome = cells[0].outcome;
        let colour = Colour::for_outcome(outcome);

        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in cells.iter().flat_map(|c| &c.within.datapoints) {
            lo = lo.min(p.y - 4.0 * p.sigma);
            hi = hi.max(p.y + 4.0 * p.sigma);
        }
        let (x0, x1) = x_range(lo, hi);

        let n = cells.len();
        let mut marks = Vec::new();
        let mut rows = Vec::new();
        for (i, cell) in cells.iter().enumerate() {
            let base = (n - 1 - i) as f64;
            let tp = format!("{}", cell.timepoint.year());
            let names = cell.new_study_names();
            rows.push(RowLabel {
                y: base,
                text: if mode == SynthMode::IpVsStudy && !names.is_empty() {
                    format!("{tp} {}", names.join(", "))
                } else {
                    tp.clone()
                },
            });
            let ridge = |curve: DensityCurve| Geometry::Ridge { curve, baseline: base, scale: 1.0 };

            match mode {
                SynthMode::IpVsStudy => {
                    for p in &cell.new_studies {
                        let c = normal_density(p.y, p.sigma, GRID);
                        marks.push(
                            Mark::new(MarkKind::DensityCurve, ridge(c), Style::shaded(colour, Shade::Light), &p.label)
                                .with_outcome(outcome),
                        );
                    }
                    if let Some(draws) = pooled_draws(cell, Model::Ip)? {
                        let c = kde(draws, KDE_GRID)?;
                        let src = format!("{tp}/{}", Model::Ip.code());
                        marks.push(
                            Mark::new(MarkKind::DensityCurve, ridge(c), Style::shaded(colour, Shade::Dark), &src)
                                .with_outcome(outcome),
                        );
                    }
                }
                SynthMode::ModelCompare => {
                    for m in Model::ALL {
                        if let Some(draws) = pooled_draws(cell, m)? {
                            let c = kde(draws, KDE_GRID)?;
                            let src = format!("{tp}/{}", m.code());
                            marks.push(
                                Mark::new(MarkKind::DensityCurve, ridge(c), Style::solid(model_colour(m)), &src)
                                    .with_outcome(outcome),
                            );
                        }
                    }
                }
            }
        }

        let peak = marks.iter().filter_map(|m| m.curve()).map(|c| c.peak().1).fold(0.0, f64::max);
        let scale = if peak > 0.0 { PEAK_ROWS / peak } else { 1.0 };
        for m in &mut marks {
            if let Geometry::Ridge { curve, scale: s, .. } = &mut m.geometry {
                *curve = curve.clipped(x0, x1);
                *s = scale;
            }
        }

        spec.panels.push(Panel {
            indication: Some(ind),
            title: format!("{} {}", ind.long_name(), outcome),
            x: Axis::new(x0, x1, ticks(x0, x1, 0.5), "lnHR"),
            y: Axis::new(0.0, n as f64, Vec::new(), ""),
            y_down: false,
            rows,
            marks,
            height: n as f64,
            extent: None,
        });
    }
    Ok(spec)
}

/// Final posterior draws of one model for one indication.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolinCell {
    pub indication: Indication,
    pub model: Model,
    pub os_draws: Vec<f64>,
    pub pfs_draws: Vec<f64>,
}

/// One panel per indication (in input order) holding a split violin per
/// model at x = 1, 2, 3. Violin widths share one scale across panels.
pub fn build_split_violin(cells: &[ViolinCell]) -> Result<PlotSpec, VizError> {
    let mut spec = PlotSpec::empty(PlotKind::SplitViolin, "Final lnHR posteriors: OS (left) and PFS (right)");
    spec.legend = [Outcome::Os, Outcome::Pfs]
        .iter()
        .map(|o| LegendEntry {
            kind: MarkKind::ViolinHalf,
            style: Style::shaded(Colour::for_outcome(*o), Shade::Dark),
            size_bin: None,
            text: format!("{o}"),
        })
        .collect();

    struct Half {
        curve: DensityCurve,
        quartiles: (f64, f64, f64),
    }
    let half = |draws: &[f64], what: String| -> Result<Half, VizError> {
        if draws.is_empty() {
            return Err(VizError::MissingDraws(what));
        }
        let curve = kde(draws, KDE_GRID)?;
        let mut s = draws.to_vec();
        s.sort_by(f64::total_cmp);
        let q = (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.5), quantile_sorted(&s, 0.75));
        Ok(Half { curve, quartiles: q })
    };

    let mut built = Vec::with_capacity(cells.len());
    for c in cells {
        let os = half(&c.os_draws, format!("{} {} OS", c.indication, c.model))?;
        let pfs = half(&c.pfs_draws, format!("{} {} PFS", c.indication, c.model))?;
        built.push((c, os, pfs));
    }

    let peak = built
        .iter()
        .flat_map(|(_, a, b)| [a.curve.peak().1, b.curve.peak().1])
        .fold(0.0, f64::max);
    let scale = if peak > 0.0 { VIOLIN_HALF_WIDTH / peak } else { 1.0 };
    let (lo, hi) = built.iter().flat_map(|(_, a, b)| a.curve.xs.iter().chain(&b.curve.xs)).fold(
        (f64::INFINITY, f64::NEG_INFINITY),
        |(l, h), x| (l.min(*x), h.max(*x)),
    );
    let (y0, y1) = x_range(lo, hi);

    let mut order: Vec<Indication> = Vec::new();
    for (c, _, _) in &built {
        if !order.contains(&c.indication) {
            order.push(c.indication);
        }
    }
    for ind in order {
        let mut marks = Vec::new();
        let mut rows = Vec::new();
        for (c, os, pfs) in built.iter().filter(|(c, _, _)| c.indication == ind) {
            let center = match c.model {
                Model::Ip => 1.0,
                Model::Cp => 2.0,
                Model::Hma => 3.0,
            };
            rows.push(RowLabel { y: center, text: c.model.code().into() });
            for (h, side, outcome) in [(os, Side::Left, Outcome::Os), (pfs, Side::Right, Outcome::Pfs)] {
                let src = format!("{}/{}/{}", ind, c.model, outcome);
                let style = Style::shaded(Colour::for_outcome(outcome), Shade::Dark);
                let curve = h.curve.clipped(y0, y1);
                marks.push(
                    Mark::new(MarkKind::ViolinHalf, Geometry::HalfViolin { curve, center, scale, side }, style, &src)
                        .with_outcome(outcome),
                );
                let (q1, median, q3) = h.quartiles;
                marks.push(
                    Mark::new(
                        MarkKind::BoxplotOverlay,
                        Geometry::Box { center, width: BOX_WIDTH, side, q1, median, q3 },
                        Style::solid(Colour::Black),
                        &src,
                    )
                    .with_outcome(outcome),
                );
            }
        }
        spec.panels.push(Panel {
            indication: Some(ind),
            title: String::from(ind.long_name()),
            x: Axis::new(0.5, 3.5, alloc::vec![1.0, 2.0, 3.0], "Model"),
            y: Axis::new(y0, y1, ticks(y0, y1, 0.5), "lnHR"),
            y_down: false,
            rows,
            marks,
            height: 1.0,
            extent: None,
        });
    }
    Ok(spec)
}

//! Evidence ridgelines: normal approximations of final reported lnHRs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{
    normal_density, panel_order, ticks, Axis, Colour, Geometry, LegendEntry, Mark, MarkKind, Panel, PlotKind,
    PlotSpec, RowLabel, Style,
};
use crate::dataset::{Dataset, Outcome, OutcomeReport, TrialKey};
use crate::math;

pub(crate) const GRID: usize = 201;
/// Tallest curve in a panel spans this many row heights.
pub(crate) const PEAK_ROWS: f64 = 0.9;
/// Curves sharing a year are spread over this fraction of the row.
const SAME_YEAR_SPREAD: f64 = 0.8;
const X_CAP: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RidgeOrder {
    ByYear,
    ByEffect,
}

impl core::str::FromStr for RidgeOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "by-year" | "year" => Ok(RidgeOrder::ByYear),
            "by-effect" | "effect" => Ok(RidgeOrder::ByEffect),
            _ => Err(format!("unknown ridgeline order {s:?}")),
        }
    }
}

/// Round outward to a multiple of 0.5 and cap at ±3.
pub(crate) fn x_range(lo: f64, hi: f64) -> (f64, f64) {
    let lo = (math::floor(lo * 2.0) / 2.0).max(-X_CAP);
    let hi = (math::ceil(hi * 2.0) / 2.0).min(X_CAP);
    if lo < hi { (lo, hi) } else { (-1.0, 1.0) }
}

fn curve_mark(r: &OutcomeReport, baseline: f64) -> Option<Mark> {
    let e = r.effect().ok()?;
    let curve = normal_density(e.ln_hr, e.se, GRID);
    let geometry = Geometry::Ridge { curve, baseline, scale: 1.0 };
    Some(
        Mark::new(MarkKind::DensityCurve, geometry, Style::solid(Colour::for_outcome(r.outcome)), &r.key().label())
            .with_outcome(r.outcome),
    )
}

pub fn build_ridgeline(ds: &Dataset, order: RidgeOrder) -> PlotSpec {
    let title = match order {
        RidgeOrder::ByYear => "Final reported lnHR by reporting year",
        RidgeOrder::ByEffect => "Final reported lnHR ranked by OS",
    };
    let mut spec = PlotSpec::empty(PlotKind::Ridgeline, title);
    spec.legend = alloc::vec![
        LegendEntry { kind: MarkKind::DensityCurve, style: Style::solid(Colour::Black), size_bin: None, text: "OS".into() },
        LegendEntry {
            kind: MarkKind::DensityCurve,
            style: Style::solid(Colour::Orange),
            size_bin: None,
            text: "PFS".into(),
        },
    ];

    let finals: Vec<&OutcomeReport> = ds.reports().iter().filter(|r| r.is_final).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for e in finals.iter().filter_map(|r| r.effect().ok()) {
        lo = lo.min(e.ln_hr - 4.0 * e.se);
        hi = hi.max(e.ln_hr + 4.0 * e.se);
    }
    let (x0, x1) = x_range(lo, hi);
    let x = Axis::new(x0, x1, ticks(x0, x1, 0.5), "lnHR");

    for ind in panel_order(ds) {
        let mut reports: Vec<&OutcomeReport> = finals.iter().copied().filter(|r| ds.trial_of(r).indication == ind).collect();
        reports.sort_by(|a, b| crate::dataset::report_order(a, b));

        let mut marks = Vec::new();
        let mut rows = Vec::new();
        match order {
            RidgeOrder::ByYear => {
                let mut by_year: BTreeMap<i32, Vec<&OutcomeReport>> = BTreeMap::new();
                for r in &reports {
                    by_year.entry(r.cutoff_date.year()).or_default().push(r);
                }
                for (year, rs) in &by_year {
                    let k = rs.len() as f64;
                    for (i, r) in rs.iter().enumerate() {
                        marks.extend(curve_mark(r, *year as f64 + i as f64 * SAME_YEAR_SPREAD / k));
                    }
                    rows.push(RowLabel { y: *year as f64, text: format!("{year}") });
                }
            }
            RidgeOrder::ByEffect => {
                let ranked = rank_by_os(&reports);
                let n = ranked.len();
                for (rank, key) in ranked.iter().enumerate() {
                    let y = (n - 1 - rank) as f64;
                    rows.push(RowLabel { y, text: key.label() });
                    for r in reports.iter().filter(|r| r.key() == *key) {
                        marks.extend(curve_mark(r, y));
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

        let (y0, y1) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.y), b.max(r.y)));
        let (y0, y1) = if rows.is_empty() { (0.0, 1.0) } else { (y0, y1 + 1.0) };
        let step = if order == RidgeOrder::ByYear { 2.0 } else { 1.0 };
        spec.panels.push(Panel {
            indication: Some(ind),
            title: String::from(ind.long_name()),
            x: x.clone(),
            y: Axis::new(y0, y1, ticks(y0, y1, step), if order == RidgeOrder::ByYear { "Year" } else { "" }),
            y_down: false,
            height: (y1 - y0).max(1.0),
            rows,
            marks,
            extent: None,
        });
    }
    spec
}

/// Comparisons by final OS lnHR, largest first; comparisons without a final
/// OS estimate follow in key order.
fn rank_by_os(reports: &[&OutcomeReport]) -> Vec<TrialKey> {
    let mut os: BTreeMap<TrialKey, f64> = BTreeMap::new();
    let mut rest: Vec<TrialKey> = Vec::new();
    for r in reports {
        if r.outcome == Outcome::Os {
            if let Ok(e) = r.effect() {
                os.insert(r.key(), e.ln_hr);
            }
        }
    }
    for r in reports {
        let k = r.key();
        if !os.contains_key(&k) && !rest.contains(&k) {
            rest.push(k);
        }
    }
    rest.sort();
    let mut ranked: Vec<(TrialKey, f64)> = os.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().map(|(k, _)| k).chain(rest).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_rounds_outward_and_caps() {
        assert_eq!(x_range(-1.23, 0.31), (-1.5, 0.5));
        assert_eq!(x_range(-7.0, 9.0), (-3.0, 3.0));
        assert_eq!(x_range(-1.0, 1.0), (-1.0, 1.0));
    }

    #[test]
    fn order_parses() {
        assert_eq!("BY_EFFECT".parse::<RidgeOrder>().unwrap(), RidgeOrder::ByEffect);
        assert_eq!("by-year".parse::<RidgeOrder>().unwrap(), RidgeOrder::ByYear);
        assert!("sideways".parse::<RidgeOrder>().is_err());
    }
}

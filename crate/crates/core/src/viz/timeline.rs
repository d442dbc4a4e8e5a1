//! Trial timelines: one row per comparison, one panel per indication.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate, TimeDelta};
use serde::{Deserialize, Serialize};

use super::{
    panel_order, ticks, year_fraction, Axis, Colour, Geometry, LegendEntry, Mark, MarkKind, Panel, PlotKind,
    PlotSpec, RowLabel, Shade, Style,
};
use crate::dataset::{Dataset, Outcome, OutcomeReport, TrialRecord};
use crate::effects::{assign_bin, ci_width, maturity, relative_uncertainty, BinIndex, BinKey, SizeBin};

/// Reporting points of one trial closer than this are pushed apart on the
/// display by the same amount.
pub const OVERLAP_DAYS: i64 = 61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TimelineVariant {
    Plain,
    /// Start squares sized by patients randomized.
    Size,
    /// Report circles binned by CI width.
    Uncertainty,
    /// Report circles binned by SE/|lnHR|.
    UncertaintyRelative,
    MaturityOs,
    MaturityPfs,
}

impl TimelineVariant {
    pub const ALL: [TimelineVariant; 6] = [
        TimelineVariant::Plain,
        TimelineVariant::Size,
        TimelineVariant::Uncertainty,
        TimelineVariant::UncertaintyRelative,
        TimelineVariant::MaturityOs,
        TimelineVariant::MaturityPfs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimelineVariant::Plain => "plain",
            TimelineVariant::Size => "size",
            TimelineVariant::Uncertainty => "uncertainty",
            TimelineVariant::UncertaintyRelative => "uncertainty-relative",
            TimelineVariant::MaturityOs => "maturity-os",
            TimelineVariant::MaturityPfs => "maturity-pfs",
        }
    }

    /// Outcome whose reports are shown; `None` shows both.
    pub fn outcome_scope(self) -> Option<Outcome> {
        match self {
            TimelineVariant::MaturityOs => Some(Outcome::Os),
            TimelineVariant::MaturityPfs => Some(Outcome::Pfs),
            _ => None,
        }
    }

    fn maturity_key(self) -> Option<BinKey> {
        match self {
            TimelineVariant::MaturityOs => Some(BinKey::MaturityOs),
            TimelineVariant::MaturityPfs => Some(BinKey::MaturityPfs),
            _ => None,
        }
    }

    fn uncertainty_key(self) -> Option<BinKey> {
        match self {
            TimelineVariant::Uncertainty => Some(BinKey::CiWidth),
            TimelineVariant::UncertaintyRelative => Some(BinKey::RelUnc),
            _ => None,
        }
    }
}

impl core::str::FromStr for TimelineVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().replace('_', "-");
        TimelineVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(&t))
            .ok_or_else(|| format!("unknown timeline variant {s:?}"))
    }
}

fn trial_style(t: &TrialRecord) -> Style {
    Style::solid(if t.comparator_class.is_chemotherapy() { Colour::Black } else { Colour::Grey })
}

/// Display dates for a trial's distinct reporting dates: each date that
/// falls within [`OVERLAP_DAYS`] of the previous displayed point moves to
/// exactly that distance after it.
fn display_dates(mut dates: Vec<NaiveDate>) -> BTreeMap<NaiveDate, NaiveDate> {
    dates.sort();
    dates.dedup();
    let gap = TimeDelta::days(OVERLAP_DAYS);
    let mut out = BTreeMap::new();
    let mut prev: Option<NaiveDate> = None;
    for d in dates {
        let shown = match prev {
            Some(p) if d - p < gap => p + gap,
            _ => d,
        };
        out.insert(d, shown);
        prev = Some(shown);
    }
    out
}

fn report_mark(variant: TimelineVariant, t: &TrialRecord, r: &OutcomeReport, x: f64, y: f64) -> Mark {
    let label = t.key().label();
    let geometry = Geometry::Point { x, y };
    let circle_kind = match r.outcome {
        Outcome::Os => MarkKind::OsCircle,
        Outcome::Pfs => MarkKind::PfsCircle,
    };

    if let Some(key) = variant.maturity_key() {
        return match (r.events_comparator, r.events_control) {
            (Some(ev_bev), Some(ev_ctl)) => {
                let mut m = Mark::new(MarkKind::MaturityCirclePair, geometry, Style::solid(Colour::Black), &label)
                    .with_outcome(r.outcome)
                    .with_bin(assign_bin(maturity(ev_bev, t.n_comparator), key));
                m.pair_bin = Some(assign_bin(maturity(ev_ctl, t.n_control), key));
                m
            }
            _ => Mark::new(MarkKind::FinalCross, geometry, trial_style(t), &label).with_outcome(r.outcome),
        };
    }

    if let Some(key) = variant.uncertainty_key() {
        let value = match key {
            BinKey::CiWidth => ci_width(r.ci_lower, r.ci_upper),
            // HR = 1 has no relative uncertainty; NaN bins as EXTREME.
            _ => r.effect().ok().and_then(|e| relative_uncertainty(&e).ok()).unwrap_or(f64::NAN),
        };
        let bin = assign_bin(value, key);
        let style = Style::solid(Colour::for_outcome(r.outcome));
        return if bin.is_extreme() {
            Mark::new(MarkKind::ExtremePoint, geometry, style, &label).with_outcome(r.outcome)
        } else {
            Mark::new(circle_kind, geometry, style, &label).with_outcome(r.outcome).with_bin(bin)
        };
    }

    let kind = if r.is_final { MarkKind::FinalCross } else { circle_kind };
    Mark::new(kind, geometry, trial_style(t), &label).with_outcome(r.outcome)
}

pub fn build_timeline(ds: &Dataset, variant: TimelineVariant) -> PlotSpec {
    let mut spec = PlotSpec::empty(PlotKind::Timeline, &format!("Trial timeline ({})", variant.name()));
    spec.legend = legend(variant);
    if ds.trials().is_empty() {
        return spec;
    }

    let scope = variant.outcome_scope();
    let in_scope = |r: &&OutcomeReport| scope.is_none_or(|o| r.outcome == o);

    // Shared time axis over every date any panel shows.
    let mut all_dates: Vec<NaiveDate> = ds.trials().iter().map(|t| t.start_date).collect();
    all_dates.extend(ds.trials().iter().filter_map(|t| t.end_date));
    let mut shown_by_trial = BTreeMap::new();
    for t in ds.trials() {
        let dates = ds.reports().iter().filter(|r| r.key() == t.key()).map(|r| r.cutoff_date).collect();
        let shown = display_dates(dates);
        all_dates.extend(shown.values().copied());
        shown_by_trial.insert(t.key(), shown);
    }
    let first = *all_dates.iter().min().expect("non-empty");
    let last = *all_dates.iter().max().expect("non-empty");
    let x = Axis::new(first.year() as f64, (last.year() + 1) as f64, ticks(first.year() as f64, (last.year() + 1) as f64, 2.0), "Year");

    for ind in panel_order(ds) {
        let mut rows: Vec<&TrialRecord> = ds.trials().iter().filter(|t| t.indication == ind).collect();
        rows.sort_by(|a, b| (a.start_date, a.key()).cmp(&(b.start_date, b.key())));

        let mut panel = Panel {
            indication: Some(ind),
            title: String::from(ind.long_name()),
            x: x.clone(),
            y: Axis::new(0.0, rows.len() as f64 + 1.0, Vec::new(), ""),
            y_down: true,
            rows: Vec::new(),
            marks: Vec::new(),
            height: rows.len() as f64 + 1.0,
            extent: None,
        };
        let mut lo = NaiveDate::MAX;
        let mut hi = NaiveDate::MIN;

        for (k, t) in rows.iter().enumerate() {
            let y = k as f64 + 1.0;
            let label = t.key().label();
            let style = trial_style(t);
            panel.rows.push(RowLabel { y, text: label.clone() });

            let sx = year_fraction(t.start_date);
            let start = if variant == TimelineVariant::Size {
                let mut m = Mark::new(MarkKind::TrialStartSquare, Geometry::Point { x: sx, y }, style, &label);
                m.magnitude = Some(t.n_total() as f64);
                m
            } else {
                Mark::new(MarkKind::TrialStartTick, Geometry::Point { x: sx, y }, style, &label)
            };
            panel.marks.push(start);

            let shown = &shown_by_trial[&t.key()];
            let mut span: Vec<NaiveDate> = shown.values().copied().collect();
            span.extend(t.end_date);
            let (a, b) = match (span.iter().min(), span.iter().max()) {
                (Some(a), Some(b)) => (*a, *b),
                _ => (t.start_date, t.start_date),
            };
            panel.marks.push(Mark::new(
                MarkKind::DurationLine,
                Geometry::Segment { x0: year_fraction(a), y0: y, x1: year_fraction(b), y1: y },
                style,
                &label,
            ));
            lo = lo.min(t.start_date);
            hi = hi.max(b);

            let mut reports: Vec<&OutcomeReport> =
                ds.reports().iter().filter(|r| r.key() == t.key()).filter(in_scope).collect();
            reports.sort_by(|a, b| crate::dataset::report_order(a, b));
            for r in reports {
                let rx = year_fraction(shown[&r.cutoff_date]);
                panel.marks.push(report_mark(variant, t, r, rx, y));
            }
        }
        panel.extent = Some((lo, hi));
        spec.panels.push(panel);
    }
    spec
}

fn legend(variant: TimelineVariant) -> Vec<LegendEntry> {
    let entry = |kind, colour, size_bin, text: &str| LegendEntry {
        kind,
        style: Style::shaded(colour, Shade::Solid),
        size_bin,
        text: text.into(),
    };
    let start = if variant == TimelineVariant::Size {
        entry(MarkKind::TrialStartSquare, Colour::Black, None, "Trial start (area ~ patients)")
    } else {
        entry(MarkKind::TrialStartTick, Colour::Black, None, "Trial start")
    };
    let mut out = alloc::vec![
        start,
        entry(MarkKind::DurationLine, Colour::Black, None, "Chemotherapy comparator"),
        entry(MarkKind::DurationLine, Colour::Grey, None, "Other comparator"),
    ];
    if let Some(key) = variant.uncertainty_key() {
        out.push(entry(MarkKind::OsCircle, Colour::Black, None, "OS"));
        out.push(entry(MarkKind::PfsCircle, Colour::Orange, None, "PFS"));
        for b in 1..=key.n_bins() {
            let text = bin_text(key, b);
            out.push(entry(MarkKind::OsCircle, Colour::Black, Some(SizeBin { key, index: BinIndex::Bin(b) }), &text));
        }
        if let Some(t) = key.extreme_above() {
            out.push(entry(MarkKind::ExtremePoint, Colour::Black, None, &format!("more than {t:.2}")));
        }
    } else if let Some(key) = variant.maturity_key() {
        out.push(entry(MarkKind::MaturityCirclePair, Colour::Black, None, "Bevacizumab arm"));
        out.push(entry(MarkKind::MaturityCirclePair, Colour::Red, None, "Comparator arm"));
        for b in 1..=key.n_bins() {
            let text = bin_text(key, b);
            out.push(entry(MarkKind::OsCircle, Colour::Black, Some(SizeBin { key, index: BinIndex::Bin(b) }), &text));
        }
        out.push(entry(MarkKind::FinalCross, Colour::Black, None, "Events not reported"));
    } else {
        out.push(entry(MarkKind::OsCircle, Colour::Black, None, "Interim report"));
        out.push(entry(MarkKind::FinalCross, Colour::Black, None, "Final report"));
    }
    out
}

fn bin_text(key: BinKey, b: u8) -> String {
    let e = key.edges();
    let i = b as usize;
    if i == 1 {
        format!("{b}: less than {:.2}", e[0])
    } else if i - 1 < e.len() {
        format!("{b}: {:.2} to {:.2}", e[i - 2], e[i - 1])
    } else {
        match key.extreme_above() {
            Some(t) => format!("{b}: {:.2} to {t:.2}", e[i - 2]),
            None => format!("{b}: {:.2} or more", e[i - 2]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn close_dates_pushed_apart() {
        let m = display_dates(alloc::vec![d("2005-04-01"), d("2005-02-01"), d("2007-01-01"), d("2005-02-01")]);
        assert_eq!(m[&d("2005-02-01")], d("2005-02-01"));
        assert_eq!(m[&d("2005-04-01")], d("2005-02-01") + TimeDelta::days(61));
        assert_eq!(m[&d("2007-01-01")], d("2007-01-01"));
    }

    #[test]
    fn bin_legend_text() {
        assert_eq!(bin_text(BinKey::CiWidth, 1), "1: less than 0.25");
        assert_eq!(bin_text(BinKey::CiWidth, 2), "2: 0.25 to 0.45");
        assert_eq!(bin_text(BinKey::CiWidth, 4), "4: 0.65 to 1.00");
        assert_eq!(bin_text(BinKey::MaturityOs, 5), "5: 0.70 or more");
    }

    #[test]
    fn variant_names_parse() {
        for v in TimelineVariant::ALL {
            assert_eq!(v.name().parse::<TimelineVariant>().unwrap(), v);
        }
        assert_eq!("MATURITY_OS".parse::<TimelineVariant>().unwrap(), TimelineVariant::MaturityOs);
    }
}

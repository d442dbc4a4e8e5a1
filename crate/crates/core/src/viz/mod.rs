//! Declarative plot specs for the evidence-map figures and their SVG
//! rendering.
//!
//! Builders turn a dataset or synthesis output into a [`PlotSpec`]: panels of
//! [`Mark`]s in data coordinates. [`render_svg`] is a pure function of the
//! spec, so all layout decisions that matter for tests live in the spec.

mod kde;
mod ridgeline;
mod svg;
mod synth;
mod timeline;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Indication, Outcome};
use crate::effects::SizeBin;

pub use kde::{kde, normal_density, silverman_bandwidth, DensityCurve, DensitySource, BANDWIDTH_FLOOR, MIN_KDE_DRAWS};
pub use ridgeline::{build_ridgeline, RidgeOrder};
pub use svg::{render_svg, render_svg_with, RenderOptions};
pub use synth::{build_split_violin, build_synth_ridgeline, SynthMode, ViolinCell};
pub use timeline::{build_timeline, TimelineVariant, OVERLAP_DAYS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VizError {
    #[error("kernel density needs at least {MIN_KDE_DRAWS} draws, got {0}")]
    TooFewDraws(usize),
    #[error("results for {0} carry no posterior draws")]
    MissingDraws(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlotKind {
    Timeline,
    Ridgeline,
    SynthRidgeline,
    SplitViolin,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Timeline => "TIMELINE",
            PlotKind::Ridgeline => "RIDGELINE",
            PlotKind::SynthRidgeline => "SYNTH_RIDGELINE",
            PlotKind::SplitViolin => "SPLIT_VIOLIN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MarkKind {
    TrialStartTick,
    TrialStartSquare,
    DurationLine,
    OsCircle,
    PfsCircle,
    FinalCross,
    MaturityCirclePair,
    ExtremePoint,
    DensityCurve,
    ViolinHalf,
    BoxplotOverlay,
    Label,
}

impl MarkKind {
    pub fn name(self) -> &'static str {
        match self {
            MarkKind::TrialStartTick => "TRIAL_START_TICK",
            MarkKind::TrialStartSquare => "TRIAL_START_SQUARE",
            MarkKind::DurationLine => "DURATION_LINE",
            MarkKind::OsCircle => "OS_CIRCLE",
            MarkKind::PfsCircle => "PFS_CIRCLE",
            MarkKind::FinalCross => "FINAL_CROSS",
            MarkKind::MaturityCirclePair => "MATURITY_CIRCLE_PAIR",
            MarkKind::ExtremePoint => "EXTREME_POINT",
            MarkKind::DensityCurve => "DENSITY_CURVE",
            MarkKind::ViolinHalf => "VIOLIN_HALF",
            MarkKind::BoxplotOverlay => "BOXPLOT_OVERLAY",
            MarkKind::Label => "LABEL",
        }
    }

    /// Kinds that stand for one outcome report on a timeline.
    pub fn is_report_marker(self) -> bool {
        matches!(
            self,
            MarkKind::OsCircle
                | MarkKind::PfsCircle
                | MarkKind::FinalCross
                | MarkKind::MaturityCirclePair
                | MarkKind::ExtremePoint
        )
    }

    /// Kinds that may carry a size bin.
    pub fn is_weighted(self) -> bool {
        matches!(self, MarkKind::OsCircle | MarkKind::PfsCircle | MarkKind::MaturityCirclePair)
    }
}

impl fmt::Display for MarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Colour {
    /// Chemotherapy comparator, OS, bevacizumab arm.
    Black,
    /// PFS.
    Orange,
    /// Comparator-arm maturity.
    Red,
    /// Non-chemotherapy comparator.
    Grey,
    Blue,
    Green,
}

impl Colour {
    pub fn hex(self) -> &'static str {
        match self {
            Colour::Black => "#000000",
            Colour::Orange => "#E69F00",
            Colour::Red => "#D55E00",
            Colour::Grey => "#808080",
            Colour::Blue => "#0072B2",
            Colour::Green => "#009E73",
        }
    }

    pub fn for_outcome(o: Outcome) -> Colour {
        match o {
            Outcome::Os => Colour::Black,
            Outcome::Pfs => Colour::Orange,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shade {
    Solid,
    Light,
    Dark,
}

impl Shade {
    pub fn opacity(self) -> &'static str {
        match self {
            Shade::Solid => "1",
            Shade::Light => "0.25",
            Shade::Dark => "0.6",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Style {
    pub colour: Colour,
    pub shade: Shade,
    pub dashed: bool,
}

impl Style {
    pub const fn solid(colour: Colour) -> Self {
        Style { colour, shade: Shade::Solid, dashed: false }
    }

    pub const fn shaded(colour: Colour, shade: Shade) -> Self {
        Style { colour, shade, dashed: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Where and how a mark sits, in the panel's data coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Point { x: f64, y: f64 },
    Segment { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// A density drawn upward from `baseline`: point `(x, baseline + scale·y)`.
    Ridge { curve: DensityCurve, baseline: f64, scale: f64 },
    /// A half-violin about the vertical line `x = center`: point
    /// `(center ± scale·density, value)`.
    HalfViolin { curve: DensityCurve, center: f64, scale: f64, side: Side },
    /// Box-plot summary on one side of `center`, spanning `q1..q3` vertically.
    Box { center: f64, width: f64, side: Side, q1: f64, median: f64, q3: f64 },
    Text { x: f64, y: f64, text: String },
}

impl Geometry {
    /// All data-coordinate points the mark touches.
    pub fn points(&self) -> Vec<(f64, f64)> {
        match self {
            Geometry::Point { x, y } | Geometry::Text { x, y, .. } => alloc::vec![(*x, *y)],
            Geometry::Segment { x0, y0, x1, y1 } => alloc::vec![(*x0, *y0), (*x1, *y1)],
            Geometry::Ridge { curve, baseline, scale } => {
                curve.xs.iter().zip(&curve.ys).map(|(x, y)| (*x, baseline + scale * y)).collect()
            }
            Geometry::HalfViolin { curve, center, scale, side } => {
                let sign = if *side == Side::Left { -1.0 } else { 1.0 };
                curve.xs.iter().zip(&curve.ys).map(|(v, d)| (center + sign * scale * d, *v)).collect()
            }
            Geometry::Box { center, width, side, q1, q3, .. } => {
                let sign = if *side == Side::Left { -1.0 } else { 1.0 };
                alloc::vec![(*center, *q1), (center + sign * width, *q3)]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub kind: MarkKind,
    pub geometry: Geometry,
    /// Display bin; for a maturity pair this is the bevacizumab arm.
    pub size_bin: Option<SizeBin>,
    /// Comparator-arm bin of a maturity pair.
    pub pair_bin: Option<SizeBin>,
    /// Continuous size, used by sample-size squares (patients randomized).
    pub magnitude: Option<f64>,
    pub style: Style,
    /// Trial label, timepoint, or model the mark stands for.
    pub source: String,
    pub outcome: Option<Outcome>,
}

impl Mark {
    pub fn new(kind: MarkKind, geometry: Geometry, style: Style, source: &str) -> Self {
        Mark {
            kind,
            geometry,
            size_bin: None,
            pair_bin: None,
            magnitude: None,
            style,
            source: source.into(),
            outcome: None,
        }
    }

    pub fn with_outcome(mut self, o: Outcome) -> Self {
        self.outcome = Some(o);
        self
    }

    pub fn with_bin(mut self, b: SizeBin) -> Self {
        self.size_bin = Some(b);
        self
    }

    /// The density curve of a curve-like mark.
    pub fn curve(&self) -> Option<&DensityCurve> {
        match &self.geometry {
            Geometry::Ridge { curve, .. } | Geometry::HalfViolin { curve, .. } => Some(curve),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub ticks: Vec<f64>,
    pub label: String,
}

impl Axis {
    pub fn new(min: f64, max: f64, ticks: Vec<f64>, label: &str) -> Self {
        Axis { min, max, ticks, label: label.into() }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowLabel {
    pub y: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub indication: Option<Indication>,
    pub title: String,
    pub x: Axis,
    pub y: Axis,
    /// Draw the y axis top-down (row 1 at the top).
    pub y_down: bool,
    pub rows: Vec<RowLabel>,
    pub marks: Vec<Mark>,
    /// Relative height; the renderer scales this to pixels.
    pub height: f64,
    /// First and last date shown, for time panels.
    pub extent: Option<(NaiveDate, NaiveDate)>,
}

impl Panel {
    pub fn marks_of(&self, kind: MarkKind) -> impl Iterator<Item = &Mark> {
        self.marks.iter().filter(move |m| m.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub kind: MarkKind,
    pub style: Style,
    pub size_bin: Option<SizeBin>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    pub panels: Vec<Panel>,
    pub legend: Vec<LegendEntry>,
}

impl PlotSpec {
    pub fn empty(kind: PlotKind, title: &str) -> Self {
        PlotSpec { kind, title: title.into(), panels: Vec::new(), legend: Vec::new() }
    }

    pub fn marks(&self) -> impl Iterator<Item = &Mark> {
        self.panels.iter().flat_map(|p| p.marks.iter())
    }

    pub fn panel(&self, i: Indication) -> Option<&Panel> {
        self.panels.iter().find(|p| p.indication == Some(i))
    }
}

/// Decimal year, e.g. 2004-07-02 → 2004.5.
pub fn year_fraction(d: NaiveDate) -> f64 {
    let y = d.year();
    let days = if NaiveDate::from_ymd_opt(y, 2, 29).is_some() { 366.0 } else { 365.0 };
    y as f64 + d.ordinal0() as f64 / days
}

/// Indications ordered by their earliest trial start, ties in canonical
/// order.
pub fn panel_order(ds: &Dataset) -> Vec<Indication> {
    let mut v: Vec<(NaiveDate, Indication)> = ds
        .indications()
        .into_iter()
        .map(|i| {
            let first = ds.trials().iter().filter(|t| t.indication == i).map(|t| t.start_date).min();
            (first.expect("indication has trials"), i)
        })
        .collect();
    v.sort();
    v.into_iter().map(|(_, i)| i).collect()
}

/// Ticks at every multiple of `step` within `[min, max]`.
pub(crate) fn ticks(min: f64, max: f64, step: f64) -> Vec<f64> {
    let first = crate::math::ceil(min / step - 1e-9);
    let mut out = Vec::new();
    let mut k = first;
    while k * step <= max + 1e-9 {
        out.push(k * step);
        k += 1.0;
    }
    out
}

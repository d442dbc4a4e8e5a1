//! Deterministic SVG output.
//!
//! Panels are stacked vertically above the legend. Every coordinate is
//! clamped to its panel's axes and printed with two decimals.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Geometry, LegendEntry, Mark, MarkKind, Panel, PlotSpec, Side, Style};
use crate::effects::SizeBin;
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Total width in pixels.
    pub width: f64,
    /// Radius of a bin-1 circle and of unbinned report markers.
    pub base_radius: f64,
    /// Pixels per unit of [`Panel::height`].
    pub row_height: f64,
    pub min_panel_height: f64,
    /// Space left of the plot area for row labels.
    pub margin_left: f64,
    pub margin_right: f64,
    pub title_height: f64,
    pub panel_gap: f64,
    pub legend_row: f64,
    pub font_size: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            width: 900.0,
            base_radius: 3.0,
            row_height: 22.0,
            min_panel_height: 90.0,
            margin_left: 150.0,
            margin_right: 30.0,
            title_height: 28.0,
            panel_gap: 44.0,
            legend_row: 18.0,
            font_size: 11.0,
        }
    }
}

impl RenderOptions {
    /// Radius for a binned circle; the ramp runs from least to most
    /// informative, so keys where smaller values are better are reversed.
    pub fn radius(&self, bin: Option<&SizeBin>) -> f64 {
        let rank = match bin.and_then(|b| b.bin().map(|i| (b.key, i))) {
            Some((key, i)) if key.smaller_is_better() => key.n_bins() + 1 - i,
            Some((_, i)) => i,
            None => 1,
        };
        self.base_radius * (1.0 + 0.6 * (rank as f64 - 1.0))
    }
}

pub fn render_svg(spec: &PlotSpec) -> String {
    render_svg_with(spec, &RenderOptions::default())
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" { String::from("0.00") } else { s }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn tick_label(v: f64) -> String {
    if math::abs(v - math::round(v)) < 1e-9 { format!("{}", math::round(v) as i64) } else { format!("{v:.1}") }
}

/// Pixel frame of one panel's plot area.
struct Frame<'a> {
    panel: &'a Panel,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame<'_> {
    fn px(&self, x: f64) -> f64 {
        let a = &self.panel.x;
        let span = if a.max > a.min { a.max - a.min } else { 1.0 };
        self.left + (a.clamp(x) - a.min) / span * self.w
    }

    fn py(&self, y: f64) -> f64 {
        let a = &self.panel.y;
        let span = if a.max > a.min { a.max - a.min } else { 1.0 };
        let t = (a.clamp(y) - a.min) / span;
        if self.panel.y_down { self.top + t * self.h } else { self.top + (1.0 - t) * self.h }
    }

    fn pt(&self, (x, y): (f64, f64)) -> String {
        format!("{},{}", num(self.px(x)), num(self.py(y)))
    }
}

fn paint(style: &Style) -> String {
    let dash = if style.dashed { " stroke-dasharray=\"4,3\"" } else { "" };
    format!("stroke=\"{}\" fill=\"{}\" fill-opacity=\"{}\"{dash}", style.colour.hex(), style.colour.hex(), style.shade.opacity())
}

pub fn render_svg_with(spec: &PlotSpec, opt: &RenderOptions) -> String {
    let plot_w = (opt.width - opt.margin_left - opt.margin_right).max(10.0);
    let mut heights = Vec::with_capacity(spec.panels.len());
    for p in &spec.panels {
        heights.push((p.height * opt.row_height).max(opt.min_panel_height));
    }
    let panels_h: f64 = heights.iter().map(|h| h + opt.title_height + opt.panel_gap).sum();
    // An empty spec still gets one bare frame.
    let empty_h = if spec.panels.is_empty() { opt.min_panel_height + opt.panel_gap } else { 0.0 };
    let legend_top = opt.title_height + panels_h + empty_h;
    let total_h = legend_top + opt.legend_row * (spec.legend.len() as f64 + 1.0);

    let mut s = String::new();
    let _ = writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" data-kind=\"{}\" font-family=\"sans-serif\" font-size=\"{}\">",
        num(opt.width),
        num(total_h),
        num(opt.width),
        num(total_h),
        spec.kind.name(),
        num(opt.font_size)
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#FFFFFF\"/>", num(opt.width), num(total_h));
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" font-size=\"{}\">{}</text>", num(opt.margin_left), num(opt.title_height * 0.6), num(opt.font_size * 1.3), escape(&spec.title));

    let mut top = opt.title_height;
    if spec.panels.is_empty() {
        let _ = writeln!(
            s,
            "<g data-role=\"AXES\" id=\"p0-axes\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#000000\"/></g>",
            num(opt.margin_left),
            num(top + opt.panel_gap / 2.0),
            num(plot_w),
            num(opt.min_panel_height)
        );
    }
    for (pi, (panel, h)) in spec.panels.iter().zip(&heights).enumerate() {
        let frame = Frame { panel, left: opt.margin_left, top: top + opt.title_height, w: plot_w, h: *h };
        let _ = writeln!(s, "<g data-role=\"PANEL\" id=\"p{pi}\">");
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" font-weight=\"bold\">{}</text>", num(frame.left), num(top + opt.title_height * 0.7), escape(&panel.title));
        axes(&mut s, &frame, pi, opt);
        for r in &panel.rows {
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>",
                num(frame.left - 6.0),
                num(frame.py(r.y)),
                escape(&r.text)
            );
        }
        for (mi, m) in panel.marks.iter().enumerate() {
            let _ = writeln!(
                s,
                "<g data-role=\"{}\" data-source=\"{}\" id=\"p{pi}-m{mi}\">{}</g>",
                m.kind.name(),
                escape(&m.source),
                mark_body(m, &frame, opt)
            );
        }
        let _ = writeln!(s, "</g>");
        top += opt.title_height + h + opt.panel_gap;
    }

    legend(&mut s, &spec.legend, legend_top, opt);
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, f: &Frame, pi: usize, opt: &RenderOptions) {
    let bottom = f.top + f.h;
    let _ = write!(
        s,
        "<g data-role=\"AXES\" id=\"p{pi}-axes\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#000000\"/>",
        num(f.left),
        num(f.top),
        num(f.w),
        num(f.h)
    );
    for t in &f.panel.x.ticks {
        let x = f.px(*t);
        let _ = write!(
            s,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#000000\"/><text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\">{4}</text>",
            num(x),
            num(bottom),
            num(bottom + 4.0),
            num(bottom + 4.0 + opt.font_size),
            tick_label(*t)
        );
    }
    if f.panel.rows.is_empty() {
        for t in &f.panel.y.ticks {
            let y = f.py(*t);
            let _ = write!(
                s,
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#000000\"/><text x=\"{3}\" y=\"{1}\" text-anchor=\"end\" dominant-baseline=\"middle\">{4}</text>",
                num(f.left - 4.0),
                num(y),
                num(f.left),
                num(f.left - 6.0),
                tick_label(*t)
            );
        }
    }
    if !f.panel.x.label.is_empty() {
        let _ = write!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            num(f.left + f.w / 2.0),
            num(bottom + 8.0 + 2.0 * opt.font_size),
            escape(&f.panel.x.label)
        );
    }
    let _ = writeln!(s, "</g>");
}

fn circle(cx: f64, cy: f64, r: f64, paint: &str) -> String {
    format!("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" {paint}/>", num(cx), num(cy), num(r))
}

fn mark_body(m: &Mark, f: &Frame, opt: &RenderOptions) -> String {
    let p = paint(&m.style);
    let stroke = format!("stroke=\"{}\" fill=\"none\"", m.style.colour.hex());
    let r0 = opt.base_radius;
    match (&m.kind, &m.geometry) {
        (MarkKind::TrialStartTick, Geometry::Point { x, y }) => {
            let (cx, cy) = (f.px(*x), f.py(*y));
            format!("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" {stroke}/>", num(cx), num(cy - 2.0 * r0), num(cy + 2.0 * r0))
        }
        (MarkKind::TrialStartSquare, Geometry::Point { x, y }) => {
            // Area proportional to patients randomized; 100 patients → r0.
            let side = r0 * math::sqrt(m.magnitude.unwrap_or(100.0).max(0.0) / 100.0);
            let (cx, cy) = (f.px(*x), f.py(*y));
            format!("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" {p}/>", num(cx - side / 2.0), num(cy - side / 2.0), num(side), num(side))
        }
        (MarkKind::FinalCross, Geometry::Point { x, y }) => {
            let (cx, cy) = (f.px(*x), f.py(*y));
            format!(
                "<path d=\"M{} {}L{} {}M{} {}L{} {}\" {stroke}/>",
                num(cx - r0),
                num(cy - r0),
                num(cx + r0),
                num(cy + r0),
                num(cx - r0),
                num(cy + r0),
                num(cx + r0),
                num(cy - r0)
            )
        }
        (MarkKind::MaturityCirclePair, Geometry::Point { x, y }) => {
            let (cx, cy) = (f.px(*x), f.py(*y));
            let (ra, rb) = (opt.radius(m.size_bin.as_ref()), opt.radius(m.pair_bin.as_ref()));
            let red = paint(&Style { colour: super::Colour::Red, ..m.style });
            format!("{}{}", circle(cx - ra, cy, ra, &p), circle(cx + rb, cy, rb, &red))
        }
        (MarkKind::ExtremePoint, Geometry::Point { x, y }) => circle(f.px(*x), f.py(*y), r0 * 0.5, &p),
        (_, Geometry::Point { x, y }) => circle(f.px(*x), f.py(*y), opt.radius(m.size_bin.as_ref()), &p),
        (_, Geometry::Segment { x0, y0, x1, y1 }) => format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {stroke}/>",
            num(f.px(*x0)),
            num(f.py(*y0)),
            num(f.px(*x1)),
            num(f.py(*y1))
        ),
        (_, Geometry::Ridge { baseline, .. }) => {
            let pts = m.geometry.points();
            closed_path(&pts, f, |&(x, _)| (x, *baseline), &p)
        }
        (_, Geometry::HalfViolin { center, .. }) => {
            let pts = m.geometry.points();
            closed_path(&pts, f, |&(_, v)| (*center, v), &p)
        }
        (_, Geometry::Box { center, width, side, q1, median, q3 }) => {
            let x1 = if *side == Side::Left { center - width } else { center + width };
            let (a, b) = (f.px(center.min(x1)), f.px(center.max(x1)));
            let (t, u) = (f.py(*q3).min(f.py(*q1)), f.py(*q3).max(f.py(*q1)));
            let my = f.py(*median);
            format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#FFFFFF\" fill-opacity=\"0.8\" stroke=\"{}\"/><line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\"/>",
                num(a),
                num(t),
                num(b - a),
                num(u - t),
                m.style.colour.hex(),
                num(a),
                num(my),
                num(b),
                num(my),
                m.style.colour.hex()
            )
        }
        (_, Geometry::Text { x, y, text }) => {
            format!("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>", num(f.px(*x)), num(f.py(*y)), m.style.colour.hex(), escape(text))
        }
    }
}

/// Outline through `pts`, then back along the base line obtained by
/// projecting each point with `base`.
fn closed_path(pts: &[(f64, f64)], f: &Frame, base: impl Fn(&(f64, f64)) -> (f64, f64), paint: &str) -> String {
    if pts.is_empty() {
        return format!("<path d=\"\" {paint}/>");
    }
    let mut d = String::new();
    for (k, q) in pts.iter().enumerate() {
        let _ = write!(d, "{}{}", if k == 0 { "M" } else { "L" }, f.pt(*q).replace(',', " "));
    }
    for q in pts.iter().rev() {
        let _ = write!(d, "L{}", f.pt(base(q)).replace(',', " "));
    }
    d.push('Z');
    format!("<path d=\"{d}\" {paint}/>")
}

fn legend(s: &mut String, entries: &[LegendEntry], top: f64, opt: &RenderOptions) {
    let _ = writeln!(s, "<g data-role=\"LEGEND\" id=\"legend\">");
    for (k, e) in entries.iter().enumerate() {
        let y = top + opt.legend_row * (k as f64 + 0.5);
        let x = opt.margin_left;
        let p = paint(&e.style);
        let key = match e.kind {
            MarkKind::DurationLine | MarkKind::DensityCurve => format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-opacity=\"{}\"/>",
                num(x - 10.0),
                num(y),
                num(x + 10.0),
                num(y),
                e.style.colour.hex(),
                e.style.shade.opacity()
            ),
            MarkKind::TrialStartTick => format!("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{3}\"/>", num(x), num(y - 5.0), num(y + 5.0), e.style.colour.hex()),
            MarkKind::FinalCross => format!("<path d=\"M{} {}L{} {}M{} {}L{} {}\" stroke=\"{}\" fill=\"none\"/>", num(x - 3.0), num(y - 3.0), num(x + 3.0), num(y + 3.0), num(x - 3.0), num(y + 3.0), num(x + 3.0), num(y - 3.0), e.style.colour.hex()),
            MarkKind::TrialStartSquare | MarkKind::ViolinHalf => format!("<rect x=\"{}\" y=\"{}\" width=\"8\" height=\"8\" {p}/>", num(x - 4.0), num(y - 4.0)),
            MarkKind::ExtremePoint => circle(x, y, opt.base_radius * 0.5, &p),
            _ => circle(x, y, opt.radius(e.size_bin.as_ref()), &p),
        };
        let _ = writeln!(s, "<g data-role=\"LEGEND_ENTRY\" id=\"legend-{k}\">{key}<text x=\"{}\" y=\"{}\" dominant-baseline=\"middle\">{}</text></g>", num(x + 16.0), num(y), escape(&e.text));
    }
    let _ = writeln!(s, "</g>");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::{assign_bin, BinKey};
    use crate::viz::PlotKind;

    #[test]
    fn numbers_are_two_decimals_without_negative_zero() {
        assert_eq!(num(-0.001), "0.00");
        assert_eq!(num(1.005_1), "1.01");
        assert_eq!(num(-2.5), "-2.50");
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn radius_ramp() {
        let o = RenderOptions { base_radius: 2.0, ..RenderOptions::default() };
        // Maturity: larger is better, bin 5 is the biggest.
        assert!((o.radius(Some(&assign_bin(0.8, BinKey::MaturityOs))) - 2.0 * 3.4).abs() < 1e-12);
        // CI width: smaller is better, bin 1 is the biggest.
        assert!((o.radius(Some(&assign_bin(0.1, BinKey::CiWidth))) - 2.0 * 2.8).abs() < 1e-12);
        assert!((o.radius(Some(&assign_bin(0.9, BinKey::CiWidth))) - 2.0).abs() < 1e-12);
        assert_eq!(o.radius(None), 2.0);
    }

    #[test]
    fn empty_spec_has_frame_and_legend() {
        let svg = render_svg(&PlotSpec::empty(PlotKind::Timeline, "t"));
        assert!(svg.contains("data-role=\"AXES\""));
        assert!(svg.contains("data-role=\"LEGEND\""));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}

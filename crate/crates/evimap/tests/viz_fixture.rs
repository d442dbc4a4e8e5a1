use chrono::Datelike;
use evimap::fixture;
use evimap_core::viz::{
    build_ridgeline, build_timeline, render_svg, Geometry, Mark, MarkKind, RidgeOrder, TimelineVariant,
};
use evimap_core::{Indication, Outcome};

fn baseline(m: &Mark) -> f64 {
    match &m.geometry {
        Geometry::Ridge { baseline, .. } => *baseline,
        g => panic!("not a ridge: {g:?}"),
    }
}

fn report_markers(spec: &evimap_core::viz::PlotSpec) -> usize {
    spec.marks().filter(|m| m.kind.is_report_marker()).count()
}

#[test]
fn every_variant_has_one_marker_per_report() {
    let ds = fixture();
    for v in TimelineVariant::ALL {
        let spec = build_timeline(&ds, v);
        let scoped = ds.reports().iter().filter(|r| v.outcome_scope().map_or(true, |o| o == r.outcome)).count();
        assert_eq!(report_markers(&spec), scoped, "{}", v.name());
        assert_eq!(spec.marks().filter(|m| m.kind == MarkKind::DurationLine).count(), 45, "{}", v.name());
    }
}

#[test]
fn nsclc_panel_spans_eighteen_years() {
    let ds = fixture();
    let spec = build_timeline(&ds, TimelineVariant::Plain);
    let p = spec.panel(Indication::Nsclc).unwrap();
    let (a, b) = p.extent.unwrap();
    assert_eq!((a.year(), b.year()), (2001, 2019));
    assert_eq!(p.rows.len(), 6);
}

#[test]
fn maturity_pairs_only_where_events_reported() {
    let ds = fixture();
    let spec = build_timeline(&ds, TimelineVariant::MaturityOs);
    let p = spec.panel(Indication::Nsclc).unwrap();
    let mut pairs: Vec<&str> = p.marks_of(MarkKind::MaturityCirclePair).map(|m| m.source.as_str()).collect();
    pairs.sort();
    assert_eq!(pairs, ["AVAiL", "E4599"]);
    for m in p.marks_of(MarkKind::MaturityCirclePair) {
        assert!(m.size_bin.is_some() && m.pair_bin.is_some());
    }
}

#[test]
fn panels_follow_first_trial_start() {
    let ds = fixture();
    let spec = build_timeline(&ds, TimelineVariant::Plain);
    let firsts: Vec<_> = spec.panels.iter().map(|p| p.extent.unwrap().0).collect();
    assert!(firsts.windows(2).all(|w| w[0] <= w[1]), "{firsts:?}");
}

#[test]
fn by_year_places_no16966_a_year_apart() {
    let ds = fixture();
    let spec = build_ridgeline(&ds, RidgeOrder::ByYear);
    let col = spec.panel(Indication::Col).unwrap();
    let curves: Vec<&Mark> = col.marks_of(MarkKind::DensityCurve).filter(|m| m.source == "NO16966").collect();
    assert_eq!(curves.len(), 2);
    let year = |o: Outcome| baseline(curves.iter().find(|m| m.outcome == Some(o)).unwrap()).floor();
    assert_eq!(year(Outcome::Os) - year(Outcome::Pfs), 1.0);
}

#[test]
fn by_effect_rows_descend_by_os() {
    let ds = fixture();
    let spec = build_ridgeline(&ds, RidgeOrder::ByEffect);
    for p in &spec.panels {
        let mut os: Vec<(f64, f64)> = p
            .marks_of(MarkKind::DensityCurve)
            .filter(|m| m.outcome == Some(Outcome::Os))
            .map(|m| {
                let r = ds
                    .reports()
                    .iter()
                    .find(|r| r.is_final && r.outcome == Outcome::Os && r.key().label() == m.source)
                    .unwrap();
                (baseline(m), r.hr.ln())
            })
            .collect();
        // Top row first.
        os.sort_by(|a, b| b.0.total_cmp(&a.0));
        assert!(os.windows(2).all(|w| w[0].1 >= w[1].1), "{}: {os:?}", p.title);
    }
}

#[test]
fn by_effect_is_a_permutation_of_by_year() {
    let ds = fixture();
    let key = |o: RidgeOrder| {
        let mut v: Vec<(String, Option<Outcome>, Vec<u64>)> = build_ridgeline(&ds, o)
            .marks()
            .map(|m| (m.source.clone(), m.outcome, m.curve().unwrap().xs.iter().map(|x| x.to_bits()).collect()))
            .collect();
        v.sort();
        v
    };
    assert_eq!(key(RidgeOrder::ByYear), key(RidgeOrder::ByEffect));
}

#[test]
fn svg_counts_and_determinism() {
    let ds = fixture();
    let spec = build_timeline(&ds, TimelineVariant::Uncertainty);
    let a = render_svg(&spec);
    assert_eq!(a, render_svg(&spec));
    assert_eq!(a.matches("data-role=\"DURATION_LINE\"").count(), 45);
    assert!(a.starts_with("<svg") || a.starts_with("<?xml"));
}

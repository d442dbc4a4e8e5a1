use evimap_core::dataset::report_order;
use evimap_core::viz::{kde, normal_density};
use evimap_core::{
    assign_bin, effect_from_hr_ci, maturity, run_synthesis, BinIndex, BinKey, Datapoint, EffectEstimate, Indication,
    McmcConfig, Model, ModelSpec, Outcome, OutcomeReport,
};
use proptest::prelude::*;

const KEYS: [BinKey; 4] = [BinKey::MaturityOs, BinKey::MaturityPfs, BinKey::CiWidth, BinKey::RelUnc];

fn rank(b: BinIndex) -> u8 {
    match b {
        BinIndex::Bin(i) => i,
        BinIndex::Extreme => u8::MAX,
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn interval_round_trip(ln_hr in -2.0f64..2.0, se in 0.01f64..1.5) {
        let e = EffectEstimate { ln_hr, se };
        let (l, u) = e.ci();
        let back = effect_from_hr_ci(e.hr(), l, u).unwrap();
        prop_assert!(rel_close(back.ln_hr, ln_hr, 1e-9) || (back.ln_hr - ln_hr).abs() < 1e-12);
        prop_assert!(rel_close(back.se, se, 1e-9));
    }

    #[test]
    fn bins_monotone(a in 0.0f64..3.0, b in 0.0f64..3.0, k in 0usize..4) {
        let key = KEYS[k];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rank(assign_bin(lo, key).index) <= rank(assign_bin(hi, key).index));
    }

    #[test]
    fn bins_in_range(v in -1.0f64..10.0, k in 0usize..4) {
        let key = KEYS[k];
        match assign_bin(v, key).index {
            BinIndex::Bin(i) => prop_assert!(i >= 1 && i <= key.n_bins()),
            BinIndex::Extreme => prop_assert!(key.extreme_above().is_some_and(|t| v > t)),
        }
    }

    #[test]
    fn maturity_monotone(n in 1u32..5000, a in 0u32..5000, b in 0u32..5000) {
        let (a, b) = (a.min(n), b.min(n));
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(maturity(lo, n) <= maturity(hi, n));
        prop_assert!((0.0..=1.0).contains(&maturity(hi, n)));
    }

    #[test]
    fn report_order_total(days in prop::collection::vec((0i64..2000, 0u8..4, any::<bool>()), 2..20)) {
        let base = chrono::NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let mut reps: Vec<OutcomeReport> = days
            .iter()
            .map(|&(d, t, os)| OutcomeReport {
                trial_id: format!("T{t}"),
                subtrial_id: None,
                outcome: if os { Outcome::Os } else { Outcome::Pfs },
                cutoff_date: base + chrono::Duration::days(d),
                hr: 0.8,
                ci_lower: 0.6,
                ci_upper: 1.0,
                events_control: None,
                events_comparator: None,
                is_final: false,
                assessment_method: None,
            })
            .collect();
        reps.sort_by(report_order);
        for w in reps.windows(2) {
            prop_assert!(report_order(&w[0], &w[1]).is_le());
            prop_assert!(w[0].cutoff_date <= w[1].cutoff_date);
        }
        let mut again = reps.clone();
        again.reverse();
        again.sort_by(report_order);
        prop_assert_eq!(again, reps);
    }

    #[test]
    fn kde_integrates_to_one(xs in prop::collection::vec(-3.0f64..3.0, 30..200)) {
        let c = kde(&xs, 256).unwrap();
        prop_assert!((c.integral() - 1.0).abs() < 0.01, "integral {}", c.integral());
        prop_assert!(c.ys.iter().all(|y| *y >= 0.0));
    }
}

#[test]
fn normal_density_integral_and_peak() {
    let c = normal_density(-0.2, 0.15, 401);
    assert!((c.integral() - 1.0).abs() < 1e-3);
    assert!((c.peak().0 + 0.2).abs() < 0.01);
}

#[test]
fn reference_intervals() {
    // 0.66 (0.54, 0.81): ln(0.66) and ln(1.5)/(2z) from an independent calculator.
    let e = effect_from_hr_ci(0.66, 0.54, 0.81).unwrap();
    assert!((e.ln_hr - (-0.415_515_443_961_666)).abs() < 1e-12);
    assert!((e.se - 0.103_436_876_419).abs() < 1e-11);
    assert!(effect_from_hr_ci(0.9, 1.0, 1.2).is_err());
    assert!(effect_from_hr_ci(1.0, 1.0, 1.0).is_err());
}

fn small_cfg(seed: u64) -> McmcConfig {
    McmcConfig { chains: 2, burn_in: 300, samples_per_chain: 600, thin: 1, seed }
}

fn toy_data() -> Vec<Datapoint> {
    vec![
        Datapoint::new(-0.4, 0.2, Indication::Col, "a"),
        Datapoint::new(-0.2, 0.15, Indication::Col, "b"),
        Datapoint::new(-0.1, 0.1, Indication::Bre, "c"),
        Datapoint::new(0.1, 0.3, Indication::Nsclc, "d"),
    ]
}

#[test]
fn synthesis_is_deterministic() {
    for m in Model::ALL {
        let spec = ModelSpec::new(m);
        let a = run_synthesis(&toy_data(), &spec, &small_cfg(11)).unwrap();
        let b = run_synthesis(&toy_data(), &spec, &small_cfg(11)).unwrap();
        let c = run_synthesis(&toy_data(), &spec, &small_cfg(12)).unwrap();
        let s = |r: &evimap_core::SynthesisResult| r.pooled_effect[&Indication::Col].draws.clone();
        assert_eq!(s(&a), s(&b), "{m}");
        assert_ne!(s(&a), s(&c), "{m}");
    }
}

#[test]
fn vague_data_recovers_effect_prior() {
    // With uninformative studies the pooled effect follows its N(0, 1000) prior.
    let data: Vec<Datapoint> = (0..3).map(|i| Datapoint::new(0.0, 1e6, Indication::Col, &format!("s{i}"))).collect();
    let cfg = McmcConfig { chains: 2, burn_in: 500, samples_per_chain: 4000, thin: 1, seed: 3 };
    let r = run_synthesis(&data, &ModelSpec::new(Model::Cp), &cfg).unwrap();
    let sd = r.pooled_effect[&Indication::Col].sd;
    assert!((sd / 1000f64.sqrt() - 1.0).abs() < 0.1, "sd {sd}");
}

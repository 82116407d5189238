use proptest::prelude::*;

use subphi::bounds::{
    check_admissible, max_admissible_cn, min_certified_delta, tail_probability_bound, AccuracyTarget,
};
use subphi::karhunen_loeve::{build_kl_model, kl_path, KernelSpec, KlOptions};
use subphi::orlicz::OrliczSpec;
use subphi::plan::Planned;
use subphi::quadrature::QuadratureGrid;
use subphi::series::{choose_n, cn_theorem7, CoefficientTerm, SeriesDecomposition, SeriesTail};
use subphi::subgaussian::SourceKind;

fn spec_strategy() -> impl Strategy<Value = OrliczSpec> {
    prop_oneof![
        (1.05f64..=2.0).prop_map(|g| OrliczSpec::power(g).unwrap()),
        (2.1f64..6.0).prop_map(|g| OrliczSpec::piecewise(g).unwrap()),
    ]
}

fn sine_series(terms: usize) -> SeriesDecomposition {
    let grid = QuadratureGrid::composite(1.0, 32, 8).unwrap();
    let terms = (1..=terms)
        .map(|k| {
            let a = grid.nodes.iter().map(|t| (k as f64 * std::f64::consts::PI * t).sin() / (k * k) as f64).collect();
            CoefficientTerm::exact(a, 1.0).unwrap()
        })
        .collect();
    SeriesDecomposition::new(grid, terms, SeriesTail::FiniteTerms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn first_condition_caps_the_tail_bound(
        spec in spec_strategy(),
        p in 1.0f64..4.0,
        delta in 0.01f64..10.0,
        alpha in 1e-4f64..0.5,
        frac in 0.01f64..1.0,
    ) {
        let target = AccuracyTarget::new(p, delta, alpha, 1.0).unwrap();
        let c_max = max_admissible_cn(&target, &spec).unwrap();
        let c = frac * c_max;
        let adm = check_admissible(c, &target, &spec).unwrap();
        prop_assert!(adm.generic.eq1_ok);
        prop_assert!(tail_probability_bound(c, &target, &spec) <= alpha * (1.0 + 1e-9));
    }

    #[test]
    fn certified_delta_is_the_smallest_passing_delta(
        spec in spec_strategy(),
        p in 1.0f64..4.0,
        c in 1e-4f64..1.0,
        alpha in 1e-4f64..0.5,
    ) {
        let delta = min_certified_delta(c, alpha, p, &spec).unwrap();
        let at = AccuracyTarget::new(p, delta, alpha, 1.0).unwrap();
        prop_assert!(check_admissible(c, &at, &spec).unwrap().passed());
        prop_assert!(tail_probability_bound(c, &at, &spec) <= alpha * (1.0 + 1e-9));
        let below = at.with_delta(delta * (1.0 - 1e-6));
        prop_assert!(!check_admissible(c, &below, &spec).unwrap().passed());
    }

    #[test]
    fn exact_series_cost_falls_with_more_terms(p in 1.0f64..4.0, n in 0usize..7) {
        let dec = sine_series(8);
        let a = cn_theorem7(&dec, n, p).unwrap();
        let b = cn_theorem7(&dec, n + 1, p).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn planned_series_level_is_minimal(delta in 0.005f64..0.5, alpha in 0.01f64..0.2) {
        let dec = sine_series(12);
        let spec = OrliczSpec::gaussian();
        let target = AccuracyTarget::new(2.0, delta, alpha, 1.0).unwrap();
        if let Planned::Feasible(plan) = choose_n(&dec, &target, &spec, 12).unwrap() {
            prop_assert!(plan.report.passed());
            for n in 0..plan.n {
                let c = cn_theorem7(&dec, n, 2.0).unwrap();
                prop_assert!(!check_admissible(c, &target, &spec).unwrap().passed(), "N = {n} already passes");
            }
        }
    }

    #[test]
    fn model_paths_are_linear_in_the_draws(
        xi in proptest::collection::vec(-3.0f64..3.0, 4),
        eta in proptest::collection::vec(-3.0f64..3.0, 4),
        s in -2.0f64..2.0,
    ) {
        let k = KernelSpec::brownian(1.0).unwrap();
        let target = AccuracyTarget::new(2.0, 0.35, 0.05, 1.0).unwrap();
        let opts = KlOptions { n_nodes: 32, modes: 4, ..KlOptions::default() };
        let model = build_kl_model(&k, &OrliczSpec::gaussian(), &SourceKind::Gaussian { sigma: 1.0 }, &target, &opts)
            .unwrap()
            .feasible()
            .unwrap();
        let n = model.plan.n;
        let combo: Vec<f64> = xi.iter().zip(&eta).map(|(x, e)| x + s * e).collect();
        let lhs = kl_path(&model.eigen, n, &combo);
        let (a, b) = (kl_path(&model.eigen, n, &xi), kl_path(&model.eigen, n, &eta));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a[i] + s * b[i])).abs() <= 1e-12 * (1.0 + lhs[i].abs()));
        }
    }
}

#[test]
fn brownian_plan_level_matches_mercer_arithmetic() {
    // smallest N with 1/2 − Σ_{k≤N} 1/((k − ½)π)² below δ/(2 ln(2/α)) for p = 2, φ = x²/2
    let (delta, alpha) = (0.35f64, 0.05f64);
    let cap = delta / (2.0 * (2.0 / alpha).ln());
    let mut tail = 0.5;
    let mut expected = 0;
    while tail > cap {
        expected += 1;
        tail -= 1.0 / ((expected as f64 - 0.5) * std::f64::consts::PI).powi(2);
    }
    let k = KernelSpec::brownian(1.0).unwrap();
    let target = AccuracyTarget::new(2.0, delta, alpha, 1.0).unwrap();
    let model = build_kl_model(&k, &OrliczSpec::gaussian(), &SourceKind::Gaussian { sigma: 1.0 }, &target, &KlOptions::default())
        .unwrap()
        .feasible()
        .unwrap();
    assert_eq!(model.plan.n, expected);
}

mod common;

use apf_core::formulation::{
    evaluate_item, feasibility, parse_formulation, print_formulation, Aggregator, Band, EvalOptions, Expr, Formulation,
    FormulationError, FormulationItem, ItemKind, Metric,
};
use apf_core::instance::TestInstance;
use apf_core::{Formulation32, TestInstance32};
use common::oracles::{brute_aggregate, random_formulation, sig6};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn eff() -> Metric {
    Metric::new("radiation_efficiency").unwrap()
}

#[test]
fn parse_maximize_compiles_to_negation() {
    let f: Formulation<f64> =
        parse_formulation("objective maximize mean(radiation_efficiency in [0.95, 1.08])").unwrap();
    assert_eq!(f.n_objectives(), 1);
    assert_eq!(
        f.items()[0].expr,
        Expr::neg(Expr::agg(Aggregator::Mean, eff(), Band::new(0.95, 1.08).unwrap()))
    );
}

#[test]
fn parse_ge_constraint_is_limit_minus_aggregate() {
    let f: Formulation<f64> =
        parse_formulation("constraint min(radiation_efficiency in [0.95, 1.08]) >= -4.49").unwrap();
    let item = &f.items()[0];
    assert_eq!(item.kind, ItemKind::Constraint);
    assert_eq!(
        item.expr,
        Expr::sub(
            Expr::Const(-4.49),
            Expr::agg(Aggregator::Min, eff(), Band::new(0.95, 1.08).unwrap())
        )
    );
}

#[test]
fn inverted_band_is_an_invariant_error() {
    let err = parse_formulation::<f64>("constraint max(x in [2, 1]) <= 0").unwrap_err();
    assert!(matches!(err, FormulationError::Invariant { .. }), "{err:?}");
}

#[test]
fn constant_prints_canonically() {
    let f = Formulation::new(
        "",
        vec![FormulationItem::at_most(
            "c1",
            Aggregator::Max,
            eff(),
            Band::new(0.8, 0.92).unwrap(),
            -4.490000,
        )],
    )
    .unwrap();
    assert_eq!(
        print_formulation(&f),
        "c1: constraint max(radiation_efficiency in [0.8, 0.92]) <= -4.49"
    );
}

#[test]
fn item_order_is_preserved() {
    let a = "objective maximize mean(eff in [0, 1])\nconstraint min(eff in [0, 1]) >= -3";
    let b = "constraint min(eff in [0, 1]) >= -3\nobjective maximize mean(eff in [0, 1])";
    let fa: Formulation<f64> = parse_formulation(a).unwrap();
    let fb: Formulation<f64> = parse_formulation(b).unwrap();
    assert_ne!(print_formulation(&fa), print_formulation(&fb));
}

#[test]
fn random_formulations_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let f = random_formulation(&mut rng);
        let first = print_formulation(&f);
        let parsed: Formulation<f64> = parse_formulation(&first).unwrap_or_else(|e| panic!("{e}\n{first}"));
        assert_eq!(parsed, f, "{first}");
        assert_eq!(print_formulation(&parsed), first);
    }
}

#[test]
fn f32_and_f64_agree_on_simple_input() {
    let text = "objective maximize mean(eff in [0.95, 1.08])\nconstraint min(eff in [0.95, 1.08]) >= -4.49";
    let f64f: Formulation<f64> = parse_formulation(text).unwrap();
    let f32f: Formulation32 = parse_formulation(text).unwrap();
    assert_eq!(print_formulation(&f64f), print_formulation(&f32f));
    let pts = [(0.9, -9.0), (0.95, -3.0), (1.0, -2.0), (1.08, -4.0)];
    let i64 = TestInstance::new("a", vec![], pts.to_vec()).unwrap();
    let i32 = TestInstance32::new("a", vec![], pts.iter().map(|&(z, v)| (z as f32, v as f32)).collect()).unwrap();
    let opts = EvalOptions::default();
    for (a, b) in f64f.items().iter().zip(f32f.items()) {
        let x = evaluate_item(a, &i64, &opts).unwrap();
        let y = evaluate_item(b, &i32, &opts).unwrap();
        assert!((x - y as f64).abs() < 1e-5);
    }
}

fn curve_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec(-50.0f64..0.0, 2..40).prop_map(|vals| {
        vals.into_iter()
            .enumerate()
            .map(|(i, v)| (i as f64 * 0.025, v))
            .collect()
    })
}

fn op_strategy() -> impl Strategy<Value = Aggregator> {
    prop_oneof![Just(Aggregator::Min), Just(Aggregator::Max), Just(Aggregator::Mean)]
}

proptest! {
    #[test]
    fn round_trip_from_seed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_formulation(&mut rng);
        let text = print_formulation(&f);
        let parsed: Formulation<f64> = parse_formulation(&text).unwrap();
        prop_assert_eq!(&parsed, &f);
    }

    #[test]
    fn aggregation_matches_filter_and_fold(
        samples in curve_strategy(),
        op in op_strategy(),
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let (lo, hi) = (a.min(b), a.max(b) + 1e-3);
        let inst = TestInstance::new("t", vec![], samples.clone()).unwrap();
        let item = FormulationItem::minimize("o", op, eff(), Band::new(lo, hi).unwrap());
        let got = evaluate_item(&item, &inst, &EvalOptions::default());
        match brute_aggregate(op, &samples, lo, hi) {
            Some(expected) => prop_assert!((got.unwrap() - expected).abs() <= 1e-9 * expected.abs().max(1.0)),
            None => prop_assert!(got.is_err()),
        }
    }

    #[test]
    fn maximize_prefers_higher_mean(
        s1 in curve_strategy(),
        shift in 0.01f64..10.0,
    ) {
        let s2: Vec<(f64, f64)> = s1.iter().map(|&(z, v)| (z, v - shift)).collect();
        let c1 = TestInstance::new("c1", vec![], s1).unwrap();
        let c2 = TestInstance::new("c2", vec![], s2).unwrap();
        let band = Band::new(0.0, 1.0).unwrap();
        let obj = FormulationItem::maximize("o", Aggregator::Mean, eff(), band);
        let opts = EvalOptions::default();
        prop_assert!(evaluate_item(&obj, &c1, &opts).unwrap() < evaluate_item(&obj, &c2, &opts).unwrap());
    }

    #[test]
    fn relaxing_thresholds_keeps_feasible(
        samples in curve_strategy(),
        op in op_strategy(),
        ge_limit in -60.0f64..0.0,
        le_limit in -60.0f64..0.0,
        relax in 0.0f64..20.0,
    ) {
        let inst = TestInstance::new("t", vec![], samples).unwrap();
        let band = Band::new(0.0, 1.0).unwrap();
        let build = |ge: f64, le: f64| {
            Formulation::new("", vec![
                FormulationItem::at_least("c1", op, eff(), band, ge),
                FormulationItem::at_most("c2", op, eff(), band, le),
            ]).unwrap()
        };
        let opts = EvalOptions::default();
        let tight = feasibility(&build(ge_limit, le_limit), &inst, &opts).unwrap();
        let loose = feasibility(&build(ge_limit - relax, le_limit + relax), &inst, &opts).unwrap();
        if tight.feasible {
            prop_assert!(loose.feasible);
        }
        prop_assert!(loose.violation <= tight.violation + 1e-12);
    }

    #[test]
    fn violation_sign_properties(
        samples in curve_strategy(),
        limits in prop::collection::vec(-60.0f64..0.0, 1..4),
    ) {
        let inst = TestInstance::new("t", vec![], samples).unwrap();
        let band = Band::new(0.0, 1.0).unwrap();
        let items = limits.iter().enumerate().map(|(k, &l)| {
            FormulationItem::at_most(format!("c{k}"), Aggregator::Max, eff(), band, sig6(l))
        }).collect();
        let f = Formulation::new("", items).unwrap();
        let feas = feasibility(&f, &inst, &EvalOptions::default()).unwrap();
        prop_assert!(feas.violation >= 0.0);
        if feas.feasible {
            prop_assert_eq!(feas.violation, 0.0);
        }
        if feas.violation > 0.0 {
            prop_assert!(!feas.feasible);
        }
    }
}

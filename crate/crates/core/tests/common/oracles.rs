//! Independent reference implementations shared by the core tests and the
//! acceptance suite. Nothing here calls the evaluator or the ranking code.

#![allow(dead_code)]

use apf_core::formulation::{Aggregator, Band, Expr, Formulation, FormulationItem, ItemKind, Metric};
use apf_core::instance::TestInstance;
use rand::seq::SliceRandom;
use rand::Rng;

/// Direct filter + fold over the samples inside `[lo, hi]`.
pub fn brute_aggregate(op: Aggregator, samples: &[(f64, f64)], lo: f64, hi: f64) -> Option<f64> {
    let vals: Vec<f64> = samples
        .iter()
        .filter(|(z, _)| lo <= *z && *z <= hi)
        .map(|(_, v)| *v)
        .collect();
    if vals.is_empty() {
        return None;
    }
    Some(match op {
        Aggregator::Min => vals.iter().cloned().fold(f64::INFINITY, f64::min),
        Aggregator::Max => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        Aggregator::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
    })
}

pub fn brute_eval(e: &Expr<f64>, samples: &[(f64, f64)]) -> f64 {
    match e {
        Expr::Const(c) => *c,
        Expr::Neg(x) => -brute_eval(x, samples),
        Expr::Sub(a, b) => brute_eval(a, samples) - brute_eval(b, samples),
        Expr::Agg { op, band, .. } => brute_aggregate(*op, samples, band.lo(), band.hi()).expect("band has samples"),
    }
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Fractional ranks by brute force: feasible before infeasible, feasible ones
/// by repeatedly peeling the non-dominated set, infeasible ones by total
/// violation. Each rank is 1 + #better + #tied/2.
pub fn brute_ranks(f: &Formulation<f64>, insts: &[TestInstance<f64>]) -> Vec<f64> {
    let n = insts.len();
    let objs: Vec<Vec<f64>> = insts
        .iter()
        .map(|i| f.objectives().map(|o| brute_eval(&o.expr, i.samples())).collect())
        .collect();
    let residuals: Vec<Vec<f64>> = insts
        .iter()
        .map(|i| f.constraints().map(|c| brute_eval(&c.expr, i.samples())).collect())
        .collect();
    let feasible: Vec<bool> = residuals.iter().map(|g| g.iter().all(|&x| x < 0.0)).collect();
    let violation: Vec<f64> = residuals.iter().map(|g| g.iter().map(|&x| x.max(0.0)).sum()).collect();

    let mut front = vec![usize::MAX; n];
    let mut remaining: Vec<usize> = (0..n).filter(|&i| feasible[i]).collect();
    let mut k = 0;
    while !remaining.is_empty() {
        let layer: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dominates(&objs[j], &objs[i])))
            .collect();
        for &i in &layer {
            front[i] = k;
        }
        remaining.retain(|i| !layer.contains(i));
        k += 1;
    }

    let key = |i: usize| -> (u8, f64) {
        if feasible[i] {
            (0, front[i] as f64)
        } else {
            (1, violation[i])
        }
    };
    (0..n)
        .map(|i| {
            let better = (0..n).filter(|&j| key(j) < key(i)).count();
            let tied = (0..n).filter(|&j| j != i && key(j) == key(i)).count();
            1.0 + better as f64 + tied as f64 / 2.0
        })
        .collect()
}

/// Closed-form Spearman for tie-free rank vectors.
pub fn spearman_closed_form(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

const GRID: usize = 10;

fn metric() -> Metric {
    Metric::new("eff").unwrap()
}

fn random_band(rng: &mut impl Rng) -> Band<f64> {
    let lo = rng.gen_range(0..GRID - 1);
    let hi = rng.gen_range(lo + 1..GRID);
    Band::new(lo as f64, hi as f64).unwrap()
}

fn random_op(rng: &mut impl Rng) -> Aggregator {
    *[Aggregator::Min, Aggregator::Max, Aggregator::Mean]
        .choose(rng)
        .unwrap()
}

/// A small ranking fixture on the integer grid `z = 0..9` with coarse values
/// so that ties, dominance and boundary residuals all occur.
pub fn random_ranking_fixture(
    rng: &mut impl Rng,
    max_instances: usize,
    max_objectives: usize,
    max_constraints: usize,
) -> (Formulation<f64>, Vec<TestInstance<f64>>) {
    let n_inst = rng.gen_range(2..=max_instances);
    let n_obj = rng.gen_range(0..=max_objectives);
    let n_con = if n_obj == 0 {
        rng.gen_range(1..=max_constraints)
    } else {
        rng.gen_range(0..=max_constraints)
    };
    let mut items = Vec::new();
    for k in 0..n_obj {
        let (op, band) = (random_op(rng), random_band(rng));
        items.push(if rng.gen_bool(0.5) {
            FormulationItem::maximize(format!("obj{}", k + 1), op, metric(), band)
        } else {
            FormulationItem::minimize(format!("obj{}", k + 1), op, metric(), band)
        });
    }
    for k in 0..n_con {
        let name = format!("c{}", k + 1);
        let (op, band) = (random_op(rng), random_band(rng));
        let limit = rng.gen_range(-6..=6) as f64 / 2.0;
        items.push(match rng.gen_range(0..3) {
            0 => FormulationItem::at_least(name, op, metric(), band, limit),
            1 => FormulationItem::at_most(name, op, metric(), band, limit),
            _ => FormulationItem::new(
                ItemKind::Constraint,
                name,
                Expr::sub(
                    Expr::agg(op, metric(), band),
                    Expr::agg(random_op(rng), metric(), random_band(rng)),
                ),
            )
            .unwrap(),
        });
    }
    let f = Formulation::new("fixture", items).unwrap();
    let insts = (0..n_inst)
        .map(|i| {
            let samples = (0..GRID)
                .map(|z| (z as f64, rng.gen_range(-6..=6) as f64 / 2.0))
                .collect();
            TestInstance::new(format!("i{i}"), vec![], samples).unwrap()
        })
        .collect();
    (f, insts)
}

/// Rounds to 6 significant digits, the precision of the canonical text.
pub fn sig6(x: f64) -> f64 {
    format!("{x:.5e}").parse().unwrap()
}

fn random_real(rng: &mut impl Rng) -> f64 {
    let mantissa: f64 = rng.gen_range(-9.99999..9.99999);
    let exp = *[-9, -3, -1, 0, 0, 0, 1, 2, 5, 12, 20].choose(rng).unwrap();
    sig6(mantissa * 10f64.powi(exp))
}

fn random_real_band(rng: &mut impl Rng) -> Band<f64> {
    loop {
        let lo = random_real(rng);
        let hi = sig6(lo + lo.abs().max(1e-3) * rng.gen_range(0.01..2.0));
        if let Ok(b) = Band::new(lo, hi) {
            return b;
        }
    }
}

fn random_expr(rng: &mut impl Rng, depth_left: usize, need_agg: bool) -> Expr<f64> {
    let metrics = ["eff", "s11", "gain_db", "radiation_efficiency", "x2"];
    let leaf = depth_left <= 1 || rng.gen_bool(0.35);
    if leaf {
        if need_agg || rng.gen_bool(0.7) {
            Expr::agg(
                random_op(rng),
                Metric::new(*metrics.choose(rng).unwrap()).unwrap(),
                random_real_band(rng),
            )
        } else {
            Expr::Const(random_real(rng))
        }
    } else if rng.gen_bool(0.4) {
        Expr::neg(random_expr(rng, depth_left - 1, need_agg))
    } else {
        let left_agg = need_agg && rng.gen_bool(0.5);
        Expr::sub(
            random_expr(rng, depth_left - 1, left_agg),
            random_expr(rng, depth_left - 1, need_agg && !left_agg),
        )
    }
}

/// A random valid formulation: 1..=6 items, depth up to 8, reals on the
/// 6-significant-digit grid, a mix of explicit and default-style names.
pub fn random_formulation(rng: &mut impl Rng) -> Formulation<f64> {
    let n = rng.gen_range(1..=6);
    let items = (0..n)
        .map(|k| {
            let kind = if rng.gen_bool(0.5) {
                ItemKind::Objective
            } else {
                ItemKind::Constraint
            };
            let depth = rng.gen_range(1..=8);
            let expr = random_expr(rng, depth, true);
            FormulationItem::new(kind, format!("item_{k}"), expr).unwrap()
        })
        .collect();
    Formulation::new("", items).unwrap()
}

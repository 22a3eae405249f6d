use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Aggregator, Expr, Formulation, FormulationItem};
use crate::instance::TestInstance;
use crate::scalar::Scalar;

/// What an aggregation over a band without samples evaluates to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmptyBandPolicy {
    #[default]
    Error,
    /// Aggregate is `0.0`.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub empty_band: EmptyBandPolicy,
    /// A constraint is satisfied iff its residual is `< feasibility_tolerance`.
    pub feasibility_tolerance: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            empty_band: EmptyBandPolicy::Error,
            feasibility_tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no samples fall in band [{lo}, {hi}]")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("item {item} evaluated to a non-finite value")]
    NonFinite { item: String },
}

fn aggregate<T: Scalar>(op: Aggregator, values: impl Iterator<Item = T>) -> Option<T> {
    let mut count = 0usize;
    let mut acc: Option<T> = None;
    for v in values {
        count += 1;
        acc = Some(match (acc, op) {
            (None, _) => v,
            // propagate NaN
            (Some(a), _) if a.is_nan() || v.is_nan() => T::nan(),
            (Some(a), Aggregator::Min) => {
                if v < a {
                    v
                } else {
                    a
                }
            }
            (Some(a), Aggregator::Max) => {
                if v > a {
                    v
                } else {
                    a
                }
            }
            (Some(a), Aggregator::Mean) => a + v,
        });
    }
    let acc = acc?;
    Some(match op {
        Aggregator::Mean => acc / T::from_usize(count).expect("count fits scalar"),
        _ => acc,
    })
}

pub fn evaluate_expr<T: Scalar>(expr: &Expr<T>, inst: &TestInstance<T>, opts: &EvalOptions) -> Result<T, EvalError> {
    match expr {
        Expr::Const(c) => Ok(*c),
        Expr::Neg(e) => Ok(-evaluate_expr(e, inst, opts)?),
        Expr::Sub(a, b) => Ok(evaluate_expr(a, inst, opts)? - evaluate_expr(b, inst, opts)?),
        Expr::Agg { op, band, .. } => match aggregate(*op, inst.values_in(band.lo(), band.hi())) {
            Some(v) => Ok(v),
            None => match opts.empty_band {
                EmptyBandPolicy::Error => Err(EvalError::EmptyBand {
                    lo: band.lo().to_f64_lossy(),
                    hi: band.hi().to_f64_lossy(),
                }),
                EmptyBandPolicy::Zero => Ok(T::zero()),
            },
        },
    }
}

/// Objective value to minimize, or constraint residual (satisfied iff `< 0`).
pub fn evaluate_item<T: Scalar>(
    item: &FormulationItem<T>,
    inst: &TestInstance<T>,
    opts: &EvalOptions,
) -> Result<T, EvalError> {
    let v = evaluate_expr(&item.expr, inst, opts)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite {
            item: item.name.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility<T> {
    pub feasible: bool,
    /// Sum of positive constraint residuals.
    pub violation: T,
    /// One residual per constraint, in item order.
    pub residuals: Vec<T>,
}

impl<T: Scalar> Feasibility<T> {
    pub fn from_residuals(residuals: Vec<T>, tolerance: T) -> Self {
        let feasible = residuals.iter().all(|g| *g < tolerance);
        let violation = residuals.iter().fold(T::zero(), |acc, g| acc + g.max(T::zero()));
        Feasibility {
            feasible,
            violation,
            residuals,
        }
    }
}

/// Feasible iff every constraint residual is strictly below the tolerance
/// (zero by default). A formulation without constraints is always feasible.
pub fn feasibility<T: Scalar>(
    f: &Formulation<T>,
    inst: &TestInstance<T>,
    opts: &EvalOptions,
) -> Result<Feasibility<T>, EvalError> {
    let residuals = f
        .constraints()
        .map(|c| evaluate_item(c, inst, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Feasibility::from_residuals(
        residuals,
        T::from_f64_lossy(opts.feasibility_tolerance),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{parse_formulation, Band, Metric};

    fn curve(points: &[(f64, f64)]) -> TestInstance<f64> {
        TestInstance::new("t", vec![], points.to_vec()).unwrap()
    }

    fn item(text: &str) -> FormulationItem<f64> {
        parse_formulation::<f64>(text).unwrap().into_items().remove(0)
    }

    #[test]
    fn passband_min_constraint_feasible() {
        let inst = curve(&[(0.9, -10.0), (0.95, -3.0), (1.0, -2.0), (1.08, -2.5), (1.1, -20.0)]);
        let c = item("constraint min(eff in [0.95, 1.08]) >= -4.49");
        let g = evaluate_item(&c, &inst, &EvalOptions::default()).unwrap();
        assert!((g - (-4.49 - (-3.0))).abs() < 1e-12);
        assert!((g + 1.49).abs() < 1e-12);
    }

    #[test]
    fn maximize_mean_on_constant_curve() {
        let c3 = curve(&[(0.95, -3.0), (1.0, -3.0), (1.08, -3.0)]);
        let c2 = curve(&[(0.95, -2.0), (1.0, -2.0), (1.08, -2.0)]);
        let obj = item("objective maximize mean(eff in [0.95, 1.08])");
        let opts = EvalOptions::default();
        assert_eq!(evaluate_item(&obj, &c3, &opts).unwrap(), 3.0);
        assert_eq!(evaluate_item(&obj, &c2, &opts).unwrap(), 2.0);
    }

    #[test]
    fn boundary_residual_is_infeasible() {
        let inst = curve(&[(0.8, -5.0), (0.86, -4.39), (0.92, -6.0), (1.0, 0.0)]);
        let f: Formulation<f64> = parse_formulation("constraint max(eff in [0.8, 0.92]) <= -4.39").unwrap();
        let g = evaluate_item(&f.items()[0], &inst, &EvalOptions::default()).unwrap();
        assert_eq!(g, 0.0);
        let feas = feasibility(&f, &inst, &EvalOptions::default()).unwrap();
        assert!(!feas.feasible);
        let loose = EvalOptions {
            feasibility_tolerance: 1e-9,
            ..EvalOptions::default()
        };
        assert!(feasibility(&f, &inst, &loose).unwrap().feasible);
    }

    #[test]
    fn empty_band_policies() {
        let inst = curve(&[(0.0, -1.0), (0.1, -2.0), (0.2, -3.0)]);
        let c = FormulationItem::at_most(
            "c",
            Aggregator::Min,
            Metric::new("eff").unwrap(),
            Band::new(0.12, 0.18).unwrap(),
            -1.0,
        );
        let err = evaluate_item(&c, &inst, &EvalOptions::default()).unwrap_err();
        assert_eq!(err, EvalError::EmptyBand { lo: 0.12, hi: 0.18 });
        let zero = EvalOptions {
            empty_band: EmptyBandPolicy::Zero,
            ..EvalOptions::default()
        };
        assert_eq!(evaluate_item(&c, &inst, &zero).unwrap(), 1.0);
    }

    #[test]
    fn nan_sample_is_non_finite() {
        let inst = curve(&[(0.0, -1.0), (0.1, f64::NAN), (0.2, -3.0)]);
        for agg in ["min", "max", "mean"] {
            let c = item(&format!("constraint {agg}(eff in [0, 0.2]) <= 0"));
            let err = evaluate_item(&c, &inst, &EvalOptions::default()).unwrap_err();
            assert!(matches!(err, EvalError::NonFinite { .. }), "{agg}");
        }
    }

    #[test]
    fn violation_sums_positive_parts() {
        let f = Feasibility::from_residuals(vec![-1.0, 0.5, 0.25], 0.0);
        assert!(!f.feasible);
        assert_eq!(f.violation, 0.75);
        let f = Feasibility::from_residuals(vec![-1.49, -0.2], 0.0);
        assert!(f.feasible);
        assert_eq!(f.violation, 0.0);
        let f = Feasibility::<f64>::from_residuals(vec![], 0.0);
        assert!(f.feasible && f.violation == 0.0);
    }
}

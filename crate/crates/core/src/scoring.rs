//! Rank correlation, formulation quality score and alignment metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{evaluate_item, EvalOptions, Formulation, ItemKind};
use crate::instance::TestInstance;
use crate::ranking::{induced_ranking, RankError, Ranking};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("rankings cover different instances (missing {missing:?}, extra {extra:?})")]
    IdMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("ranking over {0} instances; need at least 2")]
    TooFewInstances(usize),
    #[error("ranking {0:?} is constant")]
    DegenerateRanking(String),
    #[error("formulation has no objectives")]
    NoObjectives,
    #[error("formulation has no constraints")]
    NoConstraints,
    #[error("feasibility vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// Pearson correlation of two fractional-rank vectors, aligned by instance id.
/// Reduces to `1 - 6 sum d^2 / (n (n^2 - 1))` when neither side has ties.
pub fn spearman(a: &Ranking, b: &Ranking) -> Result<f64, ScoreError> {
    let b_ranks = b.rank_map();
    let a_ids: std::collections::HashSet<&str> = a.instance_ids().iter().map(String::as_str).collect();
    let missing: Vec<String> = a
        .instance_ids()
        .iter()
        .filter(|id| !b_ranks.contains_key(id.as_str()))
        .cloned()
        .collect();
    let extra: Vec<String> = b
        .instance_ids()
        .iter()
        .filter(|id| !a_ids.contains(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(ScoreError::IdMismatch { missing, extra });
    }
    let n = a.len();
    if n < 2 {
        return Err(ScoreError::TooFewInstances(n));
    }
    let xs = a.ranks();
    let ys: Vec<f64> = a.instance_ids().iter().map(|id| b_ranks[id.as_str()]).collect();
    pearson(xs, &ys)
        .map_err(|which| ScoreError::DegenerateRanking(if which == 0 { a.source.clone() } else { b.source.clone() }))
}

/// `Err(0)` / `Err(1)` names the constant side.
fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, usize> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(0);
    }
    if syy == 0.0 {
        return Err(1);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub value: f64,
    pub formulation_id: String,
    pub reference_ranking_id: String,
}

/// Rank correlation between the ranking `f` induces on `insts` and `reference`.
pub fn quality_score<T: Scalar>(
    f: &Formulation<T>,
    insts: &[TestInstance<T>],
    reference: &Ranking,
    opts: &EvalOptions,
) -> Result<QualityScore, ScoreError> {
    let induced = induced_ranking(f, insts, opts)?;
    let value = spearman(&induced, reference)?;
    Ok(QualityScore {
        value,
        formulation_id: f.id.clone(),
        reference_ranking_id: reference.source.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemAlignment {
    pub name: String,
    pub kind: ItemKind,
    /// Rank correlation for objectives, classification accuracy for constraints.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub a_obj: f64,
    pub a_con: f64,
    pub a_total: f64,
    pub alpha: f64,
    pub per_item: Vec<ItemAlignment>,
}

/// Per-objective rank correlation with the ground-truth ranking, each
/// objective ranking instances by its own value (ascending), ignoring constraints.
pub fn objective_alignments<T: Scalar>(
    f: &Formulation<T>,
    insts: &[TestInstance<T>],
    ground_truth: &Ranking,
    opts: &EvalOptions,
) -> Result<Vec<ItemAlignment>, ScoreError> {
    let ids: Vec<String> = insts.iter().map(|i| i.id.clone()).collect();
    f.objectives()
        .map(|obj| {
            let values = insts
                .iter()
                .map(|inst| {
                    evaluate_item(obj, inst, opts).map_err(|source| RankError::Eval {
                        instance: inst.id.clone(),
                        source,
                    })
                })
                .collect::<Result<Vec<T>, _>>()?;
            let ranking = Ranking::from_keys(format!("objective:{}", obj.name), ids.clone(), &values);
            Ok(ItemAlignment {
                name: obj.name.clone(),
                kind: ItemKind::Objective,
                score: spearman(&ranking, ground_truth)?,
            })
        })
        .collect()
}

pub fn alignment_obj<T: Scalar>(
    f: &Formulation<T>,
    insts: &[TestInstance<T>],
    ground_truth: &Ranking,
    opts: &EvalOptions,
) -> Result<f64, ScoreError> {
    if f.n_objectives() == 0 {
        return Err(ScoreError::NoObjectives);
    }
    Ok(mean_score(&objective_alignments(f, insts, ground_truth, opts)?))
}

/// Per-constraint feasibility classification accuracy against `y*`
/// (`true` = feasible).
pub fn constraint_alignments<T: Scalar>(
    f: &Formulation<T>,
    insts: &[TestInstance<T>],
    ground_truth_feasibility: &[bool],
    opts: &EvalOptions,
) -> Result<Vec<ItemAlignment>, ScoreError> {
    if ground_truth_feasibility.len() != insts.len() {
        return Err(ScoreError::LengthMismatch {
            expected: insts.len(),
            got: ground_truth_feasibility.len(),
        });
    }
    let tol = T::from_f64_lossy(opts.feasibility_tolerance);
    f.constraints()
        .map(|c| {
            let predicted = insts
                .iter()
                .map(|inst| {
                    evaluate_item(c, inst, opts)
                        .map(|g| g < tol)
                        .map_err(|source| RankError::Eval {
                            instance: inst.id.clone(),
                            source,
                        })
                })
                .collect::<Result<Vec<bool>, _>>()?;
            Ok(ItemAlignment {
                name: c.name.clone(),
                kind: ItemKind::Constraint,
                score: feasibility_accuracy(&predicted, ground_truth_feasibility),
            })
        })
        .collect()
}

/// `1 - |y_hat - y*|_1 / m`.
pub fn feasibility_accuracy(predicted: &[bool], truth: &[bool]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    let m = truth.len();
    if m == 0 {
        return 1.0;
    }
    let wrong = predicted.iter().zip(truth).filter(|(a, b)| a != b).count();
    1.0 - wrong as f64 / m as f64
}

pub fn alignment_con<T: Scalar>(
    f: &Formulation<T>,
    insts: &[TestInstance<T>],
    ground_truth_feasibility: &[bool],
    opts: &EvalOptions,
) -> Result<f64, ScoreError> {
    if f.n_constraints() == 0 {
        return Err(ScoreError::NoConstraints);
    }
    Ok(mean_score(&constraint_alignments(
        f,
        insts,
        ground_truth_feasibility,
        opts,
    )?))
}

fn mean_score(items: &[ItemAlignment]) -> f64 {
    items.iter().map(|i| i.score).sum::<f64>() / items.len() as f64
}

pub fn alignment_total(a_obj: f64, a_con: f64, alpha: f64) -> Result<AlignmentReport, ScoreError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ScoreError::AlphaOutOfRange(alpha));
    }
    Ok(AlignmentReport {
        a_obj,
        a_con,
        a_total: alpha * a_obj + (1.0 - alpha) * a_con,
        alpha,
        per_item: Vec::new(),
    })
}

/// Full report for one formulation against ground truth `pi*` and `y*`.
pub fn alignment_report<T: Scalar>(
    f: &Formulation<T>,
    insts: &[TestInstance<T>],
    ground_truth: &Ranking,
    ground_truth_feasibility: &[bool],
    alpha: f64,
    opts: &EvalOptions,
) -> Result<AlignmentReport, ScoreError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ScoreError::AlphaOutOfRange(alpha));
    }
    if f.n_objectives() == 0 {
        return Err(ScoreError::NoObjectives);
    }
    if f.n_constraints() == 0 {
        return Err(ScoreError::NoConstraints);
    }
    let objs = objective_alignments(f, insts, ground_truth, opts)?;
    let cons = constraint_alignments(f, insts, ground_truth_feasibility, opts)?;
    let mut report = alignment_total(mean_score(&objs), mean_score(&cons), alpha)?;
    report.per_item = f
        .items()
        .iter()
        .filter_map(|item| objs.iter().chain(cons.iter()).find(|a| a.name == item.name).cloned())
        .collect();
    Ok(report)
}

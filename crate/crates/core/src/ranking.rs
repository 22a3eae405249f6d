//! Formulation-induced rankings: feasibility first, then Pareto fronts among
//! feasible instances, then total violation among infeasible ones.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{evaluate_item, feasibility, EvalError, EvalOptions, Formulation};
use crate::instance::TestInstance;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("instance {instance}: {source}")]
    Eval {
        instance: String,
        #[source]
        source: EvalError,
    },
    #[error("invalid ranking: {0}")]
    Invalid(String),
}

/// Fractional ranks over a set of instance ids; rank 1 is best and tied ids
/// share the mean of the positions they span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRanking")]
pub struct Ranking {
    /// Where the ranking came from, e.g. `induced:<formulation>` or `oracle:<set>`.
    #[serde(default)]
    pub source: String,
    instance_ids: Vec<String>,
    ranks: Vec<f64>,
    tie_groups: Vec<Vec<String>>,
}

#[derive(Deserialize)]
struct RawRanking {
    #[serde(default)]
    source: String,
    instance_ids: Vec<String>,
    ranks: Vec<f64>,
}

impl TryFrom<RawRanking> for Ranking {
    type Error = RankError;

    fn try_from(raw: RawRanking) -> Result<Self, Self::Error> {
        Ranking::from_ranks(raw.source, raw.instance_ids, raw.ranks)
    }
}

impl Ranking {
    /// Ranks `ids` by a total preorder; `cmp(i, j) == Less` means `i` is better.
    pub fn from_ordering(
        source: impl Into<String>,
        ids: Vec<String>,
        mut cmp: impl FnMut(usize, usize) -> Ordering,
    ) -> Self {
        let n = ids.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cmp(a, b));
        let mut ranks = vec![0.0; n];
        let mut tie_groups = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && cmp(order[start], order[end]) == Ordering::Equal {
                end += 1;
            }
            // positions start+1 ..= end share their mean
            let rank = (start + 1 + end) as f64 / 2.0;
            for &i in &order[start..end] {
                ranks[i] = rank;
            }
            if end - start > 1 {
                tie_groups.push(order[start..end].iter().map(|&i| ids[i].clone()).collect());
            }
            start = end;
        }
        Ranking {
            source: source.into(),
            instance_ids: ids,
            ranks,
            tie_groups,
        }
    }

    /// Ranks by ascending key.
    pub fn from_keys<K: PartialOrd>(source: impl Into<String>, ids: Vec<String>, keys: &[K]) -> Self {
        assert_eq!(ids.len(), keys.len(), "one key per id");
        Ranking::from_ordering(source, ids, |a, b| {
            keys[a].partial_cmp(&keys[b]).unwrap_or(Ordering::Equal)
        })
    }

    /// Strict ranking from a best-first list of distinct ids.
    pub fn from_order(source: impl Into<String>, ordered: Vec<String>) -> Result<Self, RankError> {
        let mut seen = HashSet::new();
        if let Some(dup) = ordered.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(RankError::Invalid(format!("duplicate id {dup:?}")));
        }
        let ranks = (1..=ordered.len()).map(|r| r as f64).collect();
        Ok(Ranking {
            source: source.into(),
            instance_ids: ordered,
            ranks,
            tie_groups: Vec::new(),
        })
    }

    /// Accepts an explicit rank vector if it is a valid fractional ranking.
    pub fn from_ranks(source: impl Into<String>, ids: Vec<String>, ranks: Vec<f64>) -> Result<Self, RankError> {
        if ids.len() != ranks.len() {
            return Err(RankError::Invalid(format!(
                "{} ids but {} ranks",
                ids.len(),
                ranks.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(RankError::Invalid(format!("duplicate id {dup:?}")));
        }
        if ranks.iter().any(|r| !r.is_finite()) {
            return Err(RankError::Invalid("non-finite rank".into()));
        }
        let rebuilt = Ranking::from_keys(source, ids, &ranks);
        if rebuilt.ranks != ranks {
            return Err(RankError::Invalid(
                "ranks are not fractional ranks of a preorder".into(),
            ));
        }
        Ok(rebuilt)
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn ranks(&self) -> &[f64] {
        &self.ranks
    }

    pub fn tie_groups(&self) -> &[Vec<String>] {
        &self.tie_groups
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn is_tie_free(&self) -> bool {
        self.tie_groups.is_empty()
    }

    pub fn rank_of(&self, id: &str) -> Option<f64> {
        self.instance_ids.iter().position(|x| x == id).map(|i| self.ranks[i])
    }

    pub fn rank_map(&self) -> HashMap<&str, f64> {
        self.instance_ids
            .iter()
            .map(String::as_str)
            .zip(self.ranks.iter().copied())
            .collect()
    }

    /// Ids best-first; ties keep their input order.
    pub fn ordered_ids(&self) -> Vec<String> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.ranks[a].total_cmp(&self.ranks[b]));
        idx.into_iter().map(|i| self.instance_ids[i].clone()).collect()
    }
}

/// Row-major `instances x objectives` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> ObjectiveMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>, cols: usize) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "ragged objective rows");
        ObjectiveMatrix {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }
}

/// Entry `(i, j)` is objective `j` evaluated on instance `i`.
pub fn objective_matrix<T: Scalar>(
    f: &Formulation<T>,
    insts: &[TestInstance<T>],
    opts: &EvalOptions,
) -> Result<ObjectiveMatrix<T>, RankError> {
    let objectives: Vec<_> = f.objectives().collect();
    let rows = insts
        .iter()
        .map(|inst| {
            objectives
                .iter()
                .map(|o| evaluate_item(o, inst, opts))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|source| RankError::Eval {
                    instance: inst.id.clone(),
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ObjectiveMatrix::from_rows(rows, objectives.len()))
}

/// `a` dominates `b` (minimization): no worse everywhere, strictly better somewhere.
pub fn dominates<T: Scalar>(a: &[T], b: &[T]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontAssignment {
    /// Front index per matrix row; 0 is the non-dominated front.
    pub fronts: Vec<usize>,
}

impl FrontAssignment {
    pub fn front_count(&self) -> usize {
        self.fronts.iter().max().map_or(0, |m| m + 1)
    }
}

/// Fast non-dominated sorting, O(M N^2).
pub fn non_dominated_fronts<T: Scalar>(m: &ObjectiveMatrix<T>) -> FrontAssignment {
    let n = m.rows();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for p in 0..n {
        for q in (p + 1)..n {
            if dominates(m.row(p), m.row(q)) {
                dominated_by_me[p].push(q);
                domination_count[q] += 1;
            } else if dominates(m.row(q), m.row(p)) {
                dominated_by_me[q].push(p);
                domination_count[p] += 1;
            }
        }
    }
    let mut fronts = vec![0usize; n];
    let mut current: Vec<usize> = (0..n).filter(|&p| domination_count[p] == 0).collect();
    let mut k = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            fronts[p] = k;
            for &q in &dominated_by_me[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        current = next;
        k += 1;
    }
    FrontAssignment { fronts }
}

/// Everything computed on the way to an induced ranking.
#[derive(Debug, Clone)]
pub struct InducedRanking<T> {
    pub ranking: Ranking,
    pub objectives: ObjectiveMatrix<T>,
    pub feasible: Vec<bool>,
    pub violation: Vec<T>,
    /// Constraint residuals per instance, in constraint order.
    pub residuals: Vec<Vec<T>>,
    /// Front index for feasible instances, `None` for infeasible ones.
    pub fronts: Vec<Option<usize>>,
}

pub fn induced_ranking_detailed<T: Scalar>(
    f: &Formulation<T>,
    insts: &[TestInstance<T>],
    opts: &EvalOptions,
) -> Result<InducedRanking<T>, RankError> {
    let objectives = objective_matrix(f, insts, opts)?;
    let mut feasible = Vec::with_capacity(insts.len());
    let mut violation = Vec::with_capacity(insts.len());
    let mut residuals = Vec::with_capacity(insts.len());
    for inst in insts {
        let fz = feasibility(f, inst, opts).map_err(|source| RankError::Eval {
            instance: inst.id.clone(),
            source,
        })?;
        feasible.push(fz.feasible);
        violation.push(fz.violation);
        residuals.push(fz.residuals);
    }

    let feasible_rows: Vec<usize> = (0..insts.len()).filter(|&i| feasible[i]).collect();
    let sub = ObjectiveMatrix::from_rows(
        feasible_rows.iter().map(|&i| objectives.row(i).to_vec()).collect(),
        objectives.cols(),
    );
    let sub_fronts = non_dominated_fronts(&sub);
    let mut fronts = vec![None; insts.len()];
    for (k, &i) in feasible_rows.iter().enumerate() {
        fronts[i] = Some(sub_fronts.fronts[k]);
    }

    let ids = insts.iter().map(|i| i.id.clone()).collect();
    let ranking = Ranking::from_ordering(format!("induced:{}", f.id), ids, |a, b| match (fronts[a], fronts[b]) {
        (Some(fa), Some(fb)) => fa.cmp(&fb),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => violation[a].partial_cmp(&violation[b]).unwrap_or(Ordering::Equal),
    });
    Ok(InducedRanking {
        ranking,
        objectives,
        feasible,
        violation,
        residuals,
        fronts,
    })
}

/// The ranking a formulation induces on an instance set.
pub fn induced_ranking<T: Scalar>(
    f: &Formulation<T>,
    insts: &[TestInstance<T>],
    opts: &EvalOptions,
) -> Result<Ranking, RankError> {
    Ok(induced_ranking_detailed(f, insts, opts)?.ranking)
}

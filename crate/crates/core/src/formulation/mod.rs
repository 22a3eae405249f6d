//! Declarative formulation IR.
//!
//! A formulation is an ordered list of objective and constraint items. Every
//! objective is minimized; every constraint is a residual that is satisfied
//! when it evaluates strictly below zero.

mod eval;
mod parse;
mod print;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use eval::{evaluate_expr, evaluate_item, feasibility, EmptyBandPolicy, EvalError, EvalOptions, Feasibility};
pub use parse::parse_formulation;
pub use print::{format_real, print_formulation, print_item};

/// Maximum nesting depth of an item expression.
pub const MAX_EXPR_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulationError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}invalid formulation: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invariant { line: Option<usize>, message: String },
}

impl FormulationError {
    pub(crate) fn invariant(message: impl Into<String>) -> Self {
        FormulationError::Invariant {
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            FormulationError::Invariant { line: None, message } => FormulationError::Invariant {
                line: Some(line),
                message,
            },
            other => other,
        }
    }
}

/// Closed interval `[lo, hi]` of the evaluation variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "(T, T)",
    into = "(T, T)",
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub struct Band<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Band<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, FormulationError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(FormulationError::invariant(format!(
                "band bounds must be finite, got [{lo}, {hi}]"
            )));
        }
        if lo >= hi {
            return Err(FormulationError::invariant(format!(
                "band requires lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Band { lo, hi })
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, z: T) -> bool {
        self.lo <= z && z <= self.hi
    }

    pub fn shifted(&self, delta: T) -> Result<Self, FormulationError> {
        Band::new(self.lo + delta, self.hi + delta)
    }
}

impl<T: Scalar> TryFrom<(T, T)> for Band<T> {
    type Error = FormulationError;

    fn try_from((lo, hi): (T, T)) -> Result<Self, Self::Error> {
        Band::new(lo, hi)
    }
}

impl<T> From<Band<T>> for (T, T) {
    fn from(b: Band<T>) -> Self {
        (b.lo, b.hi)
    }
}

impl<T: Scalar> fmt::Display for Band<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}]",
            format_real(self.lo.to_f64_lossy()),
            format_real(self.hi.to_f64_lossy())
        )
    }
}

/// Metric identifier as it appears in the IR, e.g. `radiation_efficiency`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Metric(String);

impl Metric {
    pub fn new(name: impl Into<String>) -> Result<Self, FormulationError> {
        let name = name.into();
        let mut chars = name.chars();
        let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_lowercase());
        let tail_ok = chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if head_ok && tail_ok {
            Ok(Metric(name))
        } else {
            Err(FormulationError::invariant(format!(
                "metric name {name:?} must match [a-z][a-z0-9_]*"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Metric {
    type Error = FormulationError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Metric::new(s)
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> Self {
        m.0
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Min,
    Max,
    Mean,
}

impl Aggregator {
    pub fn keyword(self) -> &'static str {
        match self {
            Aggregator::Min => "min",
            Aggregator::Max => "max",
            Aggregator::Mean => "mean",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "min" => Some(Aggregator::Min),
            "max" => Some(Aggregator::Max),
            "mean" => Some(Aggregator::Mean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
#[serde(rename_all = "snake_case")]
pub enum Expr<T> {
    Agg {
        op: Aggregator,
        metric: Metric,
        band: Band<T>,
    },
    Neg(Box<Expr<T>>),
    Sub(Box<Expr<T>>, Box<Expr<T>>),
    Const(T),
}

impl<T: Scalar> Expr<T> {
    pub fn agg(op: Aggregator, metric: Metric, band: Band<T>) -> Self {
        Expr::Agg { op, metric, band }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr<T>) -> Self {
        Expr::Neg(Box::new(e))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr<T>, b: Expr<T>) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Agg { .. } | Expr::Const(_) => 1,
            Expr::Neg(e) => 1 + e.depth(),
            Expr::Sub(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn agg_count(&self) -> usize {
        match self {
            Expr::Agg { .. } => 1,
            Expr::Const(_) => 0,
            Expr::Neg(e) => e.agg_count(),
            Expr::Sub(a, b) => a.agg_count() + b.agg_count(),
        }
    }

    /// Visits every aggregation node mutably, in left-to-right order.
    pub fn for_each_agg_mut(&mut self, f: &mut impl FnMut(&mut Aggregator, &mut Band<T>)) {
        match self {
            Expr::Agg { op, band, .. } => f(op, band),
            Expr::Const(_) => {}
            Expr::Neg(e) => e.for_each_agg_mut(f),
            Expr::Sub(a, b) => {
                a.for_each_agg_mut(f);
                b.for_each_agg_mut(f);
            }
        }
    }

    pub fn for_each_const_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        match self {
            Expr::Agg { .. } => {}
            Expr::Const(c) => f(c),
            Expr::Neg(e) => e.for_each_const_mut(f),
            Expr::Sub(a, b) => {
                a.for_each_const_mut(f);
                b.for_each_const_mut(f);
            }
        }
    }

    pub fn bands(&self) -> Vec<Band<T>> {
        let mut out = Vec::new();
        self.collect_bands(&mut out);
        out
    }

    fn collect_bands(&self, out: &mut Vec<Band<T>>) {
        match self {
            Expr::Agg { band, .. } => out.push(*band),
            Expr::Const(_) => {}
            Expr::Neg(e) => e.collect_bands(out),
            Expr::Sub(a, b) => {
                a.collect_bands(out);
                b.collect_bands(out);
            }
        }
    }

    fn validate(&self) -> Result<(), FormulationError> {
        let depth = self.depth();
        if depth > MAX_EXPR_DEPTH {
            return Err(FormulationError::invariant(format!(
                "expression depth {depth} exceeds {MAX_EXPR_DEPTH}"
            )));
        }
        if self.agg_count() == 0 {
            return Err(FormulationError::invariant(
                "expression must contain at least one aggregation",
            ));
        }
        self.validate_consts()
    }

    fn validate_consts(&self) -> Result<(), FormulationError> {
        match self {
            Expr::Const(c) if !c.is_finite() => Err(FormulationError::invariant(format!("constant {c} is not finite"))),
            Expr::Neg(e) => e.validate_consts(),
            Expr::Sub(a, b) => {
                a.validate_consts()?;
                b.validate_consts()
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Objective,
    Constraint,
}

impl ItemKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ItemKind::Objective => "objective",
            ItemKind::Constraint => "constraint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct FormulationItem<T> {
    pub kind: ItemKind,
    pub name: String,
    pub expr: Expr<T>,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl<T: Scalar> FormulationItem<T> {
    pub fn new(kind: ItemKind, name: impl Into<String>, expr: Expr<T>) -> Result<Self, FormulationError> {
        let item = FormulationItem {
            kind,
            name: name.into(),
            expr,
        };
        item.validate()?;
        Ok(item)
    }

    /// `objective maximize op(metric in band)`, stored as the negated aggregate.
    pub fn maximize(name: impl Into<String>, op: Aggregator, metric: Metric, band: Band<T>) -> Self {
        FormulationItem {
            kind: ItemKind::Objective,
            name: name.into(),
            expr: Expr::neg(Expr::agg(op, metric, band)),
        }
    }

    pub fn minimize(name: impl Into<String>, op: Aggregator, metric: Metric, band: Band<T>) -> Self {
        FormulationItem {
            kind: ItemKind::Objective,
            name: name.into(),
            expr: Expr::agg(op, metric, band),
        }
    }

    /// `constraint op(metric in band) >= limit`, residual `limit - agg`.
    pub fn at_least(name: impl Into<String>, op: Aggregator, metric: Metric, band: Band<T>, limit: T) -> Self {
        FormulationItem {
            kind: ItemKind::Constraint,
            name: name.into(),
            expr: Expr::sub(Expr::Const(limit), Expr::agg(op, metric, band)),
        }
    }

    /// `constraint op(metric in band) <= limit`, residual `agg - limit`.
    pub fn at_most(name: impl Into<String>, op: Aggregator, metric: Metric, band: Band<T>, limit: T) -> Self {
        FormulationItem {
            kind: ItemKind::Constraint,
            name: name.into(),
            expr: Expr::sub(Expr::agg(op, metric, band), Expr::Const(limit)),
        }
    }

    pub fn is_objective(&self) -> bool {
        self.kind == ItemKind::Objective
    }

    pub fn is_constraint(&self) -> bool {
        self.kind == ItemKind::Constraint
    }

    pub fn validate(&self) -> Result<(), FormulationError> {
        if !is_identifier(&self.name) {
            return Err(FormulationError::invariant(format!(
                "item name {:?} is not an identifier",
                self.name
            )));
        }
        self.expr.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
#[serde(try_from = "RawFormulation<T>")]
pub struct Formulation<T> {
    pub id: String,
    items: Vec<FormulationItem<T>>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct RawFormulation<T> {
    id: String,
    items: Vec<FormulationItem<T>>,
}

impl<T: Scalar> TryFrom<RawFormulation<T>> for Formulation<T> {
    type Error = FormulationError;

    fn try_from(raw: RawFormulation<T>) -> Result<Self, Self::Error> {
        Formulation::new(raw.id, raw.items)
    }
}

impl<T: Scalar> Formulation<T> {
    pub fn new(id: impl Into<String>, items: Vec<FormulationItem<T>>) -> Result<Self, FormulationError> {
        if items.is_empty() {
            return Err(FormulationError::invariant("formulation needs at least one item"));
        }
        let mut seen = HashSet::new();
        for (i, item) in items.iter().enumerate() {
            item.validate().map_err(|e| e.at_line(i + 1))?;
            if !seen.insert(item.name.as_str()) {
                return Err(FormulationError::Invariant {
                    line: Some(i + 1),
                    message: format!("duplicate item name {:?}", item.name),
                });
            }
        }
        Ok(Formulation { id: id.into(), items })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn items(&self) -> &[FormulationItem<T>] {
        &self.items
    }

    pub fn into_items(self) -> Vec<FormulationItem<T>> {
        self.items
    }

    pub fn objectives(&self) -> impl Iterator<Item = &FormulationItem<T>> {
        self.items.iter().filter(|i| i.is_objective())
    }

    pub fn constraints(&self) -> impl Iterator<Item = &FormulationItem<T>> {
        self.items.iter().filter(|i| i.is_constraint())
    }

    /// Number of objectives (n1).
    pub fn n_objectives(&self) -> usize {
        self.objectives().count()
    }

    /// Number of constraints (n2).
    pub fn n_constraints(&self) -> usize {
        self.constraints().count()
    }

    /// Reorders items so that item `j` of the result is item `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, FormulationError> {
        if !is_permutation(perm, self.items.len()) {
            return Err(FormulationError::invariant(format!(
                "{perm:?} is not a permutation of {} items",
                self.items.len()
            )));
        }
        let items = perm.iter().map(|&p| self.items[p].clone()).collect();
        Formulation::new(self.id.clone(), items)
    }

    /// Inverse of [`Formulation::permuted`].
    pub fn unpermuted(&self, perm: &[usize]) -> Result<Self, FormulationError> {
        if !is_permutation(perm, self.items.len()) {
            return Err(FormulationError::invariant(format!(
                "{perm:?} is not a permutation of {} items",
                self.items.len()
            )));
        }
        let mut slots: Vec<Option<FormulationItem<T>>> = vec![None; self.items.len()];
        for (j, &p) in perm.iter().enumerate() {
            slots[p] = Some(self.items[j].clone());
        }
        Formulation::new(self.id.clone(), slots.into_iter().flatten().collect())
    }
}

pub(crate) fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    perm.iter().all(|&p| p < n && !std::mem::replace(&mut seen[p], true))
}

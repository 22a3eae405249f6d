//! Requirement tuples `(band, metric, intent)` and requirement sets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::formulation::{
    format_real, is_permutation, Aggregator, Band, Formulation, FormulationError, FormulationItem, Metric,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricId {
    pub name: Metric,
    pub units: String,
}

impl MetricId {
    pub fn new(name: &str, units: impl Into<String>) -> Result<Self, FormulationError> {
        Ok(MetricId {
            name: Metric::new(name)?,
            units: units.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Comparator {
    Ge,
    Le,
}

impl Comparator {
    pub fn flipped(self) -> Self {
        match self {
            Comparator::Ge => Comparator::Le,
            Comparator::Le => Comparator::Ge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignIntent<T> {
    Threshold {
        comparator: Comparator,
        value: T,
        aggregator: Aggregator,
    },
    Optimize {
        direction: Direction,
        aggregator: Aggregator,
    },
}

impl<T: Scalar> DesignIntent<T> {
    pub fn is_objective(&self) -> bool {
        matches!(self, DesignIntent::Optimize { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Requirement<T> {
    pub band: Band<T>,
    pub metric: MetricId,
    pub intent: DesignIntent<T>,
    pub text: String,
}

fn aggregator_word(a: Aggregator) -> &'static str {
    match a {
        Aggregator::Min => "minimum",
        Aggregator::Max => "maximum",
        Aggregator::Mean => "mean",
    }
}

impl<T: Scalar> Requirement<T> {
    /// Builds a requirement whose text is rendered from the tuple.
    pub fn templated(
        band: Band<T>,
        metric: MetricId,
        intent: DesignIntent<T>,
        band_label: &str,
        z_units: &str,
    ) -> Self {
        let text = render_text(&band, &metric, &intent, band_label, z_units);
        Requirement {
            band,
            metric,
            intent,
            text,
        }
    }

    /// The single formulation item this requirement compiles to.
    pub fn to_item(&self, name: impl Into<String>) -> FormulationItem<T> {
        let metric = self.metric.name.clone();
        match self.intent {
            DesignIntent::Optimize {
                direction: Direction::Maximize,
                aggregator,
            } => FormulationItem::maximize(name, aggregator, metric, self.band),
            DesignIntent::Optimize {
                direction: Direction::Minimize,
                aggregator,
            } => FormulationItem::minimize(name, aggregator, metric, self.band),
            DesignIntent::Threshold {
                comparator: Comparator::Ge,
                value,
                aggregator,
            } => FormulationItem::at_least(name, aggregator, metric, self.band, value),
            DesignIntent::Threshold {
                comparator: Comparator::Le,
                value,
                aggregator,
            } => FormulationItem::at_most(name, aggregator, metric, self.band, value),
        }
    }
}

/// Natural-language rendering, e.g. "The minimum radiation efficiency in the
/// 0.95-1.08 GHz passband must be greater than -4.49 dB."
pub fn render_text<T: Scalar>(
    band: &Band<T>,
    metric: &MetricId,
    intent: &DesignIntent<T>,
    band_label: &str,
    z_units: &str,
) -> String {
    let metric_words = metric.name.as_str().replace('_', " ");
    let region = format!(
        "the {}-{} {} {}",
        format_real(band.lo().to_f64_lossy()),
        format_real(band.hi().to_f64_lossy()),
        z_units,
        band_label
    );
    let region = region.split_whitespace().collect::<Vec<_>>().join(" ");
    match intent {
        DesignIntent::Optimize { direction, aggregator } => {
            let verb = match direction {
                Direction::Maximize => "Maximize",
                Direction::Minimize => "Minimize",
            };
            format!(
                "{verb} the {} {metric_words} in {region}.",
                aggregator_word(*aggregator)
            )
        }
        DesignIntent::Threshold {
            comparator,
            value,
            aggregator,
        } => {
            let cmp = match comparator {
                Comparator::Ge => "greater than",
                Comparator::Le => "less than",
            };
            let units = if metric.units.is_empty() {
                String::new()
            } else {
                format!(" {}", metric.units)
            };
            format!(
                "The {} {metric_words} in {region} must be {cmp} {}{units}.",
                aggregator_word(*aggregator),
                format_real(value.to_f64_lossy())
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
#[serde(try_from = "RawSet<T>")]
pub struct RequirementSet<T> {
    pub id: String,
    requirements: Vec<Requirement<T>>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct RawSet<T> {
    id: String,
    requirements: Vec<Requirement<T>>,
}

impl<T: Scalar> TryFrom<RawSet<T>> for RequirementSet<T> {
    type Error = FormulationError;

    fn try_from(raw: RawSet<T>) -> Result<Self, Self::Error> {
        RequirementSet::new(raw.id, raw.requirements)
    }
}

impl<T: Scalar> RequirementSet<T> {
    pub fn new(id: impl Into<String>, requirements: Vec<Requirement<T>>) -> Result<Self, FormulationError> {
        if requirements.is_empty() {
            return Err(FormulationError::invariant(
                "requirement set needs at least one requirement",
            ));
        }
        if let Some(i) = requirements.iter().position(|r| r.text.trim().is_empty()) {
            return Err(FormulationError::invariant(format!(
                "requirement {} has empty text",
                i + 1
            )));
        }
        Ok(RequirementSet {
            id: id.into(),
            requirements,
        })
    }

    pub fn requirements(&self) -> &[Requirement<T>] {
        &self.requirements
    }

    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }

    /// Compiles every requirement directly into its IR item; objectives are
    /// named `obj1, obj2, ...` and constraints `c1, c2, ...` in set order.
    pub fn ground_truth(&self) -> Formulation<T> {
        let (mut n_obj, mut n_con) = (0, 0);
        let items = self
            .requirements
            .iter()
            .map(|r| {
                let name = if r.intent.is_objective() {
                    n_obj += 1;
                    format!("obj{n_obj}")
                } else {
                    n_con += 1;
                    format!("c{n_con}")
                };
                r.to_item(name)
            })
            .collect();
        Formulation::new(self.id.clone(), items).expect("templated items are valid")
    }

    /// Reorders so that requirement `j` of the result is requirement `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, FormulationError> {
        if !is_permutation(perm, self.requirements.len()) {
            return Err(FormulationError::invariant(format!(
                "{perm:?} is not a permutation of {} requirements",
                self.requirements.len()
            )));
        }
        let requirements = perm.iter().map(|&p| self.requirements[p].clone()).collect();
        RequirementSet::new(self.id.clone(), requirements)
    }

    pub fn with_texts(&self, texts: Vec<String>) -> Result<Self, FormulationError> {
        if texts.len() != self.requirements.len() {
            return Err(FormulationError::invariant("text count mismatch"));
        }
        let requirements = self
            .requirements
            .iter()
            .zip(texts)
            .map(|(r, text)| Requirement { text, ..r.clone() })
            .collect();
        RequirementSet::new(self.id.clone(), requirements)
    }

    /// Numbered list, one requirement per line: `1. ...`.
    pub fn numbered_text(&self) -> String {
        numbered(self.requirements.iter().map(|r| r.text.as_str()))
    }
}

pub fn numbered<'a>(lines: impl Iterator<Item = &'a str>) -> String {
    lines
        .enumerate()
        .map(|(i, t)| format!("{}. {}", i + 1, t))
        .collect::<Vec<_>>()
        .join("\n")
}

impl<T: Scalar> fmt::Display for RequirementSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.numbered_text())
    }
}

//! Test instances: a sampled performance curve of one design.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("instance id must be nonempty")]
    EmptyId,
    #[error("instance {id}: needs at least 2 samples, got {count}")]
    TooFewSamples { id: String, count: usize },
    #[error("instance {id}: sample {index} has a non-finite evaluation variable")]
    NonFiniteZ { id: String, index: usize },
    #[error("instance {id}: samples must be strictly ascending in z (sample {index})")]
    NotAscending { id: String, index: usize },
    #[error("instance {id}: design parameter {index} is not finite")]
    NonFiniteParam { id: String, index: usize },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A performance curve `(z, value)` sampled at strictly ascending `z`.
///
/// Sample values are not required to be finite here; a non-finite value is
/// reported by evaluation as soon as an aggregation touches it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
#[serde(try_from = "RawInstance<T>")]
pub struct TestInstance<T> {
    pub id: String,
    pub design_params: Vec<T>,
    samples: Vec<(T, T)>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct RawInstance<T> {
    id: String,
    #[serde(default)]
    design_params: Vec<T>,
    samples: Vec<(T, T)>,
}

impl<T: Scalar> TryFrom<RawInstance<T>> for TestInstance<T> {
    type Error = InstanceError;

    fn try_from(raw: RawInstance<T>) -> Result<Self, Self::Error> {
        TestInstance::new(raw.id, raw.design_params, raw.samples)
    }
}

impl<T: Scalar> TestInstance<T> {
    pub fn new(id: impl Into<String>, design_params: Vec<T>, samples: Vec<(T, T)>) -> Result<Self, InstanceError> {
        let id = id.into();
        if id.is_empty() {
            return Err(InstanceError::EmptyId);
        }
        if samples.len() < 2 {
            return Err(InstanceError::TooFewSamples {
                id,
                count: samples.len(),
            });
        }
        for (index, (z, _)) in samples.iter().enumerate() {
            if !z.is_finite() {
                return Err(InstanceError::NonFiniteZ { id, index });
            }
            if index > 0 && samples[index - 1].0 >= *z {
                return Err(InstanceError::NotAscending { id, index });
            }
        }
        if let Some(index) = design_params.iter().position(|x| !x.is_finite()) {
            return Err(InstanceError::NonFiniteParam { id, index });
        }
        Ok(TestInstance {
            id,
            design_params,
            samples,
        })
    }

    pub fn samples(&self) -> &[(T, T)] {
        &self.samples
    }

    pub fn z_range(&self) -> (T, T) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    /// Values whose `z` lies in the closed interval `[lo, hi]`.
    pub fn values_in(&self, lo: T, hi: T) -> impl Iterator<Item = T> + '_ {
        // samples are sorted, so skip the prefix below lo and stop after hi
        let start = self.samples.partition_point(|(z, _)| *z < lo);
        self.samples[start..]
            .iter()
            .take_while(move |(z, _)| *z <= hi)
            .map(|(_, v)| *v)
    }
}

/// Reads one instance per nonblank line.
pub fn read_instances_jsonl<T: Scalar, R: BufRead>(reader: R) -> Result<Vec<TestInstance<T>>, InstanceError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = serde_json::from_str(&line).map_err(|source| InstanceError::Json { line: idx + 1, source })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_instances_jsonl<T: Scalar, W: Write>(
    mut writer: W,
    instances: &[TestInstance<T>],
) -> Result<(), InstanceError> {
    for inst in instances {
        let line = serde_json::to_string(inst).map_err(|source| InstanceError::Json { line: 0, source })?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

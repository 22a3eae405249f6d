use apf_core::{Formulation, Ranking, RequirementSet};
use serde::{Deserialize, Serialize};

/// A requirement set together with the instance pool it is judged on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedSet {
    pub set: RequirementSet,
    /// Instance the thresholds were read from.
    pub source_instance: String,
    pub instance_ids: Vec<String>,
}

impl DerivedSet {
    pub fn id(&self) -> &str {
        &self.set.id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    /// Equal to `id` for base records.
    pub base_id: String,
    pub set_id: String,
    pub requirement_set: RequirementSet,
    pub formulation: Formulation,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub augmented: bool,
    /// Requirement `j` and item `j` of this record are entry `permutation[j]` of the base.
    #[serde(default)]
    pub permutation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub set_id: String,
    pub ranking: Ranking,
    pub raw_response: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generate,
    Annotate,
    Score,
    Augment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub id: String,
    pub stage: Stage,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftMeta {
    pub id: String,
    pub score: Option<f64>,
    pub base_id: String,
    pub augmented: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftSample {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub meta: SftMeta,
}

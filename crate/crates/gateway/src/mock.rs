//! Deterministic offline provider. Answers are computed from a context of
//! known requirements and instances, so every response is a pure function of
//! the prompt and the seed.

use std::collections::HashMap;

use apf_core::formulation::EvalOptions;
use apf_core::synthbench::{corrupt_formulation, oracle_ranking, CorruptionKind, SynthError};
use apf_core::RequirementSet;
use apf_core::{Requirement, TestInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::client::{ChatProvider, Completion, RequestParams};
use crate::error::GatewayError;
use crate::parse::{
    annotation_response_json, extract_json, generation_response_json, paraphrase_response_json, JsonKind,
};
use crate::prompt::{numbered_lines, Prompt, PromptKind, SectionTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MockMode {
    /// Ground-truth formulations and oracle rankings.
    Faithful,
    /// Corrupts each generated formulation with probability `p`.
    Corrupt { p: f64, kind: CorruptionKind },
    /// Applies `k` random adjacent transpositions to the oracle ranking.
    NoisyRanker { k: usize },
}

/// Paraphrase wrappers as (prefix, suffix); the original text stays intact
/// in the middle so numbers, units and comparators are preserved.
const WRAPPERS: [(&str, &str); 8] = [
    ("Requirement: ", ""),
    ("Design goal: ", ""),
    ("", " This is a firm design target."),
    ("Please ensure the following holds. ", ""),
    ("Design item: ", ""),
    ("", " Treat this as a design requirement."),
    ("For this antenna design: ", ""),
    ("", " The design team agreed on this."),
];

/// Wraps `text` in the paraphrase wrapper selected by `index`; indices past
/// the wrapper count nest further wrappers.
pub fn mock_paraphrase(text: &str, index: usize) -> String {
    let (prefix, suffix) = WRAPPERS[index % WRAPPERS.len()];
    let inner = if index >= WRAPPERS.len() {
        mock_paraphrase(text, index / WRAPPERS.len() - 1)
    } else {
        text.to_string()
    };
    format!("{prefix}{inner}{suffix}")
}

#[derive(Debug, Clone, Default)]
pub struct MockContext {
    requirements: HashMap<String, Requirement>,
    instances: HashMap<String, TestInstance>,
    pub eval: EvalOptions,
}

impl MockContext {
    pub fn new(eval: EvalOptions) -> Self {
        MockContext {
            eval,
            ..MockContext::default()
        }
    }

    pub fn add_requirement_set(&mut self, set: &RequirementSet) {
        for r in set.requirements() {
            self.requirements.insert(r.text.clone(), r.clone());
        }
    }

    pub fn add_instances(&mut self, insts: &[TestInstance]) {
        for inst in insts {
            self.instances.insert(inst.id.clone(), inst.clone());
        }
    }

    /// Looks up a requirement by text, peeling mock paraphrase wrappers.
    pub fn requirement(&self, text: &str) -> Option<&Requirement> {
        let mut current = text;
        loop {
            if let Some(r) = self.requirements.get(current) {
                return Some(r);
            }
            current = WRAPPERS.iter().find_map(|(prefix, suffix)| {
                current
                    .strip_prefix(prefix)
                    .and_then(|rest| rest.strip_suffix(suffix))
                    .filter(|inner| inner.len() < current.len())
            })?;
        }
    }
}

pub struct MockProvider {
    context: MockContext,
    mode: MockMode,
    seed: u64,
    name: String,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn mock_err(msg: impl Into<String>) -> GatewayError {
    GatewayError::Mock(msg.into())
}

impl MockProvider {
    pub fn new(context: MockContext, mode: MockMode, seed: u64) -> Self {
        let name = match mode {
            MockMode::Faithful => "mock-faithful",
            MockMode::Corrupt { .. } => "mock-corrupt",
            MockMode::NoisyRanker { .. } => "mock-noisy",
        };
        MockProvider {
            context,
            mode,
            seed,
            name: name.to_string(),
        }
    }

    pub fn context(&self) -> &MockContext {
        &self.context
    }

    pub fn mode(&self) -> MockMode {
        self.mode
    }

    fn requirement_set(&self, prompt: &Prompt) -> Result<RequirementSet, GatewayError> {
        let section = prompt
            .section(SectionTag::RequirementsQuery)
            .ok_or_else(|| mock_err("prompt has no requirements section"))?;
        let reqs = numbered_lines(section)
            .into_iter()
            .map(|(_, text)| {
                self.context
                    .requirement(&text)
                    .cloned()
                    .ok_or_else(|| mock_err(format!("unknown requirement {text:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        RequirementSet::new("mock", reqs).map_err(|e| mock_err(e.to_string()))
    }

    fn paraphrase(&self, prompt: &Prompt, versions: usize, rng: &mut ChaCha8Rng) -> Result<String, GatewayError> {
        let section = prompt
            .section(SectionTag::RequirementsQuery)
            .ok_or_else(|| mock_err("prompt has no requirements section"))?;
        let variants: Vec<Vec<String>> = numbered_lines(section)
            .into_iter()
            .map(|(_, text)| {
                let offset = rng.gen_range(0..WRAPPERS.len());
                (0..versions)
                    .map(|j| {
                        let index = if j < WRAPPERS.len() {
                            (offset + j) % WRAPPERS.len()
                        } else {
                            j
                        };
                        mock_paraphrase(&text, index)
                    })
                    .collect()
            })
            .collect();
        Ok(paraphrase_response_json(&variants))
    }

    fn generation(&self, prompt: &Prompt, rng: &mut ChaCha8Rng) -> Result<String, GatewayError> {
        let truth = self.requirement_set(prompt)?.ground_truth();
        let formulation = match self.mode {
            MockMode::Corrupt { p, kind } if rng.gen_bool(p.clamp(0.0, 1.0)) => {
                match corrupt_formulation(&truth, kind, rng.gen()) {
                    Ok((corrupted, _)) => corrupted,
                    Err(SynthError::NoEligibleItem(_)) => truth,
                    Err(e) => return Err(mock_err(e.to_string())),
                }
            }
            _ => truth,
        };
        Ok(format!("```json\n{}\n```", generation_response_json(&formulation)))
    }

    fn annotation(&self, prompt: &Prompt, rng: &mut ChaCha8Rng) -> Result<String, GatewayError> {
        let reqs = self.requirement_set(prompt)?;
        let table = prompt
            .section(SectionTag::InstanceTable)
            .ok_or_else(|| mock_err("prompt has no instance table"))?;
        let Value::Array(curves) = extract_json(table, JsonKind::Array)? else {
            return Err(mock_err("instance table is not an array"));
        };
        let insts = curves
            .iter()
            .map(|c| {
                let id = c
                    .get("curve")
                    .and_then(Value::as_str)
                    .ok_or_else(|| mock_err("curve entry without id"))?;
                self.context
                    .instances
                    .get(id)
                    .cloned()
                    .ok_or_else(|| mock_err(format!("unknown instance {id:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ranking = oracle_ranking(&reqs, &insts, &self.context.eval).map_err(|e| mock_err(e.to_string()))?;
        let mut order = ranking.ordered_ids();
        if let MockMode::NoisyRanker { k } = self.mode {
            if order.len() >= 2 {
                for _ in 0..k {
                    let i = rng.gen_range(0..order.len() - 1);
                    order.swap(i, i + 1);
                }
            }
        }
        Ok(annotation_response_json(&order))
    }
}

impl ChatProvider for MockProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &Prompt, _params: &RequestParams) -> Result<Completion, GatewayError> {
        let rendered = prompt.render();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(rendered.as_bytes()));
        let text = match prompt.kind {
            PromptKind::Paraphrase { versions } => self.paraphrase(prompt, versions, &mut rng)?,
            PromptKind::Generation => self.generation(prompt, &mut rng)?,
            PromptKind::Annotation => self.annotation(prompt, &mut rng)?,
        };
        Ok(Completion { text, attempts: 1 })
    }
}

use apf_core::formulation::EvalOptions;
use apf_core::synthbench::{BandSpec, IntentSpec, OffsetRange, Sampling};
use apf_gateway::AnnotationOptions;
use serde::{Deserialize, Serialize};

use crate::error::PipelineError;

pub const SFT_INSTRUCTION_VERSION: &str = "apf-sft-v1";

pub const SFT_INSTRUCTION: &str = "Translate the numbered engineering design requirements into an optimization \
formulation. Write one item per requirement, in order, as `name: objective minimize|maximize <aggregation>` or \
`name: constraint <expression> >= <number> | <= <number> | < 0`, where an aggregation is \
`min|max|mean(metric in [lo, hi])`.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Temperatures {
    pub generation: f64,
    pub annotation: f64,
    pub paraphrase: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Temperatures {
            generation: 0.0,
            annotation: 0.0,
            paraphrase: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SftConfig {
    pub instruction: String,
    pub version: String,
}

impl Default for SftConfig {
    fn default() -> Self {
        SftConfig {
            instruction: SFT_INSTRUCTION.to_string(),
            version: SFT_INSTRUCTION_VERSION.to_string(),
        }
    }
}

/// Fine-tuning hyperparameters, emitted as export metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineTuneMeta {
    pub lora_dropout: f64,
    pub lora_r: u32,
    pub lora_alpha: u32,
    pub learning_rate: f64,
    pub batch_size: u32,
    pub max_length: u32,
    pub epochs: u32,
}

impl Default for FineTuneMeta {
    fn default() -> Self {
        FineTuneMeta {
            lora_dropout: 0.05,
            lora_r: 16,
            lora_alpha: 32,
            learning_rate: 2e-4,
            batch_size: 16,
            max_length: 1600,
            epochs: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Number of derived requirement sets, one per synthesized design cluster.
    pub n_sets: usize,
    /// Instances per set: the source design plus jittered neighbours.
    pub pool_size: usize,
    /// Largest band-level change of a neighbour, in dB.
    pub jitter_db: f64,
    /// Half-width of the jitter on the remaining design entries.
    pub shape_jitter: f64,
    pub dim: usize,
    pub bands: BandSpec,
    pub sampling: Sampling,
    pub intents: IntentSpec,
    pub threshold: f64,
    pub alpha: f64,
    /// Paraphrases per requirement (v).
    pub variants: usize,
    /// Augmented samples per base record (l).
    pub samples: usize,
    pub augment_first: bool,
    /// Reject paraphrases whose numbers differ from the source text.
    pub numeric_guard: bool,
    pub temperatures: Temperatures,
    pub annotation: AnnotationOptions,
    pub eval: EvalOptions,
    pub max_concurrency: usize,
    pub sft: SftConfig,
    pub fine_tune: FineTuneMeta,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 7,
            n_sets: 2000,
            pool_size: 10,
            jitter_db: 0.5,
            shape_jitter: 0.1,
            dim: 8,
            bands: BandSpec::default(),
            sampling: Sampling::default(),
            intents: IntentSpec::default().with_offsets(OffsetRange { min: 0.25, max: 0.5 }),
            threshold: 0.7,
            alpha: 0.5,
            variants: 3,
            samples: 5,
            augment_first: false,
            numeric_guard: true,
            temperatures: Temperatures::default(),
            annotation: AnnotationOptions::default(),
            eval: EvalOptions::default(),
            max_concurrency: 4,
            sft: SftConfig::default(),
            fine_tune: FineTuneMeta::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::Config(msg.to_string()));
        if self.pool_size < 2 {
            return bad("pool_size must be at least 2");
        }
        if !(self.jitter_db >= 0.0 && self.jitter_db.is_finite()) {
            return bad("jitter_db must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.shape_jitter) {
            return bad("shape_jitter must lie in [0, 1]");
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [-1, 1]");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if self.variants == 0 {
            return bad("variants must be at least 1");
        }
        if self.samples == 0 {
            return bad("samples must be at least 1");
        }
        if self.max_concurrency == 0 {
            return bad("max_concurrency must be at least 1");
        }
        self.bands.validate()?;
        Ok(())
    }
}

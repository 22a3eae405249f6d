//! Dataset pipeline: derive requirement sets from synthetic curves, generate
//! formulations, annotate reference rankings, score, select, augment and
//! export supervised fine-tuning rows.

pub mod config;
pub mod error;
pub mod io;
pub mod records;
pub mod report;
pub mod run;
pub mod stages;

pub use config::{FineTuneMeta, PipelineConfig, SftConfig, Temperatures};
pub use error::PipelineError;
pub use records::{DatasetRecord, DerivedSet, RankingRecord, SftMeta, SftSample, Stage, StageFailure};
pub use report::{report_scores, Histogram, RunReport};
pub use run::{run_pipeline, RunOutput};
pub use stages::{
    annotate_references, augment, augment_record, derive_requirements, export_sft, generate_base, mock_context,
    score_records, select, synth_pool, SelectionSummary,
};

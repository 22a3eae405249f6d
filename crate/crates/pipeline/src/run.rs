use apf_core::TestInstance;
use apf_gateway::ChatProvider;

use crate::config::PipelineConfig;
use crate::error::PipelineError;
use crate::records::{DatasetRecord, DerivedSet, RankingRecord, SftSample, StageFailure};
use crate::report::{report_scores, RunReport, StageCounts};
use crate::stages::{annotate_references, augment, export_sft, generate_base, score_records, select, SelectionSummary};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub base: Vec<DatasetRecord>,
    pub rankings: Vec<RankingRecord>,
    pub scored: Vec<DatasetRecord>,
    pub hq: Vec<DatasetRecord>,
    pub train: Vec<DatasetRecord>,
    pub sft: Vec<SftSample>,
    pub report: RunReport,
}

/// Stage outputs a run report summarizes.
#[derive(Debug, Clone, Copy)]
pub struct StageResults<'a> {
    pub sets: usize,
    pub base: &'a [DatasetRecord],
    pub rankings: &'a [RankingRecord],
    pub scored: &'a [DatasetRecord],
    pub selection: SelectionSummary,
    pub train: usize,
    pub exported: usize,
}

pub fn build_report(cfg: &PipelineConfig, results: StageResults<'_>, failures: Vec<StageFailure>) -> RunReport {
    use crate::records::Stage;
    let count = |stage: Stage| failures.iter().filter(|f| f.stage == stage).count();
    let scored_base = results.scored.iter().filter(|r| !r.augmented).count();
    let selection = results.selection;
    let counts = StageCounts {
        sets: results.sets,
        base: results.base.iter().filter(|r| !r.augmented).count(),
        generate_failed: count(Stage::Generate),
        annotated: results.rankings.len(),
        annotate_failed: count(Stage::Annotate),
        scored: scored_base,
        unscorable: count(Stage::Score),
        selection,
        augment_failed: count(Stage::Augment),
        train: results.train,
        exported: results.exported,
    };
    RunReport {
        seed: cfg.seed,
        threshold: cfg.threshold,
        retention_rate: if scored_base == 0 {
            0.0
        } else {
            selection.retained_base as f64 / scored_base as f64
        },
        counts,
        failures,
        histogram: report_scores(results.scored),
    }
}

/// Full pipeline in memory: generate, score, select, augment, export, or
/// with `augment_first`, generate, augment, score, select, export.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    sets: &[DerivedSet],
    pool: &[TestInstance],
    provider: &dyn ChatProvider,
) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let mut failures = Vec::new();
    let (base, f) = generate_base(sets, provider, cfg);
    failures.extend(f);
    let (rankings, f) = annotate_references(sets, pool, provider, cfg);
    failures.extend(f);
    let (scored, hq, train, selection) = if cfg.augment_first {
        let (augmented, f) = augment(&base, provider, cfg);
        failures.extend(f);
        let (scored, f) = score_records(&augmented, &rankings, sets, pool, cfg);
        failures.extend(f);
        let (hq, selection) = select(&scored, cfg.threshold);
        let train = hq.clone();
        (scored, hq, train, selection)
    } else {
        let (scored, f) = score_records(&base, &rankings, sets, pool, cfg);
        failures.extend(f);
        let (hq, selection) = select(&scored, cfg.threshold);
        let (train, f) = augment(&hq, provider, cfg);
        failures.extend(f);
        (scored, hq, train, selection)
    };
    let sft = export_sft(&train, cfg)?;
    let results = StageResults {
        sets: sets.len(),
        base: &base,
        rankings: &rankings,
        scored: &scored,
        selection,
        train: train.len(),
        exported: sft.len(),
    };
    let report = build_report(cfg, results, failures);
    Ok(RunOutput {
        base,
        rankings,
        scored,
        hq,
        train,
        sft,
        report,
    })
}

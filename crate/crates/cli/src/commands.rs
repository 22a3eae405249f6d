//! Stage commands. Each stage reads its inputs from stage files and writes
//! its outputs back; `run-all` calls the same functions in order.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use apf_core::formulation::{parse_formulation, EvalOptions};
use apf_core::ranking::induced_ranking_detailed;
use apf_core::scoring::alignment_report;
use apf_core::{Formulation, TestInstance};
use apf_gateway::{ChatProvider, HttpProvider, MockMode, MockProvider};
use apf_pipeline::io::{read_jsonl, write_json, write_jsonl};
use apf_pipeline::run::{build_report, StageResults};
use apf_pipeline::{
    annotate_references, augment, derive_requirements, export_sft, generate_base, mock_context, report_scores,
    score_records, select, synth_pool, DatasetRecord, DerivedSet, FineTuneMeta, RankingRecord, RunReport,
    SelectionSummary, StageFailure,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Command, EvalArgs, ProviderKind};
use crate::error::CliError;
use crate::settings::Settings;

pub const INSTANCES: &str = "instances.jsonl";
pub const REQSETS: &str = "reqsets.jsonl";
pub const BASE: &str = "base.jsonl";
pub const RANKINGS: &str = "rankings.jsonl";
pub const SCORED: &str = "scored.jsonl";
pub const HQ: &str = "hq.jsonl";
pub const TRAIN: &str = "train.jsonl";
pub const SFT: &str = "sft.jsonl";
pub const SFT_META: &str = "sft.meta.json";
pub const REPORT: &str = "report.json";

pub struct Ctx {
    pub settings: Settings,
}

#[derive(Debug, Serialize)]
struct SftMetaFile<'a> {
    instruction_version: &'a str,
    instruction: &'a str,
    rows: usize,
    seed: u64,
    fine_tune: &'a FineTuneMeta,
}

/// Failures file next to a stage output: `base.jsonl` -> `base.failures.jsonl`.
fn failures_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().unwrap_or_default().to_string_lossy();
    output.with_file_name(format!("{stem}.failures.jsonl"))
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.settings.out.join(name)
    }

    fn input(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.path(default))
    }

    fn write<T: Serialize>(&self, path: &Path, rows: &[T]) -> Result<(), CliError> {
        Ok(write_jsonl(path, rows, self.settings.force)?)
    }

    fn write_with_failures<T: Serialize>(
        &self,
        path: &Path,
        rows: &[T],
        failures: &[StageFailure],
    ) -> Result<(), CliError> {
        self.write(path, rows)?;
        self.write(&failures_path(path), failures)
    }

    fn provider(&self, sets: &[DerivedSet], pool: &[TestInstance]) -> Result<Box<dyn ChatProvider>, CliError> {
        let p = &self.settings.provider;
        let cfg = &self.settings.pipeline;
        let mode = match p.kind {
            ProviderKind::Http => return Ok(Box::new(HttpProvider::new(p.http.clone())?)),
            ProviderKind::MockFaithful => MockMode::Faithful,
            ProviderKind::MockCorrupt => MockMode::Corrupt {
                p: p.corrupt_p,
                kind: p.corruption,
            },
            ProviderKind::MockNoisy => MockMode::NoisyRanker { k: p.noise_k },
        };
        Ok(Box::new(MockProvider::new(
            mock_context(sets, pool, cfg),
            mode,
            cfg.seed,
        )))
    }

    /// Requirement sets and the instance pool, as stage inputs.
    fn sets_and_pool(&self) -> Result<(Vec<DerivedSet>, Vec<TestInstance>), CliError> {
        Ok((read_jsonl(&self.path(REQSETS))?, read_jsonl(&self.path(INSTANCES))?))
    }
}

fn summary(stage: &str, path: &Path, rows: usize, failures: usize) -> Value {
    json!({ "stage": stage, "output": path.display().to_string(), "rows": rows, "failures": failures })
}

/// A provider stage in which every item failed means the provider is unusable.
fn check_provider(stage: &str, inputs: usize, ok: usize, failures: &[StageFailure]) -> Result<(), CliError> {
    if inputs > 0 && ok == 0 {
        let reason = failures.first().map(|f| f.reason.as_str()).unwrap_or("no output");
        return Err(CliError::Provider(format!(
            "{stage}: every request failed; first failure: {reason}"
        )));
    }
    Ok(())
}

pub fn synth(ctx: &Ctx) -> Result<Value, CliError> {
    let pool = synth_pool(&ctx.settings.pipeline)?;
    let path = ctx.path(INSTANCES);
    ctx.write(&path, &pool)?;
    Ok(summary("synth", &path, pool.len(), 0))
}

pub fn derive_reqs(ctx: &Ctx) -> Result<Value, CliError> {
    let pool: Vec<TestInstance> = read_jsonl(&ctx.path(INSTANCES))?;
    let sets = derive_requirements(&pool, &ctx.settings.pipeline)?;
    let path = ctx.path(REQSETS);
    ctx.write(&path, &sets)?;
    Ok(summary("derive-reqs", &path, sets.len(), 0))
}

pub fn gen_formulations(ctx: &Ctx) -> Result<(Value, Vec<DatasetRecord>, Vec<StageFailure>), CliError> {
    let (sets, pool) = ctx.sets_and_pool()?;
    let provider = ctx.provider(&sets, &pool)?;
    let (base, failures) = generate_base(&sets, provider.as_ref(), &ctx.settings.pipeline);
    check_provider("gen-formulations", sets.len(), base.len(), &failures)?;
    let path = ctx.path(BASE);
    ctx.write_with_failures(&path, &base, &failures)?;
    Ok((
        summary("gen-formulations", &path, base.len(), failures.len()),
        base,
        failures,
    ))
}

pub fn annotate(ctx: &Ctx) -> Result<(Value, Vec<RankingRecord>, Vec<StageFailure>), CliError> {
    let (sets, pool) = ctx.sets_and_pool()?;
    let provider = ctx.provider(&sets, &pool)?;
    let (rankings, failures) = annotate_references(&sets, &pool, provider.as_ref(), &ctx.settings.pipeline);
    check_provider("annotate", sets.len(), rankings.len(), &failures)?;
    let path = ctx.path(RANKINGS);
    ctx.write_with_failures(&path, &rankings, &failures)?;
    Ok((
        summary("annotate", &path, rankings.len(), failures.len()),
        rankings,
        failures,
    ))
}

pub fn score(ctx: &Ctx, input: &Path) -> Result<(Value, Vec<DatasetRecord>, Vec<StageFailure>), CliError> {
    let records: Vec<DatasetRecord> = read_jsonl(input)?;
    let rankings: Vec<RankingRecord> = read_jsonl(&ctx.path(RANKINGS))?;
    let (sets, pool) = ctx.sets_and_pool()?;
    let (scored, failures) = score_records(&records, &rankings, &sets, &pool, &ctx.settings.pipeline);
    let path = ctx.path(SCORED);
    ctx.write_with_failures(&path, &scored, &failures)?;
    Ok((summary("score", &path, scored.len(), failures.len()), scored, failures))
}

pub fn select_stage(ctx: &Ctx, input: &Path) -> Result<(Value, Vec<DatasetRecord>, SelectionSummary), CliError> {
    let scored: Vec<DatasetRecord> = read_jsonl(input)?;
    let (hq, sel) = select(&scored, ctx.settings.pipeline.threshold);
    let path = ctx.path(HQ);
    ctx.write(&path, &hq)?;
    let mut out = summary("select", &path, hq.len(), 0);
    out["threshold"] = json!(ctx.settings.pipeline.threshold);
    out["selection"] = json!(sel);
    Ok((out, hq, sel))
}

pub fn augment_stage(ctx: &Ctx, input: &Path) -> Result<(Value, Vec<DatasetRecord>, Vec<StageFailure>), CliError> {
    let records: Vec<DatasetRecord> = read_jsonl(input)?;
    let (sets, pool) = match ctx.settings.provider.kind {
        ProviderKind::Http => (Vec::new(), Vec::new()),
        _ => ctx.sets_and_pool()?,
    };
    let provider = ctx.provider(&sets, &pool)?;
    let (train, failures) = augment(&records, provider.as_ref(), &ctx.settings.pipeline);
    let path = ctx.path(TRAIN);
    ctx.write_with_failures(&path, &train, &failures)?;
    Ok((summary("augment", &path, train.len(), failures.len()), train, failures))
}

pub fn export(ctx: &Ctx, input: &Path) -> Result<(Value, usize), CliError> {
    let cfg = &ctx.settings.pipeline;
    let records: Vec<DatasetRecord> = read_jsonl(input)?;
    let rows = export_sft(&records, cfg)?;
    let path = ctx.path(SFT);
    ctx.write(&path, &rows)?;
    let meta = SftMetaFile {
        instruction_version: &cfg.sft.version,
        instruction: &cfg.sft.instruction,
        rows: rows.len(),
        seed: cfg.seed,
        fine_tune: &cfg.fine_tune,
    };
    write_json(&ctx.path(SFT_META), &meta, ctx.settings.force)?;
    Ok((summary("export-sft", &path, rows.len(), 0), rows.len()))
}

fn read_formulation(path: &Path) -> Result<Formulation, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_formulation(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn eval(ctx: &Ctx, args: &EvalArgs) -> Result<Value, CliError> {
    let f = read_formulation(&args.formulation)?;
    let truth = read_formulation(&args.truth)?;
    let insts: Vec<TestInstance> = read_jsonl(&args.instances)?;
    let opts: EvalOptions = ctx.settings.pipeline.eval;
    let reference = induced_ranking_detailed(&truth, &insts, &opts).map_err(|e| CliError::Data(e.to_string()))?;
    let report = alignment_report(
        &f,
        &insts,
        &reference.ranking,
        &reference.feasible,
        ctx.settings.pipeline.alpha,
        &opts,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    serde_json::to_value(report).map_err(|e| CliError::Data(e.to_string()))
}

pub fn report(input: &Path) -> Result<apf_pipeline::Histogram, CliError> {
    let scored: Vec<DatasetRecord> = read_jsonl(input)?;
    Ok(report_scores(&scored))
}

/// Every stage through its stage function, then `report.json`.
pub fn run_all(ctx: &Ctx) -> Result<RunReport, CliError> {
    let cfg = &ctx.settings.pipeline;
    synth(ctx)?;
    log("synth");
    derive_reqs(ctx)?;
    log("derive-reqs");
    let (_, base, mut failures) = gen_formulations(ctx)?;
    log("gen-formulations");
    let (_, rankings, f) = annotate(ctx)?;
    failures.extend(f);
    log("annotate");
    let (scored, selection, train, exported) = if cfg.augment_first {
        let (_, _, f) = augment_stage(ctx, &ctx.path(BASE))?;
        failures.extend(f);
        let (_, scored, f) = score(ctx, &ctx.path(TRAIN))?;
        failures.extend(f);
        let (_, hq, selection) = select_stage(ctx, &ctx.path(SCORED))?;
        let (_, exported) = export(ctx, &ctx.path(HQ))?;
        (scored, selection, hq.len(), exported)
    } else {
        let (_, scored, f) = score(ctx, &ctx.path(BASE))?;
        failures.extend(f);
        let (_, _, selection) = select_stage(ctx, &ctx.path(SCORED))?;
        let (_, train, f) = augment_stage(ctx, &ctx.path(HQ))?;
        failures.extend(f);
        let (_, exported) = export(ctx, &ctx.path(TRAIN))?;
        (scored, selection, train.len(), exported)
    };
    log("score, select, augment, export-sft");
    let sets: Vec<DerivedSet> = read_jsonl(&ctx.path(REQSETS))?;
    let results = StageResults {
        sets: sets.len(),
        base: &base,
        rankings: &rankings,
        scored: &scored,
        selection,
        train,
        exported,
    };
    let report = build_report(cfg, results, failures);
    write_json(&ctx.path(REPORT), &report, ctx.settings.force)?;
    Ok(report)
}

fn log(stage: &str) {
    eprintln!("apf: {stage} done");
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Data(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    emit(&text)
}

pub fn dispatch(ctx: &Ctx, command: &Command) -> Result<(), CliError> {
    match command {
        Command::Synth => print_json(&synth(ctx)?),
        Command::DeriveReqs => print_json(&derive_reqs(ctx)?),
        Command::GenFormulations => print_json(&gen_formulations(ctx)?.0),
        Command::Annotate => print_json(&annotate(ctx)?.0),
        Command::Score(a) => print_json(&score(ctx, &ctx.input(&a.input, BASE))?.0),
        Command::Select(a) => print_json(&select_stage(ctx, &ctx.input(&a.input, SCORED))?.0),
        Command::Augment(a) => print_json(&augment_stage(ctx, &ctx.input(&a.input, HQ))?.0),
        Command::ExportSft(a) => print_json(&export(ctx, &ctx.input(&a.input, TRAIN))?.0),
        Command::Eval(a) => print_json(&eval(ctx, a)?),
        Command::Report(a) => {
            let hist = report(&ctx.input(&a.input.input, SCORED))?;
            if a.table {
                emit(&hist.render_table())
            } else {
                print_json(&hist)
            }
        }
        Command::RunAll => print_json(&run_all(ctx)?),
    }
}

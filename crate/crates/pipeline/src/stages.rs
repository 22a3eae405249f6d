//! Pipeline stages. Each stage is a pure function of its inputs, the config
//! and the provider; per-record failures are collected, never raised.

use std::collections::{HashMap, HashSet};

use apf_core::formulation::parse_formulation;
use apf_core::scoring::quality_score;
use apf_core::synthbench::{extract_requirements, render_curve, DesignParams};
use apf_core::{print_formulation, Formulation, RequirementSet, TestInstance};
use apf_gateway::{
    build_annotation_prompt, build_generation_prompt, build_paraphrase_prompt, parse_annotation_response,
    parse_generation_response, parse_paraphrase_response, ChatProvider, GatewayError, MockContext, RequestParams,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::PipelineError;
use crate::records::{DatasetRecord, DerivedSet, RankingRecord, SftMeta, SftSample, Stage, StageFailure};

/// Maps `f` over `items` on at most `threads` workers, keeping input order.
pub fn par_map<T: Sync, U: Send>(threads: usize, items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

/// Stable per-key seed, independent of processing order.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in key.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn set_id(k: usize) -> String {
    format!("set-{:05}", k + 1)
}

fn instance_id(cluster: usize, member: usize) -> String {
    format!("inst-{:05}-{:02}", cluster + 1, member)
}

/// `n_sets` design clusters of `pool_size` curves: a random centre design
/// followed by neighbours whose band levels move by up to `jitter_db` dB.
pub fn synth_pool(cfg: &PipelineConfig) -> Result<Vec<TestInstance>, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jobs = Vec::with_capacity(cfg.n_sets * cfg.pool_size);
    for c in 0..cfg.n_sets {
        let centre = DesignParams::random(&mut rng, cfg.dim)?;
        for m in 0..cfg.pool_size {
            let x = if m == 0 {
                centre.clone()
            } else {
                centre.neighbour(&mut rng, cfg.jitter_db, cfg.shape_jitter)?
            };
            jobs.push((instance_id(c, m), x, rng.gen::<u64>()));
        }
    }
    par_map(cfg.max_concurrency, &jobs, |(id, x, seed)| {
        render_curve(id.clone(), x, &cfg.bands, &cfg.sampling, *seed)
    })
    .into_iter()
    .map(|r| r.map_err(PipelineError::from))
    .collect()
}

/// One requirement set per consecutive block of `pool_size` instances,
/// thresholds read from the first instance of the block.
pub fn derive_requirements(pool: &[TestInstance], cfg: &PipelineConfig) -> Result<Vec<DerivedSet>, PipelineError> {
    if !pool.len().is_multiple_of(cfg.pool_size) {
        return Err(PipelineError::Config(format!(
            "{} instances do not split into pools of {}",
            pool.len(),
            cfg.pool_size
        )));
    }
    let blocks: Vec<(usize, &[TestInstance])> = pool.chunks(cfg.pool_size).enumerate().collect();
    par_map(cfg.max_concurrency, &blocks, |(k, block)| {
        let id = set_id(*k);
        let seed = derive_seed(cfg.seed, &id);
        let set = extract_requirements(id, &block[0], &cfg.bands, &cfg.intents, seed)?;
        Ok(DerivedSet {
            set,
            source_instance: block[0].id.clone(),
            instance_ids: block.iter().map(|i| i.id.clone()).collect(),
        })
    })
    .into_iter()
    .collect()
}

pub fn instance_index(pool: &[TestInstance]) -> HashMap<&str, &TestInstance> {
    pool.iter().map(|i| (i.id.as_str(), i)).collect()
}

fn instances_for(set: &DerivedSet, index: &HashMap<&str, &TestInstance>) -> Result<Vec<TestInstance>, String> {
    set.instance_ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .map(|i| (*i).clone())
                .ok_or_else(|| format!("unknown instance {id}"))
        })
        .collect()
}

/// Mock context knowing every derived requirement and pool instance.
pub fn mock_context(sets: &[DerivedSet], pool: &[TestInstance], cfg: &PipelineConfig) -> MockContext {
    let mut ctx = MockContext::new(cfg.eval);
    for s in sets {
        ctx.add_requirement_set(&s.set);
    }
    ctx.add_instances(pool);
    ctx
}

fn failure(id: &str, stage: Stage, reason: impl std::fmt::Display) -> StageFailure {
    StageFailure {
        id: id.to_string(),
        stage,
        reason: reason.to_string(),
    }
}

fn split<T>(results: Vec<Result<T, StageFailure>>) -> (Vec<T>, Vec<StageFailure>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(f) => failed.push(f),
        }
    }
    (ok, failed)
}

/// One base record per set whose generated formulation parses.
pub fn generate_base(
    sets: &[DerivedSet],
    provider: &dyn ChatProvider,
    cfg: &PipelineConfig,
) -> (Vec<DatasetRecord>, Vec<StageFailure>) {
    let params = RequestParams {
        temperature: cfg.temperatures.generation,
    };
    let results = par_map(cfg.max_concurrency, sets, |s| {
        let id = s.id();
        let run = || -> Result<Formulation, GatewayError> {
            let prompt = build_generation_prompt(&s.set)?;
            let done = provider.complete(&prompt, &params)?;
            parse_generation_response(&done.text, &s.set)
        };
        run()
            .map(|formulation| DatasetRecord {
                id: id.to_string(),
                base_id: id.to_string(),
                set_id: id.to_string(),
                requirement_set: s.set.clone(),
                formulation: formulation.with_id(id),
                score: None,
                augmented: false,
                permutation: None,
                flags: Vec::new(),
            })
            .map_err(|e| failure(id, Stage::Generate, e))
    });
    split(results)
}

/// Reference ranking per set; a response that fails validation is retried once.
pub fn annotate_references(
    sets: &[DerivedSet],
    pool: &[TestInstance],
    provider: &dyn ChatProvider,
    cfg: &PipelineConfig,
) -> (Vec<RankingRecord>, Vec<StageFailure>) {
    let index = instance_index(pool);
    let params = RequestParams {
        temperature: cfg.temperatures.annotation,
    };
    let source = format!("annotator:{}", provider.name());
    let results = par_map(cfg.max_concurrency, sets, |s| {
        let id = s.id();
        let insts = instances_for(s, &index).map_err(|e| failure(id, Stage::Annotate, e))?;
        let prompt =
            build_annotation_prompt(&s.set, &insts, &cfg.annotation).map_err(|e| failure(id, Stage::Annotate, e))?;
        let mut last = None;
        for _ in 0..2 {
            let done = provider
                .complete(&prompt, &params)
                .map_err(|e| failure(id, Stage::Annotate, e))?;
            match parse_annotation_response(&done.text, &s.instance_ids, &source) {
                Ok(result) => {
                    return Ok(RankingRecord {
                        set_id: id.to_string(),
                        ranking: result.ranking,
                        raw_response: result.raw_response,
                    })
                }
                Err(e) => last = Some(e),
            }
        }
        Err(failure(id, Stage::Annotate, last.expect("two attempts made")))
    });
    split(results)
}

/// Scores base records against their set's reference ranking; augmented
/// records inherit their base score.
pub fn score_records(
    records: &[DatasetRecord],
    rankings: &[RankingRecord],
    sets: &[DerivedSet],
    pool: &[TestInstance],
    cfg: &PipelineConfig,
) -> (Vec<DatasetRecord>, Vec<StageFailure>) {
    let index = instance_index(pool);
    let by_set: HashMap<&str, &RankingRecord> = rankings.iter().map(|r| (r.set_id.as_str(), r)).collect();
    let set_by_id: HashMap<&str, &DerivedSet> = sets.iter().map(|s| (s.id(), s)).collect();
    let bases: Vec<&DatasetRecord> = records.iter().filter(|r| !r.augmented).collect();
    let scored = par_map(cfg.max_concurrency, &bases, |r| {
        let fail = |e: String| failure(&r.id, Stage::Score, e);
        let ranking = by_set
            .get(r.set_id.as_str())
            .ok_or_else(|| fail(format!("no reference ranking for set {}", r.set_id)))?;
        let set = set_by_id
            .get(r.set_id.as_str())
            .ok_or_else(|| fail(format!("unknown set {}", r.set_id)))?;
        let insts = instances_for(set, &index).map_err(fail)?;
        let q = quality_score(&r.formulation, &insts, &ranking.ranking, &cfg.eval)
            .map_err(|e| failure(&r.id, Stage::Score, e))?;
        Ok((r.id.clone(), q.value))
    });
    let (scores, failures) = split(scored);
    let score_of: HashMap<String, f64> = scores.into_iter().collect();
    let out = records
        .iter()
        .filter_map(|r| {
            score_of.get(&r.base_id).map(|s| DatasetRecord {
                score: Some(*s),
                ..r.clone()
            })
        })
        .collect();
    (out, failures)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct SelectionSummary {
    pub retained_base: usize,
    pub dropped_base: usize,
    pub retained_children: usize,
    pub dropped_children: usize,
}

/// Keeps base records scoring at least `threshold` and exactly the
/// augmented records whose base is kept.
pub fn select(records: &[DatasetRecord], threshold: f64) -> (Vec<DatasetRecord>, SelectionSummary) {
    let kept: HashSet<&str> = records
        .iter()
        .filter(|r| !r.augmented && r.score.is_some_and(|s| s >= threshold))
        .map(|r| r.id.as_str())
        .collect();
    let mut summary = SelectionSummary::default();
    let mut out = Vec::new();
    for r in records {
        let keep = kept.contains(r.base_id.as_str());
        match (r.augmented, keep) {
            (false, true) => summary.retained_base += 1,
            (false, false) => summary.dropped_base += 1,
            (true, true) => summary.retained_children += 1,
            (true, false) => summary.dropped_children += 1,
        }
        if keep {
            out.push(r.clone());
        }
    }
    (out, summary)
}

/// Signed decimal numbers in `text`; a `-` counts as a sign only when it
/// does not follow a digit, letter or point.
pub fn numbers_in(text: &str) -> Vec<f64> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let signed = chars[i] == '-'
            && i + 1 < chars.len()
            && chars[i + 1].is_ascii_digit()
            && (i == 0 || !(chars[i - 1].is_alphanumeric() || chars[i - 1] == '.'));
        let starts = chars[i].is_ascii_digit() && (i == 0 || !(chars[i - 1].is_alphabetic() || chars[i - 1] == '.'));
        if signed || starts {
            let begin = i;
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || (chars[i] == '.' && i + 1 < chars.len() && chars[i + 1].is_ascii_digit()))
            {
                i += 1;
            }
            let token: String = chars[begin..i].iter().collect();
            if let Ok(v) = token.parse() {
                out.push(v);
            }
        } else {
            i += 1;
        }
    }
    out
}

fn same_numbers(a: &str, b: &str) -> bool {
    let mut x = numbers_in(a);
    let mut y = numbers_in(b);
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    x == y
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128)
        .try_fold(1u128, |acc, k| acc.checked_mul(k))
        .unwrap_or(u128::MAX)
}

/// The `index`-th permutation of `0..n` in lexicographic order.
pub fn nth_permutation(mut index: u128, n: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for k in (0..n).rev() {
        let f = factorial(k);
        let pick = (index / f) as usize;
        index %= f;
        out.push(pool.remove(pick));
    }
    out
}

fn decode_combination(mut index: u128, n: usize, v: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let digit = (index % v as u128) as usize;
            index /= v as u128;
            digit
        })
        .collect()
}

/// `count` distinct indices from `0..total`, uniformly without replacement.
fn sample_distinct(rng: &mut ChaCha8Rng, total: u128, count: usize) -> Vec<u128> {
    if total <= 1 << 20 {
        return rand::seq::index::sample(rng, total as usize, count)
            .into_iter()
            .map(|i| i as u128)
            .collect();
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let i = rng.gen_range(0..total);
        if seen.insert(i) {
            out.push(i);
        }
    }
    out
}

/// `v` texts per requirement; a rejected paraphrase is replaced by the
/// original text.
fn paraphrase_variants(
    set: &RequirementSet,
    provider: &dyn ChatProvider,
    cfg: &PipelineConfig,
    flags: &mut Vec<String>,
) -> Vec<Vec<String>> {
    let n = set.len();
    let v = cfg.variants;
    let originals: Vec<String> = set.requirements().iter().map(|r| r.text.clone()).collect();
    let params = RequestParams {
        temperature: cfg.temperatures.paraphrase,
    };
    let response = build_paraphrase_prompt(set, v)
        .and_then(|p| provider.complete(&p, &params))
        .and_then(|done| parse_paraphrase_response(&done.text, n, v));
    match response {
        Ok(lists) => lists
            .into_iter()
            .enumerate()
            .map(|(i, list)| {
                list.into_iter()
                    .map(|text| {
                        if cfg.numeric_guard && !same_numbers(&originals[i], &text) {
                            let flag = format!("numeric_drift:{}", i + 1);
                            if !flags.contains(&flag) {
                                flags.push(flag);
                            }
                            originals[i].clone()
                        } else {
                            text
                        }
                    })
                    .collect()
            })
            .collect(),
        Err(e) => {
            flags.push(format!("paraphrase_fallback: {e}"));
            originals.iter().map(|t| vec![t.clone(); v]).collect()
        }
    }
}

/// `l` augmented children of `base`: distinct variant combinations, each
/// with its own uniform permutation applied to requirements and items alike.
pub fn augment_record(
    base: &DatasetRecord,
    provider: &dyn ChatProvider,
    cfg: &PipelineConfig,
) -> Result<Vec<DatasetRecord>, PipelineError> {
    let n = base.requirement_set.len();
    let v = cfg.variants;
    let l = cfg.samples;
    let combos = (0..n)
        .try_fold(1u128, |acc, _| acc.checked_mul(v as u128))
        .unwrap_or(u128::MAX);
    let total = combos.saturating_mul(factorial(n));
    if (l as u128) > total {
        return Err(PipelineError::AugmentBudget {
            requested: l,
            available: total,
        });
    }
    let mut flags = Vec::new();
    let variants = paraphrase_variants(&base.requirement_set, provider, cfg, &mut flags);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("augment:{}", base.id)));
    let picks: Vec<(Vec<usize>, Vec<usize>)> = if (l as u128) <= combos {
        sample_distinct(&mut rng, combos, l)
            .into_iter()
            .map(|c| {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                (decode_combination(c, n, v), perm)
            })
            .collect()
    } else {
        let perms = factorial(n);
        sample_distinct(&mut rng, total, l)
            .into_iter()
            .map(|i| (decode_combination(i / perms, n, v), nth_permutation(i % perms, n)))
            .collect()
    };
    picks
        .into_iter()
        .enumerate()
        .map(|(j, (combo, perm))| {
            let id = format!("{}-aug{:02}", base.id, j + 1);
            let texts = combo.iter().enumerate().map(|(i, &c)| variants[i][c].clone()).collect();
            let requirement_set = base.requirement_set.with_texts(texts)?.permuted(&perm)?;
            let formulation = base.formulation.permuted(&perm)?.with_id(id.clone());
            Ok(DatasetRecord {
                id,
                base_id: base.id.clone(),
                set_id: base.set_id.clone(),
                requirement_set,
                formulation,
                score: base.score,
                augmented: true,
                permutation: Some(perm),
                flags: flags.clone(),
            })
        })
        .collect()
}

/// Each base record followed by its children; augmented inputs pass through.
pub fn augment(
    records: &[DatasetRecord],
    provider: &dyn ChatProvider,
    cfg: &PipelineConfig,
) -> (Vec<DatasetRecord>, Vec<StageFailure>) {
    let results = par_map(cfg.max_concurrency, records, |r| {
        if r.augmented {
            return (vec![r.clone()], None);
        }
        match augment_record(r, provider, cfg) {
            Ok(children) => {
                let mut out = Vec::with_capacity(children.len() + 1);
                out.push(r.clone());
                out.extend(children);
                (out, None)
            }
            Err(e) => (vec![r.clone()], Some(failure(&r.id, Stage::Augment, e))),
        }
    });
    let mut out = Vec::new();
    let mut failures = Vec::new();
    for (rows, f) in results {
        out.extend(rows);
        failures.extend(f);
    }
    (out, failures)
}

/// SFT rows; aborts on the first record whose printed output does not parse
/// back to its formulation.
pub fn export_sft(records: &[DatasetRecord], cfg: &PipelineConfig) -> Result<Vec<SftSample>, PipelineError> {
    records
        .iter()
        .map(|r| {
            let output = print_formulation(&r.formulation);
            let back: Formulation = parse_formulation(&output).map_err(|e| PipelineError::RoundTrip {
                id: r.id.clone(),
                detail: e.to_string(),
            })?;
            if back.items() != r.formulation.items() {
                return Err(PipelineError::RoundTrip {
                    id: r.id.clone(),
                    detail: "reparsed items differ".into(),
                });
            }
            Ok(SftSample {
                instruction: cfg.sft.instruction.clone(),
                input: r.requirement_set.numbered_text(),
                output,
                meta: SftMeta {
                    id: r.id.clone(),
                    score: r.score,
                    base_id: r.base_id.clone(),
                    augmented: r.augmented,
                },
            })
        })
        .collect()
}

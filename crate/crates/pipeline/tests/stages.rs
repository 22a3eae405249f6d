mod common;

use apf_core::formulation::parse_formulation;
use apf_core::synthbench::{oracle_ranking, CorruptionKind};
use apf_core::Formulation;
use apf_gateway::{ChatProvider, Completion, GatewayError, MockMode, Prompt, RequestParams};
use apf_pipeline::records::Stage;
use apf_pipeline::stages::instance_index;
use apf_pipeline::{
    annotate_references, augment, augment_record, export_sft, generate_base, report_scores, score_records, select,
    DatasetRecord, PipelineError,
};
use common::{config, kendall_distance, provider, setup};

#[test]
fn derived_sets_are_satisfied_by_their_source() {
    let cfg = config(20, 5);
    let (pool, sets) = setup(&cfg);
    assert_eq!(sets.len(), 20);
    let index = instance_index(&pool);
    for s in &sets {
        assert_eq!(s.instance_ids.len(), cfg.pool_size);
        assert_eq!(s.instance_ids[0], s.source_instance);
        let source = index[s.source_instance.as_str()];
        let report = apf_core::formulation::feasibility(&s.set.ground_truth(), source, &cfg.eval).unwrap();
        assert!(report.feasible, "{}", s.id());
    }
}

#[test]
fn derivation_is_deterministic() {
    let cfg = config(10, 9);
    let (pool_a, sets_a) = setup(&cfg);
    let (pool_b, sets_b) = setup(&cfg);
    assert_eq!(pool_a, pool_b);
    assert_eq!(sets_a, sets_b);
}

#[test]
fn faithful_generation_parses_every_set() {
    let cfg = config(30, 1);
    let (pool, sets) = setup(&cfg);
    let p = provider(&cfg, &pool, &sets, MockMode::Faithful);
    let (base, failures) = generate_base(&sets, &p, &cfg);
    assert!(failures.is_empty());
    assert_eq!(base.len(), 30);
    for (r, s) in base.iter().zip(&sets) {
        assert_eq!(r.id, s.id());
        assert_eq!(r.formulation.items(), s.set.ground_truth().items());
    }
}

#[test]
fn corrupt_generation_rate_is_near_p() {
    let cfg = config(200, 2);
    let (pool, sets) = setup(&cfg);
    let p = provider(
        &cfg,
        &pool,
        &sets,
        MockMode::Corrupt {
            p: 0.3,
            kind: CorruptionKind::FlipComparator,
        },
    );
    let (base, failures) = generate_base(&sets, &p, &cfg);
    assert!(failures.is_empty());
    let corrupted = base
        .iter()
        .zip(&sets)
        .filter(|(r, s)| r.formulation.items() != s.set.ground_truth().items())
        .count();
    // Binomial(200, 0.3): mean 60, sd 6.5.
    assert!((34..=86).contains(&corrupted), "{corrupted}");
}

#[test]
fn faithful_annotation_equals_oracle() {
    let cfg = config(15, 3);
    let (pool, sets) = setup(&cfg);
    let p = provider(&cfg, &pool, &sets, MockMode::Faithful);
    let (rankings, failures) = annotate_references(&sets, &pool, &p, &cfg);
    assert!(failures.is_empty());
    let index = instance_index(&pool);
    for (r, s) in rankings.iter().zip(&sets) {
        let insts: Vec<_> = s.instance_ids.iter().map(|id| index[id.as_str()].clone()).collect();
        let oracle = oracle_ranking(&s.set, &insts, &cfg.eval).unwrap();
        assert_eq!(r.ranking.ordered_ids(), oracle.ordered_ids());
        assert!(r.ranking.source.starts_with("annotator:mock-faithful"));
    }
}

#[test]
fn noisy_annotation_is_one_swap_away() {
    let cfg = config(15, 4);
    let (pool, sets) = setup(&cfg);
    let p = provider(&cfg, &pool, &sets, MockMode::NoisyRanker { k: 1 });
    let (rankings, failures) = annotate_references(&sets, &pool, &p, &cfg);
    assert!(failures.is_empty());
    let index = instance_index(&pool);
    for (r, s) in rankings.iter().zip(&sets) {
        let insts: Vec<_> = s.instance_ids.iter().map(|id| index[id.as_str()].clone()).collect();
        let oracle = oracle_ranking(&s.set, &insts, &cfg.eval).unwrap();
        assert_eq!(kendall_distance(&r.ranking.ordered_ids(), &oracle.ordered_ids()), 1);
    }
}

#[test]
fn single_instance_set_is_recorded_as_failure() {
    let cfg = config(3, 5);
    let (pool, mut sets) = setup(&cfg);
    sets[1].instance_ids.truncate(1);
    let p = provider(&cfg, &pool, &sets, MockMode::Faithful);
    let (rankings, failures) = annotate_references(&sets, &pool, &p, &cfg);
    assert_eq!(rankings.len(), 2);
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0].id, sets[1].id());
    assert_eq!(failures[0].stage, Stage::Annotate);
    assert_eq!(failures[0].reason, GatewayError::TooFewInstances(1).to_string());
}

fn scored_faithful(n: usize, seed: u64) -> (apf_pipeline::PipelineConfig, Vec<DatasetRecord>) {
    let cfg = config(n, seed);
    let (pool, sets) = setup(&cfg);
    let p = provider(&cfg, &pool, &sets, MockMode::Faithful);
    let (base, _) = generate_base(&sets, &p, &cfg);
    let (rankings, _) = annotate_references(&sets, &pool, &p, &cfg);
    let (scored, failures) = score_records(&base, &rankings, &sets, &pool, &cfg);
    assert!(failures.is_empty());
    (cfg, scored)
}

#[test]
fn faithful_corpus_is_fully_retained() {
    let (cfg, scored) = scored_faithful(25, 6);
    assert!(scored.iter().all(|r| r.score == Some(1.0)));
    let (hq, summary) = select(&scored, cfg.threshold);
    assert_eq!(hq.len(), 25);
    assert_eq!(summary.dropped_base, 0);
    let hist = report_scores(&scored);
    assert_eq!(hist.bins.len(), 20);
    let last = hist.bins.last().unwrap();
    assert_eq!((last.lo, last.hi, last.count), (0.9, 1.0, 25));
    assert_eq!(last.proportion, 1.0);
}

#[test]
fn missing_ranking_marks_record_unscorable() {
    let cfg = config(4, 7);
    let (pool, sets) = setup(&cfg);
    let p = provider(&cfg, &pool, &sets, MockMode::Faithful);
    let (base, _) = generate_base(&sets, &p, &cfg);
    let (mut rankings, _) = annotate_references(&sets, &pool, &p, &cfg);
    rankings.remove(2);
    let (scored, failures) = score_records(&base, &rankings, &sets, &pool, &cfg);
    assert_eq!(scored.len(), 3);
    assert_eq!(failures.len(), 1);
    assert_eq!(
        (failures[0].id.as_str(), failures[0].stage),
        (sets[2].id(), Stage::Score)
    );
}

#[test]
fn low_score_drops_base_and_children() {
    let (mut cfg, mut scored) = scored_faithful(2, 8);
    cfg.variants = 3;
    cfg.samples = 5;
    scored[0].score = Some(0.69);
    scored[1].score = Some(1.0);
    let (pool, sets) = setup(&cfg);
    let p = provider(&cfg, &pool, &sets, MockMode::Faithful);
    let (all, failures) = augment(&scored, &p, &cfg);
    assert!(failures.is_empty());
    assert_eq!(all.len(), 12);
    let (hq, summary) = select(&all, 0.7);
    assert_eq!(summary.retained_base, 1);
    assert_eq!(summary.dropped_base, 1);
    assert_eq!(summary.dropped_children, 5);
    assert_eq!(summary.retained_children, 5);
    assert!(hq.iter().all(|r| r.base_id == scored[1].id));
}

#[test]
fn augmentation_permutes_in_tandem() {
    let (cfg, scored) = scored_faithful(3, 9);
    let (pool, sets) = setup(&cfg);
    let p = provider(&cfg, &pool, &sets, MockMode::Faithful);
    for base in &scored {
        assert_eq!(base.requirement_set.len(), 4);
        let children = augment_record(base, &p, &cfg).unwrap();
        assert_eq!(children.len(), 5);
        for (j, child) in children.iter().enumerate() {
            assert_eq!(child.id, format!("{}-aug{:02}", base.id, j + 1));
            assert_eq!(child.base_id, base.id);
            assert!(child.augmented);
            assert_eq!(child.score, base.score);
            let perm = child.permutation.as_ref().unwrap();
            assert_eq!(perm.len(), 4);
            let back = child.formulation.unpermuted(perm).unwrap();
            assert_eq!(back.items(), base.formulation.items());
            for (k, req) in child.requirement_set.requirements().iter().enumerate() {
                let source = &base.requirement_set.requirements()[perm[k]];
                assert_eq!(req.intent, source.intent);
                assert!(req.text.contains(&source.text), "{} / {}", req.text, source.text);
                assert_eq!(child.formulation.items()[k], base.formulation.items()[perm[k]]);
            }
        }
        let texts: Vec<Vec<String>> = children
            .iter()
            .map(|c| {
                let perm = c.permutation.as_ref().unwrap();
                let mut t = vec![String::new(); perm.len()];
                for (k, &src) in perm.iter().enumerate() {
                    t[src] = c.requirement_set.requirements()[k].text.clone();
                }
                t
            })
            .collect();
        for i in 0..texts.len() {
            for j in i + 1..texts.len() {
                assert_ne!(texts[i], texts[j], "variant combinations must be distinct");
            }
        }
    }
}

#[test]
fn augmentation_budget_is_enforced() {
    let (mut cfg, scored) = scored_faithful(1, 10);
    let mut base = scored[0].clone();
    let one = apf_core::RequirementSet::new("s", vec![base.requirement_set.requirements()[0].clone()]).unwrap();
    base.formulation = one.ground_truth();
    base.requirement_set = one;
    cfg.variants = 2;
    cfg.samples = 3;
    let (pool, sets) = setup(&cfg);
    let p = provider(&cfg, &pool, &sets, MockMode::Faithful);
    assert!(matches!(
        augment_record(&base, &p, &cfg),
        Err(PipelineError::AugmentBudget {
            requested: 3,
            available: 2
        })
    ));
    cfg.samples = 2;
    assert_eq!(augment_record(&base, &p, &cfg).unwrap().len(), 2);
}

struct DriftingParaphraser;

impl ChatProvider for DriftingParaphraser {
    fn name(&self) -> &str {
        "drift"
    }

    fn complete(&self, prompt: &Prompt, _: &RequestParams) -> Result<Completion, GatewayError> {
        let query = prompt.section(apf_gateway::SectionTag::RequirementsQuery).unwrap();
        let n = apf_gateway::prompt::numbered_lines(query).len();
        let variants: Vec<Vec<String>> = (0..n)
            .map(|k| vec![format!("requirement {k} now says 99.5 dB"); 3])
            .collect();
        Ok(Completion {
            text: apf_gateway::parse::paraphrase_response_json(&variants),
            attempts: 1,
        })
    }
}

#[test]
fn numeric_guard_restores_original_text() {
    let (cfg, scored) = scored_faithful(1, 11);
    let children = augment_record(&scored[0], &DriftingParaphraser, &cfg).unwrap();
    for child in &children {
        assert!(child.flags.iter().any(|f| f.starts_with("numeric_drift:")));
        let perm = child.permutation.as_ref().unwrap();
        for (k, req) in child.requirement_set.requirements().iter().enumerate() {
            assert_eq!(req.text, scored[0].requirement_set.requirements()[perm[k]].text);
        }
    }
}

struct Down;

impl ChatProvider for Down {
    fn name(&self) -> &str {
        "down"
    }

    fn complete(&self, _: &Prompt, _: &RequestParams) -> Result<Completion, GatewayError> {
        Err(GatewayError::Transport("connection refused".into()))
    }
}

#[test]
fn provider_down_degrades_per_record() {
    let cfg = config(6, 12);
    let (pool, sets) = setup(&cfg);
    let (base, failures) = generate_base(&sets, &Down, &cfg);
    assert!(base.is_empty());
    assert_eq!(failures.len(), 6);
    assert!(failures.iter().all(|f| f.stage == Stage::Generate));
    let (rankings, failures) = annotate_references(&sets, &pool, &Down, &cfg);
    assert!(rankings.is_empty());
    assert_eq!(failures.len(), 6);

    let (cfg, scored) = scored_faithful(2, 12);
    let children = augment_record(&scored[0], &Down, &cfg).unwrap();
    assert_eq!(children.len(), cfg.samples);
    assert!(children[0].flags.iter().any(|f| f.starts_with("paraphrase_fallback")));
}

#[test]
fn export_round_trips_and_handles_empty_input() {
    let (cfg, scored) = scored_faithful(3, 13);
    let (pool, sets) = setup(&cfg);
    let p = provider(&cfg, &pool, &sets, MockMode::Faithful);
    let (train, _) = augment(&scored, &p, &cfg);
    let rows = export_sft(&train, &cfg).unwrap();
    assert_eq!(rows.len(), 3 * (1 + cfg.samples));
    for (row, r) in rows.iter().zip(&train) {
        let back: Formulation = parse_formulation(&row.output).unwrap();
        assert_eq!(back.items(), r.formulation.items());
        assert_eq!(row.input, r.requirement_set.numbered_text());
        assert_eq!(row.instruction, cfg.sft.instruction);
        assert_eq!(
            (row.meta.base_id.as_str(), row.meta.augmented),
            (r.base_id.as_str(), r.augmented)
        );
    }
    assert!(export_sft(&[], &cfg).unwrap().is_empty());
}

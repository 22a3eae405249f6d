#![allow(dead_code)]

use apf_core::TestInstance;
use apf_gateway::{MockMode, MockProvider};
use apf_pipeline::{derive_requirements, mock_context, synth_pool, DerivedSet, PipelineConfig};

pub fn config(n_sets: usize, seed: u64) -> PipelineConfig {
    PipelineConfig {
        n_sets,
        seed,
        pool_size: 6,
        ..PipelineConfig::default()
    }
}

pub fn setup(cfg: &PipelineConfig) -> (Vec<TestInstance>, Vec<DerivedSet>) {
    let pool = synth_pool(cfg).unwrap();
    let sets = derive_requirements(&pool, cfg).unwrap();
    (pool, sets)
}

pub fn provider(cfg: &PipelineConfig, pool: &[TestInstance], sets: &[DerivedSet], mode: MockMode) -> MockProvider {
    MockProvider::new(mock_context(sets, pool, cfg), mode, cfg.seed)
}

/// Number of discordant pairs between two best-first orderings.
pub fn kendall_distance(a: &[String], b: &[String]) -> usize {
    let pos = |id: &String| b.iter().position(|x| x == id).unwrap();
    let mapped: Vec<usize> = a.iter().map(pos).collect();
    let mut d = 0;
    for i in 0..mapped.len() {
        for j in i + 1..mapped.len() {
            if mapped[i] > mapped[j] {
                d += 1;
            }
        }
    }
    d
}

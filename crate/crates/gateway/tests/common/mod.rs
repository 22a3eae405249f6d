#![allow(dead_code)]

use apf_core::formulation::EvalOptions;
use apf_core::synthbench::{extract_requirements, generate_instances, BandSpec, IntentSpec, Sampling};
use apf_core::{RequirementSet, TestInstance};
use apf_gateway::{MockContext, MockMode, MockProvider};

pub fn pool(seed: u64) -> Vec<TestInstance> {
    generate_instances(6, 8, &BandSpec::default(), &Sampling::default(), seed).unwrap()
}

pub fn reqs_for(source: &TestInstance, id: &str) -> RequirementSet {
    extract_requirements(id, source, &BandSpec::default(), &IntentSpec::default(), 3).unwrap()
}

pub fn mock(reqs: &[&RequirementSet], insts: &[TestInstance], mode: MockMode, seed: u64) -> MockProvider {
    let mut ctx = MockContext::new(EvalOptions::default());
    for r in reqs {
        ctx.add_requirement_set(r);
    }
    ctx.add_instances(insts);
    MockProvider::new(ctx, mode, seed)
}

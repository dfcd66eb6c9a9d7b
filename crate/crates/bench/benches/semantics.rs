use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use tslforge::harness::{run_trial, BenchmarkCase, TrialConfig};
use tslforge::llm::{mock_client, MockScript};
use tslforge::{atom_alphabet, bounded_equiv, check_machine, emit_controller, parse_spec, PromptVariant};
use tslforge_bench::{benchmarks_dir, gold, gold_source, machine, signatures};

fn parsing(c: &mut Criterion) {
    let mut group = c.benchmark_group("parse_spec");
    for case in ["ball", "cube_bounce", "vending"] {
        let src = gold_source(case);
        group.bench_with_input(BenchmarkId::from_parameter(case), &src, |b, src| {
            b.iter(|| parse_spec(black_box(src)).unwrap())
        });
    }
    group.finish();
}

fn equivalence(c: &mut Criterion) {
    let spec = gold("ball");
    let alphabet = atom_alphabet(&spec, &signatures("ball"));
    let mut group = c.benchmark_group("bounded_equiv_ball");
    group.sample_size(10);
    for k in [2, 3, 4] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| bounded_equiv(&spec, &spec, &alphabet, k).unwrap())
        });
    }
    group.finish();
}

fn conformance(c: &mut Criterion) {
    let spec = gold("ball");
    let m = machine("ball");
    let mut group = c.benchmark_group("check_machine_ball");
    group.sample_size(10);
    for k in [3, 4] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| check_machine(&m, &spec, k).unwrap())
        });
    }
    group.finish();
    c.bench_function("emit_controller_ball", |b| b.iter(|| emit_controller(black_box(&m))));
}

fn trial(c: &mut Criterion) {
    let case = BenchmarkCase::load(&benchmarks_dir().join("ball")).unwrap();
    let reply = format!("```tsl\n{}\n```", gold_source("ball").trim_end());
    let client = mock_client(MockScript::round_robin([reply]));
    let config = TrialConfig::default();
    let mut group = c.benchmark_group("mock_trial_ball");
    group.sample_size(10);
    group.bench_function("full", |b| b.iter(|| run_trial(&case, PromptVariant::Full, 0, &client, &config)));
    group.finish();
}

criterion_group!(benches, parsing, equivalence, conformance, trial);
criterion_main!(benches);

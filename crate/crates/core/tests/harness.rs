mod oracle;

use std::fs;
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use proptest::prelude::*;
use tslforge::harness::{
    read_records, run_suite, run_trial, summarize, BenchmarkCase, Stage, SuiteOptions, TrialConfig, RECORDS_FILE,
};
use tslforge::llm::{mock_client, MockScript, ScriptEntry, ScriptedFailure};
use tslforge::{parse_spec, EquivVerdict, PromptVariant, RunRecord};

const GOLD: &str = include_str!("../../../benchmarks/ball/gold.tsl");
const PROSE: &str = "I am sorry, but I cannot write that specification.";

fn ball() -> BenchmarkCase {
    BenchmarkCase::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/ball")).unwrap()
}

/// The gold spec with moveLeft and moveRight exchanged in its first two guarantees.
fn mutant() -> String {
    let lines: Vec<String> = GOLD
        .lines()
        .map(|l| {
            if l.contains("rightmost ball -> F") || l.contains("leftmost ball -> F") {
                l.replace("moveLeft", "@").replace("moveRight", "moveLeft").replace('@', "moveRight")
            } else {
                l.to_string()
            }
        })
        .collect();
    let out = lines.join("\n") + "\n";
    assert_ne!(out, GOLD);
    out
}

fn fenced(s: &str) -> String {
    format!("Here is the specification:\n```tsl\n{}\n```\n", s.trim_end())
}

fn mixed_script() -> MockScript {
    let mut texts = vec![fenced(GOLD); 5];
    texts.extend(vec![fenced(&mutant()); 2]);
    texts.extend(vec![PROSE.to_string(); 3]);
    MockScript::round_robin(texts)
}

fn opts(trials: u32) -> SuiteOptions {
    SuiteOptions { trials, parallelism: 4, ..SuiteOptions::default() }
}

fn strip(records: &[RunRecord]) -> Vec<RunRecord> {
    let mut v: Vec<RunRecord> = records.iter().map(RunRecord::without_timing).collect();
    v.sort_by_key(RunRecord::key);
    v
}

fn trial(text: &str) -> RunRecord {
    let client = mock_client(MockScript::round_robin([text]));
    run_trial(&ball(), PromptVariant::Full, 0, &client, &TrialConfig::default())
}

#[test]
fn gold_response_is_valid_and_correct() {
    let r = trial(&fenced(GOLD));
    assert!(r.is_valid() && r.is_correct(), "{r:?}");
    assert_eq!(r.stage, Stage::Done);
    assert_eq!(r.equiv, Some(EquivVerdict::EquivalentUpTo { k: 4 }));
    assert_eq!(r.v, 1);
    assert!(!r.prompt_hash.is_empty());
}

#[test]
fn mutant_response_is_valid_but_incorrect() {
    let r = trial(&fenced(&mutant()));
    assert!(r.is_valid());
    assert!(!r.is_correct());
    let Some(EquivVerdict::Counterexample { trace, .. }) = &r.equiv else { panic!("{r:?}") };
    let gold = parse_spec(GOLD).unwrap();
    let bad = parse_spec(&mutant()).unwrap();
    assert_ne!(oracle::spec_holds(&gold, trace), oracle::spec_holds(&bad, trace));
}

#[test]
fn prose_response_is_invalid_at_extraction() {
    let r = trial(PROSE);
    assert!(!r.is_valid());
    assert_eq!(r.stage, Stage::Extract);
    assert_eq!(r.extracted, None);
    assert!(r.equiv.is_none());
}

#[test]
fn parse_and_validation_failures_are_staged() {
    let r = trial("```\nalways guarantee { [ball <- ]; }\n```");
    assert_eq!((r.stage, r.parse_ok), (Stage::Parse, false));
    assert!(r.parse_error.is_some());
    let r = trial("```\nalways guarantee { bounce ball; }\n```");
    assert_eq!((r.stage, r.parse_ok), (Stage::Validate, true));
    assert!(!r.is_valid());
}

#[test]
fn mixed_script_rates_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let client = mock_client(mixed_script());
    let out = run_suite(&[ball()], &[PromptVariant::Full], &client, &opts(10), dir.path()).unwrap();
    let c = out.summary.cell("ball", PromptVariant::Full).unwrap();
    assert_eq!((c.trials, c.valid, c.correct), (10, 7, 5));
    assert_eq!(c.rate_valid(), Some(Ratio::new(7, 10)));
    assert_eq!(c.rate_correct(), Some(Ratio::new(1, 2)));
    assert_eq!(c.rate_correct_given_valid(), Some(Ratio::new(5, 7)));
    assert_eq!(c.rate_correct_given_valid().unwrap() * c.rate_valid().unwrap(), c.rate_correct().unwrap());
    assert_eq!(out.summary.correctness_method, "bounded_equiv(4)");

    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), format!("ball,full,10,7,5,0.7,0.5,{}", 5.0 / 7.0));
    assert!(dir.path().join("metrics.csv").exists());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["cells"][0]["exact"]["rate_correct_given_valid"], "5/7");
}

#[test]
fn summary_replays_from_persisted_records() {
    let dir = tempfile::tempdir().unwrap();
    let client = mock_client(mixed_script());
    let out = run_suite(&[ball()], &PromptVariant::ALL, &client, &opts(4), dir.path()).unwrap();
    let persisted = read_records(&dir.path().join(RECORDS_FILE)).unwrap();
    assert_eq!(persisted.len(), 3 * 4);
    assert_eq!(summarize(&persisted, false), out.summary);
    let mut reversed = persisted.clone();
    reversed.reverse();
    assert_eq!(summarize(&reversed, false), out.summary);
}

fn run_dir(tag: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(tag);
    (dir, path)
}

#[test]
fn interrupted_run_resumes_to_the_same_records() {
    let cases = [ball()];
    let variants = PromptVariant::ALL;
    let (_a, full) = run_dir("full");
    let whole = run_suite(&cases, &variants, &mock_client(mixed_script()), &opts(5), &full).unwrap();
    assert!(!whole.interrupted);

    let (_b, partial) = run_dir("partial");
    let stopped = SuiteOptions { stop_after: Some(6), ..opts(5) };
    let first = run_suite(&cases, &variants, &mock_client(mixed_script()), &stopped, &partial).unwrap();
    assert!(first.interrupted);
    assert!(first.records.len() >= 6 && first.records.len() < 15);
    // a kill mid-write leaves half a line behind
    let records_path = partial.join(RECORDS_FILE);
    let mut text = fs::read_to_string(&records_path).unwrap();
    text.push_str("{\"v\":1,\"benchmark\":\"ba");
    fs::write(&records_path, text).unwrap();

    let second = run_suite(&cases, &variants, &mock_client(mixed_script()), &opts(5), &partial).unwrap();
    assert_eq!(second.resumed, first.records.len());
    assert_eq!(second.newly_run + second.resumed, 15);
    assert_eq!(strip(&second.records), strip(&whole.records));
    assert_eq!(strip(&read_records(&records_path).unwrap()), strip(&whole.records));
    assert_eq!(second.summary, whole.summary);
}

#[test]
fn provider_errors_are_recorded_and_excluded() {
    let script = MockScript {
        fallback: vec![ScriptEntry::Text(fenced(GOLD)), ScriptEntry::Failure { error: ScriptedFailure::Server }],
        ..MockScript::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_suite(&[ball()], &[PromptVariant::Full], &mock_client(script.clone()), &opts(4), dir.path()).unwrap();
    let c = out.summary.cell("ball", PromptVariant::Full).unwrap();
    assert_eq!((c.trials, c.valid, c.provider_errors), (2, 2, 2));
    assert_eq!(out.records.len(), 4);
    assert!(out.records.iter().filter(|r| r.is_provider_error()).all(|r| r.stage == Stage::Generate));

    let counted = summarize(&out.records, true);
    assert_eq!(counted.cells[0].trials, 4);
    assert_eq!(counted.cells[0].rate_valid(), Some(Ratio::new(1, 2)));
}

#[test]
fn auth_failure_aborts_the_run() {
    let script =
        MockScript { fallback: vec![ScriptEntry::Failure { error: ScriptedFailure::Auth }], ..MockScript::default() };
    let dir = tempfile::tempdir().unwrap();
    let err = run_suite(&[ball()], &[PromptVariant::Full], &mock_client(script), &opts(3), dir.path()).unwrap_err();
    assert!(matches!(err, tslforge::harness::HarnessError::Provider(_)));
    assert!(read_records(&dir.path().join(RECORDS_FILE)).unwrap().is_empty());
}

#[test]
fn full_run_covers_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cases = tslforge::harness::load_cases(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")).unwrap();
    assert_eq!(cases.len(), 5);
    assert!(cases.iter().filter(|c| c.name != "ball").all(|c| c.provenance.as_deref() == Some("reconstructed")));
    let client = mock_client(MockScript::round_robin([PROSE]));
    let out = run_suite(&cases, &PromptVariant::ALL, &client, &opts(2), dir.path()).unwrap();
    assert_eq!(out.records.len(), cases.len() * 3 * 2);
    assert_eq!(out.summary.cells.len(), cases.len() * 3);
}

#[test]
fn every_gold_is_equivalent_to_itself() {
    for case in tslforge::harness::load_cases(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")).unwrap()
    {
        let client = mock_client(MockScript::round_robin([fenced(&tslforge::print_spec(&case.gold))]));
        let r = run_trial(&case, PromptVariant::Full, 0, &client, &TrialConfig::default());
        assert!(r.is_correct(), "{}: {r:?}", case.name);
    }
}

fn response_pool() -> Vec<String> {
    vec![
        fenced(GOLD),
        fenced(&mutant()),
        PROSE.to_string(),
        "```\nalways guarantee { [ball <- ]; }\n```".to_string(),
        "```\nalways guarantee { bounce ball; }\n```".to_string(),
        "always guarantee { G [ball <- moveLeft ball]; }".to_string(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn records_respect_conservation(picks in prop::collection::vec(0usize..6, 1..8)) {
        let pool = response_pool();
        let mut case = ball();
        case.equiv_bound = 2;
        let script = MockScript::round_robin(picks.iter().map(|&i| pool[i].clone()));
        let dir = tempfile::tempdir().unwrap();
        let n = picks.len() as u32;
        let out = run_suite(&[case], &[PromptVariant::Full], &mock_client(script), &opts(n), dir.path()).unwrap();
        for r in &out.records {
            if r.equiv.is_some() {
                prop_assert!(r.is_valid());
            }
        }
        let c = &out.summary.cells[0];
        prop_assert_eq!(c.trials, u64::from(n));
        prop_assert_eq!(c.valid, out.records.iter().filter(|r| r.is_valid()).count() as u64);
        prop_assert_eq!(c.correct, out.records.iter().filter(|r| r.is_correct()).count() as u64);
        prop_assert!(c.correct <= c.valid && c.valid <= c.trials);
        if c.valid > 0 {
            prop_assert_eq!(c.rate_correct_given_valid().unwrap() * c.rate_valid().unwrap(), c.rate_correct().unwrap());
            if c.valid < c.trials {
                prop_assert!(c.rate_correct_given_valid().unwrap() >= c.rate_correct().unwrap());
            }
        }
    }
}

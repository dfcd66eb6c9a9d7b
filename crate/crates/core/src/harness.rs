//! Benchmark evaluation: loads benchmark bundles, runs generation trials
//! through the full pipeline, persists one record per trial and folds records
//! into validity/correctness metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::llm::{
    GenerationRequest, Provider, ProviderError, ProviderErrorKind, DEFAULT_MAX_TOKENS, DEFAULT_MODEL,
    DEFAULT_TEMPERATURE,
};
use crate::mealy::{load_machine, MealyMachine};
use crate::prompt::{assemble_prompt, extract_spec, text_hash, PromptBundle, PromptVariant, DEFAULT_INSTRUCTIONS};
use crate::semantics::{bounded_equiv_with, EquivOptions, EquivVerdict, DEFAULT_BOUND, DEFAULT_LASSO_CAP};
use crate::signatures::{atom_alphabet, validate, SignatureTable, ValidationReport};
use crate::syntax::{parse_spec, ParseError, TslSpec};

pub const RECORD_VERSION: u32 = 1;
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const METRICS_CSV: &str = "metrics.csv";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Case { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: corrupt record: {message}")]
    CorruptRecords { path: PathBuf, line: usize, message: String },
    #[error("provider error aborted the run: {0}")]
    Provider(ProviderError),
    #[error("at least one trial is required")]
    NoTrials,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseMeta {
    #[serde(default)]
    provenance: Option<String>,
    #[serde(default)]
    equiv_bound: Option<usize>,
}

/// One benchmark: the three prompt inputs, the gold spec and its bound.
#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub name: String,
    pub bundle: PromptBundle,
    pub gold: TslSpec,
    pub equiv_bound: usize,
    pub provenance: Option<String>,
    /// Reference controller, when the bundle ships one.
    pub machine: Option<MealyMachine>,
}

impl BenchmarkCase {
    /// Reads `summary.txt`, `description.txt`, `signatures.json`, `gold.tsl`
    /// and the optional `machine.json` / `meta.json` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let read = |file: &str| {
            let path = dir.join(file);
            fs::read_to_string(&path).map_err(io_err(&path))
        };
        let bad = |file: &str, message: String| HarnessError::Case { path: dir.join(file), message };
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| bad("", "benchmark directory has no usable name".into()))?
            .to_string();
        let signatures =
            SignatureTable::from_json(&read("signatures.json")?).map_err(|e| bad("signatures.json", e.to_string()))?;
        let gold = parse_spec(&read("gold.tsl")?).map_err(|e| bad("gold.tsl", e.to_string()))?;
        let report = validate(&gold, &signatures);
        if !report.ok {
            let first = &report.issues[0];
            return Err(bad("gold.tsl", format!("gold spec does not validate: {}", first.message)));
        }
        let meta = match dir.join("meta.json").exists() {
            true => {
                serde_json::from_str::<CaseMeta>(&read("meta.json")?).map_err(|e| bad("meta.json", e.to_string()))?
            }
            false => CaseMeta::default(),
        };
        let machine = match dir.join("machine.json").exists() {
            true => Some(load_machine(&read("machine.json")?).map_err(|e| bad("machine.json", e.to_string()))?),
            false => None,
        };
        Ok(BenchmarkCase {
            bundle: PromptBundle {
                benchmark_name: name.clone(),
                summary: read("summary.txt")?,
                description: read("description.txt")?,
                signatures,
            },
            name,
            gold,
            equiv_bound: meta.equiv_bound.unwrap_or(DEFAULT_BOUND),
            provenance: meta.provenance,
            machine,
        })
    }
}

/// Loads `dir` itself when it is a benchmark, otherwise every benchmark
/// subdirectory of it, sorted by name.
pub fn load_cases(dir: &Path) -> Result<Vec<BenchmarkCase>, HarnessError> {
    if dir.join("gold.tsl").exists() {
        return Ok(vec![BenchmarkCase::load(dir)?]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("gold.tsl").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(HarnessError::Case { path: dir.to_path_buf(), message: "no benchmarks found".into() });
    }
    dirs.iter().map(|d| BenchmarkCase::load(d)).collect()
}

/// Last pipeline stage a trial reached; `Done` when every stage ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Prompt,
    Generate,
    Extract,
    Parse,
    Validate,
    Equiv,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub v: u32,
    pub benchmark: String,
    pub variant: PromptVariant,
    pub trial: u32,
    pub prompt_hash: String,
    pub raw_response: String,
    pub extracted: Option<String>,
    pub parse_ok: bool,
    pub parse_error: Option<ParseError>,
    pub validation: Option<ValidationReport>,
    pub equiv: Option<EquivVerdict>,
    pub k: usize,
    /// Where the trial stopped.
    pub stage: Stage,
    /// Failure detail for `stage` (extraction, prompt or equivalence budget).
    pub error: Option<String>,
    pub provider_error: Option<ProviderError>,
    pub wall_ms: u64,
    pub timestamp: String,
}

impl RunRecord {
    pub fn key(&self) -> (String, PromptVariant, u32) {
        (self.benchmark.clone(), self.variant, self.trial)
    }

    pub fn is_valid(&self) -> bool {
        self.parse_ok && self.validation.as_ref().is_some_and(|v| v.ok)
    }

    pub fn is_correct(&self) -> bool {
        self.equiv.as_ref().is_some_and(EquivVerdict::is_equivalent)
    }

    pub fn is_provider_error(&self) -> bool {
        self.provider_error.is_some()
    }

    /// The record with wall-clock fields cleared, for comparing runs.
    pub fn without_timing(&self) -> RunRecord {
        RunRecord { wall_ms: 0, timestamp: String::new(), ..self.clone() }
    }
}

/// Generation parameters shared by all trials.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub instructions: String,
    pub lasso_cap: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            instructions: DEFAULT_INSTRUCTIONS.to_string(),
            lasso_cap: DEFAULT_LASSO_CAP,
        }
    }
}

/// assemble → complete → extract → parse → validate → bounded equivalence
/// against the gold spec. Failures stop the pipeline and are recorded.
pub fn run_trial(
    case: &BenchmarkCase,
    variant: PromptVariant,
    trial: u32,
    provider: &dyn Provider,
    config: &TrialConfig,
) -> RunRecord {
    let started = Instant::now();
    let mut rec = RunRecord {
        v: RECORD_VERSION,
        benchmark: case.name.clone(),
        variant,
        trial,
        prompt_hash: String::new(),
        raw_response: String::new(),
        extracted: None,
        parse_ok: false,
        parse_error: None,
        validation: None,
        equiv: None,
        k: case.equiv_bound,
        stage: Stage::Prompt,
        error: None,
        provider_error: None,
        wall_ms: 0,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    pipeline(case, variant, trial, provider, config, &mut rec);
    rec.wall_ms = started.elapsed().as_millis() as u64;
    rec
}

fn pipeline(
    case: &BenchmarkCase,
    variant: PromptVariant,
    trial: u32,
    provider: &dyn Provider,
    config: &TrialConfig,
    rec: &mut RunRecord,
) {
    let prompt = match assemble_prompt(&case.bundle, variant, &config.instructions) {
        Ok(p) => p,
        Err(e) => return rec.error = Some(e.to_string()),
    };
    rec.prompt_hash = text_hash(&prompt);

    rec.stage = Stage::Generate;
    let request =
        GenerationRequest::new(prompt, &config.model, config.temperature, config.max_tokens, u64::from(trial));
    match request.and_then(|r| provider.complete(&r)) {
        Ok(result) => rec.raw_response = result.text,
        Err(e) => return rec.provider_error = Some(e),
    }

    rec.stage = Stage::Extract;
    let text = match extract_spec(&rec.raw_response) {
        Ok(t) => t,
        Err(e) => return rec.error = Some(e.to_string()),
    };
    rec.extracted = Some(text.clone());

    rec.stage = Stage::Parse;
    let candidate = match parse_spec(&text) {
        Ok(s) => s,
        Err(e) => return rec.parse_error = Some(e),
    };
    rec.parse_ok = true;

    rec.stage = Stage::Validate;
    let report = validate(&candidate, &case.bundle.signatures);
    let ok = report.ok;
    rec.validation = Some(report);
    if !ok {
        return;
    }

    rec.stage = Stage::Equiv;
    let sigs = &case.bundle.signatures;
    let alphabet = atom_alphabet(&candidate, sigs).union(&atom_alphabet(&case.gold, sigs));
    let opts = EquivOptions { cap: config.lasso_cap };
    match bounded_equiv_with(&candidate, &case.gold, &alphabet, case.equiv_bound, opts) {
        Ok(v) => {
            rec.equiv = Some(v);
            rec.stage = Stage::Done;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
}

/// Counts for one (benchmark, variant) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMetrics {
    pub benchmark: String,
    pub variant: PromptVariant,
    pub k: usize,
    pub trials: u64,
    pub valid: u64,
    pub correct: u64,
    /// Trials lost to provider errors (not in `trials` unless counted).
    pub provider_errors: u64,
}

impl CellMetrics {
    fn ratio(n: u64, d: u64) -> Option<Ratio<u64>> {
        (d > 0).then(|| Ratio::new(n, d))
    }

    pub fn rate_valid(&self) -> Option<Ratio<u64>> {
        Self::ratio(self.valid, self.trials)
    }

    pub fn rate_correct(&self) -> Option<Ratio<u64>> {
        Self::ratio(self.correct, self.trials)
    }

    /// Undefined when nothing was valid.
    pub fn rate_correct_given_valid(&self) -> Option<Ratio<u64>> {
        Self::ratio(self.correct, self.valid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsSummary {
    /// How "correct" was judged; human judgement is not reproduced.
    pub correctness_method: String,
    pub count_provider_errors: bool,
    pub cells: Vec<CellMetrics>,
}

impl MetricsSummary {
    pub fn cell(&self, benchmark: &str, variant: PromptVariant) -> Option<&CellMetrics> {
        self.cells.iter().find(|c| c.benchmark == benchmark && c.variant == variant)
    }

    pub fn to_json(&self) -> serde_json::Value {
        fn rate(r: Option<Ratio<u64>>) -> serde_json::Value {
            r.map_or(serde_json::Value::Null, |r| serde_json::json!(to_f64(r)))
        }
        fn exact(r: Option<Ratio<u64>>) -> serde_json::Value {
            r.map_or(serde_json::Value::Null, |r| serde_json::json!(r.to_string()))
        }
        let cells: Vec<_> = self
            .cells
            .iter()
            .map(|c| {
                serde_json::json!({
                    "benchmark": c.benchmark,
                    "variant": c.variant,
                    "k": c.k,
                    "trials": c.trials,
                    "valid": c.valid,
                    "correct": c.correct,
                    "provider_errors": c.provider_errors,
                    "rate_valid": rate(c.rate_valid()),
                    "rate_correct": rate(c.rate_correct()),
                    "rate_correct_given_valid": rate(c.rate_correct_given_valid()),
                    "exact": {
                        "rate_valid": exact(c.rate_valid()),
                        "rate_correct": exact(c.rate_correct()),
                        "rate_correct_given_valid": exact(c.rate_correct_given_valid()),
                    },
                })
            })
            .collect();
        serde_json::json!({
            "correctness_method": self.correctness_method,
            "count_provider_errors": self.count_provider_errors,
            "cells": cells,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = [
            "benchmark",
            "variant",
            "trials",
            "valid",
            "correct",
            "rate_valid",
            "rate_correct",
            "rate_correct_given_valid",
        ];
        w.write_record(header).expect("in-memory write");
        for c in &self.cells {
            w.write_record([
                c.benchmark.clone(),
                c.variant.to_string(),
                c.trials.to_string(),
                c.valid.to_string(),
                c.correct.to_string(),
                fmt_rate(c.rate_valid()),
                fmt_rate(c.rate_correct()),
                fmt_rate(c.rate_correct_given_valid()),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// One row per (benchmark, variant, metric), ready for plotting.
    pub fn to_long_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["benchmark", "variant", "metric", "value", "numerator", "denominator"])
            .expect("in-memory write");
        for c in &self.cells {
            let rows = [
                ("valid", c.valid, c.trials, c.rate_valid()),
                ("correct", c.correct, c.trials, c.rate_correct()),
                ("correct_given_valid", c.correct, c.valid, c.rate_correct_given_valid()),
            ];
            for (metric, n, d, r) in rows {
                w.write_record([
                    c.benchmark.clone(),
                    c.variant.to_string(),
                    metric.to_string(),
                    fmt_rate(r),
                    n.to_string(),
                    d.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn fmt_rate(r: Option<Ratio<u64>>) -> String {
    r.map(|r| to_f64(r).to_string()).unwrap_or_default()
}

/// Folds records into per-cell metrics. Order of `records` does not matter.
pub fn summarize(records: &[RunRecord], count_provider_errors: bool) -> MetricsSummary {
    let mut cells: BTreeMap<(String, PromptVariant), CellMetrics> = BTreeMap::new();
    let mut bounds = BTreeSet::new();
    for r in records {
        let cell = cells.entry((r.benchmark.clone(), r.variant)).or_insert_with(|| CellMetrics {
            benchmark: r.benchmark.clone(),
            variant: r.variant,
            k: r.k,
            trials: 0,
            valid: 0,
            correct: 0,
            provider_errors: 0,
        });
        bounds.insert(r.k);
        cell.k = cell.k.max(r.k);
        if r.is_provider_error() {
            cell.provider_errors += 1;
            if !count_provider_errors {
                continue;
            }
        }
        cell.trials += 1;
        cell.valid += u64::from(r.is_valid());
        cell.correct += u64::from(r.is_correct());
    }
    let correctness_method = match bounds.len() {
        1 => format!("bounded_equiv({})", bounds.first().expect("one bound")),
        _ => "bounded_equiv(k)".to_string(),
    };
    MetricsSummary { correctness_method, count_provider_errors, cells: cells.into_values().collect() }
}

/// Reads a records file, truncating a partial trailing line left by an
/// interrupted writer.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    let mut good_bytes = 0u64;
    let mut lines = BufReader::new(file).split(b'\n').enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let line = line.map_err(io_err(path))?;
        let is_last = lines.peek().is_none();
        if line.iter().all(u8::is_ascii_whitespace) {
            good_bytes += line.len() as u64 + 1;
            continue;
        }
        match serde_json::from_slice::<RunRecord>(&line) {
            Ok(r) => {
                records.push(r);
                good_bytes += line.len() as u64 + 1;
            }
            Err(_) if is_last => {
                log::warn!("{}: dropping partial last record", path.display());
                let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
                f.set_len(good_bytes).map_err(io_err(path))?;
                break;
            }
            Err(e) => {
                return Err(HarnessError::CorruptRecords {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub trials: u32,
    pub parallelism: usize,
    pub count_provider_errors: bool,
    pub trial: TrialConfig,
    /// Stop scheduling new trials once this many have been written.
    pub stop_after: Option<usize>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            trials: 10,
            parallelism: 1,
            count_provider_errors: false,
            trial: TrialConfig::default(),
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub summary: MetricsSummary,
    /// Every record in the output directory, prior runs included.
    pub records: Vec<RunRecord>,
    pub newly_run: usize,
    pub resumed: usize,
    /// True when the run stopped before every trial was done.
    pub interrupted: bool,
}

/// Runs `trials` trials per (case, variant) into `out_dir`, skipping trials
/// already recorded there, then writes the summary files.
pub fn run_suite(
    cases: &[BenchmarkCase],
    variants: &[PromptVariant],
    provider: &dyn Provider,
    opts: &SuiteOptions,
    out_dir: &Path,
) -> Result<SuiteOutcome, HarnessError> {
    if opts.trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let records_path = out_dir.join(RECORDS_FILE);
    let existing = read_records(&records_path)?;
    let done: BTreeSet<_> = existing.iter().map(RunRecord::key).collect();

    let mut jobs = Vec::new();
    for case in cases {
        for &variant in variants {
            for trial in 0..opts.trials {
                if !done.contains(&(case.name.clone(), variant, trial)) {
                    jobs.push((case, variant, trial));
                }
            }
        }
    }
    let resumed = cases.len() * variants.len() * opts.trials as usize - jobs.len();

    let file = OpenOptions::new().create(true).append(true).open(&records_path).map_err(io_err(&records_path))?;
    let writer = Mutex::new(file);
    let fresh: Mutex<Vec<RunRecord>> = Mutex::new(Vec::new());
    let written = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let failure: Mutex<Option<HarnessError>> = Mutex::new(None);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Io { path: out_dir.to_path_buf(), source: std::io::Error::other(e) })?;
    let fail = |e: HarnessError| {
        stop.store(true, Ordering::SeqCst);
        failure.lock().unwrap_or_else(|p| p.into_inner()).get_or_insert(e);
    };
    pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter().for_each(|&(case, variant, trial)| {
            if stop.load(Ordering::SeqCst) {
                return;
            }
            let rec = run_trial(case, variant, trial, provider, &opts.trial);
            if let Some(e) = rec.provider_error.as_ref().filter(|e| e.kind == ProviderErrorKind::Auth) {
                return fail(HarnessError::Provider(e.clone()));
            }
            let line = serde_json::to_string(&rec).expect("records serialize");
            {
                let mut w = writer.lock().unwrap_or_else(|p| p.into_inner());
                if stop.load(Ordering::SeqCst) {
                    return;
                }
                if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                    drop(w);
                    return fail(HarnessError::Io { path: records_path.clone(), source: e });
                }
                let n = written.fetch_add(1, Ordering::SeqCst) + 1;
                if opts.stop_after.is_some_and(|limit| n >= limit) {
                    stop.store(true, Ordering::SeqCst);
                }
            }
            fresh.lock().unwrap_or_else(|p| p.into_inner()).push(rec);
        });
    });
    if let Some(e) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }

    let fresh = fresh.into_inner().unwrap_or_else(|p| p.into_inner());
    let newly_run = fresh.len();
    let mut records = existing;
    records.extend(fresh);
    records.sort_by_key(RunRecord::key);
    let summary = summarize(&records, opts.count_provider_errors);
    write_summaries(&summary, out_dir)?;
    Ok(SuiteOutcome {
        summary,
        records,
        newly_run,
        resumed,
        interrupted: resumed + newly_run < jobs_total(cases, variants, opts),
    })
}

fn jobs_total(cases: &[BenchmarkCase], variants: &[PromptVariant], opts: &SuiteOptions) -> usize {
    cases.len() * variants.len() * opts.trials as usize
}

pub fn write_summaries(summary: &MetricsSummary, out_dir: &Path) -> Result<(), HarnessError> {
    let files = [
        (SUMMARY_CSV, summary.to_csv()),
        (METRICS_CSV, summary.to_long_csv()),
        (SUMMARY_JSON, serde_json::to_string_pretty(&summary.to_json()).expect("json value serializes") + "\n"),
    ];
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
    }
    Ok(())
}

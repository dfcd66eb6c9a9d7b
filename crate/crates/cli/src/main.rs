//! `tslforge`: command-line front end for the TSL toolkit.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tslforge::harness::{self, load_cases, BenchmarkCase, SuiteOptions, TrialConfig};
use tslforge::llm::{mock_client, HttpBackend, LlmClient, MockScript, Provider, ProviderError, RetryPolicy};
use tslforge::prompt::{assemble_prompt, text_hash, PromptVariant, DEFAULT_INSTRUCTIONS};
use tslforge::semantics::{
    bounded_equiv_with, check_machine_with, CheckError, CheckOptions, ConformanceVerdict, EquivOptions, EquivVerdict,
};
use tslforge::syntax::{parse_spec, print_spec, TslSpec};
use tslforge::{atom_alphabet, emit_controller, load_machine, validate, SignatureTable, ValidationReport};

use config::{FileConfig, Settings};

const EXIT_OK: u8 = 0;
const EXIT_NEGATIVE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PROVIDER: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "tslforge", version, about = "Temporal Stream Logic specification toolkit")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Config file (default: ./tslforge.json when present).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a specification and print it in canonical form.
    Parse { file: PathBuf },
    /// Check a specification against a signature table.
    Validate {
        file: PathBuf,
        #[arg(long)]
        sig: PathBuf,
    },
    /// Print the assembled prompt for a benchmark.
    Prompt {
        benchdir: PathBuf,
        #[arg(long, default_value = "full")]
        variant: PromptVariant,
        /// Replace the default instruction header.
        #[arg(long, value_name = "FILE")]
        instructions: Option<PathBuf>,
    },
    /// Run one generation trial for a benchmark.
    Generate {
        benchdir: PathBuf,
        #[arg(long, default_value = "full")]
        variant: PromptVariant,
        #[command(flatten)]
        gen: GenArgs,
        /// Trial index; also the request seed.
        #[arg(long, default_value_t = 0)]
        trial: u32,
    },
    /// Compare two specifications on all lassos up to length k.
    Equiv {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        sig: Option<PathBuf>,
        #[arg(short = 'k', long = "bound")]
        k: Option<usize>,
    },
    /// Check a Mealy machine against a specification up to bound k.
    CheckMachine {
        machine: PathBuf,
        spec: PathBuf,
        #[arg(long)]
        sig: Option<PathBuf>,
        #[arg(short = 'k', long = "bound")]
        k: Option<usize>,
    },
    /// Emit a JavaScript controller for a Mealy machine.
    Codegen {
        machine: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Run the benchmark suite.
    Bench {
        #[arg(long, default_value = "benchmarks")]
        cases: PathBuf,
        /// `all` or a comma-separated list of variants.
        #[arg(long, default_value = "all")]
        variants: String,
        /// Trials per benchmark and variant.
        #[arg(short = 'n', long = "trials")]
        trials: Option<u32>,
        #[arg(long)]
        parallel: Option<usize>,
        /// Output directory (default: runs/<timestamp>); rerun with the same
        /// directory to resume.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Count trials lost to provider errors in the denominators.
        #[arg(long)]
        count_provider_errors: bool,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Answer from a mock script instead of the HTTP provider.
    #[arg(long, value_name = "SCRIPT")]
    mock: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Requests per minute sent to the provider.
    #[arg(long)]
    rate_limit: Option<u32>,
}

/// Why a command could not produce a verdict.
enum Failure {
    Usage(String),
    Provider(ProviderError),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Provider(_) => EXIT_PROVIDER,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Failure::Usage(m) => json!({"ok": false, "error": {"kind": "usage", "message": m}}),
            Failure::Provider(e) => {
                json!({"ok": false, "error": {"kind": "provider", "provider_error": e, "message": e.to_string()}})
            }
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Provider(e) => write!(f, "provider error: {e}"),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure::Usage(message.into())
}

/// A finished command: exit code, JSON body, and human text for stdout/stderr.
struct Outcome {
    code: u8,
    json: Value,
    stdout: String,
    stderr: String,
}

impl Outcome {
    fn ok(json: Value, stdout: impl Into<String>) -> Self {
        Outcome { code: EXIT_OK, json, stdout: stdout.into(), stderr: String::new() }
    }

    fn negative(json: Value, stderr: impl Into<String>) -> Self {
        Outcome { code: EXIT_NEGATIVE, json, stdout: String::new(), stderr: stderr.into() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let json_requested = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => return clap_failure(e, json_requested),
    };
    let json_mode = cli.json;
    let result = load_settings(cli.config.as_deref()).and_then(|settings| run(cli.command, &settings));
    match result {
        Ok(out) => {
            if json_mode {
                let mut body = out.json;
                if let Value::Object(map) = &mut body {
                    map.entry("ok").or_insert(json!(out.code == EXIT_OK));
                }
                println!("{body}");
            } else {
                print!("{}", out.stdout);
                eprint!("{}", out.stderr);
            }
            ExitCode::from(out.code)
        }
        Err(f) => {
            if json_mode {
                println!("{}", f.to_json());
            } else {
                eprintln!("error: {f}");
            }
            ExitCode::from(f.code())
        }
    }
}

fn clap_failure(e: clap::Error, json_mode: bool) -> ExitCode {
    use clap::error::ErrorKind;
    let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
    if json_mode {
        let text = e.render().to_string();
        let body = match informational {
            true => json!({"ok": true, "help": text}),
            false => json!({"ok": false, "error": {"kind": "usage", "message": text}}),
        };
        println!("{body}");
    } else {
        let _ = e.print();
    }
    ExitCode::from(if informational { EXIT_OK } else { EXIT_USAGE })
}

fn load_settings(path: Option<&Path>) -> Result<Settings, Failure> {
    let file = match path {
        Some(p) => Some(FileConfig::load(p).map_err(usage)?),
        None if Path::new(config::DEFAULT_CONFIG).exists() => {
            Some(FileConfig::load(Path::new(config::DEFAULT_CONFIG)).map_err(usage)?)
        }
        None => None,
    };
    Ok(Settings::from_env().overlay(file.unwrap_or_default()))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_signatures(path: &Path) -> Result<SignatureTable, Failure> {
    SignatureTable::from_json(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Parses a spec file; a syntax error is a negative verdict, not a usage error.
fn read_spec(path: &Path) -> Result<Result<TslSpec, Outcome>, Failure> {
    let text = read(path)?;
    Ok(parse_spec(&text)
        .map_err(|e| Outcome::negative(json!({"file": path, "parse_error": e}), format!("{}:{e}\n", path.display()))))
}

fn report_text(path: &Path, report: &ValidationReport) -> String {
    report
        .issues
        .iter()
        .map(|i| match &i.span {
            Some(s) => format!("{}:{}:{}: {:?}: {}\n", path.display(), s.line, s.column, i.code, i.message),
            None => format!("{}: {:?}: {}\n", path.display(), i.code, i.message),
        })
        .collect()
}

fn run(command: Command, settings: &Settings) -> Result<Outcome, Failure> {
    match command {
        Command::Parse { file } => {
            let spec = match read_spec(&file)? {
                Ok(s) => s,
                Err(neg) => return Ok(neg),
            };
            let text = format!(
                "{} assumptions, {} guarantees\n{}\n",
                spec.assumes.len(),
                spec.guarantees.len(),
                print_spec(&spec)
            );
            Ok(Outcome::ok(json!({"spec": spec, "printed": print_spec(&spec)}), text))
        }
        Command::Validate { file, sig } => {
            let table = read_signatures(&sig)?;
            let spec = match read_spec(&file)? {
                Ok(s) => s,
                Err(neg) => return Ok(neg),
            };
            let report = validate(&spec, &table);
            let body = json!({"validation": report});
            Ok(match report.ok {
                true => Outcome::ok(body, "ok\n"),
                false => Outcome::negative(body, report_text(&file, &report)),
            })
        }
        Command::Prompt { benchdir, variant, instructions } => {
            let case = load_case(&benchdir)?;
            let header = match instructions {
                Some(p) => read(&p)?,
                None => DEFAULT_INSTRUCTIONS.to_string(),
            };
            let prompt = assemble_prompt(&case.bundle, variant, &header).map_err(|e| usage(e.to_string()))?;
            let body = json!({
                "benchmark": case.name,
                "variant": variant,
                "prompt_hash": text_hash(&prompt),
                "instructions_hash": text_hash(&header),
                "prompt": prompt,
            });
            Ok(Outcome::ok(body, prompt))
        }
        Command::Generate { benchdir, variant, gen, trial } => {
            let case = load_case(&benchdir)?;
            let provider = build_provider(&gen, settings)?;
            let config = trial_config(&gen, settings);
            let rec = harness::run_trial(&case, variant, trial, provider.as_ref(), &config);
            if let Some(e) = &rec.provider_error {
                return Err(Failure::Provider(e.clone()));
            }
            let mut text = String::new();
            if let Some(x) = &rec.extracted {
                text.push_str(x);
                text.push('\n');
            }
            let verdict = match (&rec.error, rec.parse_ok, &rec.validation, &rec.equiv) {
                (Some(e), false, _, _) => format!("stage {:?}: {e}", rec.stage),
                (_, false, _, _) => {
                    format!("parse: failed{}", rec.parse_error.as_ref().map(|e| format!(" ({e})")).unwrap_or_default())
                }
                (_, true, Some(v), _) if !v.ok => format!("parse: ok\nvalidation: {} issue(s)", v.issues.len()),
                (_, true, _, Some(eq)) => format!("parse: ok\nvalidation: ok\nequiv: {}", describe_equiv(eq)),
                (Some(e), true, _, None) => format!("parse: ok\nvalidation: ok\nequiv: {e}"),
                _ => format!("stopped at {:?}", rec.stage),
            };
            text.push_str(&verdict);
            text.push('\n');
            let body = serde_json::to_value(&rec).expect("records serialize");
            Ok(match rec.is_correct() {
                true => Outcome::ok(body, text),
                false => Outcome { code: EXIT_NEGATIVE, json: body, stdout: text, stderr: String::new() },
            })
        }
        Command::Equiv { a, b, sig, k } => {
            let k = k.or(settings.k).unwrap_or(tslforge::semantics::DEFAULT_BOUND);
            let table = sig.as_deref().map(read_signatures).transpose()?;
            let sa = match read_spec(&a)? {
                Ok(s) => s,
                Err(neg) => return Ok(neg),
            };
            let sb = match read_spec(&b)? {
                Ok(s) => s,
                Err(neg) => return Ok(neg),
            };
            let alphabet = match &table {
                Some(t) => atom_alphabet(&sa, t).union(&atom_alphabet(&sb, t)),
                None => tslforge::semantics::spec_atoms(&sa).union(&tslforge::semantics::spec_atoms(&sb)),
            };
            let opts = EquivOptions { cap: settings.lasso_cap.unwrap_or(tslforge::semantics::DEFAULT_LASSO_CAP) };
            let verdict = bounded_equiv_with(&sa, &sb, &alphabet, k, opts).map_err(|e| usage(e.to_string()))?;
            let body = json!({"equiv": verdict});
            Ok(match &verdict {
                EquivVerdict::EquivalentUpTo { .. } => Outcome::ok(body, format!("{}\n", describe_equiv(&verdict))),
                EquivVerdict::Counterexample { trace, .. } => Outcome {
                    code: EXIT_NEGATIVE,
                    json: body,
                    stdout: format!("{}\n{}\n", describe_equiv(&verdict), trace.to_json()),
                    stderr: String::new(),
                },
            })
        }
        Command::CheckMachine { machine, spec, sig, k } => {
            let k = k.or(settings.k).unwrap_or(tslforge::semantics::DEFAULT_BOUND);
            let m = load_machine(&read(&machine)?).map_err(|e| usage(format!("{}: {e}", machine.display())))?;
            let s = match read_spec(&spec)? {
                Ok(s) => s,
                Err(neg) => return Ok(neg),
            };
            if let Some(sig) = sig {
                let report = validate(&s, &read_signatures(&sig)?);
                if !report.ok {
                    let text = report_text(&spec, &report);
                    return Ok(Outcome::negative(json!({"validation": report}), text));
                }
            }
            let opts = CheckOptions {
                cap: settings.lasso_cap.unwrap_or(tslforge::semantics::DEFAULT_LASSO_CAP),
                ..CheckOptions::default()
            };
            match check_machine_with(&m, &s, k, opts) {
                Ok(v @ ConformanceVerdict::Conforms { .. }) => {
                    Ok(Outcome::ok(json!({"conformance": v}), format!("conforms up to {k}\n")))
                }
                Ok(v @ ConformanceVerdict::Counterexample { .. }) => {
                    let ConformanceVerdict::Counterexample { trace, violated_guarantees } = &v else { unreachable!() };
                    let text =
                        format!("counterexample violating guarantee(s) {violated_guarantees:?}\n{}\n", trace.to_json());
                    Ok(Outcome {
                        code: EXIT_NEGATIVE,
                        json: json!({"conformance": v}),
                        stdout: text,
                        stderr: String::new(),
                    })
                }
                Err(e @ CheckError::IncompleteMachine { .. }) => Ok(Outcome::negative(
                    json!({"conformance": {"verdict": "incomplete_machine", "error": e}}),
                    format!("{e}\n"),
                )),
                Err(CheckError::Semantics(e)) => Err(usage(e.to_string())),
            }
        }
        Command::Codegen { machine, output } => {
            let m = load_machine(&read(&machine)?).map_err(|e| usage(format!("{}: {e}", machine.display())))?;
            let code = emit_controller(&m);
            match output {
                Some(path) => {
                    fs::write(&path, &code).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                    Ok(Outcome::ok(json!({"output": path, "bytes": code.len()}), ""))
                }
                None => Ok(Outcome::ok(json!({"code": code}), code)),
            }
        }
        Command::Bench { cases, variants, trials, parallel, out, count_provider_errors, gen, stop_after } => {
            let variants = parse_variants(&variants)?;
            let cases = load_cases(&cases).map_err(|e| usage(e.to_string()))?;
            let provider = build_provider(&gen, settings)?;
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(run_stamp()));
            let opts = SuiteOptions {
                trials: trials.or(settings.trials).unwrap_or(10),
                parallelism: parallel.or(settings.parallel).unwrap_or(1),
                count_provider_errors,
                trial: trial_config(&gen, settings),
                stop_after,
            };
            let outcome =
                harness::run_suite(&cases, &variants, provider.as_ref(), &opts, &out).map_err(|e| match e {
                    harness::HarnessError::Provider(p) => Failure::Provider(p),
                    other => usage(other.to_string()),
                })?;
            let mut text = outcome.summary.to_csv();
            text.push_str(&format!(
                "{} new trial(s), {} resumed; results in {}\n",
                outcome.newly_run,
                outcome.resumed,
                out.display()
            ));
            let body = json!({
                "out": out,
                "newly_run": outcome.newly_run,
                "resumed": outcome.resumed,
                "interrupted": outcome.interrupted,
                "summary": outcome.summary.to_json(),
            });
            Ok(Outcome::ok(body, text))
        }
    }
}

fn describe_equiv(v: &EquivVerdict) -> String {
    match v {
        EquivVerdict::EquivalentUpTo { k } => format!("equivalent up to {k}"),
        EquivVerdict::Counterexample { holds_in, .. } => {
            format!("not equivalent: counterexample holds only in {holds_in:?}")
        }
    }
}

fn load_case(dir: &Path) -> Result<BenchmarkCase, Failure> {
    BenchmarkCase::load(dir).map_err(|e| usage(e.to_string()))
}

fn parse_variants(s: &str) -> Result<Vec<PromptVariant>, Failure> {
    if s == "all" {
        return Ok(PromptVariant::ALL.to_vec());
    }
    s.split(',').map(|v| v.trim().parse().map_err(usage)).collect()
}

fn build_provider(gen: &GenArgs, settings: &Settings) -> Result<Box<dyn Provider>, Failure> {
    if let Some(path) = &gen.mock {
        let script = MockScript::from_json(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        return Ok(Box::new(mock_client(script)));
    }
    let backend = match &settings.base_url {
        Some(url) => HttpBackend::new(url.clone(), std::env::var(tslforge::llm::ENV_API_KEY).ok()),
        None => HttpBackend::from_env(),
    };
    let mut client = LlmClient::new(backend, RetryPolicy::default());
    if let Some(rpm) = gen.rate_limit.or(settings.rate_limit) {
        client = client.with_rate_limit(rpm);
    }
    Ok(Box::new(client))
}

fn trial_config(gen: &GenArgs, settings: &Settings) -> TrialConfig {
    let defaults = TrialConfig::default();
    TrialConfig {
        model: gen.model.clone().or_else(|| settings.model.clone()).unwrap_or(defaults.model),
        temperature: gen.temperature.or(settings.temperature).unwrap_or(defaults.temperature),
        max_tokens: gen.max_tokens.or(settings.max_tokens).unwrap_or(defaults.max_tokens),
        lasso_cap: settings.lasso_cap.unwrap_or(defaults.lasso_cap),
        ..defaults
    }
}

fn run_stamp() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".into())
}

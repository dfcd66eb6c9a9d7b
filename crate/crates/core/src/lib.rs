//! Temporal Stream Logic toolkit: parsing and printing, signature validation,
//! lasso semantics with bounded equivalence and machine conformance, Mealy
//! controller code generation, prompt assembly for LLM specification
//! generation, an LLM client, and the benchmark harness that scores
//! generated specifications.

pub mod harness;
pub mod llm;
pub mod mealy;
pub mod prompt;
pub mod semantics;
pub mod signatures;
pub mod syntax;

pub use harness::{run_suite, run_trial, summarize, BenchmarkCase, MetricsSummary, RunRecord};
pub use llm::{GenerationRequest, GenerationResult, Provider, ProviderError};
pub use mealy::{emit_controller, load_machine, MealyMachine};
pub use prompt::{assemble_prompt, extract_spec, PromptBundle, PromptVariant};
pub use semantics::{bounded_equiv, check_machine, eval_on_lasso, spec_holds, EquivVerdict, LassoTrace};
pub use signatures::{atom_alphabet, validate, AtomAlphabet, SignatureTable, ValidationReport};
pub use syntax::{desugar, parse_spec, print_spec, Formula, TslSpec};

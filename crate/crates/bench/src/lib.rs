//! Shared fixtures for the criterion benches.

use std::path::PathBuf;

use tslforge::mealy::MealyMachine;
use tslforge::{parse_spec, SignatureTable, TslSpec};

pub fn benchmarks_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

fn read(case: &str, file: &str) -> String {
    std::fs::read_to_string(benchmarks_dir().join(case).join(file))
        .unwrap_or_else(|e| panic!("reading {case}/{file}: {e}"))
}

pub fn gold_source(case: &str) -> String {
    read(case, "gold.tsl")
}

pub fn gold(case: &str) -> TslSpec {
    parse_spec(&gold_source(case)).expect("gold spec parses")
}

pub fn signatures(case: &str) -> SignatureTable {
    SignatureTable::from_json(&read(case, "signatures.json")).expect("signatures load")
}

pub fn machine(case: &str) -> MealyMachine {
    MealyMachine::from_json(&read(case, "machine.json")).expect("machine loads")
}

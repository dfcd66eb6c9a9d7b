//! Exact evaluation over ultimately periodic (lasso) traces at the
//! predicate/update abstraction, bounded equivalence of specifications and
//! bounded conformance of Mealy machines.

mod conformance;
mod engine;
mod enumerate;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::signatures::AtomAlphabet;
use crate::syntax::{parse_predicate_term, parse_term, Formula, FunctionTerm, Ident, PredicateTerm, TslSpec};

pub use conformance::{check_machine, check_machine_with, CheckError, CheckOptions, ConformanceVerdict};

use engine::{FlatTrace, Layout, Program, SpecProgram};
use enumerate::LassoSpace;

/// Default number of lassos an enumeration may visit.
pub const DEFAULT_LASSO_CAP: u64 = 10_000_000;
/// Default bound on `prefix + loop` length.
pub const DEFAULT_BOUND: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum SemanticsError {
    #[error("atom `{0}` is not in the trace alphabet")]
    UnknownAtom(String),
    #[error("lasso loop must contain at least one step")]
    EmptyLoop,
    #[error("position {position} is outside a trace of {len} steps")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("trace steps do not share one alphabet")]
    InconsistentTrace,
    #[error("enumeration needs {} lassos, cap is {cap}", needed.map_or("more than 2^64".to_string(), |n| n.to_string()))]
    BudgetExceeded { needed: Option<u64>, cap: u64 },
}

/// One instant: a truth value per predicate atom and one update choice per cell.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AbstractStep {
    pub pred_vals: BTreeMap<PredicateTerm, bool>,
    pub updates: BTreeMap<Ident, FunctionTerm>,
}

/// `prefix · loop^ω`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LassoTrace {
    pub prefix: Vec<AbstractStep>,
    pub loop_: Vec<AbstractStep>,
}

impl LassoTrace {
    pub fn len(&self) -> usize {
        self.prefix.len() + self.loop_.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn steps(&self) -> impl Iterator<Item = &AbstractStep> {
        self.prefix.iter().chain(&self.loop_)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    preds: BTreeMap<String, bool>,
    updates: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    prefix: Vec<StepDoc>,
    #[serde(rename = "loop")]
    loop_: Vec<StepDoc>,
}

impl From<&AbstractStep> for StepDoc {
    fn from(s: &AbstractStep) -> Self {
        StepDoc {
            preds: s.pred_vals.iter().map(|(p, v)| (p.to_string(), *v)).collect(),
            updates: s.updates.iter().map(|(c, t)| (c.to_string(), t.to_string())).collect(),
        }
    }
}

impl TryFrom<StepDoc> for AbstractStep {
    type Error = String;
    fn try_from(doc: StepDoc) -> Result<Self, String> {
        let mut step = AbstractStep::default();
        for (p, v) in doc.preds {
            let term = parse_predicate_term(&p).map_err(|e| format!("predicate `{p}`: {e}"))?;
            step.pred_vals.insert(term, v);
        }
        for (c, t) in doc.updates {
            let cell = Ident::new(c).map_err(|e| e.to_string())?;
            let term = parse_term(&t).map_err(|e| format!("update `{t}`: {e}"))?;
            step.updates.insert(cell, term);
        }
        Ok(step)
    }
}

impl Serialize for LassoTrace {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TraceDoc {
            prefix: self.prefix.iter().map(StepDoc::from).collect(),
            loop_: self.loop_.iter().map(StepDoc::from).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LassoTrace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = TraceDoc::deserialize(d)?;
        let conv = |v: Vec<StepDoc>| -> Result<Vec<AbstractStep>, D::Error> {
            v.into_iter().map(|s| AbstractStep::try_from(s).map_err(serde::de::Error::custom)).collect()
        };
        Ok(LassoTrace { prefix: conv(doc.prefix)?, loop_: conv(doc.loop_)? })
    }
}

/// Truth value of `f` at `position` of the infinite word the lasso denotes.
pub fn eval_on_lasso(f: &Formula, trace: &LassoTrace, position: usize) -> Result<bool, SemanticsError> {
    if position >= trace.len() {
        return Err(SemanticsError::PositionOutOfRange { position, len: trace.len() });
    }
    let (layout, flat) = Layout::of_trace(trace)?;
    let program = Program::compile(&layout, [f])?;
    let mut table = Vec::new();
    program.evaluate(&flat, layout.width(), &mut table);
    Ok(program.root_at(&table, flat.len, 0, position))
}

/// `G(∧ assumes) -> G(∧ guarantees)` at position 0. Empty blocks mean `true`.
pub fn spec_holds(spec: &TslSpec, trace: &LassoTrace) -> Result<bool, SemanticsError> {
    let (layout, flat) = Layout::of_trace(trace)?;
    let program = SpecProgram::compile(&layout, spec)?;
    Ok(program.holds(&flat, layout.width(), &mut Vec::new()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum EquivVerdict {
    EquivalentUpTo {
        k: usize,
    },
    /// `holds_in` names the spec that accepts `trace`; the other rejects it.
    Counterexample {
        trace: LassoTrace,
        holds_in: Side,
    },
}

impl EquivVerdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivVerdict::EquivalentUpTo { .. })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EquivOptions {
    pub cap: u64,
}

impl Default for EquivOptions {
    fn default() -> Self {
        EquivOptions { cap: DEFAULT_LASSO_CAP }
    }
}

/// Compares two specs on every lasso over `alphabet` with `prefix + loop <= k`.
pub fn bounded_equiv(
    a: &TslSpec,
    b: &TslSpec,
    alphabet: &AtomAlphabet,
    k: usize,
) -> Result<EquivVerdict, SemanticsError> {
    bounded_equiv_with(a, b, alphabet, k, EquivOptions::default())
}

pub fn bounded_equiv_with(
    a: &TslSpec,
    b: &TslSpec,
    alphabet: &AtomAlphabet,
    k: usize,
    opts: EquivOptions,
) -> Result<EquivVerdict, SemanticsError> {
    let layout = Layout::from_alphabet(alphabet);
    let pa = SpecProgram::compile(&layout, a)?;
    let pb = SpecProgram::compile(&layout, b)?;
    let space = LassoSpace::new(layout.radices(), k, opts.cap)?;
    let width = layout.width();

    let found = (0..space.total())
        .into_par_iter()
        .map_init(
            || (FlatTrace::default(), Vec::new()),
            |(trace, table), g| {
                space.decode(g, trace);
                let ha = pa.holds(trace, width, table);
                let hb = pb.holds(trace, width, table);
                (ha != hb).then(|| (layout.decode_trace(trace), if ha { Side::A } else { Side::B }))
            },
        )
        .find_first(Option::is_some)
        .flatten();

    Ok(match found {
        Some((trace, holds_in)) => EquivVerdict::Counterexample { trace, holds_in },
        None => EquivVerdict::EquivalentUpTo { k },
    })
}

/// Syntactic atoms of a spec, without reference to a signature table.
pub fn spec_atoms(spec: &TslSpec) -> AtomAlphabet {
    let mut alphabet = AtomAlphabet::default();
    for (_, _, f) in spec.statements() {
        f.for_each_atom(&mut |atom| match atom {
            crate::syntax::Atom::Pred(p) => alphabet.add_predicate(p.clone()),
            crate::syntax::Atom::Update(c, t) => alphabet.add_update(c.clone(), t.clone()),
        });
    }
    alphabet
}

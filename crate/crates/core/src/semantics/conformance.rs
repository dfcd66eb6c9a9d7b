use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::mealy::{MealyMachine, StateId};
use crate::syntax::{Atom, Formula, TslSpec};

use super::engine::{FlatTrace, Layout, Program, SpecProgram};
use super::enumerate::LassoSpace;
use super::{spec_atoms, LassoTrace, SemanticsError, DEFAULT_LASSO_CAP};

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub cap: u64,
    /// How many passes through the valuation loop to try before giving up on
    /// the machine state repeating. `None` uses `states + 1`, which always closes.
    pub unroll_limit: Option<usize>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { cap: DEFAULT_LASSO_CAP, unroll_limit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ConformanceVerdict {
    Conforms {
        k: usize,
        /// Valuation lassos whose closed trace satisfied the spec.
        checked: u64,
        /// Lassos cut short by an assumption-violating valuation with no transition.
        vacuous: u64,
        /// Lassos whose machine run did not close within the unroll limit.
        skipped: u64,
    },
    Counterexample {
        trace: LassoTrace,
        /// Guarantee indices that fail on `trace`.
        violated_guarantees: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum CheckError {
    #[error("state {state} has no transition for {valuation:?}")]
    IncompleteMachine { state: StateId, valuation: BTreeMap<String, bool> },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

pub fn check_machine(m: &MealyMachine, spec: &TslSpec, k: usize) -> Result<ConformanceVerdict, CheckError> {
    check_machine_with(m, spec, k, CheckOptions::default())
}

struct CompiledTransition {
    guard: Vec<(usize, bool)>,
    /// one digit per cell
    updates: Vec<u32>,
    to: usize,
}

enum Outcome {
    Pass,
    Vacuous,
    Skipped,
    Fail(FlatTrace),
    Incomplete(usize, Vec<u32>),
}

#[derive(Default)]
struct Tally {
    first: Option<(u64, Outcome)>,
    checked: u64,
    vacuous: u64,
    skipped: u64,
}

impl Tally {
    fn add(mut self, (g, outcome): (u64, Outcome)) -> Self {
        match outcome {
            Outcome::Pass => self.checked += 1,
            Outcome::Vacuous => self.vacuous += 1,
            Outcome::Skipped => self.skipped += 1,
            event => {
                if self.first.as_ref().is_none_or(|(f, _)| g < *f) {
                    self.first = Some((g, event));
                }
            }
        }
        self
    }

    fn merge(mut self, other: Tally) -> Self {
        self.checked += other.checked;
        self.vacuous += other.vacuous;
        self.skipped += other.skipped;
        if let Some((g, e)) = other.first {
            if self.first.as_ref().is_none_or(|(f, _)| g < *f) {
                self.first = Some((g, e));
            }
        }
        self
    }
}

/// Drives the machine over every predicate-valuation lasso with
/// `prefix + loop <= k` and checks the resulting trace against the spec.
pub fn check_machine_with(
    m: &MealyMachine,
    spec: &TslSpec,
    k: usize,
    opts: CheckOptions,
) -> Result<ConformanceVerdict, CheckError> {
    let mut alphabet = spec_atoms(spec);
    for p in m.guard_atoms() {
        alphabet.add_predicate(p);
    }
    for t in m.transitions() {
        for (c, v) in &t.updates {
            alphabet.add_update(c.clone(), v.clone());
        }
    }
    let layout = Layout::from_alphabet(&alphabet);
    let width = layout.width();
    let npreds = layout.preds.len();
    let program = SpecProgram::compile(&layout, spec)?;

    // assumptions that constrain a single instant's predicates
    let invariants: Vec<&Formula> = spec
        .assumes
        .iter()
        .filter(|f| {
            let mut has_update = false;
            f.for_each_atom(&mut |a| has_update |= matches!(a, Atom::Update(..)));
            f.is_present_tense() && !has_update
        })
        .collect();
    let invariant_program = Program::compile(&layout, invariants)?;

    let index_of: BTreeMap<StateId, usize> = m.states().iter().enumerate().map(|(i, s)| (s.id, i)).collect();
    let self_updates: Vec<u32> = (0..layout.cells.len()).map(|c| layout.self_update(c)).collect();
    let compiled: Vec<Vec<CompiledTransition>> = m
        .states()
        .iter()
        .map(|s| {
            s.transitions
                .iter()
                .map(|t| CompiledTransition {
                    guard: t
                        .guard
                        .0
                        .iter()
                        .map(|l| (layout.pred_digit(&l.atom).expect("guard atoms are in the layout"), l.negated))
                        .collect(),
                    updates: layout
                        .cells
                        .iter()
                        .enumerate()
                        .map(|(ci, c)| match t.updates.get(c) {
                            Some(term) => layout.term_value(ci, term).expect("update terms are in the layout"),
                            None => self_updates[ci],
                        })
                        .collect(),
                    to: index_of[&t.to],
                })
                .collect()
        })
        .collect();
    let initial = index_of[&m.initial()];
    let unroll_limit = opts.unroll_limit.unwrap_or(m.states().len() + 1).max(1);

    let space = LassoSpace::new(vec![2; npreds], k, opts.cap)?;

    let consistent = |vals: &[u32], scratch: &mut Vec<bool>| -> bool {
        if invariant_program.roots() == 0 {
            return true;
        }
        let mut digits = vals.to_vec();
        digits.extend(&self_updates);
        let one = FlatTrace { digits, len: 1, loop_start: 0 };
        invariant_program.evaluate(&one, width, scratch);
        (0..invariant_program.roots()).all(|r| invariant_program.root_at(scratch, 1, r, 0))
    };

    let fire = |state: usize, vals: &[u32]| -> Option<&CompiledTransition> {
        compiled[state].iter().find(|t| t.guard.iter().all(|(d, neg)| (vals[*d] == 1) != *neg))
    };

    let run = |g: u64, vals: &mut FlatTrace, trace: &mut FlatTrace, table: &mut Vec<bool>| -> Outcome {
        space.decode(g, vals);
        let prefix = vals.loop_start;
        let lp = vals.len - prefix;
        trace.digits.clear();
        let mut state = initial;

        let push = |pos: usize, state: &mut usize, trace: &mut FlatTrace, table: &mut Vec<bool>| {
            let row = &vals.digits[pos * npreds..(pos + 1) * npreds];
            match fire(*state, row) {
                Some(t) => {
                    trace.digits.extend_from_slice(row);
                    trace.digits.extend_from_slice(&t.updates);
                    *state = t.to;
                    None
                }
                None if consistent(row, table) => Some(Outcome::Incomplete(*state, row.to_vec())),
                None => Some(Outcome::Vacuous),
            }
        };

        for pos in 0..prefix {
            if let Some(stop) = push(pos, &mut state, trace, table) {
                return stop;
            }
        }
        let mut entries = Vec::with_capacity(unroll_limit + 1);
        loop {
            if let Some(i) = entries.iter().position(|s| *s == state) {
                trace.len = prefix + entries.len() * lp;
                trace.loop_start = prefix + i * lp;
                break;
            }
            if entries.len() == unroll_limit {
                return Outcome::Skipped;
            }
            entries.push(state);
            for pos in prefix..prefix + lp {
                if let Some(stop) = push(pos, &mut state, trace, table) {
                    return stop;
                }
            }
        }
        if program.holds(trace, width, table) {
            Outcome::Pass
        } else {
            Outcome::Fail(trace.clone())
        }
    };

    let tally = (0..space.total())
        .into_par_iter()
        .map_init(
            || (FlatTrace::default(), FlatTrace::default(), Vec::new()),
            |(vals, trace, table), g| (g, run(g, vals, trace, table)),
        )
        .fold(Tally::default, Tally::add)
        .reduce(Tally::default, Tally::merge);

    match tally.first {
        None => Ok(ConformanceVerdict::Conforms {
            k,
            checked: tally.checked,
            vacuous: tally.vacuous,
            skipped: tally.skipped,
        }),
        Some((_, Outcome::Fail(trace))) => {
            let violated = program.violated_guarantees(&trace, width, &mut Vec::new());
            Ok(ConformanceVerdict::Counterexample { trace: layout.decode_trace(&trace), violated_guarantees: violated })
        }
        Some((_, Outcome::Incomplete(state, row))) => Err(CheckError::IncompleteMachine {
            state: m.states()[state].id,
            valuation: layout.preds.iter().zip(row).map(|(p, v)| (p.to_string(), v == 1)).collect(),
        }),
        Some(_) => unreachable!("only events are recorded as first"),
    }
}

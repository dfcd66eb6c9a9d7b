//! Test-only reference semantics. Every operator is evaluated straight from
//! its definition on the unrolled lasso, with no fixpoints, tables or
//! desugaring, so it shares no code with the library's evaluator.
#![allow(dead_code)]

use std::collections::BTreeMap;

use tslforge::semantics::AbstractStep;
use tslforge::syntax::{Formula, FunctionTerm, Ident, PredicateTerm};
use tslforge::{LassoTrace, TslSpec};

fn step_at(t: &LassoTrace, i: usize) -> &AbstractStep {
    if i < t.prefix.len() {
        &t.prefix[i]
    } else {
        &t.loop_[i - t.prefix.len()]
    }
}

fn succ(t: &LassoTrace, i: usize) -> usize {
    if i + 1 < t.len() {
        i + 1
    } else {
        t.prefix.len()
    }
}

/// Positions visited from `i`: 2·len steps cover every reachable position
/// at least once after the walk enters the loop.
fn path(t: &LassoTrace, i: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(2 * t.len());
    let mut p = i;
    for _ in 0..2 * t.len() {
        out.push(p);
        p = succ(t, p);
    }
    out
}

pub fn eval(f: &Formula, t: &LassoTrace, i: usize) -> bool {
    match f {
        Formula::Pred { term } => *step_at(t, i)
            .pred_vals
            .get(term)
            .unwrap_or_else(|| panic!("oracle: predicate {term:?} missing from trace")),
        Formula::Update { target, value } => step_at(t, i).updates.get(target) == Some(value),
        Formula::Not { arg } => !eval(arg, t, i),
        Formula::And { lhs, rhs } => eval(lhs, t, i) && eval(rhs, t, i),
        Formula::Or { lhs, rhs } => eval(lhs, t, i) || eval(rhs, t, i),
        Formula::Implies { lhs, rhs } => !eval(lhs, t, i) || eval(rhs, t, i),
        Formula::Next { arg } => eval(arg, t, succ(t, i)),
        Formula::Until { lhs, rhs } => until(lhs, rhs, t, i),
        Formula::WeakUntil { lhs, rhs } => until(lhs, rhs, t, i) || path(t, i).iter().all(|&j| eval(lhs, t, j)),
        Formula::Finally { arg } => path(t, i).iter().any(|&j| eval(arg, t, j)),
        Formula::Globally { arg } => path(t, i).iter().all(|&j| eval(arg, t, j)),
    }
}

fn until(a: &Formula, b: &Formula, t: &LassoTrace, i: usize) -> bool {
    for j in path(t, i) {
        if eval(b, t, j) {
            return true;
        }
        if !eval(a, t, j) {
            return false;
        }
    }
    false
}

/// `G(∧ assumes) → G(∧ guarantees)` at position 0.
pub fn spec_holds(spec: &TslSpec, t: &LassoTrace) -> bool {
    let all = |fs: &[Formula]| (0..t.len()).all(|i| fs.iter().all(|f| eval(f, t, i)));
    !all(&spec.assumes) || all(&spec.guarantees)
}

/// Evaluates an Until-free formula on the finite word
/// `prefix · loop^m` with `m = 2·(subformula count)`, reading `X` as the next
/// letter. Panics on U/W/F/G.
pub fn eval_unrolled(f: &Formula, t: &LassoTrace, i: usize) -> bool {
    let m = 2 * f.node_count().max(1);
    let mut word = t.prefix.clone();
    for _ in 0..m {
        word.extend(t.loop_.iter().cloned());
    }
    finite(f, &word, i)
}

fn finite(f: &Formula, w: &[AbstractStep], i: usize) -> bool {
    match f {
        Formula::Pred { term } => w[i].pred_vals[term],
        Formula::Update { target, value } => w[i].updates.get(target) == Some(value),
        Formula::Not { arg } => !finite(arg, w, i),
        Formula::And { lhs, rhs } => finite(lhs, w, i) && finite(rhs, w, i),
        Formula::Or { lhs, rhs } => finite(lhs, w, i) || finite(rhs, w, i),
        Formula::Implies { lhs, rhs } => !finite(lhs, w, i) || finite(rhs, w, i),
        Formula::Next { arg } => finite(arg, w, i + 1),
        other => panic!("oracle: {other:?} is not Until-free"),
    }
}

pub fn id(s: &str) -> Ident {
    Ident::new(s).unwrap()
}

pub fn pred0(name: &str) -> PredicateTerm {
    PredicateTerm::new(id(name), vec![])
}

/// Every step over the given atoms: predicate valuations × one update
/// choice per cell.
pub fn all_steps(preds: &[PredicateTerm], cells: &[(Ident, Vec<FunctionTerm>)]) -> Vec<AbstractStep> {
    let mut steps = vec![AbstractStep::default()];
    for p in preds {
        steps = steps
            .into_iter()
            .flat_map(|s| {
                [false, true].map(|v| {
                    let mut s = s.clone();
                    s.pred_vals.insert(p.clone(), v);
                    s
                })
            })
            .collect();
    }
    for (cell, terms) in cells {
        steps = steps
            .into_iter()
            .flat_map(|s| {
                terms.iter().map(move |term| {
                    let mut s = s.clone();
                    s.updates.insert(cell.clone(), term.clone());
                    s
                })
            })
            .collect();
    }
    steps
}

/// All lassos with `1 <= len <= max_len` over `steps`, in no particular order.
pub fn all_lassos(steps: &[AbstractStep], max_len: usize) -> Vec<LassoTrace> {
    let mut words: Vec<Vec<AbstractStep>> = vec![vec![]];
    let mut out = Vec::new();
    for _ in 0..max_len {
        words = words
            .into_iter()
            .flat_map(|w| {
                steps.iter().map(move |s| {
                    let mut w = w.clone();
                    w.push(s.clone());
                    w
                })
            })
            .collect();
        for w in &words {
            for split in 0..w.len() {
                out.push(LassoTrace { prefix: w[..split].to_vec(), loop_: w[split..].to_vec() });
            }
        }
    }
    out
}

/// Builds a step from `(predicate, value)` pairs and `(cell, term)` updates,
/// parsing each name with the library's term syntax.
pub fn step(preds: &[(&str, bool)], updates: &[(&str, &str)]) -> AbstractStep {
    AbstractStep {
        pred_vals: preds.iter().map(|(p, v)| (tslforge::syntax::parse_predicate_term(p).unwrap(), *v)).collect(),
        updates: updates
            .iter()
            .map(|(c, t)| (id(c), tslforge::syntax::parse_term(t).unwrap()))
            .collect::<BTreeMap<_, _>>(),
    }
}

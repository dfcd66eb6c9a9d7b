//! Formulas compiled against a fixed atom layout and evaluated over flat traces.
//!
//! A step is a row of digits: one 0/1 digit per predicate atom (in sorted order)
//! followed by one update-choice digit per cell. A trace is `len` rows; the
//! successor of the last row is `loop_start`.

use std::collections::BTreeMap;

use crate::signatures::AtomAlphabet;
use crate::syntax::{Formula, FunctionTerm, Ident, PredicateTerm};

use super::{AbstractStep, LassoTrace, SemanticsError};

/// Never matches any update digit.
const NO_TERM: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub preds: Vec<PredicateTerm>,
    pub cells: Vec<Ident>,
    pub terms: Vec<Vec<FunctionTerm>>,
    pred_index: BTreeMap<PredicateTerm, usize>,
    cell_index: BTreeMap<Ident, usize>,
}

impl Layout {
    pub fn from_alphabet(alphabet: &AtomAlphabet) -> Self {
        let preds: Vec<_> = alphabet.predicates.iter().cloned().collect();
        let cells: Vec<_> = alphabet.updates.keys().cloned().collect();
        let terms: Vec<Vec<_>> = alphabet.updates.values().map(|s| s.iter().cloned().collect()).collect();
        let pred_index = preds.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let cell_index = cells.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Layout { preds, cells, terms, pred_index, cell_index }
    }

    pub fn width(&self) -> usize {
        self.preds.len() + self.cells.len()
    }

    /// Radix of each digit, most significant first.
    pub fn radices(&self) -> Vec<u32> {
        let mut r = vec![2; self.preds.len()];
        r.extend(self.terms.iter().map(|t| t.len() as u32));
        r
    }

    pub fn pred_digit(&self, p: &PredicateTerm) -> Option<usize> {
        self.pred_index.get(p).copied()
    }

    pub fn cell_digit(&self, c: &Ident) -> Option<usize> {
        self.cell_index.get(c).map(|i| self.preds.len() + i)
    }

    pub fn term_value(&self, cell: usize, t: &FunctionTerm) -> Option<u32> {
        self.terms[cell].iter().position(|x| x == t).map(|v| v as u32)
    }

    /// Index of the self-update `c <- c` for cell `cell`.
    pub fn self_update(&self, cell: usize) -> u32 {
        let me = FunctionTerm::signal(self.cells[cell].clone());
        self.term_value(cell, &me).unwrap_or(NO_TERM)
    }

    pub fn encode_step(&self, step: &AbstractStep, out: &mut Vec<u32>) -> Result<(), SemanticsError> {
        if step.pred_vals.len() != self.preds.len() || step.updates.len() != self.cells.len() {
            return Err(SemanticsError::InconsistentTrace);
        }
        for p in &self.preds {
            let v = step.pred_vals.get(p).ok_or(SemanticsError::InconsistentTrace)?;
            out.push(u32::from(*v));
        }
        for (ci, c) in self.cells.iter().enumerate() {
            let t = step.updates.get(c).ok_or(SemanticsError::InconsistentTrace)?;
            out.push(self.term_value(ci, t).ok_or(SemanticsError::InconsistentTrace)?);
        }
        Ok(())
    }

    pub fn decode_step(&self, row: &[u32]) -> AbstractStep {
        let pred_vals = self.preds.iter().zip(row).map(|(p, v)| (p.clone(), *v == 1)).collect();
        let updates = self
            .cells
            .iter()
            .enumerate()
            .map(|(ci, c)| (c.clone(), self.terms[ci][row[self.preds.len() + ci] as usize].clone()))
            .collect();
        AbstractStep { pred_vals, updates }
    }

    pub fn decode_trace(&self, trace: &FlatTrace) -> LassoTrace {
        let w = self.width();
        let rows: Vec<AbstractStep> =
            (0..trace.len).map(|i| self.decode_step(&trace.digits[i * w..(i + 1) * w])).collect();
        let (prefix, lp) = rows.split_at(trace.loop_start);
        LassoTrace { prefix: prefix.to_vec(), loop_: lp.to_vec() }
    }

    /// Layout covering exactly the atoms present in a trace.
    pub fn of_trace(trace: &LassoTrace) -> Result<(Self, FlatTrace), SemanticsError> {
        let mut alphabet = AtomAlphabet::default();
        let first = trace.loop_.first().ok_or(SemanticsError::EmptyLoop)?;
        for p in first.pred_vals.keys() {
            alphabet.predicates.insert(p.clone());
        }
        for step in trace.steps() {
            for (c, t) in &step.updates {
                alphabet.updates.entry(c.clone()).or_default().insert(t.clone());
            }
        }
        let layout = Layout::from_alphabet(&alphabet);
        let mut digits = Vec::with_capacity(layout.width() * trace.len());
        for step in trace.steps() {
            layout.encode_step(step, &mut digits)?;
        }
        let flat = FlatTrace { digits, len: trace.len(), loop_start: trace.prefix.len() };
        Ok((layout, flat))
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct FlatTrace {
    pub digits: Vec<u32>,
    pub len: usize,
    pub loop_start: usize,
}

impl FlatTrace {
    fn succ(&self, i: usize) -> usize {
        if i + 1 < self.len {
            i + 1
        } else {
            self.loop_start
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Pred(usize),
    Update(usize, u32),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Implies(usize, usize),
    Next(usize),
    Until(usize, usize),
    WeakUntil(usize, usize),
    Finally(usize),
    Globally(usize),
}

/// A set of formulas compiled into one node arena, children before parents.
#[derive(Debug, Clone, Default)]
pub(crate) struct Program {
    nodes: Vec<Node>,
    roots: Vec<usize>,
}

impl Program {
    pub fn compile<'a>(
        layout: &Layout,
        formulas: impl IntoIterator<Item = &'a Formula>,
    ) -> Result<Self, SemanticsError> {
        let mut p = Program::default();
        for f in formulas {
            let root = p.add(layout, f)?;
            p.roots.push(root);
        }
        Ok(p)
    }

    pub fn roots(&self) -> usize {
        self.roots.len()
    }

    fn push(&mut self, n: Node) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    fn add(&mut self, layout: &Layout, f: &Formula) -> Result<usize, SemanticsError> {
        let node = match f {
            Formula::Pred { term } => {
                Node::Pred(layout.pred_digit(term).ok_or_else(|| SemanticsError::UnknownAtom(term.to_string()))?)
            }
            Formula::Update { target, value } => {
                let digit = layout.cell_digit(target).ok_or_else(|| SemanticsError::UnknownAtom(f.to_string()))?;
                let cell = digit - layout.preds.len();
                Node::Update(digit, layout.term_value(cell, value).unwrap_or(NO_TERM))
            }
            Formula::Not { arg } => Node::Not(self.add(layout, arg)?),
            Formula::Next { arg } => Node::Next(self.add(layout, arg)?),
            Formula::Finally { arg } => Node::Finally(self.add(layout, arg)?),
            Formula::Globally { arg } => Node::Globally(self.add(layout, arg)?),
            Formula::And { lhs, rhs } => Node::And(self.add(layout, lhs)?, self.add(layout, rhs)?),
            Formula::Or { lhs, rhs } => Node::Or(self.add(layout, lhs)?, self.add(layout, rhs)?),
            Formula::Implies { lhs, rhs } => Node::Implies(self.add(layout, lhs)?, self.add(layout, rhs)?),
            Formula::Until { lhs, rhs } => Node::Until(self.add(layout, lhs)?, self.add(layout, rhs)?),
            Formula::WeakUntil { lhs, rhs } => Node::WeakUntil(self.add(layout, lhs)?, self.add(layout, rhs)?),
        };
        Ok(self.push(node))
    }

    /// Fills `table` with the truth value of every node at every position.
    /// Entry `node * len + i` holds node `node` at position `i`.
    pub fn evaluate(&self, trace: &FlatTrace, width: usize, table: &mut Vec<bool>) {
        let n = trace.len;
        table.clear();
        table.resize(self.nodes.len() * n, false);
        for (idx, node) in self.nodes.iter().enumerate() {
            let base = idx * n;
            match *node {
                Node::Pred(d) => {
                    for i in 0..n {
                        table[base + i] = trace.digits[i * width + d] == 1;
                    }
                }
                Node::Update(d, v) => {
                    for i in 0..n {
                        table[base + i] = trace.digits[i * width + d] == v;
                    }
                }
                Node::Not(a) => {
                    for i in 0..n {
                        table[base + i] = !table[a * n + i];
                    }
                }
                Node::And(a, b) => {
                    for i in 0..n {
                        table[base + i] = table[a * n + i] && table[b * n + i];
                    }
                }
                Node::Or(a, b) => {
                    for i in 0..n {
                        table[base + i] = table[a * n + i] || table[b * n + i];
                    }
                }
                Node::Implies(a, b) => {
                    for i in 0..n {
                        table[base + i] = !table[a * n + i] || table[b * n + i];
                    }
                }
                Node::Next(a) => {
                    for i in 0..n {
                        table[base + i] = table[a * n + trace.succ(i)];
                    }
                }
                Node::Until(a, b) => fixpoint(trace, table, base, false, |t, i| t[b * n + i], |t, i| t[a * n + i]),
                Node::WeakUntil(a, b) => fixpoint(trace, table, base, true, |t, i| t[b * n + i], |t, i| t[a * n + i]),
                Node::Finally(a) => fixpoint(trace, table, base, false, |t, i| t[a * n + i], |_, _| true),
                Node::Globally(a) => fixpoint(trace, table, base, true, |_, _| false, |t, i| t[a * n + i]),
            }
        }
    }

    /// Truth value of root `r` at position `i` after `evaluate`.
    pub fn root_at(&self, table: &[bool], len: usize, r: usize, i: usize) -> bool {
        table[self.roots[r] * len + i]
    }

    /// Whether root `r` holds at every position.
    pub fn root_always(&self, table: &[bool], len: usize, r: usize) -> bool {
        let base = self.roots[r] * len;
        table[base..base + len].iter().all(|v| *v)
    }
}

/// Solves `v[i] = now(i) || (keep(i) && v[succ(i)])` for the least (`greatest =
/// false`) or greatest fixpoint. Two backward sweeps settle the loop, one more
/// settles the prefix.
fn fixpoint(
    trace: &FlatTrace,
    table: &mut [bool],
    base: usize,
    greatest: bool,
    now: impl Fn(&[bool], usize) -> bool,
    keep: impl Fn(&[bool], usize) -> bool,
) {
    let n = trace.len;
    for i in 0..n {
        table[base + i] = greatest;
    }
    let step = |table: &mut [bool], i: usize| {
        let next = table[base + trace.succ(i)];
        table[base + i] = now(table, i) || (keep(table, i) && next);
    };
    for _ in 0..2 {
        for i in (trace.loop_start..n).rev() {
            step(table, i);
        }
    }
    for i in (0..trace.loop_start).rev() {
        step(table, i);
    }
}

/// Evaluates assume/guarantee programs as `G(∧A) -> G(∧G)` on a trace.
pub(crate) struct SpecProgram {
    pub assumes: Program,
    pub guarantees: Program,
}

impl SpecProgram {
    pub fn compile(layout: &Layout, spec: &crate::syntax::TslSpec) -> Result<Self, SemanticsError> {
        Ok(SpecProgram {
            assumes: Program::compile(layout, &spec.assumes)?,
            guarantees: Program::compile(layout, &spec.guarantees)?,
        })
    }

    pub fn assumptions_hold(&self, trace: &FlatTrace, width: usize, table: &mut Vec<bool>) -> bool {
        self.assumes.evaluate(trace, width, table);
        (0..self.assumes.roots()).all(|r| self.assumes.root_always(table, trace.len, r))
    }

    pub fn holds(&self, trace: &FlatTrace, width: usize, table: &mut Vec<bool>) -> bool {
        if !self.assumptions_hold(trace, width, table) {
            return true;
        }
        self.guarantees.evaluate(trace, width, table);
        (0..self.guarantees.roots()).all(|r| self.guarantees.root_always(table, trace.len, r))
    }

    /// Indices of guarantees that fail somewhere on the trace.
    pub fn violated_guarantees(&self, trace: &FlatTrace, width: usize, table: &mut Vec<bool>) -> Vec<usize> {
        self.guarantees.evaluate(trace, width, table);
        (0..self.guarantees.roots()).filter(|r| !self.guarantees.root_always(table, trace.len, *r)).collect()
    }
}

//! Mealy-machine controllers: loading `machine.json`, determinism checks and
//! emission of `if (currentState === N)` controller code.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::signatures::FormatError;
use crate::syntax::{
    parse_formula, parse_term, predicate_to_call, term_to_call, Formula, FunctionTerm, Ident, PredicateTerm,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub u32);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: PredicateTerm,
    pub negated: bool,
}

impl Literal {
    pub fn holds(&self, value: bool) -> bool {
        value != self.negated
    }
}

/// A conjunction of literals; the empty conjunction is `true`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct Guard(pub Vec<Literal>);

impl Guard {
    pub fn atoms(&self) -> BTreeSet<&PredicateTerm> {
        self.0.iter().map(|l| &l.atom).collect()
    }

    pub fn eval(&self, value_of: impl Fn(&PredicateTerm) -> bool) -> bool {
        self.0.iter().all(|l| l.holds(value_of(&l.atom)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub guard: Guard,
    /// Cells without an entry keep their value.
    pub updates: BTreeMap<Ident, FunctionTerm>,
    pub to: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub id: StateId,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum MachineError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("state {state}: transitions {first} and {second} have overlapping guards")]
    NondeterministicGuards { state: StateId, first: usize, second: usize },
}

/// A validated, deterministic machine. Transition order is preserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MealyMachine {
    initial: StateId,
    states: Vec<State>,
}

impl MealyMachine {
    pub fn new(initial: StateId, states: Vec<State>) -> Result<Self, MachineError> {
        let ids: BTreeSet<StateId> = states.iter().map(|s| s.id).collect();
        if ids.len() != states.len() {
            return Err(FormatError::new("states", "duplicate state id").into());
        }
        if !ids.contains(&initial) {
            return Err(FormatError::new("initial", format!("unknown state {initial}")).into());
        }
        for (si, state) in states.iter().enumerate() {
            for (ti, t) in state.transitions.iter().enumerate() {
                if !ids.contains(&t.to) {
                    return Err(FormatError::new(
                        format!("states[{si}].transitions[{ti}].to"),
                        format!("unknown state {}", t.to),
                    )
                    .into());
                }
            }
            for i in 0..state.transitions.len() {
                for j in i + 1..state.transitions.len() {
                    if overlap(&state.transitions[i].guard, &state.transitions[j].guard) {
                        return Err(MachineError::NondeterministicGuards { state: state.id, first: i, second: j });
                    }
                }
            }
        }
        Ok(MealyMachine { initial, states })
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> Option<&State> {
        self.states.iter().find(|s| s.id == id)
    }

    /// Every predicate atom mentioned by some guard.
    pub fn guard_atoms(&self) -> BTreeSet<PredicateTerm> {
        self.transitions().flat_map(|t| t.guard.0.iter().map(|l| l.atom.clone())).collect()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.states.iter().flat_map(|s| &s.transitions)
    }

    /// The transition taken from `state` under a predicate valuation.
    pub fn step(&self, state: StateId, value_of: impl Fn(&PredicateTerm) -> bool) -> Option<&Transition> {
        self.state(state)?.transitions.iter().find(|t| t.guard.eval(&value_of))
    }

    pub fn from_json(doc: &str) -> Result<Self, MachineError> {
        load_machine(doc)
    }

    pub fn to_json(&self) -> String {
        let doc = MachineDoc {
            initial: self.initial.0,
            states: self
                .states
                .iter()
                .map(|s| StateDoc {
                    id: s.id.0,
                    transitions: s
                        .transitions
                        .iter()
                        .map(|t| TransitionDoc {
                            guard: GuardDoc::Literals(
                                t.guard
                                    .0
                                    .iter()
                                    .map(|l| LiteralDoc {
                                        pred: l.atom.predicate.to_string(),
                                        args: l.atom.args.iter().map(ToString::to_string).collect(),
                                        neg: l.negated,
                                    })
                                    .collect(),
                            ),
                            updates: t.updates.iter().map(|(c, v)| (c.to_string(), v.to_string())).collect(),
                            to: t.to.0,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("machine serializes")
    }
}

/// Two conjunctions overlap when some valuation of their joint atoms satisfies both.
fn overlap(a: &Guard, b: &Guard) -> bool {
    let atoms: Vec<&PredicateTerm> = a.atoms().union(&b.atoms()).copied().collect();
    // guards are short conjunctions; the table stays small
    let n = atoms.len().min(20);
    (0u32..(1 << n)).any(|bits| {
        let value_of = |p: &PredicateTerm| {
            let i = atoms.iter().position(|x| *x == p).expect("atom collected above");
            bits >> i & 1 == 1
        };
        a.eval(value_of) && b.eval(value_of)
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineDoc {
    initial: u32,
    states: Vec<StateDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    id: u32,
    #[serde(default)]
    transitions: Vec<TransitionDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    guard: GuardDoc,
    #[serde(default)]
    updates: BTreeMap<String, String>,
    to: u32,
}

/// Either the literal list of `machine.json` or a boolean expression string,
/// which is normalised to DNF with one transition per disjunct.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GuardDoc {
    Literals(Vec<LiteralDoc>),
    Expr(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LiteralDoc {
    pred: String,
    #[serde(default)]
    args: Vec<String>,
    #[serde(default)]
    neg: bool,
}

/// Parses and validates a `machine.json` document.
pub fn load_machine(doc: &str) -> Result<MealyMachine, MachineError> {
    let parsed: MachineDoc =
        serde_json::from_str(doc).map_err(|e| FormatError::new(format!("line {}", e.line()), e.to_string()))?;
    let mut states = Vec::with_capacity(parsed.states.len());
    for (si, s) in parsed.states.into_iter().enumerate() {
        let mut transitions = Vec::new();
        for (ti, t) in s.transitions.into_iter().enumerate() {
            let path = format!("states[{si}].transitions[{ti}]");
            let mut updates = BTreeMap::new();
            for (cell, term) in &t.updates {
                let cell = Ident::new(cell.as_str())
                    .map_err(|e| FormatError::new(format!("{path}.updates"), e.to_string()))?;
                let term =
                    parse_term(term).map_err(|e| FormatError::new(format!("{path}.updates.{cell}"), e.to_string()))?;
                updates.insert(cell, term);
            }
            let guards = match t.guard {
                GuardDoc::Literals(lits) => {
                    let mut out = Vec::with_capacity(lits.len());
                    for (li, l) in lits.into_iter().enumerate() {
                        let lpath = format!("{path}.guard[{li}]");
                        let pred =
                            Ident::new(l.pred).map_err(|e| FormatError::new(format!("{lpath}.pred"), e.to_string()))?;
                        let args = l
                            .args
                            .iter()
                            .map(|a| parse_term(a))
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|e| FormatError::new(format!("{lpath}.args"), e.to_string()))?;
                        out.push(Literal { atom: PredicateTerm::new(pred, args), negated: l.neg });
                    }
                    vec![Guard(out)]
                }
                GuardDoc::Expr(src) => guard_dnf(&src).map_err(|m| FormatError::new(format!("{path}.guard"), m))?,
            };
            for guard in guards {
                transitions.push(Transition { guard, updates: updates.clone(), to: StateId(t.to) });
            }
        }
        states.push(State { id: StateId(s.id), transitions });
    }
    MealyMachine::new(StateId(parsed.initial), states)
}

/// Parses a propositional guard expression into DNF. `true` is the empty conjunction.
pub fn guard_dnf(src: &str) -> Result<Vec<Guard>, String> {
    if src.trim() == "true" {
        return Ok(vec![Guard::default()]);
    }
    let f = parse_formula(src).map_err(|e| e.to_string())?;
    let clauses = dnf(&f, false)?;
    // drop contradictory disjuncts; they can never fire
    Ok(clauses
        .into_iter()
        .filter(|c| !c.iter().any(|l| c.iter().any(|m| m.atom == l.atom && m.negated != l.negated)))
        .map(|mut c| {
            c.dedup();
            Guard(c)
        })
        .collect())
}

fn dnf(f: &Formula, negate: bool) -> Result<Vec<Vec<Literal>>, String> {
    let product = |a: Vec<Vec<Literal>>, b: Vec<Vec<Literal>>| {
        let mut out = Vec::new();
        for x in &a {
            for y in &b {
                let mut c = x.clone();
                c.extend(y.iter().cloned());
                out.push(c);
            }
        }
        out
    };
    Ok(match (f, negate) {
        (Formula::Pred { term }, neg) => vec![vec![Literal { atom: term.clone(), negated: neg }]],
        (Formula::Not { arg }, neg) => dnf(arg, !neg)?,
        (Formula::And { lhs, rhs }, false) | (Formula::Or { lhs, rhs }, true) => {
            product(dnf(lhs, negate)?, dnf(rhs, negate)?)
        }
        (Formula::Or { lhs, rhs }, false) | (Formula::And { lhs, rhs }, true) => {
            let mut a = dnf(lhs, negate)?;
            a.extend(dnf(rhs, negate)?);
            a
        }
        (Formula::Implies { lhs, rhs }, neg) => {
            let as_or = Formula::or(Formula::not((**lhs).clone()), (**rhs).clone());
            dnf(&as_or, neg)?
        }
        (other, _) => return Err(format!("guard must be propositional over predicates: `{other}`")),
    })
}

/// Emits controller code: one `if (currentState === N)` block per state, with
/// one `if`/`else if` branch per transition in machine order.
pub fn emit_controller(m: &MealyMachine) -> String {
    let mut out = String::new();
    for (i, state) in m.states().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "if (currentState === {}) {{", state.id);
        for (ti, t) in state.transitions.iter().enumerate() {
            let kw = if ti == 0 { "if" } else { "else if" };
            let _ = writeln!(out, "    {kw} ({}) {{", render_guard(&t.guard));
            for (cell, term) in &t.updates {
                let _ = writeln!(out, "        {cell} = {}", term_to_call(term));
            }
            let _ = writeln!(out, "        currentState = {}", t.to);
            out.push_str("    }\n");
        }
        out.push_str("}\n");
    }
    out
}

fn render_guard(g: &Guard) -> String {
    if g.0.is_empty() {
        return "true".to_string();
    }
    g.0.iter()
        .map(|l| format!("{}{}", if l.negated { "!" } else { "" }, predicate_to_call(&l.atom)))
        .collect::<Vec<_>>()
        .join(" && ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOUNCE: &str = include_str!("../../../benchmarks/ball/machine.json");

    #[test]
    fn loads_bounce_machine() {
        let m = load_machine(BOUNCE).unwrap();
        assert_eq!(m.states().len(), 3);
        assert_eq!(m.initial(), StateId(0));
        assert_eq!(m.guard_atoms().len(), 2);
        assert_eq!(load_machine(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn true_guard_self_loop() {
        let m = load_machine(
            r#"{"initial":0,"states":[{"id":0,"transitions":[{"guard":[],"updates":{"c":"c"},"to":0}]}]}"#,
        )
        .unwrap();
        assert_eq!(m.states()[0].transitions.len(), 1);
        assert!(m.step(StateId(0), |_| false).is_some());
        let m2 = load_machine(r#"{"initial":0,"states":[{"id":0,"transitions":[{"guard":"true","to":0}]}]}"#).unwrap();
        assert!(m2.states()[0].transitions[0].guard.0.is_empty());
    }

    #[test]
    fn overlapping_guards_rejected() {
        let doc = r#"{"initial":0,"states":[{"id":0,"transitions":[
            {"guard":[{"pred":"p","args":["x"]}],"to":0},
            {"guard":[{"pred":"q","args":["x"]}],"to":0}]}]}"#;
        assert_eq!(
            load_machine(doc).unwrap_err(),
            MachineError::NondeterministicGuards { state: StateId(0), first: 0, second: 1 }
        );
    }

    #[test]
    fn unknown_target_and_initial_rejected() {
        let doc = r#"{"initial":0,"states":[{"id":0,"transitions":[{"guard":[],"to":7}]}]}"#;
        assert!(matches!(load_machine(doc), Err(MachineError::Format(_))));
        let doc = r#"{"initial":3,"states":[{"id":0}]}"#;
        assert!(matches!(load_machine(doc), Err(MachineError::Format(_))));
        assert!(matches!(load_machine("{"), Err(MachineError::Format(_))));
    }

    #[test]
    fn expression_guards_split_into_disjuncts() {
        let doc = r#"{"initial":0,"states":[{"id":0,"transitions":[
            {"guard":"p x || (q x && !p x)","updates":{"c":"f c"},"to":0},
            {"guard":"!(p x || q x)","to":0}]}]}"#;
        let m = load_machine(doc).unwrap();
        let ts = &m.states()[0].transitions;
        assert_eq!(ts.len(), 3);
        assert_eq!(render_guard(&ts[1].guard), "q(x) && !p(x)");
        assert_eq!(render_guard(&ts[2].guard), "!p(x) && !q(x)");
        assert!(guard_dnf("X p").is_err());
    }

    #[test]
    fn emits_empty_state() {
        let m = MealyMachine::new(StateId(4), vec![State { id: StateId(4), transitions: vec![] }]).unwrap();
        assert_eq!(emit_controller(&m), "if (currentState === 4) {\n}\n");
    }

    #[test]
    fn emits_nested_terms_as_calls() {
        let doc = r#"{"initial":0,"states":[{"id":0,"transitions":[
            {"guard":[{"pred":"leftmost","args":["moveLeft ball"]}],"updates":{"ball":"moveRight (moveLeft ball)"},"to":0}]}]}"#;
        let code = emit_controller(&load_machine(doc).unwrap());
        assert!(code.contains("if (leftmost(moveLeft(ball))) {"));
        assert!(code.contains("ball = moveRight(moveLeft(ball))"));
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

/// An identifier matching `[A-Za-z_][A-Za-z0-9_]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ident(String);

impl Ident {
    pub fn new(name: impl Into<String>) -> Result<Self, InvalidIdent> {
        let name = name.into();
        if is_valid_ident(&name) {
            Ok(Ident(name))
        } else {
            Err(InvalidIdent(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub fn is_valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid identifier `{0}`")]
pub struct InvalidIdent(pub String);

impl TryFrom<String> for Ident {
    type Error = InvalidIdent;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Ident::new(value)
    }
}

impl From<Ident> for String {
    fn from(value: Ident) -> Self {
        value.0
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Ident {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// A data-constructing expression: a signal read or a function application.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionTerm {
    SignalRef {
        name: Ident,
    },
    /// Always carries at least one argument.
    Apply {
        function: Ident,
        args: Vec<FunctionTerm>,
    },
}

impl FunctionTerm {
    pub fn signal(name: Ident) -> Self {
        FunctionTerm::SignalRef { name }
    }

    /// Builds an application. Returns a plain signal reference when `args` is empty.
    pub fn apply(function: Ident, args: Vec<FunctionTerm>) -> Self {
        if args.is_empty() {
            FunctionTerm::SignalRef { name: function }
        } else {
            FunctionTerm::Apply { function, args }
        }
    }

    pub fn head(&self) -> &Ident {
        match self {
            FunctionTerm::SignalRef { name } => name,
            FunctionTerm::Apply { function, .. } => function,
        }
    }

    /// Number of term nodes, counting this one.
    pub fn node_count(&self) -> usize {
        match self {
            FunctionTerm::SignalRef { .. } => 1,
            FunctionTerm::Apply { args, .. } => 1 + args.iter().map(FunctionTerm::node_count).sum::<usize>(),
        }
    }
}

/// A predicate applied to function terms. `args` is empty only for a bare
/// identifier in formula position, whose meaning is settled during validation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PredicateTerm {
    pub predicate: Ident,
    pub args: Vec<FunctionTerm>,
}

impl PredicateTerm {
    pub fn new(predicate: Ident, args: Vec<FunctionTerm>) -> Self {
        PredicateTerm { predicate, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Formula {
    Pred { term: PredicateTerm },
    Update { target: Ident, value: FunctionTerm },
    Not { arg: Box<Formula> },
    And { lhs: Box<Formula>, rhs: Box<Formula> },
    Or { lhs: Box<Formula>, rhs: Box<Formula> },
    Implies { lhs: Box<Formula>, rhs: Box<Formula> },
    Next { arg: Box<Formula> },
    Until { lhs: Box<Formula>, rhs: Box<Formula> },
    WeakUntil { lhs: Box<Formula>, rhs: Box<Formula> },
    Finally { arg: Box<Formula> },
    Globally { arg: Box<Formula> },
}

impl Formula {
    pub fn pred(term: PredicateTerm) -> Self {
        Formula::Pred { term }
    }

    pub fn update(target: Ident, value: FunctionTerm) -> Self {
        Formula::Update { target, value }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(arg: Formula) -> Self {
        Formula::Not { arg: Box::new(arg) }
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And { lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or { lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Self {
        Formula::Implies { lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn next(arg: Formula) -> Self {
        Formula::Next { arg: Box::new(arg) }
    }

    pub fn until(lhs: Formula, rhs: Formula) -> Self {
        Formula::Until { lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn weak_until(lhs: Formula, rhs: Formula) -> Self {
        Formula::WeakUntil { lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn finally(arg: Formula) -> Self {
        Formula::Finally { arg: Box::new(arg) }
    }

    pub fn globally(arg: Formula) -> Self {
        Formula::Globally { arg: Box::new(arg) }
    }

    /// Direct subformulas, left to right.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Pred { .. } | Formula::Update { .. } => vec![],
            Formula::Not { arg } | Formula::Next { arg } | Formula::Finally { arg } | Formula::Globally { arg } => {
                vec![arg]
            }
            Formula::And { lhs, rhs }
            | Formula::Or { lhs, rhs }
            | Formula::Implies { lhs, rhs }
            | Formula::Until { lhs, rhs }
            | Formula::WeakUntil { lhs, rhs } => vec![lhs, rhs],
        }
    }

    /// Number of AST nodes including function-term nodes. This is the number
    /// of spans the parser records for the formula.
    pub fn node_count(&self) -> usize {
        match self {
            Formula::Pred { term } => 1 + term.args.iter().map(FunctionTerm::node_count).sum::<usize>(),
            Formula::Update { value, .. } => 1 + value.node_count(),
            _ => 1 + self.children().into_iter().map(Formula::node_count).sum::<usize>(),
        }
    }

    /// True when the formula uses only the core connectives
    /// {Pred, Update, Not, And, Next, Until}.
    pub fn is_core(&self) -> bool {
        match self {
            Formula::Pred { .. } | Formula::Update { .. } => true,
            Formula::Not { arg } | Formula::Next { arg } => arg.is_core(),
            Formula::And { lhs, rhs } | Formula::Until { lhs, rhs } => lhs.is_core() && rhs.is_core(),
            _ => false,
        }
    }

    /// True when the formula mentions no temporal operator.
    pub fn is_present_tense(&self) -> bool {
        match self {
            Formula::Pred { .. } | Formula::Update { .. } => true,
            Formula::Not { arg } => arg.is_present_tense(),
            Formula::And { lhs, rhs } | Formula::Or { lhs, rhs } | Formula::Implies { lhs, rhs } => {
                lhs.is_present_tense() && rhs.is_present_tense()
            }
            _ => false,
        }
    }

    /// Visits every predicate term and update, in left-to-right order.
    pub fn for_each_atom<'a>(&'a self, visit: &mut impl FnMut(Atom<'a>)) {
        match self {
            Formula::Pred { term } => visit(Atom::Pred(term)),
            Formula::Update { target, value } => visit(Atom::Update(target, value)),
            _ => {
                for child in self.children() {
                    child.for_each_atom(visit);
                }
            }
        }
    }

    /// The first atom in left-to-right order, as a formula.
    pub fn first_atom(&self) -> Formula {
        match self {
            Formula::Pred { .. } | Formula::Update { .. } => self.clone(),
            _ => self.children()[0].first_atom(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Atom<'a> {
    Pred(&'a PredicateTerm),
    Update(&'a Ident, &'a FunctionTerm),
}

/// A byte range plus the 1-based line/column of its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl Span {
    pub fn join(self, other: Span) -> Span {
        Span { start: self.start, end: other.end, line: self.line, column: self.column }
    }
}

/// Source positions for every node of every statement, in post-order
/// (children before parents, left before right; function terms included).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpanMap {
    pub assumes: Vec<Vec<Span>>,
    pub guarantees: Vec<Vec<Span>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Assume,
    Guarantee,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Assume => f.write_str("assume"),
            Block::Guarantee => f.write_str("guarantee"),
        }
    }
}

/// An `always assume { .. } always guarantee { .. }` specification.
///
/// Equality is structural and ignores source spans.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TslSpec {
    pub assumes: Vec<Formula>,
    pub guarantees: Vec<Formula>,
    #[serde(skip)]
    pub spans: Option<SpanMap>,
}

impl PartialEq for TslSpec {
    fn eq(&self, other: &Self) -> bool {
        self.assumes == other.assumes && self.guarantees == other.guarantees
    }
}

impl Eq for TslSpec {}

impl TslSpec {
    pub fn new(assumes: Vec<Formula>, guarantees: Vec<Formula>) -> Self {
        TslSpec { assumes, guarantees, spans: None }
    }

    pub fn block(&self, block: Block) -> &[Formula] {
        match block {
            Block::Assume => &self.assumes,
            Block::Guarantee => &self.guarantees,
        }
    }

    /// All statements tagged with their block and index.
    pub fn statements(&self) -> impl Iterator<Item = (Block, usize, &Formula)> {
        let a = self.assumes.iter().enumerate().map(|(i, f)| (Block::Assume, i, f));
        let g = self.guarantees.iter().enumerate().map(|(i, f)| (Block::Guarantee, i, f));
        a.chain(g)
    }

    /// Post-order spans of one statement, when the spec came from source text.
    pub fn statement_spans(&self, block: Block, index: usize) -> Option<&[Span]> {
        let map = self.spans.as_ref()?;
        let list = match block {
            Block::Assume => &map.assumes,
            Block::Guarantee => &map.guarantees,
        };
        list.get(index).map(Vec::as_slice)
    }
}

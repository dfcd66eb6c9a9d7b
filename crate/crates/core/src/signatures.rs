//! Declared cells, inputs, outputs, functions and predicates, and validation
//! of a parsed specification against them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::{Block, Formula, FunctionTerm, Ident, PredicateTerm, Span, TslSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    Cell,
    Input,
    /// A write-only stream.
    Output,
    Function,
    Predicate,
}

impl SymbolKind {
    pub fn is_readable(self) -> bool {
        matches!(self, SymbolKind::Cell | SymbolKind::Input)
    }

    pub fn is_writable(self) -> bool {
        matches!(self, SymbolKind::Cell | SymbolKind::Output)
    }
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SymbolKind::Cell => "cell",
            SymbolKind::Input => "input",
            SymbolKind::Output => "output",
            SymbolKind::Function => "function",
            SymbolKind::Predicate => "predicate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDecl {
    pub name: Ident,
    pub kind: SymbolKind,
    pub arity: usize,
    /// Parameter names used when rendering `name(params) => description`.
    pub params: Vec<String>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[error("{path}: {message}")]
pub struct FormatError {
    pub path: String,
    pub message: String,
}

impl FormatError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError { path: path.into(), message: message.into() }
    }
}

/// Name-indexed declarations. Names are unique across all kinds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignatureTable {
    decls: BTreeMap<Ident, SymbolDecl>,
    order: Vec<Ident>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SignatureDoc {
    #[serde(default)]
    cells: Vec<SignalEntry>,
    #[serde(default)]
    inputs: Vec<SignalEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    outputs: Vec<SignalEntry>,
    #[serde(default)]
    functions: Vec<SymbolEntry>,
    #[serde(default)]
    predicates: Vec<SymbolEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SignalEntry {
    name: String,
    #[serde(default)]
    description: String,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SymbolEntry {
    name: String,
    arity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<Vec<String>>,
    #[serde(default)]
    description: String,
}

impl SignatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a `signatures.json` document.
    pub fn from_json(doc: &str) -> Result<Self, FormatError> {
        if doc.trim().is_empty() {
            return Ok(Self::new());
        }
        let parsed: SignatureDoc =
            serde_json::from_str(doc).map_err(|e| FormatError::new(format!("line {}", e.line()), e.to_string()))?;
        let mut table = Self::new();
        let signals = [
            ("cells", SymbolKind::Cell, &parsed.cells),
            ("inputs", SymbolKind::Input, &parsed.inputs),
            ("outputs", SymbolKind::Output, &parsed.outputs),
        ];
        for (section, kind, entries) in signals {
            for (i, e) in entries.iter().enumerate() {
                let path = format!("{section}[{i}]");
                let name = table.fresh_name(&e.name, &path)?;
                table
                    .insert(SymbolDecl { name, kind, arity: 0, params: vec![], description: e.description.clone() })
                    .map_err(|m| FormatError::new(path.clone(), m))?;
            }
        }
        let symbols = [
            ("functions", SymbolKind::Function, &parsed.functions),
            ("predicates", SymbolKind::Predicate, &parsed.predicates),
        ];
        for (section, kind, entries) in symbols {
            for (i, e) in entries.iter().enumerate() {
                let path = format!("{section}[{i}]");
                let name = table.fresh_name(&e.name, &path)?;
                let params = e.params.clone().unwrap_or_else(|| default_params(e.arity));
                if params.len() != e.arity {
                    return Err(FormatError::new(
                        format!("{path}.params"),
                        format!("{} params listed for arity {}", params.len(), e.arity),
                    ));
                }
                table
                    .insert(SymbolDecl { name, kind, arity: e.arity, params, description: e.description.clone() })
                    .map_err(|m| FormatError::new(format!("{path}.arity"), m))?;
            }
        }
        Ok(table)
    }

    fn fresh_name(&self, raw: &str, path: &str) -> Result<Ident, FormatError> {
        let name = Ident::new(raw).map_err(|err| FormatError::new(format!("{path}.name"), err.to_string()))?;
        if self.decls.contains_key(&name) {
            return Err(FormatError::new(format!("{path}.name"), format!("duplicate declaration of `{name}`")));
        }
        Ok(name)
    }

    pub fn to_json(&self) -> String {
        let mut doc =
            SignatureDoc { cells: vec![], inputs: vec![], outputs: vec![], functions: vec![], predicates: vec![] };
        for d in self.iter() {
            let signal = || SignalEntry { name: d.name.to_string(), description: d.description.clone() };
            let symbol = || SymbolEntry {
                name: d.name.to_string(),
                arity: d.arity,
                params: Some(d.params.clone()),
                description: d.description.clone(),
            };
            match d.kind {
                SymbolKind::Cell => doc.cells.push(signal()),
                SymbolKind::Input => doc.inputs.push(signal()),
                SymbolKind::Output => doc.outputs.push(signal()),
                SymbolKind::Function => doc.functions.push(symbol()),
                SymbolKind::Predicate => doc.predicates.push(symbol()),
            }
        }
        serde_json::to_string_pretty(&doc).expect("signature document serializes")
    }

    /// Adds a declaration, enforcing name uniqueness and the arity rules.
    pub fn insert(&mut self, decl: SymbolDecl) -> Result<(), String> {
        match decl.kind {
            SymbolKind::Function | SymbolKind::Predicate if decl.arity == 0 => {
                return Err(format!("{} `{}` must take at least one argument", decl.kind, decl.name));
            }
            SymbolKind::Cell | SymbolKind::Input | SymbolKind::Output if decl.arity != 0 => {
                return Err(format!("{} `{}` cannot take arguments", decl.kind, decl.name));
            }
            _ => {}
        }
        if self.decls.contains_key(&decl.name) {
            return Err(format!("duplicate declaration of `{}`", decl.name));
        }
        self.order.push(decl.name.clone());
        self.decls.insert(decl.name.clone(), decl);
        Ok(())
    }

    pub fn get(&self, name: &Ident) -> Option<&SymbolDecl> {
        self.decls.get(name)
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    /// Declarations in document order.
    pub fn iter(&self) -> impl Iterator<Item = &SymbolDecl> {
        self.order.iter().map(|n| &self.decls[n])
    }

    pub fn of_kind(&self, kind: SymbolKind) -> impl Iterator<Item = &SymbolDecl> {
        self.iter().filter(move |d| d.kind == kind)
    }

    /// Cells and outputs, i.e. everything that can be the target of an update.
    pub fn writable(&self) -> impl Iterator<Item = &SymbolDecl> {
        self.iter().filter(|d| d.kind.is_writable())
    }
}

fn default_params(arity: usize) -> Vec<String> {
    (0..arity).map(|i| format!("x{i}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueCode {
    UnknownSymbol,
    ArityMismatch,
    KindMismatch,
    UpdateTargetNotWritable,
    ReadOfNonReadable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
    pub block: Block,
    pub statement: usize,
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn from_issues(issues: Vec<Issue>) -> Self {
        ValidationReport { ok: issues.is_empty(), issues }
    }
}

/// Checks every symbol use against the table and reports all problems found.
pub fn validate(spec: &TslSpec, table: &SignatureTable) -> ValidationReport {
    let mut issues = Vec::new();
    for (block, index, formula) in spec.statements() {
        let mut walker = Walker {
            table,
            spans: spec.statement_spans(block, index),
            next_node: 0,
            block,
            statement: index,
            issues: &mut issues,
        };
        walker.formula(formula);
    }
    ValidationReport::from_issues(issues)
}

struct Walker<'a> {
    table: &'a SignatureTable,
    spans: Option<&'a [Span]>,
    /// post-order index of the next node to finish
    next_node: usize,
    block: Block,
    statement: usize,
    issues: &'a mut Vec<Issue>,
}

impl Walker<'_> {
    fn finish_node(&mut self) -> Option<Span> {
        let span = self.spans.and_then(|s| s.get(self.next_node)).copied();
        self.next_node += 1;
        span
    }

    fn report(&mut self, code: IssueCode, message: String, span: Option<Span>) {
        self.issues.push(Issue { code, message, block: self.block, statement: self.statement, span });
    }

    fn formula(&mut self, f: &Formula) {
        match f {
            Formula::Pred { term } => self.predicate(term),
            Formula::Update { target, value } => {
                self.term(value);
                let span = self.finish_node();
                match self.table.get(target) {
                    None => {
                        self.report(IssueCode::UnknownSymbol, format!("update target `{target}` is not declared"), span)
                    }
                    Some(d) if !d.kind.is_writable() => self.report(
                        IssueCode::UpdateTargetNotWritable,
                        format!("`{target}` is a {}, only cells and outputs can be updated", d.kind),
                        span,
                    ),
                    Some(_) => {}
                }
            }
            _ => {
                for child in f.children() {
                    self.formula(child);
                }
                self.finish_node();
            }
        }
    }

    fn predicate(&mut self, p: &PredicateTerm) {
        for arg in &p.args {
            self.term(arg);
        }
        let span = self.finish_node();
        let name = &p.predicate;
        match self.table.get(name) {
            None => self.report(IssueCode::UnknownSymbol, format!("`{name}` is not declared"), span),
            Some(d) if p.args.is_empty() => match d.kind {
                // a bare readable signal is a boolean observation
                SymbolKind::Input | SymbolKind::Cell => {}
                SymbolKind::Output => {
                    self.report(IssueCode::ReadOfNonReadable, format!("output `{name}` cannot be read"), span)
                }
                SymbolKind::Predicate => self.report(
                    IssueCode::ArityMismatch,
                    format!("predicate `{name}` expects {} argument(s), got 0", d.arity),
                    span,
                ),
                SymbolKind::Function => {
                    self.report(IssueCode::KindMismatch, format!("function `{name}` used as a predicate"), span)
                }
            },
            Some(d) if d.kind != SymbolKind::Predicate => {
                self.report(IssueCode::KindMismatch, format!("{} `{name}` used as a predicate", d.kind), span)
            }
            Some(d) if d.arity != p.args.len() => self.report(
                IssueCode::ArityMismatch,
                format!("predicate `{name}` expects {} argument(s), got {}", d.arity, p.args.len()),
                span,
            ),
            Some(_) => {}
        }
    }

    fn term(&mut self, t: &FunctionTerm) {
        match t {
            FunctionTerm::SignalRef { name } => {
                let span = self.finish_node();
                match self.table.get(name) {
                    None => self.report(IssueCode::UnknownSymbol, format!("`{name}` is not declared"), span),
                    Some(d) if d.kind == SymbolKind::Output => {
                        self.report(IssueCode::ReadOfNonReadable, format!("output `{name}` cannot be read"), span)
                    }
                    Some(d) if !d.kind.is_readable() => {
                        self.report(IssueCode::KindMismatch, format!("{} `{name}` used as a signal", d.kind), span)
                    }
                    Some(_) => {}
                }
            }
            FunctionTerm::Apply { function, args } => {
                for arg in args {
                    self.term(arg);
                }
                let span = self.finish_node();
                match self.table.get(function) {
                    None => self.report(IssueCode::UnknownSymbol, format!("`{function}` is not declared"), span),
                    Some(d) if d.kind != SymbolKind::Function => self.report(
                        IssueCode::KindMismatch,
                        format!("{} `{function}` applied as a function", d.kind),
                        span,
                    ),
                    Some(d) if d.arity != args.len() => self.report(
                        IssueCode::ArityMismatch,
                        format!("function `{function}` expects {} argument(s), got {}", d.arity, args.len()),
                        span,
                    ),
                    Some(_) => {}
                }
            }
        }
    }
}

/// The predicate atoms and per-cell update choices of a specification.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomAlphabet {
    pub predicates: BTreeSet<PredicateTerm>,
    pub updates: BTreeMap<Ident, BTreeSet<FunctionTerm>>,
}

impl AtomAlphabet {
    pub fn union(&self, other: &AtomAlphabet) -> AtomAlphabet {
        let mut out = self.clone();
        out.predicates.extend(other.predicates.iter().cloned());
        for (cell, terms) in &other.updates {
            out.updates.entry(cell.clone()).or_default().extend(terms.iter().cloned());
        }
        out
    }

    /// Number of distinct abstract steps: 2^|P| times the product of update-set sizes.
    pub fn step_count(&self) -> Option<u64> {
        let preds = u32::try_from(self.predicates.len()).ok()?;
        let mut count = 1u64.checked_shl(preds).filter(|_| preds < 64)?;
        for terms in self.updates.values() {
            count = count.checked_mul(terms.len() as u64)?;
        }
        Some(count)
    }

    pub fn add_predicate(&mut self, p: PredicateTerm) {
        self.predicates.insert(p);
    }

    /// Adds an update choice, and the self-update of its cell.
    pub fn add_update(&mut self, cell: Ident, term: FunctionTerm) {
        let set = self.updates.entry(cell.clone()).or_default();
        set.insert(FunctionTerm::signal(cell));
        set.insert(term);
    }
}

/// Collects the syntactically distinct predicate terms and update terms of a
/// spec. Every writable symbol in the table gets an update set, which always
/// contains its self-update.
pub fn atom_alphabet(spec: &TslSpec, table: &SignatureTable) -> AtomAlphabet {
    let mut alphabet = AtomAlphabet::default();
    for decl in table.writable() {
        let cell = decl.name.clone();
        alphabet.add_update(cell.clone(), FunctionTerm::signal(cell));
    }
    for (_, _, f) in spec.statements() {
        f.for_each_atom(&mut |atom| match atom {
            crate::syntax::Atom::Pred(p) => alphabet.add_predicate(p.clone()),
            crate::syntax::Atom::Update(cell, term) => alphabet.add_update(cell.clone(), term.clone()),
        });
    }
    alphabet
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_predicate_term, parse_spec, parse_term};

    const BALL: &str = include_str!("../../../benchmarks/ball/gold.tsl");
    const BALL_SIG: &str = include_str!("../../../benchmarks/ball/signatures.json");

    fn ball() -> (TslSpec, SignatureTable) {
        (parse_spec(BALL).unwrap(), SignatureTable::from_json(BALL_SIG).unwrap())
    }

    #[test]
    fn ball_signatures_have_five_decls() {
        let (_, table) = ball();
        assert_eq!(table.len(), 5);
        let kinds: Vec<_> = table.iter().map(|d| (d.name.to_string(), d.kind, d.arity)).collect();
        assert_eq!(
            kinds,
            vec![
                ("ball".into(), SymbolKind::Cell, 0),
                ("moveLeft".into(), SymbolKind::Function, 1),
                ("moveRight".into(), SymbolKind::Function, 1),
                ("leftmost".into(), SymbolKind::Predicate, 1),
                ("rightmost".into(), SymbolKind::Predicate, 1),
            ]
        );
    }

    #[test]
    fn empty_document_is_empty_table() {
        assert!(SignatureTable::from_json("").unwrap().is_empty());
        assert!(SignatureTable::from_json("{}").unwrap().is_empty());
    }

    #[test]
    fn duplicate_names_rejected() {
        let doc = r#"{"cells":[{"name":"ball","description":""}],
                      "predicates":[{"name":"ball","arity":1,"description":""}]}"#;
        let err = SignatureTable::from_json(doc).unwrap_err();
        assert_eq!(err.path, "predicates[0].name");
        assert!(err.message.contains("duplicate"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = SignatureTable::from_json(r#"{"cells":[], "types":[]}"#).unwrap_err();
        assert!(err.message.contains("unknown field"));
        let err = SignatureTable::from_json(r#"{"cells":[{"name":"c","kind":"x"}]}"#).unwrap_err();
        assert!(err.message.contains("unknown field"));
    }

    #[test]
    fn zero_arity_function_rejected() {
        let err = SignatureTable::from_json(r#"{"functions":[{"name":"f","arity":0}]}"#).unwrap_err();
        assert!(err.message.contains("at least one"));
    }

    #[test]
    fn json_round_trip() {
        let (_, table) = ball();
        assert_eq!(SignatureTable::from_json(&table.to_json()).unwrap(), table);
    }

    #[test]
    fn ball_validates() {
        let (spec, table) = ball();
        let report = validate(&spec, &table);
        assert!(report.ok, "{:?}", report.issues);
    }

    #[test]
    fn arity_mismatch_reported() {
        let (_, table) = ball();
        let spec = parse_spec("always guarantee { leftmost ball ball; }").unwrap();
        let report = validate(&spec, &table);
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].code, IssueCode::ArityMismatch);
        assert_eq!(report.issues[0].span.unwrap().column, 20);
    }

    #[test]
    fn kind_and_writability_issues() {
        let table = SignatureTable::from_json(
            r#"{"cells":[{"name":"c"}],"inputs":[{"name":"i"}],"outputs":[{"name":"o"}],
                "functions":[{"name":"f","arity":1}],"predicates":[{"name":"p","arity":1}]}"#,
        )
        .unwrap();
        let codes = |src: &str| -> Vec<IssueCode> {
            let spec = parse_spec(&format!("always guarantee {{ {src}; }}")).unwrap();
            validate(&spec, &table).issues.into_iter().map(|i| i.code).collect()
        };
        assert_eq!(codes("[i <- f c]"), vec![IssueCode::UpdateTargetNotWritable]);
        assert_eq!(codes("[o <- f i]"), vec![]);
        assert_eq!(codes("[c <- f o]"), vec![IssueCode::ReadOfNonReadable]);
        assert_eq!(codes("p o"), vec![IssueCode::ReadOfNonReadable]);
        assert_eq!(codes("f c"), vec![IssueCode::KindMismatch]);
        assert_eq!(codes("[c <- p c]"), vec![IssueCode::KindMismatch]);
        assert_eq!(codes("p f"), vec![IssueCode::KindMismatch]);
        assert_eq!(codes("i && c"), vec![]);
        assert_eq!(codes("p"), vec![IssueCode::ArityMismatch]);
        assert_eq!(codes("q c"), vec![IssueCode::UnknownSymbol]);
        assert_eq!(codes("[z <- g y]"), vec![IssueCode::UnknownSymbol; 3]);
    }

    #[test]
    fn ball_alphabet() {
        let (spec, table) = ball();
        let a = atom_alphabet(&spec, &table);
        let preds: BTreeSet<_> =
            ["leftmost ball", "rightmost ball"].iter().map(|s| parse_predicate_term(s).unwrap()).collect();
        assert_eq!(a.predicates, preds);
        let ups: BTreeSet<_> =
            ["moveLeft ball", "moveRight ball", "ball"].iter().map(|s| parse_term(s).unwrap()).collect();
        assert_eq!(a.updates.len(), 1);
        assert_eq!(a.updates[&Ident::new("ball").unwrap()], ups);
        assert_eq!(a.step_count(), Some(12));
    }

    #[test]
    fn no_predicates_means_empty_set() {
        let (_, table) = ball();
        let spec = parse_spec("always guarantee { F [ball <- moveLeft ball]; }").unwrap();
        assert!(atom_alphabet(&spec, &table).predicates.is_empty());
    }

    #[test]
    fn identical_terms_unify() {
        let (_, table) = ball();
        let spec = parse_spec("always guarantee { leftmost ball; leftmost (ball); X leftmost ball; }").unwrap();
        assert_eq!(atom_alphabet(&spec, &table).predicates.len(), 1);
    }
}

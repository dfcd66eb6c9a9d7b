use std::fmt::{self, Write};

use super::ast::{Formula, FunctionTerm, PredicateTerm, TslSpec};

const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_UNTIL: u8 = 4;
const PREC_UNARY: u8 = 5;
const PREC_ATOM: u8 = 6;

fn precedence(f: &Formula) -> u8 {
    match f {
        Formula::Implies { .. } => PREC_IMPLIES,
        Formula::Or { .. } => PREC_OR,
        Formula::And { .. } => PREC_AND,
        Formula::Until { .. } | Formula::WeakUntil { .. } => PREC_UNTIL,
        Formula::Not { .. } | Formula::Next { .. } | Formula::Finally { .. } | Formula::Globally { .. } => PREC_UNARY,
        Formula::Pred { .. } | Formula::Update { .. } => PREC_ATOM,
    }
}

pub fn print_spec(spec: &TslSpec) -> String {
    let mut out = String::new();
    out.push_str("always assume {\n");
    for f in &spec.assumes {
        let _ = writeln!(out, "    {f};");
    }
    out.push_str("}\nalways guarantee {\n");
    for f in &spec.guarantees {
        let _ = writeln!(out, "    {f};");
    }
    out.push('}');
    out
}

impl fmt::Display for TslSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_spec(self))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0)
    }
}

fn write_formula(out: &mut fmt::Formatter<'_>, f: &Formula, min_prec: u8) -> fmt::Result {
    let prec = precedence(f);
    let paren = prec < min_prec;
    if paren {
        out.write_char('(')?;
    }
    match f {
        Formula::Pred { term } => write!(out, "{term}")?,
        Formula::Update { target, value } => write!(out, "[{target} <- {value}]")?,
        Formula::Not { arg } => write_prefix(out, "!", arg)?,
        Formula::Next { arg } => write_prefix(out, "X ", arg)?,
        Formula::Finally { arg } => write_prefix(out, "F ", arg)?,
        Formula::Globally { arg } => write_prefix(out, "G ", arg)?,
        Formula::And { lhs, rhs } => write_binary(out, lhs, " && ", rhs, PREC_AND, PREC_UNTIL)?,
        Formula::Or { lhs, rhs } => write_binary(out, lhs, " || ", rhs, PREC_OR, PREC_AND)?,
        Formula::Implies { lhs, rhs } => write_binary(out, lhs, " -> ", rhs, PREC_OR, PREC_IMPLIES)?,
        Formula::Until { lhs, rhs } => write_binary(out, lhs, " U ", rhs, PREC_UNARY, PREC_UNTIL)?,
        Formula::WeakUntil { lhs, rhs } => write_binary(out, lhs, " W ", rhs, PREC_UNARY, PREC_UNTIL)?,
    }
    if paren {
        out.write_char(')')?;
    }
    Ok(())
}

fn write_prefix(out: &mut fmt::Formatter<'_>, op: &str, arg: &Formula) -> fmt::Result {
    out.write_str(op)?;
    write_formula(out, arg, PREC_UNARY)
}

fn write_binary(
    out: &mut fmt::Formatter<'_>,
    lhs: &Formula,
    op: &str,
    rhs: &Formula,
    lhs_min: u8,
    rhs_min: u8,
) -> fmt::Result {
    write_formula(out, lhs, lhs_min)?;
    out.write_str(op)?;
    write_formula(out, rhs, rhs_min)
}

impl fmt::Display for FunctionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionTerm::SignalRef { name } => write!(f, "{name}"),
            FunctionTerm::Apply { function, args } => {
                write!(f, "{function}")?;
                write_args(f, args)
            }
        }
    }
}

impl fmt::Display for PredicateTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        write_args(f, &self.args)
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[FunctionTerm]) -> fmt::Result {
    for arg in args {
        match arg {
            FunctionTerm::SignalRef { name } => write!(f, " {name}")?,
            apply => write!(f, " ({apply})")?,
        }
    }
    Ok(())
}

/// Renders a term in call syntax: `moveLeft ball` becomes `moveLeft(ball)`.
pub fn term_to_call(term: &FunctionTerm) -> String {
    match term {
        FunctionTerm::SignalRef { name } => name.to_string(),
        FunctionTerm::Apply { function, args } => call(function.as_str(), args),
    }
}

/// Renders a predicate term in call syntax.
pub fn predicate_to_call(term: &PredicateTerm) -> String {
    if term.args.is_empty() {
        term.predicate.to_string()
    } else {
        call(term.predicate.as_str(), &term.args)
    }
}

fn call(head: &str, args: &[FunctionTerm]) -> String {
    let rendered: Vec<String> = args.iter().map(term_to_call).collect();
    format!("{head}({})", rendered.join(", "))
}

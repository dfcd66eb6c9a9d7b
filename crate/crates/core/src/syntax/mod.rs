//! Surface syntax: AST, lexer, parser, pretty-printer and desugaring.

mod ast;
mod desugar;
mod lexer;
mod parser;
mod printer;

pub use ast::{
    is_valid_ident, Atom, Block, Formula, FunctionTerm, Ident, InvalidIdent, PredicateTerm, Span, SpanMap, TslSpec,
};
pub use desugar::desugar;
pub use lexer::RESERVED;
pub use parser::{parse_formula, parse_predicate_term, parse_spec, parse_term};
pub use printer::{predicate_to_call, print_spec, term_to_call};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{line}:{column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BALL: &str = include_str!("../../../../benchmarks/ball/gold.tsl");

    fn id(s: &str) -> Ident {
        Ident::new(s).unwrap()
    }

    fn sig(s: &str) -> FunctionTerm {
        FunctionTerm::signal(id(s))
    }

    #[test]
    fn parses_ball_blocks() {
        let spec = parse_spec(BALL).unwrap();
        assert_eq!(spec.assumes.len(), 3);
        assert_eq!(spec.guarantees.len(), 5);
    }

    #[test]
    fn parses_single_guarantee_shape() {
        let spec = parse_spec("always guarantee { rightmost ball -> F [ball <- moveLeft ball]; }").unwrap();
        let expected = Formula::implies(
            Formula::pred(PredicateTerm::new(id("rightmost"), vec![sig("ball")])),
            Formula::finally(Formula::update(id("ball"), FunctionTerm::apply(id("moveLeft"), vec![sig("ball")]))),
        );
        assert!(spec.assumes.is_empty());
        assert_eq!(spec.guarantees, vec![expected]);
    }

    #[test]
    fn empty_blocks() {
        let spec = parse_spec("always assume {} always guarantee {}").unwrap();
        assert_eq!(spec, TslSpec::new(vec![], vec![]));
        assert_eq!(print_spec(&spec), "always assume {\n}\nalways guarantee {\n}");
    }

    #[test]
    fn missing_update_term_reports_bracket() {
        let err = parse_spec("always guarantee { [ball <- ]; }").unwrap_err();
        assert_eq!((err.line, err.column), (1, 29));
        assert_eq!(err.found, "`]`");
        assert_eq!(err.expected, "identifier");
    }

    #[test]
    fn missing_semicolon_is_an_error() {
        let err = parse_spec("always guarantee { p }").unwrap_err();
        assert_eq!(err.expected, "`;`");
    }

    #[test]
    fn garbage_never_panics() {
        for src in ["", "always", "always assume {", "}", "always guarantee { ((p; }", "[[", "!"] {
            let _ = parse_spec(src);
        }
        assert!(parse_spec("").unwrap().guarantees.is_empty());
    }

    #[test]
    fn precedence_reading() {
        let f = parse_formula("a || b && c U d -> e -> g").unwrap();
        let expected = parse_formula("(a || (b && (c U d))) -> (e -> g)").unwrap();
        assert_eq!(f, expected);
        let f = parse_formula("!a U b W c").unwrap();
        assert_eq!(f, parse_formula("(!a) U (b W c)").unwrap());
        let f = parse_formula("a && b && c").unwrap();
        assert_eq!(f, parse_formula("(a && b) && c").unwrap());
    }

    #[test]
    fn nested_application_needs_parens() {
        let f = parse_formula("[ball <- moveLeft (moveRight ball) ball]").unwrap();
        let Formula::Update { value, .. } = &f else { panic!() };
        assert_eq!(
            value,
            &FunctionTerm::apply(
                id("moveLeft"),
                vec![FunctionTerm::apply(id("moveRight"), vec![sig("ball")]), sig("ball")]
            )
        );
        assert_eq!(f.to_string(), "[ball <- moveLeft (moveRight ball) ball]");
    }

    #[test]
    fn spans_cover_every_node() {
        let spec = parse_spec(BALL).unwrap();
        for (block, i, f) in spec.statements() {
            let spans = spec.statement_spans(block, i).unwrap();
            assert_eq!(spans.len(), f.node_count());
            // the root is last in post-order and starts the statement
            let root = spans.last().unwrap();
            assert!(spans.iter().all(|s| s.start >= root.start && s.end <= root.end));
        }
    }

    #[test]
    fn ball_round_trips() {
        let spec = parse_spec(BALL).unwrap();
        let again = parse_spec(&print_spec(&spec)).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn call_syntax_rendering() {
        let t = parse_term("moveLeft (moveRight ball) x").unwrap();
        assert_eq!(term_to_call(&t), "moveLeft(moveRight(ball), x)");
        let p = parse_predicate_term("leftmost (moveLeft ball)").unwrap();
        assert_eq!(predicate_to_call(&p), "leftmost(moveLeft(ball))");
    }
}

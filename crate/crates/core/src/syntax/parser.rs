//! Recursive-descent parser for the block syntax.
//!
//! Binding strength, loosest first: `->` (right), `||`, `&&`, `U`/`W` (right),
//! then the prefix operators `!`, `X`, `F`, `G`. Function application is
//! juxtaposition; nested applications need parentheses.

use super::ast::{Block, Formula, FunctionTerm, Ident, PredicateTerm, Span, SpanMap, TslSpec};
use super::lexer::{tokenize, Token, TokenKind};
use super::ParseError;

pub fn parse_spec(text: &str) -> Result<TslSpec, ParseError> {
    let mut parser = Parser::new(text)?;
    let mut spec = TslSpec::default();
    let mut spans = SpanMap::default();
    while !parser.at(&TokenKind::Eof) {
        parser.expect(TokenKind::Always, "`always`")?;
        let block = match parser.peek().kind {
            TokenKind::Assume => Block::Assume,
            TokenKind::Guarantee => Block::Guarantee,
            _ => return Err(parser.unexpected("`assume` or `guarantee`")),
        };
        parser.bump();
        parser.expect(TokenKind::LBrace, "`{`")?;
        while !parser.at(&TokenKind::RBrace) {
            let (formula, _) = parser.formula()?;
            parser.expect(TokenKind::Semi, "`;`")?;
            let node_spans = std::mem::take(&mut parser.spans);
            debug_assert_eq!(node_spans.len(), formula.node_count());
            match block {
                Block::Assume => {
                    spec.assumes.push(formula);
                    spans.assumes.push(node_spans);
                }
                Block::Guarantee => {
                    spec.guarantees.push(formula);
                    spans.guarantees.push(node_spans);
                }
            }
        }
        parser.bump();
    }
    spec.spans = Some(spans);
    Ok(spec)
}

/// Parses a single formula (no block wrapper, no trailing `;`).
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut parser = Parser::new(text)?;
    let (formula, _) = parser.formula()?;
    parser.expect(TokenKind::Eof, "end of input")?;
    Ok(formula)
}

/// Parses a function term in juxtaposition syntax, e.g. `moveLeft ball`.
pub fn parse_term(text: &str) -> Result<FunctionTerm, ParseError> {
    let mut parser = Parser::new(text)?;
    let (term, _) = parser.term()?;
    parser.expect(TokenKind::Eof, "end of input")?;
    Ok(term)
}

/// Parses a predicate term, e.g. `leftmost ball`.
pub fn parse_predicate_term(text: &str) -> Result<PredicateTerm, ParseError> {
    let mut parser = Parser::new(text)?;
    let (name, span) = parser.ident()?;
    let (args, _) = parser.args(span)?;
    parser.expect(TokenKind::Eof, "end of input")?;
    Ok(PredicateTerm::new(name, args))
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    spans: Vec<Span>,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser { tokens: tokenize(text)?, pos: 0, spans: Vec::new() })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn at(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let tok = self.peek();
        ParseError {
            line: tok.span.line,
            column: tok.span.column,
            expected: expected.to_string(),
            found: tok.kind.describe(),
        }
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> Result<Span, ParseError> {
        if self.at(&kind) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn ident(&mut self) -> Result<(Ident, Span), ParseError> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let ident = Ident::new(name.clone()).expect("lexer only yields valid identifiers");
                Ok((ident, self.bump().span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn record(&mut self, span: Span) -> Span {
        self.spans.push(span);
        span
    }

    fn formula(&mut self) -> Result<(Formula, Span), ParseError> {
        self.implication()
    }

    fn implication(&mut self) -> Result<(Formula, Span), ParseError> {
        let (lhs, lspan) = self.disjunction()?;
        if self.at(&TokenKind::Implies) {
            self.bump();
            let (rhs, rspan) = self.implication()?;
            let span = self.record(lspan.join(rspan));
            return Ok((Formula::implies(lhs, rhs), span));
        }
        Ok((lhs, lspan))
    }

    fn disjunction(&mut self) -> Result<(Formula, Span), ParseError> {
        let (mut lhs, mut lspan) = self.conjunction()?;
        while self.at(&TokenKind::OrOr) {
            self.bump();
            let (rhs, rspan) = self.conjunction()?;
            lspan = self.record(lspan.join(rspan));
            lhs = Formula::or(lhs, rhs);
        }
        Ok((lhs, lspan))
    }

    fn conjunction(&mut self) -> Result<(Formula, Span), ParseError> {
        let (mut lhs, mut lspan) = self.until()?;
        while self.at(&TokenKind::AndAnd) {
            self.bump();
            let (rhs, rspan) = self.until()?;
            lspan = self.record(lspan.join(rspan));
            lhs = Formula::and(lhs, rhs);
        }
        Ok((lhs, lspan))
    }

    fn until(&mut self) -> Result<(Formula, Span), ParseError> {
        let (lhs, lspan) = self.unary()?;
        let weak = match self.peek().kind {
            TokenKind::Until => false,
            TokenKind::WeakUntil => true,
            _ => return Ok((lhs, lspan)),
        };
        self.bump();
        let (rhs, rspan) = self.until()?;
        let span = self.record(lspan.join(rspan));
        let f = if weak { Formula::weak_until(lhs, rhs) } else { Formula::until(lhs, rhs) };
        Ok((f, span))
    }

    fn unary(&mut self) -> Result<(Formula, Span), ParseError> {
        let build: fn(Formula) -> Formula = match self.peek().kind {
            TokenKind::Not => Formula::not,
            TokenKind::Next => Formula::next,
            TokenKind::Finally => Formula::finally,
            TokenKind::Globally => Formula::globally,
            _ => return self.primary(),
        };
        let op = self.bump().span;
        let (arg, aspan) = self.unary()?;
        let span = self.record(op.join(aspan));
        Ok((build(arg), span))
    }

    fn primary(&mut self) -> Result<(Formula, Span), ParseError> {
        match self.peek().kind {
            TokenKind::LParen => {
                let open = self.bump().span;
                let (f, _) = self.formula()?;
                let close = self.expect(TokenKind::RParen, "`)`")?;
                Ok((f, open.join(close)))
            }
            TokenKind::LBracket => {
                let open = self.bump().span;
                let (target, _) = self.ident()?;
                self.expect(TokenKind::Arrow, "`<-`")?;
                let (value, _) = self.term()?;
                let close = self.expect(TokenKind::RBracket, "`]`")?;
                let span = self.record(open.join(close));
                Ok((Formula::update(target, value), span))
            }
            TokenKind::Ident(_) => {
                let (name, nspan) = self.ident()?;
                let (args, end) = self.args(nspan)?;
                let span = self.record(nspan.join(end));
                Ok((Formula::pred(PredicateTerm::new(name, args)), span))
            }
            _ => Err(self.unexpected("a formula")),
        }
    }

    /// `ident arg*`
    fn term(&mut self) -> Result<(FunctionTerm, Span), ParseError> {
        let (head, hspan) = self.ident()?;
        let (args, end) = self.args(hspan)?;
        let span = self.record(hspan.join(end));
        Ok((FunctionTerm::apply(head, args), span))
    }

    /// Zero or more argument terms: bare identifiers or parenthesised terms.
    fn args(&mut self, head: Span) -> Result<(Vec<FunctionTerm>, Span), ParseError> {
        let mut args = Vec::new();
        let mut end = head;
        loop {
            match self.peek().kind {
                TokenKind::Ident(_) => {
                    let (name, span) = self.ident()?;
                    end = self.record(span);
                    args.push(FunctionTerm::signal(name));
                }
                TokenKind::LParen => {
                    self.bump();
                    let (term, _) = self.term()?;
                    end = self.expect(TokenKind::RParen, "`)`")?;
                    args.push(term);
                }
                _ => return Ok((args, end)),
            }
        }
    }
}

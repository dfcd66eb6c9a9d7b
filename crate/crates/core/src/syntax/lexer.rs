use super::ast::Span;
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Always,
    Assume,
    Guarantee,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Arrow,   // <-
    Not,     // !
    AndAnd,  // &&
    OrOr,    // ||
    Implies, // ->
    Next,
    Finally,
    Globally,
    Until,
    WeakUntil,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Eof => "end of input".to_string(),
            other => format!("`{}`", other.lexeme()),
        }
    }

    pub fn lexeme(&self) -> &str {
        match self {
            TokenKind::Ident(name) => name,
            TokenKind::Always => "always",
            TokenKind::Assume => "assume",
            TokenKind::Guarantee => "guarantee",
            TokenKind::LBrace => "{",
            TokenKind::RBrace => "}",
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBracket => "[",
            TokenKind::RBracket => "]",
            TokenKind::Semi => ";",
            TokenKind::Arrow => "<-",
            TokenKind::Not => "!",
            TokenKind::AndAnd => "&&",
            TokenKind::OrOr => "||",
            TokenKind::Implies => "->",
            TokenKind::Next => "X",
            TokenKind::Finally => "F",
            TokenKind::Globally => "G",
            TokenKind::Until => "U",
            TokenKind::WeakUntil => "W",
            TokenKind::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

/// Words that can never be used as identifiers.
pub const RESERVED: &[&str] = &["always", "assume", "guarantee", "X", "F", "G", "U", "W"];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    Lexer { src, bytes: src.as_bytes(), pos: 0, line: 1, col: 1 }.run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl Lexer<'_> {
    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let (start, line, column) = (self.pos, self.line, self.col);
            let Some(&b) = self.bytes.get(self.pos) else {
                out.push(Token { kind: TokenKind::Eof, span: Span { start, end: start, line, column } });
                return Ok(out);
            };
            let kind = match b {
                b'{' => self.single(TokenKind::LBrace),
                b'}' => self.single(TokenKind::RBrace),
                b'(' => self.single(TokenKind::LParen),
                b')' => self.single(TokenKind::RParen),
                b'[' => self.single(TokenKind::LBracket),
                b']' => self.single(TokenKind::RBracket),
                b';' => self.single(TokenKind::Semi),
                b'!' => self.single(TokenKind::Not),
                b'<' if self.peek(1) == Some(b'-') => self.double(TokenKind::Arrow),
                b'-' if self.peek(1) == Some(b'>') => self.double(TokenKind::Implies),
                b'&' if self.peek(1) == Some(b'&') => self.double(TokenKind::AndAnd),
                b'|' if self.peek(1) == Some(b'|') => self.double(TokenKind::OrOr),
                b if b.is_ascii_alphabetic() || b == b'_' => {
                    while self.bytes.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_') {
                        self.advance();
                    }
                    keyword_or_ident(&self.src[start..self.pos])
                }
                _ => {
                    let found = self.src[start..].chars().next().unwrap_or('?');
                    return Err(ParseError {
                        line,
                        column,
                        expected: "a token".to_string(),
                        found: format!("character `{found}`"),
                    });
                }
            };
            out.push(Token { kind, span: Span { start, end: self.pos, line, column } });
        }
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn advance(&mut self) {
        if self.bytes[self.pos] == b'\n' {
            self.line += 1;
            self.col = 1;
            self.pos += 1;
        } else {
            // step a whole UTF-8 character so columns count characters
            let ch = self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
            self.pos += ch;
            self.col += 1;
        }
    }

    fn single(&mut self, kind: TokenKind) -> TokenKind {
        self.advance();
        kind
    }

    fn double(&mut self, kind: TokenKind) -> TokenKind {
        self.advance();
        self.advance();
        kind
    }

    fn skip_trivia(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.advance();
            } else if b == b'/' && self.peek(1) == Some(b'/') {
                while self.bytes.get(self.pos).is_some_and(|c| *c != b'\n') {
                    self.advance();
                }
            } else {
                break;
            }
        }
    }
}

fn keyword_or_ident(word: &str) -> TokenKind {
    match word {
        "always" => TokenKind::Always,
        "assume" => TokenKind::Assume,
        "guarantee" => TokenKind::Guarantee,
        "X" => TokenKind::Next,
        "F" => TokenKind::Finally,
        "G" => TokenKind::Globally,
        "U" => TokenKind::Until,
        "W" => TokenKind::WeakUntil,
        _ => TokenKind::Ident(word.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_update_and_operators() {
        assert_eq!(
            kinds("[ball <- moveLeft ball] -> X !p"),
            vec![
                TokenKind::LBracket,
                TokenKind::Ident("ball".into()),
                TokenKind::Arrow,
                TokenKind::Ident("moveLeft".into()),
                TokenKind::Ident("ball".into()),
                TokenKind::RBracket,
                TokenKind::Implies,
                TokenKind::Next,
                TokenKind::Not,
                TokenKind::Ident("p".into()),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn comments_are_skipped_and_lines_tracked() {
        let toks = tokenize("// header\n  p // trailing\nq").unwrap();
        assert_eq!(toks[0].span.line, 2);
        assert_eq!(toks[0].span.column, 3);
        assert_eq!(toks[1].span.line, 3);
    }

    #[test]
    fn keywords_need_whole_words() {
        assert_eq!(kinds("Xa")[0], TokenKind::Ident("Xa".into()));
        assert_eq!(kinds("always_on")[0], TokenKind::Ident("always_on".into()));
    }

    #[test]
    fn stray_character_is_an_error() {
        let err = tokenize("p\n  $").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
        let err = tokenize("p & q").unwrap_err();
        assert_eq!(err.found, "character `&`");
    }
}

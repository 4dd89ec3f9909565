//! Hand-written maximal-munch lexer.

use thiserror::Error;

use super::token::{ArithOp, CmpOp, Keyword, Span, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unexpected character {ch:?}")]
pub struct LexError {
    pub ch: char,
    pub span: Span,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(source).collect()
}

/// Lexeme sequence of `source`, the unit BLEU is computed over.
pub fn program_tokens(source: &str) -> Result<Vec<String>, LexError> {
    Ok(tokenize(source)?.into_iter().map(|t| t.lexeme).collect())
}

struct Lexer<'s> {
    src: &'s str,
    pos: usize,
}

impl<'s> Lexer<'s> {
    fn new(src: &'s str) -> Self {
        Self { src, pos: 0 }
    }

    fn peek_byte(&self, offset: usize) -> Option<u8> {
        self.src.as_bytes().get(self.pos + offset).copied()
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) {
        while self.peek_byte(0).is_some_and(&pred) {
            self.pos += 1;
        }
    }

    fn emit(&mut self, kind: TokenKind, start: usize) -> Token {
        Token {
            kind,
            lexeme: self.src[start..self.pos].to_owned(),
            span: Span::new(start, self.pos),
        }
    }

    fn next_token(&mut self) -> Option<Result<Token, LexError>> {
        self.take_while(|b| b.is_ascii_whitespace());
        let start = self.pos;
        let b = self.peek_byte(0)?;

        if b.is_ascii_alphabetic() {
            self.take_while(|b| b.is_ascii_alphanumeric() || b == b'_');
            let kind = match Keyword::from_ident(&self.src[start..self.pos]) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident,
            };
            return Some(Ok(self.emit(kind, start)));
        }

        if b.is_ascii_digit() {
            self.take_while(|b| b.is_ascii_digit());
            // `r := [0-9]+.[0-9]+`: only a dot followed by a digit continues the literal.
            if self.peek_byte(0) == Some(b'.') && self.peek_byte(1).is_some_and(|b| b.is_ascii_digit()) {
                self.pos += 1;
                self.take_while(|b| b.is_ascii_digit());
                return Some(Ok(self.emit(TokenKind::Real, start)));
            }
            return Some(Ok(self.emit(TokenKind::Int, start)));
        }

        let next = self.peek_byte(1);
        let (kind, len) = match (b, next) {
            (b'>', Some(b'=')) => (TokenKind::Cmp(CmpOp::Ge), 2),
            (b'<', Some(b'=')) => (TokenKind::Cmp(CmpOp::Le), 2),
            (b'=', Some(b'=')) => (TokenKind::Cmp(CmpOp::Eq), 2),
            (b'!', Some(b'=')) => (TokenKind::Cmp(CmpOp::Ne), 2),
            (b'/', Some(b'/')) => (TokenKind::Arith(ArithOp::FloorDiv), 2),
            (b'>', _) => (TokenKind::Cmp(CmpOp::Gt), 1),
            (b'<', _) => (TokenKind::Cmp(CmpOp::Lt), 1),
            (b'=', _) => (TokenKind::Assign, 1),
            (b'/', _) => (TokenKind::Arith(ArithOp::Div), 1),
            (b'+', _) => (TokenKind::Arith(ArithOp::Add), 1),
            (b'-', _) => (TokenKind::Arith(ArithOp::Sub), 1),
            (b'*', _) => (TokenKind::Arith(ArithOp::Mul), 1),
            (b'(', _) => (TokenKind::LParen, 1),
            (b')', _) => (TokenKind::RParen, 1),
            (b'{', _) => (TokenKind::LBrace, 1),
            (b'}', _) => (TokenKind::RBrace, 1),
            (b';', _) => (TokenKind::Semi, 1),
            _ => {
                let ch = self.src[start..].chars().next().expect("non-empty remainder");
                // Skip the offending character so iteration can make progress.
                self.pos += ch.len_utf8();
                return Some(Err(LexError {
                    ch,
                    span: Span::new(start, self.pos),
                }));
            }
        };
        self.pos += len;
        Some(Ok(self.emit(kind, start)))
    }
}

impl Iterator for Lexer<'_> {
    type Item = Result<Token, LexError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_token()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn return_statement() {
        assert_eq!(
            kinds("return 5;"),
            vec![TokenKind::Keyword(Keyword::Return), TokenKind::Int, TokenKind::Semi]
        );
    }

    #[test]
    fn real_assignment() {
        let toks = tokenize("x = 3.5;").unwrap();
        let lexemes: Vec<_> = toks.iter().map(|t| t.lexeme.as_str()).collect();
        assert_eq!(lexemes, ["x", "=", "3.5", ";"]);
        assert_eq!(
            toks.iter().map(|t| t.kind).collect::<Vec<_>>(),
            vec![TokenKind::Ident, TokenKind::Assign, TokenKind::Real, TokenKind::Semi]
        );
    }

    #[test]
    fn unknown_character_reports_offset() {
        let err = tokenize("x @ 3").unwrap_err();
        assert_eq!(err.ch, '@');
        assert_eq!(err.span, Span::new(2, 3));
    }

    #[test]
    fn maximal_munch() {
        assert_eq!(
            kinds("a>=b//c<=d==e!=f"),
            vec![
                TokenKind::Ident,
                TokenKind::Cmp(CmpOp::Ge),
                TokenKind::Ident,
                TokenKind::Arith(ArithOp::FloorDiv),
                TokenKind::Ident,
                TokenKind::Cmp(CmpOp::Le),
                TokenKind::Ident,
                TokenKind::Cmp(CmpOp::Eq),
                TokenKind::Ident,
                TokenKind::Cmp(CmpOp::Ne),
                TokenKind::Ident,
            ]
        );
    }

    #[test]
    fn lone_bang_and_hash_are_errors() {
        assert!(tokenize("x ! y").is_err());
        assert!(tokenize("# comment").is_err());
    }

    #[test]
    fn trailing_dot_is_not_part_of_real() {
        let err = tokenize("x = 3.;").unwrap_err();
        assert_eq!(err.ch, '.');
        assert_eq!(err.span.start, 5);
    }

    #[test]
    fn non_ascii_is_rejected_with_char_span() {
        let err = tokenize("x = é;").unwrap_err();
        assert_eq!(err.span, Span::new(4, 6));
    }

    #[test]
    fn program_tokens_of_minimal_program() {
        assert_eq!(
            program_tokens("func simulation() { return 5; }").unwrap(),
            ["func", "simulation", "(", ")", "{", "return", "5", ";", "}"]
        );
    }

    #[test]
    fn program_tokens_ignore_whitespace() {
        assert_eq!(program_tokens("x=1;").unwrap(), program_tokens("x = 1;").unwrap());
    }

    #[test]
    fn spans_are_ordered_and_cover_non_whitespace() {
        let src = "func simulation() {\n  x = 10 // 3;\n  return x;\n}";
        let toks = tokenize(src).unwrap();
        for w in toks.windows(2) {
            assert!(w[0].span.end <= w[1].span.start);
        }
        let joined: String = toks.iter().map(|t| t.lexeme.as_str()).collect();
        let expected: String = src.chars().filter(|c| !c.is_whitespace()).collect();
        assert_eq!(joined, expected);
    }
}

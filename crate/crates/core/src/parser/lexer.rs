//! Tokenizer. Comments and non-newline whitespace vanish; newlines survive as
//! statement separators.

use std::fmt;

use crate::diagnostic::{Code, Diagnostic, Pos};

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Float(f64),
    LBrace,
    RBrace,
    LAngle,
    RAngle,
    LBracket,
    RBracket,
    Colon,
    Semi,
    Pipe,
    Newline,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "`{s}`"),
            TokenKind::Int(i) => write!(f, "`{i}`"),
            TokenKind::Float(x) => write!(f, "`{x:?}`"),
            TokenKind::LBrace => f.write_str("`{`"),
            TokenKind::RBrace => f.write_str("`}`"),
            TokenKind::LAngle => f.write_str("`<`"),
            TokenKind::RAngle => f.write_str("`>`"),
            TokenKind::LBracket => f.write_str("`[`"),
            TokenKind::RBracket => f.write_str("`]`"),
            TokenKind::Colon => f.write_str("`:`"),
            TokenKind::Semi => f.write_str("`;`"),
            TokenKind::Pipe => f.write_str("`|`"),
            TokenKind::Newline => f.write_str("end of line"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            column: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.column)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek_second(&self) -> Option<char> {
        let mut ahead = self.chars.clone();
        ahead.next();
        ahead.next().map(|(_, c)| c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map_or(self.src.len(), |&(i, _)| i)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, pred: impl Fn(char) -> bool) {
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
    }
}

/// Splits source text into tokens. All lexical errors are collected; the
/// offending characters are skipped so lexing always reaches the end.
pub fn lex(source: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let mut cur = Cursor::new(source);
    let mut tokens = Vec::new();
    let mut errors = Vec::new();

    while let Some(c) = cur.peek() {
        let pos = cur.pos();
        let simple = match c {
            '{' => Some(TokenKind::LBrace),
            '}' => Some(TokenKind::RBrace),
            '<' => Some(TokenKind::LAngle),
            '>' => Some(TokenKind::RAngle),
            '[' => Some(TokenKind::LBracket),
            ']' => Some(TokenKind::RBracket),
            ':' => Some(TokenKind::Colon),
            ';' => Some(TokenKind::Semi),
            '|' => Some(TokenKind::Pipe),
            '\n' => Some(TokenKind::Newline),
            _ => None,
        };
        if let Some(kind) = simple {
            cur.bump();
            tokens.push(Token { kind, pos });
            continue;
        }

        match c {
            ' ' | '\t' | '\r' | '\x0c' | '\x0b' => {
                cur.bump();
            }
            '/' if cur.peek_second() == Some('/') => {
                cur.eat_while(|c| c != '\n');
            }
            '/' if cur.peek_second() == Some('*') => {
                cur.bump();
                cur.bump();
                let mut closed = false;
                while let Some(c) = cur.bump() {
                    if c == '*' && cur.peek() == Some('/') {
                        cur.bump();
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    errors.push(Diagnostic::error(
                        Code::UnterminatedComment,
                        pos,
                        "block comment is never closed",
                    ));
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = cur.offset();
                cur.eat_while(|c| c.is_ascii_alphanumeric() || c == '_');
                let end = cur.offset();
                tokens.push(Token {
                    kind: TokenKind::Ident(source[start..end].to_owned()),
                    pos,
                });
            }
            c if c.is_ascii_digit() || c == '.' || (c == '-' && starts_number(&cur)) => {
                match lex_number(&mut cur, source) {
                    Ok(kind) => tokens.push(Token { kind, pos }),
                    Err(message) => errors.push(Diagnostic::error(Code::BadNumber, pos, message)),
                }
            }
            '+' | '-' | '*' | '/' | '(' | ')' | '^' | '%' => {
                cur.bump();
                errors.push(Diagnostic::error(
                    Code::Arithmetic,
                    pos,
                    format!("`{c}`: Jaqal has no arithmetic; compute the value before emitting the program"),
                ));
            }
            other => {
                cur.bump();
                errors.push(Diagnostic::error(
                    Code::IllegalChar,
                    pos,
                    format!("illegal character {other:?}"),
                ));
            }
        }
    }

    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors)
    }
}

fn starts_number(cur: &Cursor<'_>) -> bool {
    let mut ahead = cur.chars.clone();
    ahead.next();
    match ahead.next() {
        Some((_, d)) if d.is_ascii_digit() => true,
        Some((_, '.')) => ahead.next().is_some_and(|(_, d)| d.is_ascii_digit()),
        _ => false,
    }
}

/// Consumes `-?digits[.digits][e[+-]digits]` (or `.digits...`). Trailing
/// identifier characters make the literal malformed.
fn lex_number(cur: &mut Cursor<'_>, source: &str) -> Result<TokenKind, String> {
    let start = cur.offset();
    if cur.peek() == Some('-') {
        cur.bump();
    }
    cur.eat_while(|c| c.is_ascii_digit());
    let mut is_float = false;
    if cur.peek() == Some('.') {
        is_float = true;
        cur.bump();
        cur.eat_while(|c| c.is_ascii_digit());
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        is_float = true;
        cur.bump();
        if matches!(cur.peek(), Some('+' | '-')) {
            cur.bump();
        }
        let digits_start = cur.offset();
        cur.eat_while(|c| c.is_ascii_digit());
        if cur.offset() == digits_start {
            cur.eat_while(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
            let end = cur.offset();
            return Err(format!(
                "malformed number `{}`: exponent has no digits",
                &source[start..end]
            ));
        }
    }
    if cur
        .peek()
        .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
    {
        cur.eat_while(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
        let end = cur.offset();
        return Err(format!("malformed number `{}`", &source[start..end]));
    }
    let text = &source[start..cur.offset()];
    if is_float {
        if text == "." || text == "-." {
            return Err(format!("malformed number `{text}`"));
        }
        text.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(TokenKind::Float)
            .ok_or_else(|| format!("malformed number `{text}`"))
    } else {
        text.parse::<i64>()
            .map(TokenKind::Int)
            .map_err(|_| format!("integer `{text}` does not fit in 64 bits"))
    }
}

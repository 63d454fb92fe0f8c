//! Recursive-descent parser from source text to [`Program`].
//!
//! Only rules visible in the token stream are enforced here: statement order,
//! separators, block shapes and nesting. Name resolution and typing belong to
//! the analyzer.

mod lexer;

pub use lexer::{lex, Token, TokenKind};

use crate::ast::{
    BlockKind, GateArg, GateBlock, GateStatement, Header, Identifier, IntExpr, LetConstant,
    LoopStatement, MacroDef, MapAlias, Number, Program, QubitRef, RegisterDecl, Selector,
    Statement, KEYWORDS,
};
use crate::diagnostic::{Code, Diagnostic, Pos};

/// Parses a complete source file. On failure every diagnostic found is
/// returned, in source order.
pub fn parse(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let tokens = lex(source)?;
    let mut parser = Parser::new(tokens);
    let program = parser.program();
    if parser.diagnostics.is_empty() {
        Ok(program)
    } else {
        parser
            .diagnostics
            .sort_by_key(|d| (d.pos.line, d.pos.column));
        Err(parser.diagnostics)
    }
}

/// Where a statement sits, which decides the legal separator and which
/// statements are allowed.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Context {
    TopLevel,
    Block(BlockKind),
}

impl Context {
    fn separator(self) -> TokenKind {
        match self {
            Context::Block(BlockKind::Parallel) => TokenKind::Pipe,
            _ => TokenKind::Semi,
        }
    }

    fn wrong_separator(self) -> TokenKind {
        match self {
            Context::Block(BlockKind::Parallel) => TokenKind::Semi,
            _ => TokenKind::Pipe,
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    diagnostics: Vec<Diagnostic>,
    end_pos: Pos,
}

/// Marker for a statement that failed to parse; its diagnostic is already
/// recorded.
struct Failed;

type Parsed<T> = Result<T, Failed>;

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        let end_pos = tokens
            .last()
            .map(|t| match t.kind {
                TokenKind::Newline => Pos::new(t.pos.line + 1, 1),
                _ => Pos::new(t.pos.line, t.pos.column + 1),
            })
            .unwrap_or(Pos::new(1, 1));
        Self {
            tokens,
            at: 0,
            diagnostics: Vec::new(),
            end_pos,
        }
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.at).map(|t| &t.kind)
    }

    fn pos(&self) -> Pos {
        self.tokens.get(self.at).map_or(self.end_pos, |t| t.pos)
    }

    fn at_kind(&self, kind: &TokenKind) -> bool {
        self.peek() == Some(kind)
    }

    fn peek_keyword(&self) -> Option<&'static str> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => KEYWORDS.iter().copied().find(|k| k == s),
            _ => None,
        }
    }

    fn error(&mut self, code: Code, pos: Pos, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic::error(code, pos, message));
    }

    fn unexpected(&mut self, expected: &str) -> Failed {
        let pos = self.pos();
        let found = self
            .peek()
            .map_or_else(|| "end of input".to_owned(), ToString::to_string);
        self.error(
            Code::UnexpectedToken,
            pos,
            format!("expected {expected}, found {found}"),
        );
        Failed
    }

    /// Skips to the next statement boundary without consuming closing
    /// brackets, so the enclosing block can still close.
    fn recover(&mut self) {
        let mut depth = 0usize;
        while let Some(kind) = self.peek() {
            match kind {
                TokenKind::Newline | TokenKind::Semi | TokenKind::Pipe if depth == 0 => return,
                TokenKind::RBrace | TokenKind::RAngle if depth == 0 => return,
                TokenKind::LBracket => depth += 1,
                TokenKind::RBracket => depth = depth.saturating_sub(1),
                _ => {}
            }
            self.at += 1;
        }
    }

    fn identifier(&mut self, what: &str) -> Parsed<(Identifier, Pos)> {
        let pos = self.pos();
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                if KEYWORDS.contains(&s.as_str()) {
                    self.error(
                        Code::Keyword,
                        pos,
                        format!("keyword `{s}` cannot be used as {what}"),
                    );
                    return Err(Failed);
                }
                Ok((Identifier(s), pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn int_expr(&mut self, what: &str) -> Parsed<IntExpr> {
        match self.peek() {
            Some(TokenKind::Int(i)) => {
                let i = *i;
                self.at += 1;
                Ok(IntExpr::Literal(i))
            }
            Some(TokenKind::Ident(_)) => {
                let (name, pos) = self.identifier(what)?;
                Ok(IntExpr::Name(name, pos))
            }
            Some(TokenKind::Float(_)) => {
                let pos = self.pos();
                self.at += 1;
                self.error(
                    Code::UnexpectedToken,
                    pos,
                    format!("{what} must be an integer"),
                );
                Err(Failed)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Parsed<()> {
        if self.at_kind(&kind) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn program(&mut self) -> Program {
        let mut headers = Vec::new();
        let mut body = Vec::new();
        loop {
            self.skip_separators(Context::TopLevel);
            if self.peek().is_none() {
                break;
            }
            let pos = self.pos();
            let result = match self.peek_keyword() {
                Some(kw @ ("register" | "map" | "let")) => self.header(kw).map(|h| {
                    if !body.is_empty() {
                        self.error(
                            Code::HeaderAfterBody,
                            pos,
                            format!("`{kw}` must come before the first body statement"),
                        );
                    }
                    headers.push(h);
                }),
                _ => self.statement(Context::TopLevel).map(|s| body.push(s)),
            };
            match result {
                Ok(()) => self.terminator(Context::TopLevel),
                Err(Failed) => self.recover(),
            }
        }
        Program { headers, body }
    }

    /// Consumes blank lines and separators between statements, flagging the
    /// separator that does not belong to this context.
    fn skip_separators(&mut self, ctx: Context) {
        while let Some(kind) = self.peek() {
            if *kind == TokenKind::Newline || *kind == ctx.separator() {
                self.at += 1;
            } else if *kind == ctx.wrong_separator() {
                self.bad_separator(ctx);
                self.at += 1;
            } else {
                break;
            }
        }
    }

    fn bad_separator(&mut self, ctx: Context) {
        let pos = self.pos();
        let message = match ctx {
            Context::Block(BlockKind::Parallel) => "use `|` instead of `;` inside a parallel block",
            _ => "`|` separates statements only inside a parallel block; use `;`",
        };
        self.error(Code::BadSeparator, pos, message);
    }

    /// After a statement: a separator, a newline, the enclosing close bracket
    /// or end of input.
    fn terminator(&mut self, ctx: Context) {
        match (self.peek(), ctx) {
            (None, _) => {}
            (Some(TokenKind::Newline), _) => {}
            (Some(k), _) if *k == ctx.separator() => {}
            (Some(k), _) if *k == ctx.wrong_separator() => {}
            (Some(TokenKind::RBrace), Context::Block(BlockKind::Sequential)) => {}
            (Some(TokenKind::RAngle), Context::Block(BlockKind::Parallel)) => {}
            _ => {
                self.unexpected("end of statement");
                self.recover();
            }
        }
    }

    fn header(&mut self, keyword: &str) -> Parsed<Header> {
        let pos = self.pos();
        self.at += 1;
        match keyword {
            "register" => {
                let (name, _) = self.identifier("a register name")?;
                self.expect(TokenKind::LBracket, "`[` after the register name")?;
                let size = self.int_expr("a register size")?;
                self.expect(TokenKind::RBracket, "`]`")?;
                Ok(Header::Register(RegisterDecl { name, size, pos }))
            }
            "map" => {
                let (name, _) = self.identifier("an alias name")?;
                let (target, _) = self.identifier("a register or alias to map")?;
                let selector = if self.at_kind(&TokenKind::LBracket) {
                    self.selector()?
                } else {
                    Selector::Whole
                };
                Ok(Header::Map(MapAlias {
                    name,
                    target,
                    selector,
                    pos,
                }))
            }
            _ => {
                let (name, _) = self.identifier("a constant name")?;
                let value = match self.peek() {
                    Some(TokenKind::Int(i)) => Number::Int(*i),
                    Some(TokenKind::Float(x)) => Number::Float(*x),
                    _ => return Err(self.unexpected("a number")),
                };
                self.at += 1;
                Ok(Header::Let(LetConstant { name, value, pos }))
            }
        }
    }

    /// `[i]`, `[a:b]`, `[a:b:c]`, any slice component optional.
    fn selector(&mut self) -> Parsed<Selector> {
        self.expect(TokenKind::LBracket, "`[`")?;
        let first = if self.at_kind(&TokenKind::Colon) {
            None
        } else {
            Some(self.int_expr("an index")?)
        };
        if !self.at_kind(&TokenKind::Colon) {
            self.expect(TokenKind::RBracket, "`]`")?;
            return match first {
                Some(index) => Ok(Selector::Index(index)),
                None => Err(self.unexpected("an index")),
            };
        }
        self.at += 1;
        let stop = match self.peek() {
            Some(TokenKind::Colon | TokenKind::RBracket) => None,
            _ => Some(self.int_expr("a slice bound")?),
        };
        let step = if self.at_kind(&TokenKind::Colon) {
            self.at += 1;
            match self.peek() {
                Some(TokenKind::RBracket) => None,
                _ => Some(self.int_expr("a slice step")?),
            }
        } else {
            None
        };
        self.expect(TokenKind::RBracket, "`]`")?;
        Ok(Selector::Slice {
            start: first,
            stop,
            step,
        })
    }

    fn statement(&mut self, ctx: Context) -> Parsed<Statement> {
        let pos = self.pos();
        match self.peek() {
            Some(TokenKind::LBrace) => self.nested_block(BlockKind::Sequential, ctx),
            Some(TokenKind::LAngle) => self.nested_block(BlockKind::Parallel, ctx),
            Some(TokenKind::Ident(_)) => match self.peek_keyword() {
                Some("loop") => {
                    if ctx == Context::Block(BlockKind::Parallel) {
                        self.error(
                            Code::LoopInParallel,
                            pos,
                            "loops are not allowed inside parallel blocks",
                        );
                    }
                    self.loop_statement()
                }
                Some("macro") => {
                    if ctx != Context::TopLevel {
                        self.error(
                            Code::DefinitionInBlock,
                            pos,
                            "macro definitions are not allowed inside blocks",
                        );
                    }
                    self.macro_def()
                }
                Some(kw) => {
                    self.error(
                        Code::DefinitionInBlock,
                        pos,
                        format!("`{kw}` statements are not allowed inside blocks"),
                    );
                    self.header(kw).map(|_| ())?;
                    Err(Failed)
                }
                None => self.gate().map(Statement::Gate),
            },
            _ => Err(self.unexpected("a statement")),
        }
    }

    fn nested_block(&mut self, kind: BlockKind, ctx: Context) -> Parsed<Statement> {
        if ctx == Context::Block(kind) {
            let pos = self.pos();
            let name = match kind {
                BlockKind::Sequential => "sequential",
                BlockKind::Parallel => "parallel",
            };
            self.error(
                Code::SameKindNesting,
                pos,
                format!("a {name} block cannot sit directly inside another {name} block"),
            );
        }
        self.block(kind).map(Statement::Block)
    }

    /// Parses a block starting at its opening bracket.
    fn block(&mut self, kind: BlockKind) -> Parsed<GateBlock> {
        let pos = self.pos();
        let close = match kind {
            BlockKind::Sequential => TokenKind::RBrace,
            BlockKind::Parallel => TokenKind::RAngle,
        };
        self.at += 1;
        let ctx = Context::Block(kind);
        let mut statements = Vec::new();
        loop {
            self.skip_separators(ctx);
            match self.peek() {
                None => {
                    self.error(
                        Code::UnclosedBlock,
                        pos,
                        format!("block opened here is never closed with `{}`", kind.close()),
                    );
                    return Err(Failed);
                }
                Some(k) if *k == close => {
                    self.at += 1;
                    return Ok(GateBlock {
                        kind,
                        statements,
                        pos,
                    });
                }
                Some(TokenKind::RBrace | TokenKind::RAngle) => {
                    // Mismatched closer: report and drop it.
                    self.unexpected(&format!("`{}`", kind.close()));
                    self.at += 1;
                }
                Some(_) => match self.statement(ctx) {
                    Ok(s) => {
                        statements.push(s);
                        self.terminator(ctx);
                    }
                    Err(Failed) => self.recover(),
                },
            }
        }
    }

    /// The block that must follow `macro ...` or `loop ...` on the same line.
    fn body_block(&mut self, owner: &str) -> Parsed<GateBlock> {
        match self.peek() {
            Some(TokenKind::LBrace) => self.block(BlockKind::Sequential),
            Some(TokenKind::LAngle) => self.block(BlockKind::Parallel),
            Some(TokenKind::Newline) => {
                let newline_pos = self.pos();
                let mut ahead = self.at;
                while self.tokens.get(ahead).map(|t| &t.kind) == Some(&TokenKind::Newline) {
                    ahead += 1;
                }
                match self.tokens.get(ahead).map(|t| &t.kind) {
                    Some(TokenKind::LBrace | TokenKind::LAngle) => {
                        self.error(
                            Code::NewlineBeforeBrace,
                            newline_pos,
                            format!("the opening bracket of a {owner} body must be on the same line as `{owner}`"),
                        );
                        self.at = ahead;
                        self.body_block(owner)
                    }
                    _ => {
                        self.error(
                            Code::BareBody,
                            newline_pos,
                            format!("`{owner}` needs a block body"),
                        );
                        Err(Failed)
                    }
                }
            }
            _ => {
                let pos = self.pos();
                self.error(
                    Code::BareBody,
                    pos,
                    format!("`{owner}` needs a block body, not a single statement"),
                );
                Err(Failed)
            }
        }
    }

    fn loop_statement(&mut self) -> Parsed<Statement> {
        let pos = self.pos();
        self.at += 1;
        let count = self.int_expr("a loop count")?;
        let body = self.body_block("loop")?;
        if body.kind != BlockKind::Sequential {
            self.error(
                Code::LoopBody,
                body.pos,
                "a loop body must be a sequential `{ }` block",
            );
        }
        Ok(Statement::Loop(LoopStatement { count, body, pos }))
    }

    fn macro_def(&mut self) -> Parsed<Statement> {
        let pos = self.pos();
        self.at += 1;
        let (name, _) = self.identifier("a macro name")?;
        let mut params = Vec::new();
        while let Some(TokenKind::Ident(_)) = self.peek() {
            let (param, _) = self.identifier("a macro parameter")?;
            params.push(param);
        }
        let body = self.body_block("macro")?;
        Ok(Statement::Macro(MacroDef {
            name,
            params,
            body,
            pos,
        }))
    }

    fn gate(&mut self) -> Parsed<GateStatement> {
        let (name, pos) = self.identifier("a gate name")?;
        let mut args = Vec::new();
        loop {
            let arg_pos = self.pos();
            match self.peek() {
                Some(TokenKind::Int(i)) => {
                    args.push(GateArg::Int(*i));
                    self.at += 1;
                }
                Some(TokenKind::Float(x)) => {
                    args.push(GateArg::Float(*x));
                    self.at += 1;
                }
                Some(TokenKind::Ident(_)) => {
                    let (base, _) = self.identifier("a gate argument")?;
                    if self.at_kind(&TokenKind::LBracket) {
                        self.at += 1;
                        let index = self.int_expr("a qubit index")?;
                        self.expect(TokenKind::RBracket, "`]`")?;
                        args.push(GateArg::Qubit(QubitRef {
                            base,
                            index: Some(index),
                            pos: arg_pos,
                        }));
                    } else {
                        args.push(GateArg::Name(base, arg_pos));
                    }
                }
                None
                | Some(
                    TokenKind::Newline
                    | TokenKind::Semi
                    | TokenKind::Pipe
                    | TokenKind::RBrace
                    | TokenKind::RAngle,
                ) => break,
                Some(_) => return Err(self.unexpected("a gate argument")),
            }
        }
        Ok(GateStatement { name, args, pos })
    }
}

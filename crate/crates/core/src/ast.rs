//! Syntax tree for Jaqal programs.
//!
//! The tree mirrors the surface language closely. Names are not resolved here;
//! the [`analyzer`](crate::analyzer) binds them against a gate set and the
//! program's own declarations.

use std::fmt::{self, Write as _};

use crate::diagnostic::Pos;

/// Words that introduce statements and therefore cannot be identifiers.
pub const KEYWORDS: &[&str] = &["register", "map", "let", "macro", "loop"];

/// Returns true for `[A-Za-z_][A-Za-z0-9_]*` that is not a keyword.
pub fn is_valid_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&text)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Identifier(pub String);

impl Identifier {
    pub fn new(text: impl Into<String>) -> Self {
        Self(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Identifier {
    fn from(text: &str) -> Self {
        Self::new(text)
    }
}

/// A numeric literal as written: the tag survives so integer-only contexts can
/// reject floats.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    pub fn as_f64(self) -> f64 {
        match self {
            Number::Int(i) => i as f64,
            Number::Float(x) => x,
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Int(i) => write!(f, "{i}"),
            Number::Float(x) => write_float(f, *x),
        }
    }
}

/// Shortest text that reads back as the same `f64` and still lexes as a
/// float (always has a `.` or an exponent).
pub(crate) fn write_float(out: &mut impl fmt::Write, value: f64) -> fmt::Result {
    write!(out, "{value:?}")
}

/// An integer-valued position: a literal or the name of an integer `let`.
#[derive(Clone, Debug, PartialEq)]
pub enum IntExpr {
    Literal(i64),
    Name(Identifier, Pos),
}

impl fmt::Display for IntExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntExpr::Literal(i) => write!(f, "{i}"),
            IntExpr::Name(name, _) => write!(f, "{name}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub headers: Vec<Header>,
    pub body: Vec<Statement>,
}

impl Program {
    pub fn is_empty(&self) -> bool {
        self.headers.is_empty() && self.body.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Header {
    Register(RegisterDecl),
    Map(MapAlias),
    Let(LetConstant),
}

impl Header {
    pub fn name(&self) -> &Identifier {
        match self {
            Header::Register(r) => &r.name,
            Header::Map(m) => &m.name,
            Header::Let(l) => &l.name,
        }
    }

    pub fn pos(&self) -> Pos {
        match self {
            Header::Register(r) => r.pos,
            Header::Map(m) => m.pos,
            Header::Let(l) => l.pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegisterDecl {
    pub name: Identifier,
    pub size: IntExpr,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Selector {
    Whole,
    Index(IntExpr),
    Slice {
        start: Option<IntExpr>,
        stop: Option<IntExpr>,
        step: Option<IntExpr>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapAlias {
    pub name: Identifier,
    pub target: Identifier,
    pub selector: Selector,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LetConstant {
    pub name: Identifier,
    pub value: Number,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    Gate(GateStatement),
    Block(GateBlock),
    Loop(LoopStatement),
    Macro(MacroDef),
}

impl Statement {
    pub fn pos(&self) -> Pos {
        match self {
            Statement::Gate(g) => g.pos,
            Statement::Block(b) => b.pos,
            Statement::Loop(l) => l.pos,
            Statement::Macro(m) => m.pos,
        }
    }
}

/// Reference to one element of an array (`q[3]`) or to a single-qubit name
/// (`ancilla`, a macro parameter).
#[derive(Clone, Debug, PartialEq)]
pub struct QubitRef {
    pub base: Identifier,
    pub index: Option<IntExpr>,
    pub pos: Pos,
}

/// Gate arguments as written. A bare name stays a [`GateArg::Name`] until the
/// analyzer decides whether it denotes a qubit or a number.
#[derive(Clone, Debug, PartialEq)]
pub enum GateArg {
    Qubit(QubitRef),
    Int(i64),
    Float(f64),
    Name(Identifier, Pos),
}

impl fmt::Display for GateArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateArg::Qubit(q) => {
                write!(f, "{}", q.base)?;
                if let Some(index) = &q.index {
                    write!(f, "[{index}]")?;
                }
                Ok(())
            }
            GateArg::Int(i) => write!(f, "{i}"),
            GateArg::Float(x) => write_float(f, *x),
            GateArg::Name(name, _) => write!(f, "{name}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateStatement {
    pub name: Identifier,
    pub args: Vec<GateArg>,
    pub pos: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Sequential,
    Parallel,
}

impl BlockKind {
    pub fn open(self) -> char {
        match self {
            BlockKind::Sequential => '{',
            BlockKind::Parallel => '<',
        }
    }

    pub fn close(self) -> char {
        match self {
            BlockKind::Sequential => '}',
            BlockKind::Parallel => '>',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateBlock {
    pub kind: BlockKind,
    pub statements: Vec<Statement>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopStatement {
    pub count: IntExpr,
    pub body: GateBlock,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroDef {
    pub name: Identifier,
    pub params: Vec<Identifier>,
    pub body: GateBlock,
    pub pos: Pos,
}

const INDENT: &str = "    ";

/// Canonical source text: four-space indentation, one statement per line,
/// newline separators only.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for header in &program.headers {
        print_header(&mut out, header);
    }
    for statement in &program.body {
        print_statement(&mut out, statement, 0);
    }
    out
}

fn print_header(out: &mut String, header: &Header) {
    match header {
        Header::Register(r) => {
            let _ = writeln!(out, "register {}[{}]", r.name, r.size);
        }
        Header::Map(m) => {
            let _ = write!(out, "map {} {}", m.name, m.target);
            match &m.selector {
                Selector::Whole => {}
                Selector::Index(i) => {
                    let _ = write!(out, "[{i}]");
                }
                Selector::Slice { start, stop, step } => {
                    out.push('[');
                    if let Some(s) = start {
                        let _ = write!(out, "{s}");
                    }
                    out.push(':');
                    if let Some(s) = stop {
                        let _ = write!(out, "{s}");
                    }
                    if let Some(s) = step {
                        let _ = write!(out, ":{s}");
                    }
                    out.push(']');
                }
            }
            out.push('\n');
        }
        Header::Let(l) => {
            let _ = writeln!(out, "let {} {}", l.name, l.value);
        }
    }
}

fn print_statement(out: &mut String, statement: &Statement, depth: usize) {
    let indent = INDENT.repeat(depth);
    match statement {
        Statement::Gate(g) => {
            let _ = write!(out, "{indent}{}", g.name);
            for arg in &g.args {
                let _ = write!(out, " {arg}");
            }
            out.push('\n');
        }
        Statement::Block(b) => {
            out.push_str(&indent);
            print_block(out, b, depth);
        }
        Statement::Loop(l) => {
            let _ = write!(out, "{indent}loop {} ", l.count);
            print_block(out, &l.body, depth);
        }
        Statement::Macro(m) => {
            let _ = write!(out, "{indent}macro {}", m.name);
            for p in &m.params {
                let _ = write!(out, " {p}");
            }
            out.push(' ');
            print_block(out, &m.body, depth);
        }
    }
}

/// Writes a block whose opening bracket continues the current line.
fn print_block(out: &mut String, block: &GateBlock, depth: usize) {
    out.push(block.kind.open());
    out.push('\n');
    for s in &block.statements {
        print_statement(out, s, depth + 1);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push(block.kind.close());
    out.push('\n');
}

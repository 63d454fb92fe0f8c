//! Diagnostics shared by every pass of the toolchain.
//!
//! Each diagnostic carries a stable, short [`Code`] so that tests and
//! downstream tooling can match on the kind of problem without parsing the
//! human-readable message.

use std::fmt;

/// A line/column position in the source text, both 1-based.
///
/// Positions never participate in equality: two syntax trees that differ only
/// in where their nodes came from compare equal. For the same reason `Pos`
/// is neither ordered nor hashed; compare `(line, column)` when order matters.
#[derive(Clone, Copy, Debug, Default, Eq)]
pub struct Pos {
    pub line: u32,
    pub column: u32,
}

impl Pos {
    pub const fn new(line: u32, column: u32) -> Self {
        Self { line, column }
    }
}

impl PartialEq for Pos {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

macro_rules! codes {
    ($( $(#[$doc:meta])* $variant:ident => $text:literal, )*) => {
        /// The documented enumeration of diagnostic codes.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Code {
            $( $(#[$doc])* $variant, )*
        }

        impl Code {
            pub const ALL: &'static [Code] = &[$(Code::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $( Code::$variant => $text, )*
                }
            }

            pub fn from_str_opt(text: &str) -> Option<Code> {
                match text {
                    $( $text => Some(Code::$variant), )*
                    _ => None,
                }
            }
        }
    };
}

codes! {
    // lexical
    /// `/*` without a matching `*/`.
    UnterminatedComment => "unterminated-comment",
    /// A character that cannot start any token.
    IllegalChar => "illegal-char",
    /// An arithmetic operator; the language has no expressions.
    Arithmetic => "arithmetic",
    /// A numeric literal that does not lex or does not fit.
    BadNumber => "bad-number",

    // syntactic
    /// A token that does not fit the grammar at this point.
    UnexpectedToken => "unexpected-token",
    /// A keyword used where an identifier is required.
    Keyword => "keyword",
    /// `;` inside a parallel block or `|` outside one.
    BadSeparator => "bad-separator",
    /// Line break between `macro`/`loop` and the opening bracket of its block.
    NewlineBeforeBrace => "newline-before-brace",
    /// `macro` or `loop` followed by something other than a block.
    BareBody => "bare-body",
    /// A block directly inside a block of the same kind.
    SameKindNesting => "same-kind-nesting",
    /// A loop inside a parallel block.
    LoopInParallel => "loop-in-parallel",
    /// A loop whose body is not a sequential block.
    LoopBody => "loop-body",
    /// A header statement after the first body statement.
    HeaderAfterBody => "header-after-body",
    /// A header statement or macro definition inside a block.
    DefinitionInBlock => "definition-in-block",
    /// End of input inside a block.
    UnclosedBlock => "unclosed-block",

    // semantic
    /// Zero or several `register` statements.
    RegisterCount => "register-count",
    /// Register size not a positive integer.
    RegisterSize => "register-size",
    /// A name that is never declared.
    UndefinedName => "undefined-name",
    /// A name declared after its first use.
    ForwardReference => "forward-reference",
    /// A macro that invokes itself.
    RecursiveMacro => "recursive-macro",
    /// A name declared twice.
    DuplicateName => "duplicate-name",
    /// A macro parameter that hides a global name.
    ShadowedName => "shadowed-name",
    /// A float-valued let used where an integer is required.
    LetType => "let-type",
    /// A gate name that is neither native nor a macro.
    UnknownGate => "unknown-gate",
    /// Wrong number of gate arguments.
    Arity => "arity",
    /// An argument of the wrong kind (qubit vs number).
    ArgKind => "arg-kind",
    /// A qubit index outside its array.
    IndexOutOfBounds => "index-out-of-bounds",
    /// An array used without an index.
    MissingIndex => "missing-index",
    /// An index applied to a single qubit.
    NotAnArray => "not-an-array",
    /// A slice with step zero.
    BadSlice => "bad-slice",
    /// A map target that is not a register or alias.
    BadMapTarget => "bad-map-target",
    /// A loop with a negative iteration count.
    NegativeCount => "negative-count",
    /// The same qubit twice in one gate.
    DuplicateQubit => "duplicate-qubit",
    /// Two simultaneous operations on the same qubit.
    ParallelConflict => "parallel-conflict",
    /// An operation that must run alone placed beside other operations.
    ExclusiveInParallel => "exclusive-in-parallel",
    /// `prepare_all` or `measure_all` inside a parallel block.
    GlobalInParallel => "global-in-parallel",
    /// An alias of zero qubits (warning).
    EmptyAlias => "empty-alias",
    /// A program with no statements at all (warning).
    EmptyProgram => "empty-program",

    // scheduling and execution
    /// Overlapping time intervals on one qubit.
    TimingConflict => "timing-conflict",
    /// A gate applied after `measure_all` without `prepare_all`.
    DestroyedState => "destroyed-state",
    /// More qubits than the simulator supports.
    TooManyQubits => "too-many-qubits",
    /// A broken internal invariant.
    Internal => "internal-error",
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub pos: Pos,
    pub code: Code,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: Code, pos: Pos, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            pos,
            code,
            message: message.into(),
        }
    }

    pub fn warning(code: Code, pos: Pos, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            pos,
            code,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// Renders as `file:line:col: code: message`.
    pub fn render(&self, file: &str) -> String {
        let prefix = match self.severity {
            Severity::Error => "",
            Severity::Warning => "warning: ",
        };
        format!(
            "{file}:{}:{}: {}: {prefix}{}",
            self.pos.line, self.pos.column, self.code, self.message
        )
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}: {}: {}",
            self.pos, self.severity, self.code, self.message
        )
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}

//! Semantic checks: name binding, typing, declaration order and the hardware
//! rules for parallel execution.
//!
//! Analysis is total. It walks the whole program and reports every problem it
//! finds, in a deterministic order.

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;

use crate::ast::{
    BlockKind, GateArg, GateBlock, GateStatement, Header, Identifier, IntExpr, LoopStatement,
    MacroDef, MapAlias, Number, Program, QubitRef, Selector, Statement,
};
use crate::diagnostic::{has_errors, Code, Diagnostic, Pos};
use crate::gateset::{GateAction, GateDefinition, GateSet, ParamKind};

/// What the target hardware can run side by side. Only the part of the
/// hardware model that the language cannot express syntactically lives here.
pub trait Capability {
    /// True if the gate may not share a parallel block with any other
    /// operation.
    fn runs_alone(&self, gate: &GateDefinition) -> bool;
}

/// QSCOUT 1.0: the Mølmer–Sørensen gate runs in parallel with no other gates.
#[derive(Clone, Copy, Debug, Default)]
pub struct Qscout1;

impl Capability for Qscout1 {
    fn runs_alone(&self, gate: &GateDefinition) -> bool {
        matches!(
            gate.action,
            GateAction::MolmerSorensen | GateAction::FixedMolmerSorensen { .. }
        )
    }
}

/// Qubits named by an alias.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AliasTarget {
    Single(usize),
    Array(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegisterInfo {
    pub name: Identifier,
    pub size: usize,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AliasInfo {
    pub target: AliasTarget,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LetInfo {
    pub value: Number,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroInfo {
    pub params: Vec<Identifier>,
    /// Kind of each parameter as inferred from its uses; `None` if unused or
    /// only forwarded to parameters of unknown kind.
    pub param_kinds: Vec<Option<ParamKind>>,
    pub order: usize,
    /// Index of the defining statement in the program body.
    pub body_index: usize,
    footprint: Footprint,
}

/// Every declared name, by namespace. `order` fields give declaration order
/// across the whole file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymbolTable {
    pub register: Option<RegisterInfo>,
    pub aliases: IndexMap<String, AliasInfo>,
    pub lets: IndexMap<String, LetInfo>,
    pub macros: IndexMap<String, MacroInfo>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResolveError {
    Undefined(String),
    NotAQubit(String),
    MissingIndex(String),
    NotAnArray(String),
    OutOfBounds {
        name: String,
        index: i64,
        len: usize,
    },
    NotAnInteger(String),
    FloatLet(String),
}

impl ResolveError {
    pub fn code(&self) -> Code {
        match self {
            ResolveError::Undefined(_) => Code::UndefinedName,
            ResolveError::NotAQubit(_) | ResolveError::NotAnInteger(_) => Code::ArgKind,
            ResolveError::MissingIndex(_) => Code::MissingIndex,
            ResolveError::NotAnArray(_) => Code::NotAnArray,
            ResolveError::OutOfBounds { .. } => Code::IndexOutOfBounds,
            ResolveError::FloatLet(_) => Code::LetType,
        }
    }
}

impl fmt::Display for ResolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolveError::Undefined(n) => write!(f, "`{n}` is not defined"),
            ResolveError::NotAQubit(n) => write!(f, "`{n}` does not name a qubit"),
            ResolveError::MissingIndex(n) => write!(f, "`{n}` is an array and needs an index"),
            ResolveError::NotAnArray(n) => {
                write!(f, "`{n}` is a single qubit and cannot be indexed")
            }
            ResolveError::OutOfBounds { name, index, len } => {
                write!(
                    f,
                    "index {index} is out of bounds for `{name}` of length {len}"
                )
            }
            ResolveError::NotAnInteger(n) => write!(f, "`{n}` is not an integer constant"),
            ResolveError::FloatLet(n) => {
                write!(
                    f,
                    "`{n}` is a floating-point constant where an integer is required"
                )
            }
        }
    }
}

/// A name seen from the global scope.
enum Binding<'t> {
    Register(&'t RegisterInfo),
    Alias(&'t AliasInfo),
    Let(&'t LetInfo),
    Macro,
}

impl SymbolTable {
    fn lookup(&self, name: &str) -> Option<Binding<'_>> {
        if let Some(r) = self.register.as_ref().filter(|r| r.name.as_str() == name) {
            return Some(Binding::Register(r));
        }
        if let Some(a) = self.aliases.get(name) {
            return Some(Binding::Alias(a));
        }
        if let Some(l) = self.lets.get(name) {
            return Some(Binding::Let(l));
        }
        self.macros.get(name).map(|_| Binding::Macro)
    }

    pub fn n_qubits(&self) -> usize {
        self.register.as_ref().map_or(0, |r| r.size)
    }

    /// Value of an integer position: a literal or an integer `let`.
    pub fn int_value(&self, expr: &IntExpr) -> Result<i64, ResolveError> {
        match expr {
            IntExpr::Literal(i) => Ok(*i),
            IntExpr::Name(name, _) => match self.lookup(name.as_str()) {
                Some(Binding::Let(LetInfo {
                    value: Number::Int(i),
                    ..
                })) => Ok(*i),
                Some(Binding::Let(_)) => Err(ResolveError::FloatLet(name.0.clone())),
                Some(_) => Err(ResolveError::NotAnInteger(name.0.clone())),
                None => Err(ResolveError::Undefined(name.0.clone())),
            },
        }
    }

    /// Offsets named by a register or alias, or `None` for a single-qubit
    /// alias.
    fn array_of(&self, name: &str) -> Result<Option<Vec<usize>>, Result<usize, ResolveError>> {
        match self.lookup(name) {
            Some(Binding::Register(r)) => Ok(Some((0..r.size).collect())),
            Some(Binding::Alias(AliasInfo {
                target: AliasTarget::Array(v),
                ..
            })) => Ok(Some(v.clone())),
            Some(Binding::Alias(AliasInfo {
                target: AliasTarget::Single(o),
                ..
            })) => Err(Ok(*o)),
            Some(_) => Err(Err(ResolveError::NotAQubit(name.to_owned()))),
            None => Err(Err(ResolveError::Undefined(name.to_owned()))),
        }
    }

    /// Element `index` of the array called `name`.
    fn element(&self, name: &str, index: &IntExpr) -> Result<usize, ResolveError> {
        match self.array_of(name) {
            Ok(Some(offsets)) => {
                let i = self.int_value(index)?;
                usize::try_from(i)
                    .ok()
                    .and_then(|i| offsets.get(i).copied())
                    .ok_or(ResolveError::OutOfBounds {
                        name: name.to_owned(),
                        index: i,
                        len: offsets.len(),
                    })
            }
            Ok(None) => unreachable!("array_of never returns Ok(None)"),
            Err(Ok(_)) => Err(ResolveError::NotAnArray(name.to_owned())),
            Err(Err(e)) => Err(e),
        }
    }

    /// A bare name in qubit position: must be a single-qubit alias.
    fn single(&self, name: &str) -> Result<usize, ResolveError> {
        match self.array_of(name) {
            Ok(_) => Err(ResolveError::MissingIndex(name.to_owned())),
            Err(Ok(offset)) => Ok(offset),
            Err(Err(e)) => Err(e),
        }
    }

    /// Register offset of a qubit reference given in global scope.
    pub fn qubit_offset(&self, qubit: &QubitRef) -> Result<usize, ResolveError> {
        match &qubit.index {
            Some(index) => self.element(qubit.base.as_str(), index),
            None => self.single(qubit.base.as_str()),
        }
    }

    /// Value of a bare name in a float position.
    pub fn let_value(&self, name: &str) -> Option<Number> {
        self.lets.get(name).map(|l| l.value)
    }

    /// Register name, for messages.
    pub fn register_name(&self) -> &str {
        self.register.as_ref().map_or("q", |r| r.name.as_str())
    }
}

/// Transitively resolves a qubit reference through aliases to a register
/// offset.
pub fn resolve_qubit(qubit: &QubitRef, table: &SymbolTable) -> Result<usize, ResolveError> {
    table.qubit_offset(qubit)
}

/// Python slice semantics over a sequence of length `len`: negative bounds
/// count from the end, out-of-range bounds clamp, omitted bounds follow the
/// sign of the step. `None` for a zero step.
pub fn python_slice(
    len: usize,
    start: Option<i64>,
    stop: Option<i64>,
    step: Option<i64>,
) -> Option<Vec<usize>> {
    let step = step.unwrap_or(1);
    if step == 0 {
        return None;
    }
    let n = len as i64;
    let (mut i, end) = if step > 0 {
        let clamp = |v: i64| if v < 0 { (v + n).max(0) } else { v.min(n) };
        (start.map_or(0, clamp), stop.map_or(n, clamp))
    } else {
        let clamp = |v: i64| if v < 0 { (v + n).max(-1) } else { v.min(n - 1) };
        (start.map_or(n - 1, clamp), stop.map_or(-1, clamp))
    };
    let mut out = Vec::new();
    while (step > 0 && i < end) || (step < 0 && i > end) {
        out.push(i as usize);
        i += step;
    }
    Some(out)
}

/// A successfully analyzed program.
#[derive(Debug)]
pub struct Analyzed<'p> {
    pub program: &'p Program,
    pub table: SymbolTable,
    pub warnings: Vec<Diagnostic>,
}

pub fn analyze<'p>(program: &'p Program, gates: &GateSet) -> Result<Analyzed<'p>, Vec<Diagnostic>> {
    analyze_with(program, gates, &Qscout1)
}

/// Runs every semantic check. On failure the returned list holds all errors
/// and warnings in the order they were found.
pub fn analyze_with<'p>(
    program: &'p Program,
    gates: &GateSet,
    capability: &dyn Capability,
) -> Result<Analyzed<'p>, Vec<Diagnostic>> {
    let mut checker = Checker::new(program, gates, capability);
    checker.run(program);
    if has_errors(&checker.diags) {
        Err(checker.diags)
    } else {
        Ok(Analyzed {
            program,
            table: checker.table,
            warnings: checker.diags,
        })
    }
}

/// A qubit as seen while checking: a fixed offset or a macro parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Target {
    Offset(usize),
    Param(usize),
}

/// Qubits an operation touches and whether it contains operations with
/// special parallel rules.
#[derive(Clone, Debug, Default, PartialEq)]
struct Footprint {
    targets: Vec<Target>,
    has_global: bool,
    has_exclusive: bool,
}

impl Footprint {
    fn absorb(&mut self, other: Footprint) {
        for t in other.targets {
            if !self.targets.contains(&t) {
                self.targets.push(t);
            }
        }
        self.has_global |= other.has_global;
        self.has_exclusive |= other.has_exclusive;
    }
}

struct MacroScope {
    name: Identifier,
    params: Vec<Identifier>,
    kinds: Vec<Option<ParamKind>>,
}

impl MacroScope {
    fn param(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.as_str() == name)
    }
}

#[derive(Clone, Copy)]
struct Ctx {
    parent: Option<BlockKind>,
    in_parallel: bool,
    order: usize,
}

/// What an argument turned out to be.
enum ArgValue {
    Qubit(Target),
    Number,
    /// A macro parameter whose kind is not yet known.
    Unknown,
}

enum Callee<'g> {
    Native(&'g GateDefinition),
    Macro(MacroInfo),
}

struct Checker<'a> {
    gates: &'a GateSet,
    capability: &'a dyn Capability,
    table: SymbolTable,
    /// First declaration order of every name in the file.
    declared: HashMap<String, usize>,
    /// Names whose declaration failed; uses are not reported again.
    broken: HashSet<String>,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn new(program: &Program, gates: &'a GateSet, capability: &'a dyn Capability) -> Self {
        let mut declared = HashMap::new();
        for (i, h) in program.headers.iter().enumerate() {
            declared.entry(h.name().0.clone()).or_insert(i);
        }
        for (j, s) in program.body.iter().enumerate() {
            if let Statement::Macro(m) = s {
                declared
                    .entry(m.name.0.clone())
                    .or_insert(program.headers.len() + j);
            }
        }
        Self {
            gates,
            capability,
            table: SymbolTable::default(),
            declared,
            broken: HashSet::new(),
            diags: Vec::new(),
        }
    }

    fn error(&mut self, code: Code, pos: Pos, message: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, pos, message));
    }

    /// Reports a failed resolution, upgrading "undefined" to "forward
    /// reference" when the name is declared later.
    fn resolve_error(&mut self, err: ResolveError, pos: Pos) {
        if let ResolveError::Undefined(name) = &err {
            if self.broken.contains(name) {
                return;
            }
            if self.declared.contains_key(name) {
                self.error(
                    Code::ForwardReference,
                    pos,
                    format!("`{name}` is used before it is declared"),
                );
                return;
            }
        }
        let code = err.code();
        self.error(code, pos, err.to_string());
    }

    fn run(&mut self, program: &Program) {
        if program.is_empty() {
            self.diags.push(Diagnostic::warning(
                Code::EmptyProgram,
                Pos::new(1, 1),
                "program has no statements",
            ));
            return;
        }
        let mut seen: HashMap<String, Pos> = HashMap::new();
        for (order, header) in program.headers.iter().enumerate() {
            self.check_unique(&mut seen, header.name(), header.pos());
            match header {
                Header::Register(r) => {
                    if let Some(first) = &self.table.register {
                        let first = first.name.clone();
                        self.error(
                            Code::RegisterCount,
                            r.pos,
                            format!("a program declares exactly one register; `{first}` was already declared"),
                        );
                        self.broken.insert(r.name.0.clone());
                        continue;
                    }
                    match self.table.int_value(&r.size) {
                        Ok(size) if size > 0 => {
                            self.table.register = Some(RegisterInfo {
                                name: r.name.clone(),
                                size: size as usize,
                                order,
                            });
                        }
                        Ok(size) => {
                            self.error(
                                Code::RegisterSize,
                                r.pos,
                                format!("register size must be positive, got {size}"),
                            );
                            self.broken.insert(r.name.0.clone());
                        }
                        Err(e) => {
                            self.resolve_error(e, r.pos);
                            self.broken.insert(r.name.0.clone());
                        }
                    }
                }
                Header::Map(m) => match self.map_target(m) {
                    Some(target) => {
                        if target == AliasTarget::Array(vec![]) {
                            self.diags.push(Diagnostic::warning(
                                Code::EmptyAlias,
                                m.pos,
                                format!("alias `{}` names no qubits", m.name),
                            ));
                        }
                        self.table
                            .aliases
                            .insert(m.name.0.clone(), AliasInfo { target, order });
                    }
                    None => {
                        self.broken.insert(m.name.0.clone());
                    }
                },
                Header::Let(l) => {
                    self.table.lets.insert(
                        l.name.0.clone(),
                        LetInfo {
                            value: l.value,
                            order,
                        },
                    );
                }
            }
        }
        if self.table.register.is_none()
            && !program
                .headers
                .iter()
                .any(|h| matches!(h, Header::Register(_)))
        {
            self.error(
                Code::RegisterCount,
                Pos::new(1, 1),
                "program declares no register",
            );
        }

        let header_count = program.headers.len();
        for (j, statement) in program.body.iter().enumerate() {
            let order = header_count + j;
            let ctx = Ctx {
                parent: None,
                in_parallel: false,
                order,
            };
            match statement {
                Statement::Macro(m) => {
                    self.check_unique(&mut seen, &m.name, m.pos);
                    self.macro_def(m, order, j);
                }
                other => {
                    self.statement(other, ctx, &mut None);
                }
            }
        }
    }

    fn check_unique(&mut self, seen: &mut HashMap<String, Pos>, name: &Identifier, pos: Pos) {
        if let Some(first) = seen.get(name.as_str()) {
            let first = *first;
            self.error(
                Code::DuplicateName,
                pos,
                format!("`{name}` is already declared at {first}"),
            );
        } else {
            seen.insert(name.0.clone(), pos);
        }
    }

    fn map_target(&mut self, m: &MapAlias) -> Option<AliasTarget> {
        let target = m.target.as_str();
        let base = match self.table.array_of(target) {
            Ok(Some(v)) => AliasTarget::Array(v),
            Ok(None) => unreachable!(),
            Err(Ok(o)) => AliasTarget::Single(o),
            Err(Err(ResolveError::NotAQubit(_))) => {
                self.error(
                    Code::BadMapTarget,
                    m.pos,
                    format!("`{target}` is not a register or alias"),
                );
                return None;
            }
            Err(Err(e)) => {
                self.resolve_error(e, m.pos);
                return None;
            }
        };
        match (&m.selector, base) {
            (Selector::Whole, base) => Some(base),
            (Selector::Index(_) | Selector::Slice { .. }, AliasTarget::Single(_)) => {
                self.resolve_error(ResolveError::NotAnArray(target.to_owned()), m.pos);
                None
            }
            (Selector::Index(index), AliasTarget::Array(_)) => {
                match self.table.element(target, index) {
                    Ok(o) => Some(AliasTarget::Single(o)),
                    Err(e) => {
                        self.resolve_error(e, m.pos);
                        None
                    }
                }
            }
            (Selector::Slice { start, stop, step }, AliasTarget::Array(offsets)) => {
                let mut bound = |e: &Option<IntExpr>| -> Result<Option<i64>, ()> {
                    match e {
                        None => Ok(None),
                        Some(e) => match self.table.int_value(e) {
                            Ok(v) => Ok(Some(v)),
                            Err(err) => {
                                self.resolve_error(err, m.pos);
                                Err(())
                            }
                        },
                    }
                };
                let (start, stop, step) =
                    (bound(start).ok()?, bound(stop).ok()?, bound(step).ok()?);
                match python_slice(offsets.len(), start, stop, step) {
                    Some(indices) => Some(AliasTarget::Array(
                        indices.into_iter().map(|i| offsets[i]).collect(),
                    )),
                    None => {
                        self.error(Code::BadSlice, m.pos, "slice step cannot be zero");
                        None
                    }
                }
            }
        }
    }

    fn macro_def(&mut self, m: &MacroDef, order: usize, body_index: usize) {
        if self.gates.contains(m.name.as_str()) {
            self.error(
                Code::DuplicateName,
                m.pos,
                format!("macro `{}` collides with a native gate", m.name),
            );
        }
        let mut params_seen = HashSet::new();
        for p in &m.params {
            if !params_seen.insert(p.as_str()) {
                self.error(
                    Code::DuplicateName,
                    m.pos,
                    format!("parameter `{p}` appears twice in macro `{}`", m.name),
                );
            }
            if self.declared.contains_key(p.as_str()) {
                self.error(
                    Code::ShadowedName,
                    m.pos,
                    format!("parameter `{p}` of macro `{}` hides a global name", m.name),
                );
            }
        }
        let mut scope = Some(MacroScope {
            name: m.name.clone(),
            params: m.params.clone(),
            kinds: vec![None; m.params.len()],
        });
        let ctx = Ctx {
            parent: None,
            in_parallel: false,
            order,
        };
        let footprint = self.block(&m.body, ctx, &mut scope);
        let scope = scope.expect("scope survives the body walk");
        if !self.table.macros.contains_key(m.name.as_str()) {
            self.table.macros.insert(
                m.name.0.clone(),
                MacroInfo {
                    params: m.params.clone(),
                    param_kinds: scope.kinds,
                    order,
                    body_index,
                    footprint,
                },
            );
        }
    }

    fn statement(&mut self, s: &Statement, ctx: Ctx, scope: &mut Option<MacroScope>) -> Footprint {
        match s {
            Statement::Gate(g) => self.gate(g, ctx, scope),
            Statement::Block(b) => {
                if ctx.parent == Some(b.kind) {
                    self.error(
                        Code::SameKindNesting,
                        b.pos,
                        "a block cannot sit directly inside another block of the same kind",
                    );
                }
                self.block(b, ctx, scope)
            }
            Statement::Loop(l) => self.loop_statement(l, ctx, scope),
            Statement::Macro(m) => {
                self.error(
                    Code::DefinitionInBlock,
                    m.pos,
                    "macro definitions are not allowed inside blocks",
                );
                Footprint::default()
            }
        }
    }

    fn loop_statement(
        &mut self,
        l: &LoopStatement,
        ctx: Ctx,
        scope: &mut Option<MacroScope>,
    ) -> Footprint {
        if ctx.parent == Some(BlockKind::Parallel) {
            self.error(
                Code::LoopInParallel,
                l.pos,
                "loops are not allowed inside parallel blocks",
            );
        }
        if l.body.kind != BlockKind::Sequential {
            self.error(
                Code::LoopBody,
                l.body.pos,
                "a loop body must be a sequential block",
            );
        }
        match self.int_expr(&l.count, l.pos, scope) {
            Some(n) if n < 0 => self.error(
                Code::NegativeCount,
                l.pos,
                format!("loop count must be non-negative, got {n}"),
            ),
            _ => {}
        }
        self.block(&l.body, ctx, scope)
    }

    fn int_expr(&mut self, e: &IntExpr, pos: Pos, scope: &Option<MacroScope>) -> Option<i64> {
        if let (IntExpr::Name(name, p), Some(scope)) = (e, scope) {
            if scope.param(name.as_str()).is_some() {
                self.error(
                    Code::ArgKind,
                    *p,
                    format!("macro parameter `{name}` cannot be used as an integer"),
                );
                return None;
            }
        }
        match self.table.int_value(e) {
            Ok(v) => Some(v),
            Err(err) => {
                let pos = match e {
                    IntExpr::Name(_, p) => *p,
                    IntExpr::Literal(_) => pos,
                };
                self.resolve_error(err, pos);
                None
            }
        }
    }

    fn block(&mut self, b: &GateBlock, ctx: Ctx, scope: &mut Option<MacroScope>) -> Footprint {
        let inner = Ctx {
            parent: Some(b.kind),
            in_parallel: ctx.in_parallel || b.kind == BlockKind::Parallel,
            order: ctx.order,
        };
        let children: Vec<(Pos, Footprint)> = b
            .statements
            .iter()
            .map(|s| (s.pos(), self.statement(s, inner, scope)))
            .collect();
        if b.kind == BlockKind::Parallel {
            self.parallel_rules(&children, scope);
        }
        let mut total = Footprint::default();
        for (_, f) in children {
            total.absorb(f);
        }
        total
    }

    fn parallel_rules(&mut self, children: &[(Pos, Footprint)], scope: &Option<MacroScope>) {
        for (j, (pos, later)) in children.iter().enumerate() {
            for (_, earlier) in &children[..j] {
                if let Some(shared) = later.targets.iter().find(|t| earlier.targets.contains(t)) {
                    let what = self.describe(*shared, scope);
                    self.error(
                        Code::ParallelConflict,
                        *pos,
                        format!("{what} used twice in parallel block"),
                    );
                    break;
                }
            }
        }
        if children.len() > 1 {
            if let Some((pos, _)) = children.iter().find(|(_, f)| f.has_exclusive) {
                self.error(
                    Code::ExclusiveInParallel,
                    *pos,
                    "a Mølmer–Sørensen gate runs in parallel with no other gates",
                );
            }
        }
    }

    fn describe(&self, t: Target, scope: &Option<MacroScope>) -> String {
        match (t, scope) {
            (Target::Offset(o), _) => format!("qubit {}[{o}]", self.table.register_name()),
            (Target::Param(i), Some(s)) => format!("parameter `{}`", s.params[i]),
            (Target::Param(i), None) => format!("parameter #{i}"),
        }
    }

    fn callee(
        &mut self,
        g: &GateStatement,
        ctx: Ctx,
        scope: &Option<MacroScope>,
    ) -> Option<Callee<'a>> {
        let name = g.name.as_str();
        if let Some(s) = scope {
            if s.name.as_str() == name {
                self.error(
                    Code::RecursiveMacro,
                    g.pos,
                    format!("recursive macro: `{name}` invokes itself"),
                );
                return None;
            }
        }
        if let Some(def) = self.gates.get(name) {
            return Some(Callee::Native(def));
        }
        if let Some(info) = self.table.macros.get(name) {
            if info.order < ctx.order {
                return Some(Callee::Macro(info.clone()));
            }
        }
        if self.declared.get(name).is_some_and(|&o| o >= ctx.order) {
            let message = if scope.is_some() {
                format!(
                    "macro `{name}` is defined later; macros may only use macros defined earlier"
                )
            } else {
                format!("macro `{name}` is used before it is defined")
            };
            self.error(Code::ForwardReference, g.pos, message);
            return None;
        }
        if self.table.lookup(name).is_some() {
            self.error(
                Code::UnknownGate,
                g.pos,
                format!("`{name}` is not a gate or macro"),
            );
        } else {
            self.error(Code::UnknownGate, g.pos, format!("unknown gate `{name}`"));
        }
        None
    }

    fn gate(&mut self, g: &GateStatement, ctx: Ctx, scope: &mut Option<MacroScope>) -> Footprint {
        let Some(callee) = self.callee(g, ctx, scope) else {
            // still check arguments for unresolved names
            for arg in &g.args {
                self.arg(arg, None, g, scope);
            }
            return Footprint::default();
        };
        let kinds: Vec<Option<ParamKind>> = match &callee {
            Callee::Native(def) => def.params.iter().copied().map(Some).collect(),
            Callee::Macro(info) => info.param_kinds.clone(),
        };
        if kinds.len() != g.args.len() {
            self.error(
                Code::Arity,
                g.pos,
                format!(
                    "`{}` takes {} argument(s), found {}",
                    g.name,
                    kinds.len(),
                    g.args.len()
                ),
            );
            return Footprint::default();
        }
        let values: Vec<Option<ArgValue>> = g
            .args
            .iter()
            .zip(&kinds)
            .map(|(arg, &kind)| self.arg(arg, kind, g, scope))
            .collect();

        let mut qubits: Vec<Target> = Vec::new();
        for v in values.iter().flatten() {
            if let ArgValue::Qubit(t) = v {
                if qubits.contains(t) {
                    let what = self.describe(*t, scope);
                    self.error(
                        Code::DuplicateQubit,
                        g.pos,
                        format!("{what} appears twice among the arguments of `{}`", g.name),
                    );
                } else {
                    qubits.push(*t);
                }
            }
        }

        let footprint = match callee {
            Callee::Native(def) => Footprint {
                targets: qubits,
                has_global: def.is_global(),
                has_exclusive: self.capability.runs_alone(def),
            },
            Callee::Macro(info) => {
                let mut targets = Vec::new();
                for t in &info.footprint.targets {
                    let mapped = match *t {
                        Target::Offset(o) => Some(Target::Offset(o)),
                        Target::Param(i) => match values.get(i) {
                            Some(Some(ArgValue::Qubit(t))) => Some(*t),
                            _ => None,
                        },
                    };
                    if let Some(m) = mapped {
                        if !targets.contains(&m) {
                            targets.push(m);
                        }
                    }
                }
                Footprint {
                    targets,
                    has_global: info.footprint.has_global,
                    has_exclusive: info.footprint.has_exclusive,
                }
            }
        };
        if footprint.has_global && ctx.in_parallel {
            self.error(
                Code::GlobalInParallel,
                g.pos,
                format!(
                    "`{}` acts on every qubit and cannot appear in a parallel block",
                    g.name
                ),
            );
        }
        footprint
    }

    /// Checks one argument against the kind the callee expects. `None` when
    /// the argument is invalid (already reported).
    fn arg(
        &mut self,
        arg: &GateArg,
        expected: Option<ParamKind>,
        g: &GateStatement,
        scope: &mut Option<MacroScope>,
    ) -> Option<ArgValue> {
        let pos = match arg {
            GateArg::Qubit(q) => q.pos,
            GateArg::Name(_, p) => *p,
            _ => g.pos,
        };
        let value = match arg {
            GateArg::Int(_) | GateArg::Float(_) => ArgValue::Number,
            GateArg::Qubit(q) => {
                if scope
                    .as_ref()
                    .and_then(|s| s.param(q.base.as_str()))
                    .is_some()
                {
                    self.error(
                        Code::NotAnArray,
                        pos,
                        format!(
                            "macro parameter `{}` is a single qubit and cannot be indexed",
                            q.base
                        ),
                    );
                    return None;
                }
                if let Some(IntExpr::Name(n, p)) = &q.index {
                    if scope.as_ref().and_then(|s| s.param(n.as_str())).is_some() {
                        self.error(
                            Code::ArgKind,
                            *p,
                            format!("macro parameter `{n}` cannot be used as an index"),
                        );
                        return None;
                    }
                }
                match self.table.qubit_offset(q) {
                    Ok(o) => ArgValue::Qubit(Target::Offset(o)),
                    Err(e) => {
                        self.resolve_error(e, pos);
                        return None;
                    }
                }
            }
            GateArg::Name(name, _) => {
                if let Some(s) = scope.as_mut() {
                    if let Some(i) = s.param(name.as_str()) {
                        return match (s.kinds[i], expected) {
                            (_, None) => Some(match s.kinds[i] {
                                Some(ParamKind::Qubit) => ArgValue::Qubit(Target::Param(i)),
                                Some(ParamKind::Angle) => ArgValue::Number,
                                None => ArgValue::Unknown,
                            }),
                            (None, Some(k)) => {
                                s.kinds[i] = Some(k);
                                Some(match k {
                                    ParamKind::Qubit => ArgValue::Qubit(Target::Param(i)),
                                    ParamKind::Angle => ArgValue::Number,
                                })
                            }
                            (Some(have), Some(want)) if have == want => Some(match want {
                                ParamKind::Qubit => ArgValue::Qubit(Target::Param(i)),
                                ParamKind::Angle => ArgValue::Number,
                            }),
                            (Some(have), Some(_)) => {
                                let have = kind_name(have);
                                self.error(
                                    Code::ArgKind,
                                    pos,
                                    format!("parameter `{name}` is used both as {have} and as something else"),
                                );
                                None
                            }
                        };
                    }
                }
                match self.table.lookup(name.as_str()) {
                    Some(Binding::Let(_)) => ArgValue::Number,
                    Some(Binding::Macro) => {
                        self.error(
                            Code::ArgKind,
                            pos,
                            format!("macro `{name}` cannot be an argument"),
                        );
                        return None;
                    }
                    Some(Binding::Register(_) | Binding::Alias(_)) => {
                        if expected == Some(ParamKind::Angle) {
                            self.error(
                                Code::ArgKind,
                                pos,
                                format!("`{name}` names qubits where an angle is required"),
                            );
                            return None;
                        }
                        match self.table.single(name.as_str()) {
                            Ok(o) => ArgValue::Qubit(Target::Offset(o)),
                            Err(e) => {
                                self.resolve_error(e, pos);
                                return None;
                            }
                        }
                    }
                    None => {
                        self.resolve_error(ResolveError::Undefined(name.0.clone()), pos);
                        return None;
                    }
                }
            }
        };
        match (expected, &value) {
            (Some(ParamKind::Qubit), ArgValue::Number) => {
                self.error(
                    Code::ArgKind,
                    pos,
                    format!(
                        "`{}` expects a qubit here, found the number `{arg}`",
                        g.name
                    ),
                );
                None
            }
            (Some(ParamKind::Angle), ArgValue::Qubit(_)) => {
                self.error(
                    Code::ArgKind,
                    pos,
                    format!(
                        "`{}` expects an angle here, found the qubit `{arg}`",
                        g.name
                    ),
                );
                None
            }
            _ => Some(value),
        }
    }
}

fn kind_name(kind: ParamKind) -> &'static str {
    match kind {
        ParamKind::Qubit => "a qubit",
        ParamKind::Angle => "an angle",
    }
}

//! Lowering of an analyzed program to a [`FlatCircuit`]: constants and aliases
//! are resolved, macros inlined and loops unrolled.
//!
//! Blocks are normalized on the way: a block inside a block of the same kind
//! is spliced into its parent, empty blocks disappear and single-item blocks
//! are replaced by their item. The result still alternates sequential and
//! parallel levels.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::analyzer::{Analyzed, Capability, Qscout1, SymbolTable};
use crate::ast::{
    write_float, BlockKind, GateArg, GateBlock, GateStatement, Header, IntExpr, Program, QubitRef,
    RegisterDecl, Statement,
};
use crate::diagnostic::{Code, Diagnostic, Pos};
use crate::gateset::{GateDefinition, GateSet, ParamKind};

/// One native gate on absolute register offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveGate {
    pub definition: Arc<GateDefinition>,
    pub qubits: Vec<usize>,
    pub angles: Vec<f64>,
    /// Where the gate statement (or the outermost macro invocation producing
    /// it) appears in the source.
    pub pos: Pos,
}

impl PrimitiveGate {
    pub fn name(&self) -> &str {
        &self.definition.name
    }
}

impl fmt::Display for PrimitiveGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        for q in &self.qubits {
            write!(f, " {q}")?;
        }
        for a in &self.angles {
            f.write_char(' ')?;
            write_float(f, *a)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlatItem {
    Gate(PrimitiveGate),
    Block(FlatBlock),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatBlock {
    pub kind: BlockKind,
    pub items: Vec<FlatItem>,
}

impl FlatBlock {
    pub fn sequential(items: Vec<FlatItem>) -> Self {
        Self {
            kind: BlockKind::Sequential,
            items,
        }
    }

    pub fn parallel(items: Vec<FlatItem>) -> Self {
        Self {
            kind: BlockKind::Parallel,
            items,
        }
    }

    /// Visits every gate in program order.
    pub fn for_each_gate<'s>(&'s self, f: &mut impl FnMut(&'s PrimitiveGate)) {
        for item in &self.items {
            match item {
                FlatItem::Gate(g) => f(g),
                FlatItem::Block(b) => b.for_each_gate(f),
            }
        }
    }
}

/// A program reduced to native gates. The root is always sequential.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatCircuit {
    pub n_qubits: usize,
    pub root: FlatBlock,
}

impl FlatCircuit {
    pub fn gates(&self) -> Vec<&PrimitiveGate> {
        let mut out = Vec::new();
        self.root.for_each_gate(&mut |g| out.push(g));
        out
    }

    /// Text dump, one gate per line (`name offsets... angles...`), nested
    /// blocks between indented bracket lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for item in &self.root.items {
            dump_item(&mut out, item, 0);
        }
        out
    }

    /// Re-encodes the circuit as source: one register `q`, absolute indices,
    /// literal angles.
    pub fn to_program(&self) -> Program {
        let headers = if self.n_qubits == 0 {
            vec![]
        } else {
            vec![Header::Register(RegisterDecl {
                name: "q".into(),
                size: IntExpr::Literal(self.n_qubits as i64),
                pos: Pos::default(),
            })]
        };
        Program {
            headers,
            body: self.root.items.iter().map(item_to_statement).collect(),
        }
    }
}

fn item_to_statement(item: &FlatItem) -> Statement {
    match item {
        FlatItem::Gate(g) => Statement::Gate(GateStatement {
            name: g.name().into(),
            args: g
                .qubits
                .iter()
                .map(|&q| {
                    GateArg::Qubit(QubitRef {
                        base: "q".into(),
                        index: Some(IntExpr::Literal(q as i64)),
                        pos: Pos::default(),
                    })
                })
                .chain(g.angles.iter().map(|&a| GateArg::Float(a)))
                .collect(),
            pos: g.pos,
        }),
        FlatItem::Block(b) => Statement::Block(GateBlock {
            kind: b.kind,
            statements: b.items.iter().map(item_to_statement).collect(),
            pos: Pos::default(),
        }),
    }
}

fn dump_item(out: &mut String, item: &FlatItem, depth: usize) {
    let indent = "    ".repeat(depth);
    match item {
        FlatItem::Gate(g) => {
            let _ = writeln!(out, "{indent}{g}");
        }
        FlatItem::Block(b) => {
            let _ = writeln!(out, "{indent}{}", b.kind.open());
            for i in &b.items {
                dump_item(out, i, depth + 1);
            }
            let _ = writeln!(out, "{indent}{}", b.kind.close());
        }
    }
}

pub fn count_primitive_gates(circuit: &FlatCircuit) -> usize {
    let mut n = 0;
    circuit.root.for_each_gate(&mut |_| n += 1);
    n
}

pub fn expand(analyzed: &Analyzed<'_>, gates: &GateSet) -> Result<FlatCircuit, Vec<Diagnostic>> {
    expand_with(analyzed, gates, &Qscout1)
}

/// Expands the program, then re-checks the rules that macro substitution can
/// newly violate (repeated qubits, parallel conflicts).
pub fn expand_with(
    analyzed: &Analyzed<'_>,
    gates: &GateSet,
    capability: &dyn Capability,
) -> Result<FlatCircuit, Vec<Diagnostic>> {
    let expander = Expander {
        program: analyzed.program,
        table: &analyzed.table,
        gates,
    };
    let mut items = Vec::new();
    for statement in &analyzed.program.body {
        if !matches!(statement, Statement::Macro(_)) {
            expander
                .statement(statement, BlockKind::Sequential, &[], None, &mut items)
                .map_err(|d| vec![d])?;
        }
    }
    let circuit = FlatCircuit {
        n_qubits: analyzed.table.n_qubits(),
        root: FlatBlock::sequential(items),
    };
    let problems = check_flat(&circuit, capability);
    if problems.is_empty() {
        Ok(circuit)
    } else {
        Err(problems)
    }
}

/// A macro argument after resolution.
#[derive(Clone, Copy, Debug)]
enum Bound {
    Qubit(usize),
    Number(f64),
}

struct Expander<'a> {
    program: &'a Program,
    table: &'a SymbolTable,
    gates: &'a GateSet,
}

fn internal(pos: Pos, message: impl Into<String>) -> Diagnostic {
    Diagnostic::error(Code::Internal, pos, message)
}

impl Expander<'_> {
    fn statement(
        &self,
        statement: &Statement,
        ctx: BlockKind,
        bindings: &[(String, Bound)],
        origin: Option<Pos>,
        out: &mut Vec<FlatItem>,
    ) -> Result<(), Diagnostic> {
        match statement {
            Statement::Gate(g) => self.gate(g, ctx, bindings, origin, out),
            Statement::Block(b) => self.block(b, ctx, bindings, origin, out),
            Statement::Loop(l) => {
                let count = self
                    .table
                    .int_value(&l.count)
                    .ok()
                    .and_then(|n| usize::try_from(n).ok())
                    .ok_or_else(|| internal(l.pos, "loop count did not resolve"))?;
                let mut body = Vec::new();
                self.children(&l.body, bindings, origin, &mut body)?;
                let mut unrolled = Vec::with_capacity(body.len() * count);
                for _ in 0..count {
                    unrolled.extend(body.iter().cloned());
                }
                place(FlatBlock::sequential(unrolled), ctx, out);
                Ok(())
            }
            Statement::Macro(m) => Err(internal(m.pos, "macro definition inside a block")),
        }
    }

    fn children(
        &self,
        block: &GateBlock,
        bindings: &[(String, Bound)],
        origin: Option<Pos>,
        out: &mut Vec<FlatItem>,
    ) -> Result<(), Diagnostic> {
        for s in &block.statements {
            self.statement(s, block.kind, bindings, origin, out)?;
        }
        Ok(())
    }

    fn block(
        &self,
        block: &GateBlock,
        ctx: BlockKind,
        bindings: &[(String, Bound)],
        origin: Option<Pos>,
        out: &mut Vec<FlatItem>,
    ) -> Result<(), Diagnostic> {
        let mut items = Vec::new();
        self.children(block, bindings, origin, &mut items)?;
        place(
            FlatBlock {
                kind: block.kind,
                items,
            },
            ctx,
            out,
        );
        Ok(())
    }

    fn resolve_arg(
        &self,
        arg: &GateArg,
        bindings: &[(String, Bound)],
        pos: Pos,
    ) -> Result<Bound, Diagnostic> {
        match arg {
            GateArg::Int(i) => Ok(Bound::Number(*i as f64)),
            GateArg::Float(x) => Ok(Bound::Number(*x)),
            GateArg::Qubit(q) => self
                .table
                .qubit_offset(q)
                .map(Bound::Qubit)
                .map_err(|e| internal(pos, e.to_string())),
            GateArg::Name(name, _) => {
                if let Some((_, b)) = bindings.iter().find(|(n, _)| n == name.as_str()) {
                    return Ok(*b);
                }
                if let Some(value) = self.table.let_value(name.as_str()) {
                    return Ok(Bound::Number(value.as_f64()));
                }
                let q = QubitRef {
                    base: name.clone(),
                    index: None,
                    pos,
                };
                self.table
                    .qubit_offset(&q)
                    .map(Bound::Qubit)
                    .map_err(|e| internal(pos, e.to_string()))
            }
        }
    }

    fn gate(
        &self,
        g: &GateStatement,
        ctx: BlockKind,
        bindings: &[(String, Bound)],
        origin: Option<Pos>,
        out: &mut Vec<FlatItem>,
    ) -> Result<(), Diagnostic> {
        let pos = origin.unwrap_or(g.pos);
        let args = g
            .args
            .iter()
            .map(|a| self.resolve_arg(a, bindings, g.pos))
            .collect::<Result<Vec<_>, _>>()?;

        if let Some(def) = self.gates.get(g.name.as_str()) {
            let mut qubits = Vec::new();
            let mut angles = Vec::new();
            for (kind, arg) in def.params.iter().zip(&args) {
                match (kind, arg) {
                    (ParamKind::Qubit, Bound::Qubit(q)) => qubits.push(*q),
                    (ParamKind::Angle, Bound::Number(x)) => angles.push(*x),
                    _ => {
                        return Err(internal(
                            g.pos,
                            format!("argument kinds of `{}` do not match", g.name),
                        ))
                    }
                }
            }
            out.push(FlatItem::Gate(PrimitiveGate {
                definition: Arc::clone(def),
                qubits,
                angles,
                pos,
            }));
            return Ok(());
        }

        let info = self
            .table
            .macros
            .get(g.name.as_str())
            .ok_or_else(|| internal(g.pos, format!("`{}` did not resolve", g.name)))?;
        let Some(Statement::Macro(def)) = self.program.body.get(info.body_index) else {
            return Err(internal(g.pos, "macro table points at a non-macro"));
        };
        let inner: Vec<(String, Bound)> =
            def.params.iter().map(|p| p.0.clone()).zip(args).collect();
        self.block(&def.body, ctx, &inner, Some(pos), out)
    }
}

/// Adds `block` to a parent of kind `ctx`, splicing same-kind blocks and
/// dropping trivial wrappers.
fn place(block: FlatBlock, ctx: BlockKind, out: &mut Vec<FlatItem>) {
    if block.kind == ctx {
        out.extend(block.items);
        return;
    }
    match block.items.len() {
        0 => {}
        1 => match block.items.into_iter().next() {
            Some(FlatItem::Block(inner)) => place(inner, ctx, out),
            Some(gate) => out.push(gate),
            None => unreachable!(),
        },
        _ => out.push(FlatItem::Block(block)),
    }
}

struct ItemUse {
    pos: Pos,
    qubits: Vec<usize>,
    global: bool,
    exclusive: bool,
}

fn item_use(item: &FlatItem, capability: &dyn Capability) -> ItemUse {
    let mut u = ItemUse {
        pos: Pos::default(),
        qubits: Vec::new(),
        global: false,
        exclusive: false,
    };
    let mut first = true;
    let mut visit = |g: &PrimitiveGate| {
        if first {
            u.pos = g.pos;
            first = false;
        }
        for &q in &g.qubits {
            if !u.qubits.contains(&q) {
                u.qubits.push(q);
            }
        }
        u.global |= g.definition.is_global();
        u.exclusive |= capability.runs_alone(&g.definition);
    };
    match item {
        FlatItem::Gate(g) => visit(g),
        FlatItem::Block(b) => b.for_each_gate(&mut visit),
    }
    u
}

/// Structural rules on a flat circuit: no repeated qubit within one gate, and
/// within every parallel block no shared qubits, no whole-register operations
/// and no exclusive gate beside a sibling.
pub fn check_flat(circuit: &FlatCircuit, capability: &dyn Capability) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    check_block(&circuit.root, capability, &mut diags);
    diags
}

fn check_block(block: &FlatBlock, capability: &dyn Capability, diags: &mut Vec<Diagnostic>) {
    for item in &block.items {
        match item {
            FlatItem::Gate(g) => {
                for (i, q) in g.qubits.iter().enumerate() {
                    if g.qubits[..i].contains(q) {
                        diags.push(Diagnostic::error(
                            Code::DuplicateQubit,
                            g.pos,
                            format!(
                                "qubit {q} appears twice among the arguments of `{}`",
                                g.name()
                            ),
                        ));
                    }
                }
            }
            FlatItem::Block(b) => check_block(b, capability, diags),
        }
    }
    if block.kind != BlockKind::Parallel {
        return;
    }
    let uses: Vec<ItemUse> = block
        .items
        .iter()
        .map(|i| item_use(i, capability))
        .collect();
    for (j, later) in uses.iter().enumerate() {
        if later.global {
            diags.push(Diagnostic::error(
                Code::GlobalInParallel,
                later.pos,
                "whole-register operation inside a parallel block",
            ));
        }
        if let Some(q) = uses[..j]
            .iter()
            .find_map(|earlier| later.qubits.iter().find(|q| earlier.qubits.contains(q)))
        {
            diags.push(Diagnostic::error(
                Code::ParallelConflict,
                later.pos,
                format!("qubit {q} used twice in parallel block"),
            ));
        }
    }
    if uses.len() > 1 {
        if let Some(u) = uses.iter().find(|u| u.exclusive) {
            diags.push(Diagnostic::error(
                Code::ExclusiveInParallel,
                u.pos,
                "a Mølmer–Sørensen gate runs in parallel with no other gates",
            ));
        }
    }
}

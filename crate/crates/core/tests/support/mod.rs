//! Shared test machinery: random program and circuit generators plus
//! independent reference implementations to compare the toolchain against.

#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use indexmap::IndexMap;
use num_complex::Complex64;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use jaqal::ast::{
    BlockKind, GateArg, GateBlock, Header, IntExpr, Number, Program, Selector, Statement,
};
use jaqal::diagnostic::Pos;
use jaqal::expander::{FlatBlock, FlatCircuit, FlatItem, PrimitiveGate};
use jaqal::gateset::{builtin_gateset, GateSet};

pub type C = Complex64;

/// Dense square matrix, row-major.
pub type Dense = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

// ---------------------------------------------------------------------------
// Dense linear algebra
// ---------------------------------------------------------------------------

pub fn identity(n: usize) -> Dense {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) })
                .collect()
        })
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &Dense, v: &[C]) -> Vec<C> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn scale(a: &Dense, s: C) -> Dense {
    a.iter()
        .map(|row| row.iter().map(|x| x * s).collect())
        .collect()
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

/// `exp(m)` by Taylor series; fine for the small-norm generators used here.
pub fn expm(m: &Dense) -> Dense {
    let n = m.len();
    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..60 {
        term = scale(&matmul(&term, m), c(1.0 / k as f64, 0.0));
        result = add(&result, &term);
    }
    result
}

pub fn pauli_x() -> Dense {
    vec![
        vec![c(0.0, 0.0), c(1.0, 0.0)],
        vec![c(1.0, 0.0), c(0.0, 0.0)],
    ]
}

pub fn pauli_y() -> Dense {
    vec![
        vec![c(0.0, 0.0), c(0.0, -1.0)],
        vec![c(0.0, 1.0), c(0.0, 0.0)],
    ]
}

pub fn pauli_z() -> Dense {
    vec![
        vec![c(1.0, 0.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), c(-1.0, 0.0)],
    ]
}

/// Random unitary on `dim` dimensions: Gram-Schmidt on a random complex matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> Dense {
    let mut cols: Vec<Vec<C>> = Vec::new();
    while cols.len() < dim {
        let mut v: Vec<C> = (0..dim)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        for u in &cols {
            let proj: C = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    (0..dim)
        .map(|i| (0..dim).map(|j| cols[j][i]).collect())
        .collect()
}

pub fn random_state<R: Rng>(rng: &mut R, n_qubits: usize) -> Vec<C> {
    let v: Vec<C> = (0..1 << n_qubits)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Embeds `u` (first target = most significant matrix bit) into `n` qubits
/// with qubit `b` as bit `b` of the basis index, by building the full matrix
/// as a Kronecker product over a qubit permutation.
pub fn embed(u: &Dense, targets: &[usize], n: usize) -> Dense {
    // Kronecker order: targets first (MSB first), then the remaining qubits.
    let rest: Vec<usize> = (0..n).filter(|q| !targets.contains(q)).collect();
    let big = kron(u, &identity(1 << rest.len()));
    let order: Vec<usize> = targets.iter().chain(&rest).copied().collect();
    // position p in kron order (MSB first) holds qubit order[p]
    let to_index = |kron_index: usize| -> usize {
        let mut index = 0;
        for (p, &q) in order.iter().enumerate() {
            if (kron_index >> (n - 1 - p)) & 1 == 1 {
                index |= 1 << q;
            }
        }
        index
    };
    let dim = 1 << n;
    let mut out = vec![vec![c(0.0, 0.0); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            out[to_index(i)][to_index(j)] = big[i][j];
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Reference gate matrices, built from Pauli matrices
// ---------------------------------------------------------------------------

fn axis_rotation(sigma: Dense, theta: f64) -> Dense {
    add(
        &scale(&identity(2), c((theta / 2.0).cos(), 0.0)),
        &scale(&sigma, c(0.0, -(theta / 2.0).sin())),
    )
}

pub fn ms_reference(phi: f64, theta: f64) -> Dense {
    let p = add(
        &scale(&pauli_x(), c(phi.cos(), 0.0)),
        &scale(&pauli_y(), c(phi.sin(), 0.0)),
    );
    let pp = kron(&p, &p);
    add(
        &scale(&identity(4), c((theta / 2.0).cos(), 0.0)),
        &scale(&pp, c(0.0, -(theta / 2.0).sin())),
    )
}

/// Matrix of a native gate by name, independent of the library's gate table.
pub fn reference_gate(name: &str, angles: &[f64]) -> Dense {
    match name {
        "Rx" => axis_rotation(pauli_x(), angles[0]),
        "Ry" => axis_rotation(pauli_y(), angles[0]),
        "Rz" => axis_rotation(pauli_z(), angles[0]),
        "Px" => axis_rotation(pauli_x(), PI),
        "Py" => axis_rotation(pauli_y(), PI),
        "Pz" => axis_rotation(pauli_z(), PI),
        "Sx" => axis_rotation(pauli_x(), PI / 2.0),
        "Sy" => axis_rotation(pauli_y(), PI / 2.0),
        "Sz" => axis_rotation(pauli_z(), PI / 2.0),
        "Sxd" => axis_rotation(pauli_x(), -PI / 2.0),
        "Syd" => axis_rotation(pauli_y(), -PI / 2.0),
        "Szd" => axis_rotation(pauli_z(), -PI / 2.0),
        "MS" => ms_reference(angles[0], angles[1]),
        "Sxx" => ms_reference(0.0, PI / 2.0),
        other if other.starts_with("I_") => {
            if matches!(other, "I_MS" | "I_Sxx") {
                identity(4)
            } else {
                identity(2)
            }
        }
        other => panic!("no reference matrix for {other}"),
    }
}

// ---------------------------------------------------------------------------
// Brute-force AST interpreter
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum Value {
    Qubit(usize),
    Number(f64),
}

struct Interpreter<'p> {
    n: usize,
    register: String,
    aliases: HashMap<String, Vec<usize>>,
    singles: HashMap<String, usize>,
    lets: HashMap<String, f64>,
    macros: HashMap<String, &'p jaqal::ast::MacroDef>,
    state: Vec<C>,
    distributions: Vec<Vec<f64>>,
}

/// Python slice semantics, decided index by index: normalize the bounds the
/// way CPython does, then test every candidate for membership.
pub fn slice_oracle(
    len: usize,
    start: Option<i64>,
    stop: Option<i64>,
    step: Option<i64>,
) -> Option<Vec<usize>> {
    let n = len as i64;
    let step = step.unwrap_or(1);
    if step == 0 {
        return None;
    }
    let adjust = |v: i64, low: i64, high: i64| {
        let v = if v < 0 { v + n } else { v };
        if v < 0 {
            low
        } else if v >= n {
            high
        } else {
            v
        }
    };
    let mut members: Vec<usize> = if step > 0 {
        let a = start.map_or(0, |v| adjust(v, 0, n));
        let b = stop.map_or(n, |v| adjust(v, 0, n));
        (0..n)
            .filter(|&i| a <= i && i < b && (i - a) % step == 0)
            .map(|i| i as usize)
            .collect()
    } else {
        let a = start.map_or(n - 1, |v| adjust(v, -1, n - 1));
        let b = stop.map_or(-1, |v| adjust(v, -1, n - 1));
        (0..n)
            .filter(|&i| b < i && i <= a && (a - i) % (-step) == 0)
            .map(|i| i as usize)
            .collect()
    };
    if step < 0 {
        members.reverse();
    }
    Some(members)
}

/// `(len, start, stop, step, list(range(len))[start:stop:step])`.
pub type SliceCase = (
    usize,
    Option<i64>,
    Option<i64>,
    Option<i64>,
    &'static [usize],
);

/// Slices evaluated by CPython.
pub const PYTHON_SLICES: &[SliceCase] = &[
    (7, Some(1), Some(7), Some(2), &[1, 3, 5]),
    (7, None, None, Some(-1), &[6, 5, 4, 3, 2, 1, 0]),
    (7, Some(-3), None, None, &[4, 5, 6]),
    (5, Some(10), Some(-10), Some(-2), &[4, 2, 0]),
    (5, None, Some(2), Some(-1), &[4, 3]),
    (4, Some(-1), Some(-5), Some(-1), &[3, 2, 1, 0]),
    (6, Some(2), Some(2), Some(1), &[]),
    (6, Some(-100), Some(100), Some(3), &[0, 3]),
    (3, None, None, Some(5), &[0]),
    (0, None, None, Some(1), &[]),
    (7, Some(5), Some(1), Some(-2), &[5, 3]),
];

impl<'p> Interpreter<'p> {
    fn int(&self, e: &IntExpr) -> i64 {
        match e {
            IntExpr::Literal(v) => *v,
            IntExpr::Name(id, _) => self.lets[id.as_str()] as i64,
        }
    }

    fn run(&mut self, statements: &'p [Statement], env: &HashMap<String, Value>) {
        for s in statements {
            match s {
                Statement::Macro(def) => {
                    self.macros.insert(def.name.as_str().to_string(), def);
                }
                Statement::Block(GateBlock { statements, .. }) => self.run(statements, env),
                Statement::Loop(l) => {
                    for _ in 0..self.int(&l.count) {
                        self.run(&l.body.statements, env);
                    }
                }
                Statement::Gate(g) => {
                    let args: Vec<Value> = g.args.iter().map(|a| self.value(a, env)).collect();
                    let name = g.name.as_str();
                    if let Some(def) = self.macros.get(name).copied() {
                        let inner: HashMap<String, Value> = def
                            .params
                            .iter()
                            .map(|p| p.as_str().to_string())
                            .zip(args)
                            .collect();
                        self.run(&def.body.statements, &inner);
                    } else {
                        self.native(name, &args);
                    }
                }
            }
        }
    }

    fn value(&self, arg: &GateArg, env: &HashMap<String, Value>) -> Value {
        match arg {
            GateArg::Int(v) => Value::Number(*v as f64),
            GateArg::Float(v) => Value::Number(*v),
            GateArg::Name(id, _) => {
                let name = id.as_str();
                if let Some(v) = env.get(name) {
                    v.clone()
                } else if let Some(q) = self.singles.get(name) {
                    Value::Qubit(*q)
                } else {
                    Value::Number(self.lets[name])
                }
            }
            GateArg::Qubit(r) => {
                let base = r.base.as_str();
                let offsets = if base == self.register {
                    (0..self.n).collect()
                } else {
                    self.aliases[base].clone()
                };
                match &r.index {
                    Some(i) => Value::Qubit(offsets[self.int(i) as usize]),
                    None => Value::Qubit(self.singles[base]),
                }
            }
        }
    }

    fn native(&mut self, name: &str, args: &[Value]) {
        let qubits: Vec<usize> = args
            .iter()
            .filter_map(|a| match a {
                Value::Qubit(q) => Some(*q),
                _ => None,
            })
            .collect();
        let angles: Vec<f64> = args
            .iter()
            .filter_map(|a| match a {
                Value::Number(v) => Some(*v),
                _ => None,
            })
            .collect();
        match name {
            "prepare_all" => {
                self.state = vec![c(0.0, 0.0); 1 << self.n];
                self.state[0] = c(1.0, 0.0);
            }
            "measure_all" => {
                let probs: Vec<f64> = self.state.iter().map(|a| a.norm_sqr()).collect();
                let mut best = 0;
                for (i, p) in probs.iter().enumerate() {
                    if *p > probs[best] {
                        best = i;
                    }
                }
                self.state = vec![c(0.0, 0.0); 1 << self.n];
                self.state[best] = c(1.0, 0.0);
                self.distributions.push(probs);
            }
            _ => {
                let full = embed(&reference_gate(name, &angles), &qubits, self.n);
                self.state = matvec(&full, &self.state);
            }
        }
    }
}

/// Outcome distributions at each `measure_all`, computed by walking the AST
/// directly with dense full-register matrices.
pub fn interpret(program: &Program) -> Vec<Vec<f64>> {
    let mut it = Interpreter {
        n: 0,
        register: String::new(),
        aliases: HashMap::new(),
        singles: HashMap::new(),
        lets: HashMap::new(),
        macros: HashMap::new(),
        state: Vec::new(),
        distributions: Vec::new(),
    };
    for h in &program.headers {
        match h {
            Header::Register(r) => {
                it.n = it.int(&r.size) as usize;
                it.register = r.name.as_str().to_string();
            }
            Header::Let(l) => {
                let v = match l.value {
                    Number::Int(i) => i as f64,
                    Number::Float(f) => f,
                };
                it.lets.insert(l.name.as_str().to_string(), v);
            }
            Header::Map(m) => {
                let target = m.target.as_str();
                let base: Vec<usize> = if target == it.register {
                    (0..it.n).collect()
                } else {
                    it.aliases[target].clone()
                };
                let name = m.name.as_str().to_string();
                match &m.selector {
                    Selector::Whole => {
                        it.aliases.insert(name, base);
                    }
                    Selector::Index(i) => {
                        let q = base[it.int(i) as usize];
                        it.singles.insert(name, q);
                    }
                    Selector::Slice { start, stop, step } => {
                        let f = |e: &Option<IntExpr>| e.as_ref().map(|e| it.int(e));
                        let picked = slice_oracle(base.len(), f(start), f(stop), f(step)).unwrap();
                        let offsets = picked.into_iter().map(|i| base[i]).collect();
                        it.aliases.insert(name, offsets);
                    }
                }
            }
        }
    }
    it.state = vec![c(0.0, 0.0); 1 << it.n];
    it.state[0] = c(1.0, 0.0);
    it.run(&program.body, &HashMap::new());
    it.distributions
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

// ---------------------------------------------------------------------------
// Random Jaqal programs
// ---------------------------------------------------------------------------

const SINGLE: [&str; 9] = ["Px", "Py", "Pz", "Sx", "Sy", "Sz", "Sxd", "Syd", "Szd"];
const ROTATIONS: [&str; 3] = ["Rx", "Ry", "Rz"];

struct MacroSig {
    name: String,
    qubits: usize,
    angle: bool,
}

struct ProgramGen<'r, R: Rng> {
    rng: &'r mut R,
    n: usize,
    lets: Vec<String>,
    array_alias: bool,
    single_alias: bool,
    macros: Vec<MacroSig>,
    budget: usize,
}

impl<R: Rng> ProgramGen<'_, R> {
    fn angle(&mut self) -> String {
        if !self.lets.is_empty() && self.rng.random_bool(0.3) {
            self.lets.choose(self.rng).unwrap().clone()
        } else {
            format!("{:.6}", self.rng.random_range(-7.0..7.0))
        }
    }

    fn qubit(&mut self, q: usize) -> String {
        if self.array_alias && q >= 1 && self.rng.random_bool(0.4) {
            format!("a[{}]", q - 1)
        } else if self.single_alias && q == 0 && self.rng.random_bool(0.4) {
            "z".into()
        } else {
            format!("q[{q}]")
        }
    }

    fn single_gate(&mut self, q: String) -> String {
        self.budget = self.budget.saturating_sub(1);
        match self.rng.random_range(0..10) {
            0..=3 => format!("{} {q}", SINGLE.choose(self.rng).unwrap()),
            4..=8 => {
                let angle = self.angle();
                format!("{} {q} {angle}", ROTATIONS.choose(self.rng).unwrap())
            }
            _ => format!("I_{} {q}", SINGLE.choose(self.rng).unwrap()),
        }
    }

    fn two_gate(&mut self, a: String, b: String) -> String {
        self.budget = self.budget.saturating_sub(1);
        if self.rng.random_bool(0.5) {
            format!("Sxx {a} {b}")
        } else {
            let (phi, theta) = (self.angle(), self.angle());
            format!("MS {a} {b} {phi} {theta}")
        }
    }

    fn distinct_pair(&mut self) -> (usize, usize) {
        let mut qs: Vec<usize> = (0..self.n).collect();
        qs.shuffle(self.rng);
        (qs[0], qs[1])
    }

    /// One statement in a sequential context (top level or `{ }`).
    fn statement(&mut self, depth: usize, top_level: bool) -> String {
        let choice = self.rng.random_range(0..12);
        match choice {
            0..=3 => {
                let q = self.rng.random_range(0..self.n);
                let q = self.qubit(q);
                self.single_gate(q)
            }
            4 if self.n >= 2 => {
                let (a, b) = self.distinct_pair();
                let (a, b) = (self.qubit(a), self.qubit(b));
                self.two_gate(a, b)
            }
            5 | 6 if !self.macros.is_empty() => self.invocation(),
            7 | 8 if self.n >= 2 => self.parallel(),
            9 if depth < 3 && self.budget > 1 => {
                let reps = self.rng.random_range(1..=3);
                let count = self.rng.random_range(1..=3);
                let body = self.sequence(depth + 1, count, false);
                format!("loop {reps} {{\n{body}}}")
            }
            10 if top_level && self.budget > 1 => {
                let n = self.rng.random_range(1..=3);
                let items: Vec<String> = (0..n).map(|_| self.statement_inline(depth)).collect();
                format!("{{ {} }}", items.join("; "))
            }
            _ => {
                let q = self.rng.random_range(0..self.n);
                let q = self.qubit(q);
                self.single_gate(q)
            }
        }
    }

    /// A statement that fits inside a sequential block written on one line.
    fn statement_inline(&mut self, _depth: usize) -> String {
        if self.n >= 2 && self.rng.random_bool(0.3) {
            self.parallel()
        } else {
            let q = self.rng.random_range(0..self.n);
            let q = self.qubit(q);
            self.single_gate(q)
        }
    }

    fn sequence(&mut self, depth: usize, count: usize, top_level: bool) -> String {
        let mut out = String::new();
        for _ in 0..count {
            if self.budget == 0 {
                break;
            }
            let s = self.statement(depth, top_level);
            let _ = writeln!(out, "{s}");
        }
        if out.is_empty() && !top_level {
            // a loop body needs at least one statement; loops are only
            // started with budget to spare
            let q = self.rng.random_range(0..self.n);
            let q = self.qubit(q);
            let _ = writeln!(out, "{}", self.single_gate(q));
        }
        out
    }

    fn parallel(&mut self) -> String {
        let mut qs: Vec<usize> = (0..self.n).collect();
        qs.shuffle(self.rng);
        let k = self.rng.random_range(2..=self.n);
        let mut children = Vec::new();
        for &q in &qs[..k] {
            let child = if self.rng.random_bool(0.3) {
                let (a, b) = (self.qubit(q), self.qubit(q));
                let (g1, g2) = (self.single_gate(a), self.single_gate(b));
                format!("{{ {g1}; {g2} }}")
            } else {
                let a = self.qubit(q);
                self.single_gate(a)
            };
            children.push(child);
        }
        format!("< {} >", children.join(" | "))
    }

    fn invocation(&mut self) -> String {
        let index = self.rng.random_range(0..self.macros.len());
        let (name, qubits, angle) = {
            let m = &self.macros[index];
            (m.name.clone(), m.qubits, m.angle)
        };
        let mut args = Vec::new();
        let mut qs: Vec<usize> = (0..self.n).collect();
        qs.shuffle(self.rng);
        for &q in &qs[..qubits] {
            args.push(self.qubit(q));
        }
        if angle {
            args.push(self.angle());
        }
        self.budget = self.budget.saturating_sub(1);
        format!("{name} {}", args.join(" "))
    }

    fn macro_def(&mut self, index: usize) -> String {
        let qubits = self.rng.random_range(1..=self.n.min(2));
        let angle = self.rng.random_bool(0.5);
        let params: Vec<&str> = ["x", "y"][..qubits].to_vec();
        let mut body = Vec::new();
        for _ in 0..self.rng.random_range(1..=3) {
            let p = params.choose(self.rng).unwrap().to_string();
            let line = match self.rng.random_range(0..4) {
                0 if qubits == 2 => self.two_gate("x".into(), "y".into()),
                1 if angle => {
                    self.budget = self.budget.saturating_sub(1);
                    format!("{} {p} theta", ROTATIONS.choose(self.rng).unwrap())
                }
                2 if !self.macros.is_empty() => {
                    // call an earlier single-qubit macro on one parameter
                    match self.macros.iter().position(|m| m.qubits == 1) {
                        Some(i) => {
                            self.budget = self.budget.saturating_sub(1);
                            let m = &self.macros[i];
                            let extra = if m.angle {
                                format!(" {:.6}", 0.25)
                            } else {
                                String::new()
                            };
                            format!("{} {p}{extra}", m.name)
                        }
                        None => self.single_gate(p),
                    }
                }
                _ => self.single_gate(p),
            };
            body.push(format!("    {line}"));
        }
        let mut header = format!("macro m{index}");
        for p in &params {
            header.push(' ');
            header.push_str(p);
        }
        if angle {
            header.push_str(" theta");
        }
        self.macros.push(MacroSig {
            name: format!("m{index}"),
            qubits,
            angle,
        });
        format!("{header} {{\n{}\n}}", body.join("\n"))
    }
}

/// A random valid program on at most three qubits with at most `max_gates`
/// gate statements and loops nested at most three deep. Every `measure_all`
/// is preceded by its own `prepare_all`.
pub fn random_program<R: Rng>(rng: &mut R, max_gates: usize) -> String {
    loop {
        let source = generate_program(rng, max_gates);
        let program = jaqal::parser::parse(&source).expect("generated programs parse");
        if count_gate_statements(&program) <= max_gates {
            return source;
        }
    }
}

fn generate_program<R: Rng>(rng: &mut R, max_gates: usize) -> String {
    let n = rng.random_range(1..=3);
    let mut g = ProgramGen {
        rng,
        n,
        lets: Vec::new(),
        array_alias: n >= 2,
        single_alias: true,
        macros: Vec::new(),
        budget: max_gates,
    };
    let mut out = format!("register q[{n}]\n");
    if g.array_alias {
        let _ = writeln!(out, "map a q[1:{n}]");
    }
    let _ = writeln!(out, "map z q[0]");
    for i in 0..g.rng.random_range(0..3) {
        let _ = writeln!(out, "let t{i} {:.6}", g.rng.random_range(-4.0..4.0));
        g.lets.push(format!("t{i}"));
    }
    out.push('\n');
    for i in 0..g.rng.random_range(0..3) {
        if g.budget < 4 {
            break;
        }
        let _ = writeln!(out, "{}", g.macro_def(i));
    }
    let segments = g.rng.random_range(1..=2);
    for _ in 0..segments {
        out.push_str("prepare_all\n");
        let count = g.rng.random_range(2..=6);
        out.push_str(&g.sequence(0, count, true));
        out.push_str("measure_all\n");
    }
    out
}

// ---------------------------------------------------------------------------
// Random flat circuits for the scheduler
// ---------------------------------------------------------------------------

/// Built-in gates with a few durations changed so parallel branches differ.
pub fn varied_gateset() -> GateSet {
    let mut d = IndexMap::new();
    d.insert("Sx".to_string(), 2.0);
    d.insert("Sy".to_string(), 3.0);
    d.insert("Pz".to_string(), 5.0);
    builtin_gateset().with_durations(&d)
}

pub fn gate(gates: &GateSet, name: &str, qubits: Vec<usize>) -> FlatItem {
    let definition = Arc::clone(gates.get(name).unwrap());
    let angles = vec![0.5; definition.angle_arity()];
    FlatItem::Gate(PrimitiveGate {
        definition,
        qubits,
        angles,
        pos: Pos::new(1, 1),
    })
}

/// A random block whose gates only touch `qubits`. With `disjoint` set,
/// parallel children never share a qubit.
pub fn random_block<R: Rng>(
    rng: &mut R,
    gates: &GateSet,
    qubits: &[usize],
    depth: usize,
    disjoint: bool,
) -> FlatItem {
    let single = ["Sx", "Sy", "Pz", "Rx", "Szd", "I_Sy"];
    if depth == 0 || rng.random_bool(0.35) {
        if qubits.len() >= 2 && rng.random_bool(0.2) {
            let mut qs = qubits.to_vec();
            qs.shuffle(rng);
            return gate(gates, "Sxx", vec![qs[0], qs[1]]);
        }
        let q = *qubits.choose(rng).unwrap();
        return gate(gates, single.choose(rng).unwrap(), vec![q]);
    }
    let n = rng.random_range(1..=3);
    if rng.random_bool(0.5) {
        let items = (0..n)
            .map(|_| random_block(rng, gates, qubits, depth - 1, disjoint))
            .collect();
        FlatItem::Block(FlatBlock::sequential(items))
    } else {
        let mut items = Vec::new();
        if disjoint {
            let mut qs = qubits.to_vec();
            qs.shuffle(rng);
            let groups = n.min(qs.len());
            let chunks: Vec<Vec<usize>> = (0..groups)
                .map(|g| qs.iter().skip(g).step_by(groups).copied().collect())
                .collect();
            for chunk in chunks {
                items.push(random_block(rng, gates, &chunk, depth - 1, disjoint));
            }
        } else {
            for _ in 0..n {
                items.push(random_block(rng, gates, qubits, depth - 1, disjoint));
            }
        }
        FlatItem::Block(FlatBlock::parallel(items))
    }
}

pub fn circuit(n_qubits: usize, root: FlatBlock) -> FlatCircuit {
    FlatCircuit { n_qubits, root }
}

pub fn as_block(item: FlatItem) -> FlatBlock {
    match item {
        FlatItem::Block(b) => b,
        g => FlatBlock::sequential(vec![g]),
    }
}

/// Start times computed independently: (start, duration, qubits) per gate.
pub fn reference_times(item: &FlatItem, start: f64, out: &mut Vec<(f64, f64, Vec<usize>)>) -> f64 {
    match item {
        FlatItem::Gate(g) => {
            let d = g.definition.duration;
            out.push((start, d, g.qubits.clone()));
            start + d
        }
        FlatItem::Block(b) => match b.kind {
            BlockKind::Sequential => b
                .items
                .iter()
                .fold(start, |t, i| reference_times(i, t, out)),
            BlockKind::Parallel => b
                .items
                .iter()
                .map(|i| reference_times(i, start, out))
                .fold(start, f64::max),
        },
    }
}

/// Occupancy conflict by rasterizing every gate onto a fine time grid. All
/// durations used here are whole numbers, so sampling at cell midpoints with
/// step 1/4 is exact.
pub fn raster_conflict(circuit: &FlatCircuit) -> bool {
    let mut spans = Vec::new();
    let end = reference_times(&FlatItem::Block(circuit.root.clone()), 0.0, &mut spans);
    let cells = (end * 4.0).ceil() as usize;
    for q in 0..circuit.n_qubits {
        for cell in 0..cells {
            let t = (cell as f64 + 0.5) / 4.0;
            let busy = spans
                .iter()
                .filter(|(s, d, qs)| qs.contains(&q) && *s <= t && t < s + d)
                .count();
            if busy > 1 {
                return true;
            }
        }
    }
    false
}

/// Gate statements in a program, macro bodies included, not counting
/// `prepare_all` and `measure_all`.
pub fn count_gate_statements(program: &Program) -> usize {
    fn walk(s: &[Statement]) -> usize {
        s.iter()
            .map(|s| match s {
                Statement::Gate(g) => {
                    usize::from(!matches!(g.name.as_str(), "prepare_all" | "measure_all"))
                }
                Statement::Block(b) => walk(&b.statements),
                Statement::Loop(l) => walk(&l.body.statements),
                Statement::Macro(m) => walk(&m.body.statements),
            })
            .sum()
    }
    walk(&program.body)
}

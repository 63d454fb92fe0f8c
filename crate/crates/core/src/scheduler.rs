//! Start times for every gate of a flat circuit.
//!
//! Sequential children run back to back. Parallel children all start with the
//! block; the block lasts as long as its longest child, and every qubit the
//! block touches is padded with idles over the stretches where it is not busy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::ast::{write_float, BlockKind};
use crate::diagnostic::{Code, Diagnostic};
use crate::expander::{FlatBlock, FlatCircuit, FlatItem, PrimitiveGate};
use crate::gateset::PAD_IDLE;

/// How children of a parallel block line up in time. Only start alignment is
/// implemented.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Alignment {
    #[default]
    Start,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedGate {
    pub gate: PrimitiveGate,
    pub start: f64,
    pub duration: f64,
}

impl TimedGate {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// An automatically inserted idle on one qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct PadIdle {
    pub qubit: usize,
    pub start: f64,
    pub duration: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timeline {
    pub entries: Vec<TimedGate>,
    pub idles: Vec<PadIdle>,
    pub total_duration: f64,
    pub alignment: Alignment,
}

impl Timeline {
    /// One line per gate or pad idle, `start duration name qubits... angles...`,
    /// ordered by start time then lowest qubit, followed by `total <duration>`.
    pub fn dump(&self) -> String {
        let mut lines: Vec<(f64, usize, String)> = Vec::new();
        for e in &self.entries {
            let key = e.gate.qubits.iter().copied().min().unwrap_or(0);
            let mut line = format!(
                "{} {} {}",
                fmt_time(e.start),
                fmt_time(e.duration),
                e.gate.name()
            );
            for q in &e.gate.qubits {
                let _ = write!(line, " {q}");
            }
            for a in &e.gate.angles {
                line.push(' ');
                let _ = write_float(&mut line, *a);
            }
            lines.push((e.start, key, line));
        }
        for idle in &self.idles {
            lines.push((
                idle.start,
                idle.qubit,
                format!(
                    "{} {} {PAD_IDLE} {}",
                    fmt_time(idle.start),
                    fmt_time(idle.duration),
                    idle.qubit
                ),
            ));
        }
        lines.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = String::new();
        for (_, _, line) in lines {
            out.push_str(&line);
            out.push('\n');
        }
        let _ = writeln!(out, "total {}", fmt_time(self.total_duration));
        out
    }
}

fn fmt_time(t: f64) -> String {
    format!("{t}")
}

/// Qubits a gate keeps busy: its arguments, or the whole register for
/// `prepare_all`/`measure_all`.
fn occupied(gate: &PrimitiveGate, n_qubits: usize) -> Vec<usize> {
    if gate.definition.is_global() {
        (0..n_qubits).collect()
    } else {
        gate.qubits.clone()
    }
}

/// Busy intervals per qubit, gates and idles alike.
type Occupancy = BTreeMap<usize, Vec<(f64, f64)>>;

struct Scheduler {
    n_qubits: usize,
    timeline: Timeline,
}

impl Scheduler {
    /// Schedules `block` from `start`, returning its end time and the
    /// intervals it occupies.
    fn block(&mut self, block: &FlatBlock, start: f64) -> (f64, Occupancy) {
        let mut occupancy = Occupancy::new();
        let mut end = start;
        for item in &block.items {
            let at = match block.kind {
                BlockKind::Sequential => end,
                BlockKind::Parallel => start,
            };
            let (item_end, item_occ) = self.item(item, at);
            for (q, mut spans) in item_occ {
                occupancy.entry(q).or_default().append(&mut spans);
            }
            end = end.max(item_end);
        }
        if block.kind == BlockKind::Parallel {
            self.pad(&mut occupancy, start, end);
        }
        (end, occupancy)
    }

    fn item(&mut self, item: &FlatItem, start: f64) -> (f64, Occupancy) {
        match item {
            FlatItem::Block(b) => self.block(b, start),
            FlatItem::Gate(g) => {
                let duration = g.definition.duration;
                let mut occupancy = Occupancy::new();
                if duration > 0.0 {
                    for q in occupied(g, self.n_qubits) {
                        occupancy.insert(q, vec![(start, start + duration)]);
                    }
                }
                self.timeline.entries.push(TimedGate {
                    gate: g.clone(),
                    start,
                    duration,
                });
                (start + duration, occupancy)
            }
        }
    }

    /// Fills every gap in `[start, end)` on each qubit present in `occupancy`.
    fn pad(&mut self, occupancy: &mut Occupancy, start: f64, end: f64) {
        for (&qubit, spans) in occupancy.iter_mut() {
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut cursor = start;
            let mut gaps = Vec::new();
            for &(s, e) in spans.iter() {
                if s > cursor {
                    gaps.push((cursor, s));
                }
                cursor = cursor.max(e);
            }
            if cursor < end {
                gaps.push((cursor, end));
            }
            for (s, e) in gaps {
                self.timeline.idles.push(PadIdle {
                    qubit,
                    start: s,
                    duration: e - s,
                });
                spans.push((s, e));
            }
        }
    }
}

/// Computes the timeline of a flat circuit, failing if any qubit would be
/// used by two operations at once.
pub fn schedule(circuit: &FlatCircuit) -> Result<Timeline, Diagnostic> {
    let mut scheduler = Scheduler {
        n_qubits: circuit.n_qubits,
        timeline: Timeline::default(),
    };
    let (end, _) = scheduler.block(&circuit.root, 0.0);
    scheduler.timeline.total_duration = end;
    let timeline = scheduler.timeline;
    if let Some(conflict) = find_conflict(&timeline.entries, circuit.n_qubits) {
        return Err(conflict);
    }
    Ok(timeline)
}

/// Total run time. Evaluated directly from the block structure; the conflict
/// check only looks at gate intervals.
pub fn total_duration(circuit: &FlatCircuit) -> Result<f64, Diagnostic> {
    fn span(item: &FlatItem) -> f64 {
        match item {
            FlatItem::Gate(g) => g.definition.duration,
            FlatItem::Block(b) => block_span(b),
        }
    }
    fn block_span(block: &FlatBlock) -> f64 {
        let spans = block.items.iter().map(span);
        match block.kind {
            BlockKind::Sequential => spans.sum(),
            BlockKind::Parallel => spans.fold(0.0, f64::max),
        }
    }
    fn intervals(item: &FlatItem, start: f64, out: &mut Vec<TimedGate>) -> f64 {
        match item {
            FlatItem::Gate(g) => {
                out.push(TimedGate {
                    gate: g.clone(),
                    start,
                    duration: g.definition.duration,
                });
                start + g.definition.duration
            }
            FlatItem::Block(b) => {
                let mut end = start;
                for i in &b.items {
                    let at = if b.kind == BlockKind::Sequential {
                        end
                    } else {
                        start
                    };
                    end = end.max(intervals(i, at, out));
                }
                end
            }
        }
    }
    let mut gates = Vec::new();
    for item in &circuit.root.items {
        let start = match circuit.root.kind {
            BlockKind::Sequential => gates.iter().map(TimedGate::end).fold(0.0, f64::max),
            BlockKind::Parallel => 0.0,
        };
        intervals(item, start, &mut gates);
    }
    if let Some(conflict) = find_conflict(&gates, circuit.n_qubits) {
        return Err(conflict);
    }
    Ok(block_span(&circuit.root))
}

fn find_conflict(entries: &[TimedGate], n_qubits: usize) -> Option<Diagnostic> {
    let mut per_qubit: BTreeMap<usize, Vec<&TimedGate>> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.duration > 0.0) {
        for q in occupied(&e.gate, n_qubits) {
            per_qubit.entry(q).or_default().push(e);
        }
    }
    for (q, mut list) in per_qubit {
        list.sort_by(|a, b| a.start.total_cmp(&b.start));
        let mut latest: Option<&TimedGate> = None;
        for e in list {
            if let Some(prev) = latest {
                if e.start < prev.end() {
                    return Some(Diagnostic::error(
                        Code::TimingConflict,
                        e.gate.pos,
                        format!(
                            "qubit {q} is used by `{}` at {} while `{}` (from {}) is still running",
                            e.gate.gate_label(),
                            e.start,
                            prev.gate.gate_label(),
                            prev.start
                        ),
                    ));
                }
                if e.end() > prev.end() {
                    latest = Some(e);
                }
            } else {
                latest = Some(e);
            }
        }
    }
    None
}

impl PrimitiveGate {
    fn gate_label(&self) -> String {
        self.to_string()
    }
}

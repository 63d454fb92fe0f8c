//! Noiseless state-vector execution of flat circuits.
//!
//! Basis index `i` holds the amplitude whose bit `b` is the state of qubit
//! `b`, so qubit 0 is the least significant bit. Measurement records write
//! qubit 0 first.
//!
//! Sampling uses ChaCha8 seeded from a 64-bit integer and draws exactly one
//! uniform `f64` per `measure_all`, so records are reproducible everywhere.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagnostic::{Code, Diagnostic, Pos};
use crate::expander::{FlatCircuit, PrimitiveGate};
use crate::gateset::{quantize_angle, unitary_of, GateAction, UnitaryMatrix};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("a {matrix}-dimensional matrix cannot act on {qubits} qubit(s)")]
    DimensionMismatch { matrix: usize, qubits: usize },
    #[error("qubit {0} is addressed twice")]
    DuplicateQubit(usize),
    #[error("qubit {qubit} is outside a {n_qubits}-qubit state")]
    OutOfRange { qubit: usize, n_qubits: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// The all-zero basis state.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        QuantumState {
            n_qubits,
            amplitudes,
        }
    }

    /// Wraps an amplitude vector; its length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Option<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return None;
        }
        Some(QuantumState {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    /// Born probabilities indexed like the amplitudes.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(Complex64::norm_sqr).collect()
    }

    /// Collapses onto one basis state.
    pub fn collapse(&mut self, index: usize) {
        self.amplitudes.fill(Complex64::new(0.0, 0.0));
        self.amplitudes[index] = Complex64::new(1.0, 0.0);
    }

    /// Applies `u` to `qubits`, identity elsewhere. The first listed qubit is
    /// the most significant bit of the matrix index.
    pub fn apply_unitary(&mut self, u: &UnitaryMatrix, qubits: &[usize]) -> Result<(), ApplyError> {
        let k = qubits.len();
        if u.dim() != 1 << k {
            return Err(ApplyError::DimensionMismatch {
                matrix: u.dim(),
                qubits: k,
            });
        }
        let mut mask = 0usize;
        for &q in qubits {
            if q >= self.n_qubits {
                return Err(ApplyError::OutOfRange {
                    qubit: q,
                    n_qubits: self.n_qubits,
                });
            }
            if mask & (1 << q) != 0 {
                return Err(ApplyError::DuplicateQubit(q));
            }
            mask |= 1 << q;
        }
        let dim = u.dim();
        let offsets: Vec<usize> = (0..dim)
            .map(|j| {
                qubits
                    .iter()
                    .enumerate()
                    .filter(|&(t, _)| (j >> (k - 1 - t)) & 1 == 1)
                    .map(|(_, &q)| 1 << q)
                    .sum()
            })
            .collect();
        let mut gathered = vec![Complex64::new(0.0, 0.0); dim];
        for base in 0..self.amplitudes.len() {
            if base & mask != 0 {
                continue;
            }
            for (slot, off) in gathered.iter_mut().zip(&offsets) {
                *slot = self.amplitudes[base | off];
            }
            for (row, off) in offsets.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, amp) in gathered.iter().enumerate() {
                    acc += u.get(row, col) * amp;
                }
                self.amplitudes[base | off] = acc;
            }
        }
        Ok(())
    }
}

/// Formats a basis index as a bitstring with qubit 0 first.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|q| if (index >> q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// One bitstring per executed `measure_all`, in execution order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MeasurementRecord {
    pub bitstrings: Vec<String>,
}

/// An angle as written in the program and as handed to the gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppliedAngle {
    pub requested: f64,
    pub applied: f64,
}

/// Everything observable from one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Execution {
    pub record: MeasurementRecord,
    pub angles: Vec<AppliedAngle>,
}

/// Probabilities at or below this are floating-point residue (for example
/// `cos(π/2)²`) and are not listed as outcomes.
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-20;

/// Exact outcome probabilities of one `measure_all`.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub n_qubits: usize,
    pub probabilities: Vec<f64>,
}

impl Distribution {
    /// Outcomes above [`NEGLIGIBLE_PROBABILITY`] as `(bitstring, probability)`,
    /// sorted by bitstring.
    pub fn outcomes(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .probabilities
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > NEGLIGIBLE_PROBABILITY)
            .map(|(i, &p)| (bitstring(i, self.n_qubits), p))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Probability of a bitstring written qubit 0 first.
    pub fn get(&self, bits: &str) -> f64 {
        let index = bits
            .chars()
            .enumerate()
            .filter(|&(_, c)| c == '1')
            .map(|(q, _)| 1usize << q)
            .sum::<usize>();
        self.probabilities.get(index).copied().unwrap_or(0.0)
    }
}

/// What happens at a `measure_all`.
trait Measurement {
    fn measure(&mut self, state: &QuantumState) -> usize;
}

struct Sampled {
    rng: ChaCha8Rng,
    record: MeasurementRecord,
}

impl Measurement for Sampled {
    fn measure(&mut self, state: &QuantumState) -> usize {
        let draw: f64 = self.rng.random();
        let probabilities = state.probabilities();
        let total: f64 = probabilities.iter().sum();
        let target = draw * total;
        let mut cumulative = 0.0;
        let mut chosen = None;
        for (i, p) in probabilities.iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            cumulative += p;
            chosen = Some(i);
            if target < cumulative {
                break;
            }
        }
        let index = chosen.unwrap_or(0);
        self.record
            .bitstrings
            .push(bitstring(index, state.n_qubits()));
        index
    }
}

struct Exact {
    distributions: Vec<Distribution>,
}

impl Measurement for Exact {
    fn measure(&mut self, state: &QuantumState) -> usize {
        let probabilities = state.probabilities();
        let mut best = 0;
        for (i, p) in probabilities.iter().enumerate() {
            if *p > probabilities[best] {
                best = i;
            }
        }
        self.distributions.push(Distribution {
            n_qubits: state.n_qubits(),
            probabilities,
        });
        best
    }
}

fn execute(
    circuit: &FlatCircuit,
    quantize: bool,
    measurement: &mut dyn Measurement,
    angles: &mut Vec<AppliedAngle>,
) -> Result<(), Diagnostic> {
    if circuit.n_qubits > MAX_QUBITS {
        return Err(Diagnostic::error(
            Code::TooManyQubits,
            Pos::new(1, 1),
            format!(
                "a register of {} qubits exceeds the simulator limit of {MAX_QUBITS}",
                circuit.n_qubits
            ),
        ));
    }
    let mut state = QuantumState::zero(circuit.n_qubits);
    let mut destroyed = false;
    for gate in circuit.gates() {
        match gate.definition.action {
            GateAction::PrepareAll => {
                state = QuantumState::zero(circuit.n_qubits);
                destroyed = false;
                continue;
            }
            _ if destroyed => {
                return Err(Diagnostic::error(
                    Code::DestroyedState,
                    gate.pos,
                    format!(
                        "operation on destroyed state: `{}` follows measure_all without an intervening prepare_all",
                        gate.name()
                    ),
                ));
            }
            GateAction::MeasureAll => {
                let index = measurement.measure(&state);
                state.collapse(index);
                destroyed = true;
            }
            GateAction::Idle => {}
            _ => apply_gate(&mut state, gate, quantize, angles)?,
        }
    }
    Ok(())
}

fn apply_gate(
    state: &mut QuantumState,
    gate: &PrimitiveGate,
    quantize: bool,
    angles: &mut Vec<AppliedAngle>,
) -> Result<(), Diagnostic> {
    let internal = |message: String| Diagnostic::error(Code::Internal, gate.pos, message);
    let mut applied = Vec::with_capacity(gate.angles.len());
    for &requested in &gate.angles {
        let value = if quantize {
            quantize_angle(requested)
                .map_err(|e| internal(format!("cannot quantize angle {}", e.0)))?
        } else {
            requested
        };
        angles.push(AppliedAngle {
            requested,
            applied: value,
        });
        applied.push(value);
    }
    let u = unitary_of(&gate.definition, &applied)
        .map_err(|e| internal(format!("`{}`: {e}", gate.name())))?;
    state
        .apply_unitary(&u, &gate.qubits)
        .map_err(|e| internal(format!("`{}`: {e}", gate.name())))
}

/// Samples the circuit with the given seed.
pub fn run(
    circuit: &FlatCircuit,
    seed: u64,
    quantize: bool,
) -> Result<MeasurementRecord, Diagnostic> {
    run_traced(circuit, seed, quantize).map(|e| e.record)
}

/// Like [`run`], also reporting every angle handed to a gate.
pub fn run_traced(
    circuit: &FlatCircuit,
    seed: u64,
    quantize: bool,
) -> Result<Execution, Diagnostic> {
    let mut sampler = Sampled {
        rng: ChaCha8Rng::seed_from_u64(seed),
        record: MeasurementRecord::default(),
    };
    let mut angles = Vec::new();
    execute(circuit, quantize, &mut sampler, &mut angles)?;
    Ok(Execution {
        record: sampler.record,
        angles,
    })
}

/// The exact outcome distribution at every `measure_all`. After each one the
/// state continues from the most probable outcome, ties going to the lower
/// basis index.
pub fn probabilities(
    circuit: &FlatCircuit,
    quantize: bool,
) -> Result<Vec<Distribution>, Diagnostic> {
    let mut exact = Exact {
        distributions: Vec::new(),
    };
    execute(circuit, quantize, &mut exact, &mut Vec::new())?;
    Ok(exact.distributions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::analyze;
    use crate::expander::expand;
    use crate::gateset::{builtin_gateset, rotation, Axis};
    use crate::parser::parse;

    fn flat(src: &str) -> FlatCircuit {
        let program = parse(src).unwrap();
        let gates = builtin_gateset();
        expand(&analyze(&program, &gates).unwrap(), &gates).unwrap()
    }

    const SECTION_V: &str = "register q[2]\n\nloop 2 {\n    prepare_all\n    Px q[0]\n    measure_all\n}\n\nloop 2 {\n    prepare_all\n    Px q[1]\n    measure_all\n}\n";

    #[test]
    fn worked_example_record() {
        for seed in [0, 1, 99] {
            let record = run(&flat(SECTION_V), seed, false).unwrap();
            assert_eq!(record.bitstrings, ["10", "10", "01", "01"]);
        }
    }

    #[test]
    fn no_gates_measures_zero() {
        let record = run(&flat("register q[3]\nprepare_all\nmeasure_all"), 0, false).unwrap();
        assert_eq!(record.bitstrings, ["000"]);
    }

    #[test]
    fn little_endian_index() {
        let mut state = QuantumState::zero(2);
        state
            .apply_unitary(&rotation(Axis::X, std::f64::consts::PI), &[1])
            .unwrap();
        assert!((state.amplitudes()[2].norm() - 1.0).abs() < 1e-12);
        assert_eq!(bitstring(2, 2), "01");
    }

    #[test]
    fn apply_rejects_bad_targets() {
        let mut state = QuantumState::zero(2);
        let x = rotation(Axis::X, 1.0);
        assert!(matches!(
            state.apply_unitary(&x, &[0, 1]),
            Err(ApplyError::DimensionMismatch { .. })
        ));
        let xx = crate::gateset::molmer_sorensen(0.0, 1.0);
        assert_eq!(
            state.apply_unitary(&xx, &[1, 1]),
            Err(ApplyError::DuplicateQubit(1))
        );
        assert!(matches!(
            state.apply_unitary(&x, &[2]),
            Err(ApplyError::OutOfRange { .. })
        ));
    }

    #[test]
    fn exact_distributions() {
        let d = probabilities(
            &flat("register q[2]\nprepare_all\nPx q[0]\nmeasure_all"),
            false,
        )
        .unwrap();
        assert_eq!(d.len(), 1);
        let outcomes = d[0].outcomes();
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].0, "10");
        assert!((outcomes[0].1 - 1.0).abs() < 1e-12);

        let theta: f64 = 0.9;
        let d = probabilities(
            &flat("register q[1]\nprepare_all\nRx q[0] 0.9\nmeasure_all"),
            false,
        )
        .unwrap();
        assert!((d[0].get("0") - (theta / 2.0).cos().powi(2)).abs() < 1e-12);
        assert!((d[0].get("1") - (theta / 2.0).sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn bell_pair() {
        let d = probabilities(
            &flat("register q[2]\nprepare_all\nSxx q[0] q[1]\nmeasure_all"),
            false,
        )
        .unwrap();
        assert!((d[0].get("00") - 0.5).abs() < 1e-12);
        assert!((d[0].get("11") - 0.5).abs() < 1e-12);
        assert_eq!(d[0].outcomes().len(), 2);
    }

    #[test]
    fn destroyed_state_is_an_error() {
        let err = run(
            &flat("register q[1]\nprepare_all\nmeasure_all\nSx q[0]"),
            0,
            false,
        )
        .unwrap_err();
        assert_eq!(err.code, Code::DestroyedState);
        assert_eq!(err.pos.line, 4);
        let err = run(
            &flat("register q[1]\nprepare_all\nmeasure_all\nmeasure_all"),
            0,
            false,
        )
        .unwrap_err();
        assert_eq!(err.code, Code::DestroyedState);
        assert!(run(
            &flat("register q[1]\nprepare_all\nmeasure_all\nprepare_all\nSx q[0]\nmeasure_all"),
            0,
            false
        )
        .is_ok());
    }

    #[test]
    fn register_cap() {
        let err = run(&flat("register q[25]\nprepare_all\nmeasure_all"), 0, false).unwrap_err();
        assert_eq!(err.code, Code::TooManyQubits);
    }

    #[test]
    fn quantized_angles_are_recorded() {
        let exec = run_traced(
            &flat("register q[1]\nprepare_all\nRz q[0] 0.3\nmeasure_all"),
            0,
            true,
        )
        .unwrap();
        assert_eq!(exec.angles.len(), 1);
        let a = exec.angles[0];
        assert_eq!(a.requested, 0.3);
        assert_ne!(a.applied, 0.3);
        assert!((a.applied - a.requested).abs() <= crate::gateset::angle_grid_step() / 2.0);
    }
}

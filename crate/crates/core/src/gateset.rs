//! Native gates of the QSCOUT 1.0 target: signatures, durations, idle twins and
//! unitaries.
//!
//! Single-qubit rotations follow `R_a(θ) = exp(-iθσ_a/2)`. The entangling gate
//! is `MS(φ, θ) = exp(-i(θ/2) P⊗P)` with `P = cos φ X + sin φ Y`; since
//! `(P⊗P)² = I` this is `cos(θ/2) I - i sin(θ/2) P⊗P`.
//!
//! Two-qubit matrices are indexed with the *first* qubit argument as the most
//! significant bit: row `2a + b` is the basis state `|a b⟩`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Qubit,
    Angle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// How a gate acts on the state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateAction {
    /// Resets every qubit to `|0⟩`.
    PrepareAll,
    /// Measures every qubit in the `z` basis.
    MeasureAll,
    /// Rotation about an axis by the gate's angle argument.
    Rotation(Axis),
    /// Rotation about an axis by a fixed angle.
    FixedRotation(Axis, f64),
    /// Mølmer–Sørensen gate with `(φ, θ)` taken from the arguments.
    MolmerSorensen,
    /// Mølmer–Sørensen gate with fixed `(φ, θ)`.
    FixedMolmerSorensen { phi: f64, theta: f64 },
    /// Identity with a duration.
    Idle,
}

impl GateAction {
    pub fn is_global(self) -> bool {
        matches!(self, GateAction::PrepareAll | GateAction::MeasureAll)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateDefinition {
    pub name: String,
    pub params: Vec<ParamKind>,
    /// Arbitrary time units.
    pub duration: f64,
    pub action: GateAction,
}

impl GateDefinition {
    pub fn qubit_arity(&self) -> usize {
        self.params
            .iter()
            .filter(|&&k| k == ParamKind::Qubit)
            .count()
    }

    pub fn angle_arity(&self) -> usize {
        self.params
            .iter()
            .filter(|&&k| k == ParamKind::Angle)
            .count()
    }

    /// True for `prepare_all` and `measure_all`, which act on the whole register.
    pub fn is_global(&self) -> bool {
        self.action.is_global()
    }

    pub fn is_idle(&self) -> bool {
        self.action == GateAction::Idle
    }
}

/// Name given to the idle twin of a single- or two-qubit gate.
pub fn idle_twin_name(gate: &str) -> String {
    format!("I_{gate}")
}

/// Label of the variable-length idles the scheduler inserts automatically.
/// Not callable from source.
pub const PAD_IDLE: &str = "I_pad";

pub const DEFAULT_SINGLE_QUBIT_DURATION: f64 = 1.0;
pub const DEFAULT_TWO_QUBIT_DURATION: f64 = 10.0;
pub const DEFAULT_PREPARE_DURATION: f64 = 20.0;
pub const DEFAULT_MEASURE_DURATION: f64 = 20.0;

/// A registry of gate definitions keyed by name, in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSet {
    gates: IndexMap<String, Arc<GateDefinition>>,
}

impl GateSet {
    pub fn get(&self, name: &str) -> Option<&Arc<GateDefinition>> {
        self.gates.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.gates.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<GateDefinition>> {
        self.gates.values()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Returns a copy with durations replaced. Idle twins follow their gate.
    pub fn with_durations(&self, durations: &IndexMap<String, f64>) -> GateSet {
        let mut gates = self.gates.clone();
        for (name, &duration) in durations {
            for key in [name.clone(), idle_twin_name(name)] {
                if let Some(def) = gates.get_mut(&key) {
                    Arc::make_mut(def).duration = duration;
                }
            }
        }
        GateSet { gates }
    }
}

/// The QSCOUT 1.0 built-in gates plus one idle twin per single- and two-qubit
/// gate.
pub fn builtin_gateset() -> GateSet {
    use Axis::*;
    use GateAction::*;
    use ParamKind::{Angle, Qubit};

    let one = DEFAULT_SINGLE_QUBIT_DURATION;
    let two = DEFAULT_TWO_QUBIT_DURATION;
    let mut natives: Vec<GateDefinition> = Vec::new();
    let mut add = |name: &str, params: Vec<ParamKind>, duration: f64, action: GateAction| {
        natives.push(GateDefinition {
            name: name.to_owned(),
            params,
            duration,
            action,
        });
    };

    add("prepare_all", vec![], DEFAULT_PREPARE_DURATION, PrepareAll);
    add("measure_all", vec![], DEFAULT_MEASURE_DURATION, MeasureAll);
    add("Rx", vec![Qubit, Angle], one, Rotation(X));
    add("Ry", vec![Qubit, Angle], one, Rotation(Y));
    add("Rz", vec![Qubit, Angle], one, Rotation(Z));
    for (suffix, angle) in [("P", PI), ("S", PI / 2.0)] {
        for (axis, letter) in [(X, "x"), (Y, "y"), (Z, "z")] {
            add(
                &format!("{suffix}{letter}"),
                vec![Qubit],
                one,
                FixedRotation(axis, angle),
            );
        }
    }
    for (axis, letter) in [(X, "x"), (Y, "y"), (Z, "z")] {
        add(
            &format!("S{letter}d"),
            vec![Qubit],
            one,
            FixedRotation(axis, -PI / 2.0),
        );
    }
    add("MS", vec![Qubit, Qubit, Angle, Angle], two, MolmerSorensen);
    add(
        "Sxx",
        vec![Qubit, Qubit],
        two,
        FixedMolmerSorensen {
            phi: 0.0,
            theta: PI / 2.0,
        },
    );

    let mut gates = IndexMap::new();
    let mut idles = Vec::new();
    for def in natives {
        if !def.is_global() {
            idles.push(GateDefinition {
                name: idle_twin_name(&def.name),
                params: vec![ParamKind::Qubit; def.qubit_arity()],
                duration: def.duration,
                action: Idle,
            });
        }
        gates.insert(def.name.clone(), Arc::new(def));
    }
    for def in idles {
        gates.insert(def.name.clone(), Arc::new(def));
    }
    GateSet { gates }
}

/// A dense `d×d` complex matrix, row-major, `d ∈ {2, 4}` for native gates.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl UnitaryMatrix {
    pub fn from_rows(dim: usize, entries: Vec<Complex64>) -> Self {
        assert_eq!(entries.len(), dim * dim, "matrix needs dim² entries");
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn mul(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                for j in 0..d {
                    entries[i * d + j] += a * other.get(k, j);
                }
            }
        }
        UnitaryMatrix { dim: d, entries }
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        let d = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                entries[j * d + i] = self.get(i, j).conj();
            }
        }
        UnitaryMatrix { dim: d, entries }
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_deviation(&self, other: &UnitaryMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Like [`max_deviation`](Self::max_deviation) after removing the global
    /// phase between the two matrices.
    pub fn max_deviation_up_to_phase(&self, other: &UnitaryMatrix) -> f64 {
        // Align on the largest entry of `other`.
        let (idx, _) = other
            .entries
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (i, z)| {
                if z.norm() > best.1 {
                    (i, z.norm())
                } else {
                    best
                }
            });
        let a = self.entries[idx];
        let b = other.entries[idx];
        if a.norm() == 0.0 {
            return f64::INFINITY;
        }
        let phase = b / a;
        let phase = phase / phase.norm();
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| (x * phase - y).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tolerance: f64) -> bool {
        self.adjoint()
            .mul(self)
            .max_deviation(&UnitaryMatrix::identity(self.dim))
            <= tolerance
    }
}

impl fmt::Display for UnitaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in 0..self.dim {
            let cells: Vec<String> = (0..self.dim)
                .map(|c| format!("{:.6}", self.get(row, c)))
                .collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GateError {
    #[error("`{gate}` expects {expected} angle argument(s), got {found}")]
    AngleCount {
        gate: String,
        expected: usize,
        found: usize,
    },
    #[error("`{gate}` received a non-finite angle {value}")]
    NonFinite { gate: String, value: f64 },
    #[error("`{0}` acts on the whole register and has no unitary")]
    NotUnitary(String),
}

/// `cos(θ/2) I - i sin(θ/2) σ_axis`.
pub fn rotation(axis: Axis, theta: f64) -> UnitaryMatrix {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = (theta / 2.0).sin();
    let zero = Complex64::new(0.0, 0.0);
    let entries = match axis {
        Axis::X => vec![c, Complex64::new(0.0, -s), Complex64::new(0.0, -s), c],
        Axis::Y => vec![c, Complex64::new(-s, 0.0), Complex64::new(s, 0.0), c],
        Axis::Z => vec![
            Complex64::new((theta / 2.0).cos(), -s),
            zero,
            zero,
            Complex64::new((theta / 2.0).cos(), s),
        ],
    };
    UnitaryMatrix::from_rows(2, entries)
}

/// `cos(θ/2) I - i sin(θ/2) P⊗P`, `P = [[0, e^{-iφ}], [e^{iφ}, 0]]`.
pub fn molmer_sorensen(phi: f64, theta: f64) -> UnitaryMatrix {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let minus_i_s = Complex64::new(0.0, -(theta / 2.0).sin());
    let zero = Complex64::new(0.0, 0.0);
    let e_minus = Complex64::from_polar(1.0, -2.0 * phi);
    let e_plus = Complex64::from_polar(1.0, 2.0 * phi);
    UnitaryMatrix::from_rows(
        4,
        vec![
            c,
            zero,
            zero,
            minus_i_s * e_minus, //
            zero,
            c,
            minus_i_s,
            zero, //
            zero,
            minus_i_s,
            c,
            zero, //
            minus_i_s * e_plus,
            zero,
            zero,
            c,
        ],
    )
}

/// The matrix a gate applies to its qubit arguments, in argument order.
pub fn unitary_of(def: &GateDefinition, angles: &[f64]) -> Result<UnitaryMatrix, GateError> {
    let expected = def.angle_arity();
    if angles.len() != expected {
        return Err(GateError::AngleCount {
            gate: def.name.clone(),
            expected,
            found: angles.len(),
        });
    }
    if let Some(&value) = angles.iter().find(|a| !a.is_finite()) {
        return Err(GateError::NonFinite {
            gate: def.name.clone(),
            value,
        });
    }
    Ok(match def.action {
        GateAction::PrepareAll | GateAction::MeasureAll => {
            return Err(GateError::NotUnitary(def.name.clone()))
        }
        GateAction::Rotation(axis) => rotation(axis, angles[0]),
        GateAction::FixedRotation(axis, theta) => rotation(axis, theta),
        GateAction::MolmerSorensen => molmer_sorensen(angles[0], angles[1]),
        GateAction::FixedMolmerSorensen { phi, theta } => molmer_sorensen(phi, theta),
        GateAction::Idle => UnitaryMatrix::identity(1 << def.qubit_arity()),
    })
}

/// Number of grid intervals spanning `[-2π, 2π]`.
const ANGLE_GRID_INTERVALS: f64 = (1u64 << 40) as f64;

/// Spacing of the hardware angle grid: `4π / 2^40`.
pub fn angle_grid_step() -> f64 {
    4.0 * PI / ANGLE_GRID_INTERVALS
}

#[derive(Debug, Error, PartialEq)]
#[error("cannot quantize non-finite angle {0}")]
pub struct NonFiniteAngle(pub f64);

/// Brings `theta` into `[-2π, 2π]` by whole turns of `4π`, leaving values
/// already in range untouched. Rotations have period `4π`, so the action is
/// unchanged.
pub fn wrap_angle(theta: f64) -> f64 {
    let bound = 2.0 * PI;
    if (-bound..=bound).contains(&theta) {
        return theta;
    }
    let turn = 4.0 * PI;
    let wrapped = theta - turn * (theta / turn).round();
    wrapped.clamp(-bound, bound)
}

/// Wraps into `[-2π, 2π]` and snaps to the nearest point of the uniform grid
/// with `2^40` intervals over that closed range (both endpoints on the grid).
pub fn quantize_angle(theta: f64) -> Result<f64, NonFiniteAngle> {
    if !theta.is_finite() {
        return Err(NonFiniteAngle(theta));
    }
    let step = angle_grid_step();
    let half = ANGLE_GRID_INTERVALS / 2.0;
    let level = (wrap_angle(theta) / step).round().clamp(-half, half);
    Ok(level * step)
}

#[derive(Debug, Error, PartialEq)]
pub enum ManifestError {
    #[error("line {line}: expected `<gate-name> <duration>`")]
    Malformed { line: usize },
    #[error("line {line}: `{value}` is not a duration")]
    BadNumber { line: usize, value: String },
    #[error("line {line}: duration of `{gate}` must be non-negative, got {value}")]
    Negative {
        line: usize,
        gate: String,
        value: f64,
    },
    #[error("line {line}: unknown gate `{gate}`")]
    UnknownGate { line: usize, gate: String },
    #[error("line {line}: `{gate}` is an idle twin and inherits its gate's duration")]
    IdleTwin { line: usize, gate: String },
    #[error("line {line}: duration of `{gate}` given twice")]
    Duplicate { line: usize, gate: String },
}

/// Reads `<gate-name> <non-negative-number>` lines; `#` starts a comment.
/// Names are checked against the built-in gate set.
pub fn load_duration_manifest(text: &str) -> Result<IndexMap<String, f64>, ManifestError> {
    let builtin = builtin_gateset();
    let mut durations = IndexMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [gate, value] = fields[..] else {
            return Err(ManifestError::Malformed { line });
        };
        let duration: f64 = value
            .parse()
            .ok()
            .filter(|d: &f64| !d.is_nan() && d.is_finite())
            .ok_or_else(|| ManifestError::BadNumber {
                line,
                value: value.to_owned(),
            })?;
        if duration < 0.0 {
            return Err(ManifestError::Negative {
                line,
                gate: gate.to_owned(),
                value: duration,
            });
        }
        match builtin.get(gate) {
            None => {
                return Err(ManifestError::UnknownGate {
                    line,
                    gate: gate.to_owned(),
                })
            }
            Some(def) if def.is_idle() => {
                return Err(ManifestError::IdleTwin {
                    line,
                    gate: gate.to_owned(),
                })
            }
            Some(_) => {}
        }
        if durations.insert(gate.to_owned(), duration).is_some() {
            return Err(ManifestError::Duplicate {
                line,
                gate: gate.to_owned(),
            });
        }
    }
    Ok(durations)
}

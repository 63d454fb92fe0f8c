//! Source text to flat circuit in one call.

use crate::analyzer::{analyze_with, Capability, Qscout1};
use crate::ast::Program;
use crate::diagnostic::Diagnostic;
use crate::expander::{expand_with, FlatCircuit};
use crate::gateset::GateSet;
use crate::parser::parse;

/// A program that parsed, analyzed and expanded cleanly.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub program: Program,
    pub circuit: FlatCircuit,
    pub warnings: Vec<Diagnostic>,
}

/// Parses and analyzes, returning warnings on success.
pub fn check(source: &str, gates: &GateSet) -> Result<(Program, Vec<Diagnostic>), Vec<Diagnostic>> {
    let program = parse(source)?;
    let warnings = analyze_with(&program, gates, &Qscout1)?.warnings;
    Ok((program, warnings))
}

/// Parses, analyzes and expands with the QSCOUT 1.0 capability rules.
pub fn compile(source: &str, gates: &GateSet) -> Result<Compiled, Vec<Diagnostic>> {
    compile_with(source, gates, &Qscout1)
}

pub fn compile_with(
    source: &str,
    gates: &GateSet,
    capability: &dyn Capability,
) -> Result<Compiled, Vec<Diagnostic>> {
    let program = parse(source)?;
    let analyzed = analyze_with(&program, gates, capability)?;
    let warnings = analyzed.warnings.clone();
    let circuit = expand_with(&analyzed, gates, capability)?;
    Ok(Compiled {
        program,
        circuit,
        warnings,
    })
}

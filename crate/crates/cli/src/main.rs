//! `jaqal`: check, expand, schedule and run Jaqal programs.
//!
//! Exit status: 0 on success, 1 when the program (or a duration manifest) is
//! rejected or fails at run time, 2 when a file cannot be read or written.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jaqal::diagnostic::Diagnostic;
use jaqal::emitter::emit;
use jaqal::gateset::{builtin_gateset, load_duration_manifest, GateSet};
use jaqal::pipeline::{self, Compiled};
use jaqal::scheduler::schedule;
use jaqal::simulator::{probabilities, run, Distribution};

#[derive(Parser)]
#[command(
    name = "jaqal",
    version,
    about = "Toolchain for the Jaqal quantum assembly language"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and analyze a program, reporting diagnostics
    Check(Input),
    /// Write the fully expanded gate list
    Expand {
        #[command(flatten)]
        input: Input,
        /// Output file (standard output if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the gate timeline and total duration
    Schedule {
        #[command(flatten)]
        input: Input,
        /// Output file (standard output if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate the program and write its measurement results
    Run {
        #[command(flatten)]
        input: Input,
        /// Seed for measurement sampling
        #[arg(short, long, default_value_t = 0)]
        seed: u64,
        /// Snap every angle to the hardware angle grid before applying it
        #[arg(short, long)]
        quantize: bool,
        /// Write exact outcome probabilities per measurement instead of samples
        #[arg(short, long)]
        probabilities: bool,
        /// Output file (defaults to the input path with an `.out` extension)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    /// Jaqal source file
    file: PathBuf,
    /// Gate duration manifest (`<gate> <duration>` per line)
    #[arg(short, long, value_name = "MANIFEST")]
    durations: Option<PathBuf>,
}

enum Failure {
    /// The program or manifest was rejected; diagnostics already printed.
    Rejected,
    /// A file could not be read or written.
    Io(String),
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected) => ExitCode::from(1),
        Err(Failure::Io(message)) => {
            eprintln!("jaqal: {message}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Check(input) => {
            let (name, source, gates) = load(&input)?;
            match pipeline::check(&source, &gates) {
                Ok((_, warnings)) => {
                    report(&name, &warnings);
                    Ok(())
                }
                Err(diags) => {
                    report(&name, &diags);
                    Err(Failure::Rejected)
                }
            }
        }
        Command::Expand { input, output } => {
            let (_, compiled) = compile(&input)?;
            write_output(output.as_deref(), compiled.circuit.dump().as_bytes())
        }
        Command::Schedule { input, output } => {
            let (name, compiled) = compile(&input)?;
            let timeline = schedule(&compiled.circuit).map_err(|d| rejected(&name, d))?;
            write_output(output.as_deref(), timeline.dump().as_bytes())
        }
        Command::Run {
            input,
            seed,
            quantize,
            probabilities: exact,
            output,
        } => {
            let (name, compiled) = compile(&input)?;
            schedule(&compiled.circuit).map_err(|d| rejected(&name, d))?;
            let bytes = if exact {
                let distributions =
                    probabilities(&compiled.circuit, quantize).map_err(|d| rejected(&name, d))?;
                format_distributions(&distributions).into_bytes()
            } else {
                let record =
                    run(&compiled.circuit, seed, quantize).map_err(|d| rejected(&name, d))?;
                emit(&record).map_err(|e| {
                    eprintln!("{name}: {e}");
                    Failure::Rejected
                })?
            };
            let path = output.unwrap_or_else(|| input.file.with_extension("out"));
            write_output(Some(&path), &bytes)
        }
    }
}

fn report(name: &str, diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{}", d.render(name));
    }
}

fn rejected(name: &str, diag: Diagnostic) -> Failure {
    report(name, &[diag]);
    Failure::Rejected
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn load(input: &Input) -> Result<(String, String, GateSet), Failure> {
    let name = input.file.display().to_string();
    let source = read(&input.file)?;
    let mut gates = builtin_gateset();
    if let Some(manifest) = &input.durations {
        let text = read(manifest)?;
        let durations = load_duration_manifest(&text).map_err(|e| {
            eprintln!("{}: {e}", manifest.display());
            Failure::Rejected
        })?;
        gates = gates.with_durations(&durations);
    }
    Ok((name, source, gates))
}

fn compile(input: &Input) -> Result<(String, Compiled), Failure> {
    let (name, source, gates) = load(input)?;
    match pipeline::compile(&source, &gates) {
        Ok(compiled) => {
            report(&name, &compiled.warnings);
            Ok((name, compiled))
        }
        Err(diags) => {
            report(&name, &diags);
            Err(Failure::Rejected)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Outcome {
    match path {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Io(format!("cannot write to standard output: {e}"))),
    }
}

/// One line per measurement: `bitstring probability` pairs for every
/// outcome, sorted by bitstring, probabilities rounded to 12 decimals.
fn format_distributions(distributions: &[Distribution]) -> String {
    let mut out = String::new();
    for d in distributions {
        let pairs: Vec<String> = d
            .outcomes()
            .into_iter()
            .map(|(bits, p)| format!("{bits} {}", (p * 1e12).round() / 1e12))
            .collect();
        let _ = writeln!(out, "{}", pairs.join(" "));
    }
    out
}

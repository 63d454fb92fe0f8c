//! Golden test corpus.
//!
//! Each `name.jaqal` source has a `name.expect` sidecar with one expectation
//! per line (blank lines and `#` comments are ignored):
//!
//! ```text
//! ACCEPT              the program passes every check
//! REJECT <code>       some diagnostic carries this code
//! GATES <n>           the expansion has exactly n primitive gates
//! TOTAL <t>           the scheduled duration is exactly t
//! OUTPUT <file>       running with seed 0 writes exactly the bytes of <file>
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diagnostic::Code;
use crate::emitter::emit;
use crate::expander::count_primitive_gates;
use crate::gateset::GateSet;
use crate::pipeline::compile;
use crate::scheduler::schedule;
use crate::simulator::run;

#[derive(Clone, Debug, PartialEq)]
pub enum Expectation {
    Accept,
    Reject(Code),
    Gates(usize),
    Total(f64),
    Output(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusCase {
    pub name: String,
    pub source: PathBuf,
    pub expectations: Vec<Expectation>,
}

impl CorpusCase {
    pub fn expects_rejection(&self) -> Option<Code> {
        self.expectations.iter().find_map(|e| match e {
            Expectation::Reject(code) => Some(*code),
            _ => None,
        })
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Sidecar {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}: no .expect sidecar")]
    MissingSidecar(PathBuf),
}

/// The corpus shipped with this crate.
pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Every case of the shipped corpus, sorted by name.
pub fn corpus_manifest() -> Vec<CorpusCase> {
    load_corpus(&corpus_dir()).unwrap_or_else(|e| panic!("shipped corpus is broken: {e}"))
}

/// Every `.jaqal` file in `dir` with its sidecar, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusCase>, CorpusError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    let mut cases = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let source = entry.map_err(io(dir))?.path();
        if source.extension().is_none_or(|e| e != "jaqal") {
            continue;
        }
        let sidecar = source.with_extension("expect");
        if !sidecar.exists() {
            return Err(CorpusError::MissingSidecar(source));
        }
        let text = fs::read_to_string(&sidecar).map_err(io(&sidecar))?;
        let expectations =
            parse_sidecar(&text, dir).map_err(|(line, message)| CorpusError::Sidecar {
                path: sidecar.clone(),
                line,
                message,
            })?;
        let name = source
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        cases.push(CorpusCase {
            name,
            source,
            expectations,
        });
    }
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cases)
}

fn parse_sidecar(text: &str, dir: &Path) -> Result<Vec<Expectation>, (usize, String)> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (keyword, arg) = match line.split_once(char::is_whitespace) {
            Some((k, a)) => (k, Some(a.trim())),
            None => (line, None),
        };
        let err = |m: &str| (i + 1, m.to_string());
        let expectation = match (keyword, arg) {
            ("ACCEPT", None) => Expectation::Accept,
            ("REJECT", Some(code)) => Expectation::Reject(
                Code::from_str_opt(code).ok_or_else(|| err("unknown diagnostic code"))?,
            ),
            ("GATES", Some(n)) => Expectation::Gates(n.parse().map_err(|_| err("bad gate count"))?),
            ("TOTAL", Some(t)) => Expectation::Total(t.parse().map_err(|_| err("bad duration"))?),
            ("OUTPUT", Some(file)) => Expectation::Output(dir.join(file)),
            _ => {
                return Err(err(
                    "expected ACCEPT, REJECT <code>, GATES <n>, TOTAL <t> or OUTPUT <file>",
                ))
            }
        };
        out.push(expectation);
    }
    let accepts = out.contains(&Expectation::Accept);
    let rejects = out.iter().any(|e| matches!(e, Expectation::Reject(_)));
    if accepts == rejects {
        return Err((0, "exactly one of ACCEPT or REJECT is required".into()));
    }
    Ok(out)
}

/// Runs one case through the full pipeline, describing the first unmet
/// expectation.
pub fn check_case(case: &CorpusCase, gates: &GateSet) -> Result<(), String> {
    let source =
        fs::read_to_string(&case.source).map_err(|e| format!("{}: {e}", case.source.display()))?;
    let compiled = compile(&source, gates);
    if let Some(code) = case.expects_rejection() {
        return match compiled {
            Ok(_) => Err(format!(
                "expected rejection with `{code}`, but the program was accepted"
            )),
            Err(diags) if diags.iter().any(|d| d.code == code) => Ok(()),
            Err(diags) => Err(format!(
                "expected `{code}`, got: {}",
                diags
                    .iter()
                    .map(|d| d.code.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )),
        };
    }
    let compiled = compiled.map_err(|diags| {
        let rendered: Vec<String> = diags.iter().map(|d| d.render(&case.name)).collect();
        format!("expected acceptance, got:\n{}", rendered.join("\n"))
    })?;
    for expectation in &case.expectations {
        match expectation {
            Expectation::Accept | Expectation::Reject(_) => {}
            Expectation::Gates(n) => {
                let found = count_primitive_gates(&compiled.circuit);
                if found != *n {
                    return Err(format!("expected {n} gates, expansion has {found}"));
                }
            }
            Expectation::Total(t) => {
                let timeline = schedule(&compiled.circuit).map_err(|d| d.render(&case.name))?;
                if timeline.total_duration != *t {
                    return Err(format!(
                        "expected total {t}, scheduled {}",
                        timeline.total_duration
                    ));
                }
            }
            Expectation::Output(file) => {
                let expected = fs::read(file).map_err(|e| format!("{}: {e}", file.display()))?;
                schedule(&compiled.circuit).map_err(|d| d.render(&case.name))?;
                let record = run(&compiled.circuit, 0, false).map_err(|d| d.render(&case.name))?;
                let bytes = emit(&record).map_err(|e| e.to_string())?;
                if bytes != expected {
                    return Err(format!(
                        "output differs: expected {:?}, got {:?}",
                        String::from_utf8_lossy(&expected),
                        String::from_utf8_lossy(&bytes)
                    ));
                }
            }
        }
    }
    Ok(())
}

//! The measurement output file: one bitstring per `measure_all`, qubit 0
//! first, each line ending in a single LF.

use thiserror::Error;

use crate::simulator::MeasurementRecord;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OutputError {
    #[error("line {line}: expected {expected} bits, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: `{found}` is not a bit")]
    NotABit { line: usize, found: char },
    #[error("line {line}: carriage return in output (only LF line endings are allowed)")]
    CarriageReturn { line: usize },
    #[error("line {line}: empty bitstring")]
    Empty { line: usize },
}

/// Non-fatal findings while reading an output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OutputWarning {
    MissingFinalNewline,
}

fn check_line(line: usize, bits: &str, expected: Option<usize>) -> Result<usize, OutputError> {
    if let Some(found) = bits.chars().find(|c| *c != '0' && *c != '1') {
        return Err(if found == '\r' {
            OutputError::CarriageReturn { line }
        } else {
            OutputError::NotABit { line, found }
        });
    }
    let len = bits.len();
    if len == 0 {
        return Err(OutputError::Empty { line });
    }
    match expected {
        Some(expected) if expected != len => Err(OutputError::Ragged {
            line,
            expected,
            found: len,
        }),
        _ => Ok(len),
    }
}

/// Serializes a record. Every bitstring must have the same, nonzero length.
pub fn emit(record: &MeasurementRecord) -> Result<Vec<u8>, OutputError> {
    let mut expected = None;
    let mut out = Vec::new();
    for (i, bits) in record.bitstrings.iter().enumerate() {
        expected = Some(check_line(i + 1, bits, expected)?);
        out.extend_from_slice(bits.as_bytes());
        out.push(b'\n');
    }
    Ok(out)
}

/// Reads an output file back. A missing LF after the last line is tolerated
/// and reported as a warning.
pub fn parse_output(bytes: &[u8]) -> Result<(MeasurementRecord, Vec<OutputWarning>), OutputError> {
    let mut warnings = Vec::new();
    let mut record = MeasurementRecord::default();
    if bytes.is_empty() {
        return Ok((record, warnings));
    }
    let body = match bytes.strip_suffix(b"\n") {
        Some(body) => body,
        None => {
            warnings.push(OutputWarning::MissingFinalNewline);
            bytes
        }
    };
    let mut expected = None;
    for (i, line) in body.split(|b| *b == b'\n').enumerate() {
        // non-ASCII bytes are reported as the replacement character
        let text = String::from_utf8_lossy(line);
        expected = Some(check_line(i + 1, &text, expected)?);
        record.bitstrings.push(text.into_owned());
    }
    Ok((record, warnings))
}

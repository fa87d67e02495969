use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Instance, Operation, Time};

/// On-disk instance layout. Selected explicitly, never sniffed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// OR-Library: header `n m`, then one row of `m` (machine, duration) pairs per job.
    Standard,
    /// Taillard: header `n m`, an `n x m` duration matrix, then an `n x m` 1-based machine matrix.
    Taillard,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Standard => "std",
            Format::Taillard => "taillard",
        })
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "std" | "standard" => Ok(Format::Standard),
            "taillard" | "ta" => Ok(Format::Taillard),
            other => Err(format!("unknown instance format '{other}' (expected std|taillard)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: malformed header: {detail}")]
    MalformedHeader {
        line: usize,
        column: usize,
        detail: String,
    },
    #[error("line {line}, column {column}: invalid number '{token}'")]
    InvalidNumber {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("line {line}: wrong pair count for job {job}: expected {expected} values, found {found}")]
    WrongPairCount {
        line: usize,
        job: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: machine id out of range: {machine} (expected {min}..={max})")]
    MachineOutOfRange {
        line: usize,
        column: usize,
        machine: i64,
        min: i64,
        max: i64,
    },
    #[error("line {line}, column {column}: duplicate machine within job {job}: machine {machine}")]
    DuplicateMachine {
        line: usize,
        column: usize,
        job: usize,
        machine: i64,
    },
    #[error("line {line}, column {column}: non-positive duration {value}")]
    NonPositiveDuration {
        line: usize,
        column: usize,
        value: i64,
    },
    #[error("line {line}: matrix dimension mismatch: {detail}")]
    DimensionMismatch { line: usize, detail: String },
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl Token<'_> {
    fn int(&self) -> Result<i64, ParseError> {
        self.text.parse::<i64>().map_err(|_| ParseError::InvalidNumber {
            line: self.line,
            column: self.column,
            token: self.text.to_string(),
        })
    }
}

/// Non-empty, non-comment lines, each split into positioned tokens.
fn tokenize(text: &str) -> Vec<Vec<Token<'_>>> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim_start().starts_with('#') {
            continue;
        }
        let mut tokens = Vec::new();
        let mut start = None;
        for (col, ch) in raw.char_indices().chain(std::iter::once((raw.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (true, Some(s)) => {
                    tokens.push(Token {
                        text: &raw[s..col],
                        line: idx + 1,
                        column: s + 1,
                    });
                    start = None;
                }
                (false, None) => start = Some(col),
                _ => {}
            }
        }
        if !tokens.is_empty() {
            lines.push(tokens);
        }
    }
    lines
}

fn parse_header(lines: &[Vec<Token<'_>>]) -> Result<(usize, usize), ParseError> {
    let Some(header) = lines.first() else {
        return Err(ParseError::MalformedHeader {
            line: 1,
            column: 1,
            detail: "empty input".into(),
        });
    };
    if header.len() != 2 {
        return Err(ParseError::MalformedHeader {
            line: header[0].line,
            column: header[0].column,
            detail: format!("expected 'n m', found {} values", header.len()),
        });
    }
    let mut dims = [0usize; 2];
    for (slot, tok) in dims.iter_mut().zip(header) {
        let v = tok.int().map_err(|_| ParseError::MalformedHeader {
            line: tok.line,
            column: tok.column,
            detail: format!("'{}' is not an integer", tok.text),
        })?;
        if v < 1 {
            return Err(ParseError::MalformedHeader {
                line: tok.line,
                column: tok.column,
                detail: format!("dimension {v} must be positive"),
            });
        }
        *slot = v as usize;
    }
    Ok((dims[0], dims[1]))
}

#[derive(Clone, Copy)]
enum Layout {
    /// One job per row, `width` = 2m values.
    PairRows,
    /// Two stacked n x m matrices.
    Matrices,
}

impl Layout {
    fn row_error(self, line: usize, row: usize, expected: usize, found: usize) -> ParseError {
        match self {
            Layout::PairRows => ParseError::WrongPairCount {
                line,
                job: row,
                expected,
                found,
            },
            Layout::Matrices => ParseError::DimensionMismatch {
                line,
                detail: format!("row {row} has {found} values, expected {expected}"),
            },
        }
    }
}

/// Splits the body into `rows` rows of `width` tokens.
///
/// The body is read as a token stream, so rows may wrap across lines. When the
/// count is wrong and the body has one line per row, the short or long line is
/// reported.
fn split_rows<'a>(
    body: &[Vec<Token<'a>>],
    rows: usize,
    width: usize,
    layout: Layout,
) -> Result<Vec<Vec<Token<'a>>>, ParseError> {
    let flat: Vec<Token<'a>> = body.iter().flatten().copied().collect();
    if flat.len() == rows * width {
        return Ok(flat.chunks(width).map(<[Token<'a>]>::to_vec).collect());
    }
    if body.len() == rows {
        if let Some((row, line)) = body.iter().enumerate().find(|(_, l)| l.len() != width) {
            return Err(layout.row_error(line[0].line, row, width, line.len()));
        }
    }
    let line = flat.last().map_or(1, |t| t.line);
    Err(match layout {
        Layout::PairRows => {
            let row = (flat.len() / width).min(rows - 1);
            let found = flat.len().saturating_sub(row * width);
            layout.row_error(line, row, width, found)
        }
        Layout::Matrices => ParseError::DimensionMismatch {
            line,
            detail: format!(
                "expected {} values in two {}-row matrices, found {}",
                rows * width,
                rows / 2,
                flat.len()
            ),
        },
    })
}

fn check_routing(row: &[(Token<'_>, usize)], job: usize, n_machines: usize) -> Result<(), ParseError> {
    let mut seen = vec![false; n_machines];
    for (tok, machine) in row {
        if std::mem::replace(&mut seen[*machine], true) {
            return Err(ParseError::DuplicateMachine {
                line: tok.line,
                column: tok.column,
                job,
                machine: tok.int()?,
            });
        }
    }
    Ok(())
}

fn duration(tok: &Token<'_>) -> Result<Time, ParseError> {
    let v = tok.int()?;
    if v <= 0 {
        return Err(ParseError::NonPositiveDuration {
            line: tok.line,
            column: tok.column,
            value: v,
        });
    }
    Ok(v as Time)
}

fn machine(tok: &Token<'_>, base: i64, n_machines: usize) -> Result<usize, ParseError> {
    let v = tok.int()?;
    let max = base + n_machines as i64 - 1;
    if v < base || v > max {
        return Err(ParseError::MachineOutOfRange {
            line: tok.line,
            column: tok.column,
            machine: v,
            min: base,
            max,
        });
    }
    Ok((v - base) as usize)
}

fn finish(name: &str, jobs: Vec<Vec<Operation>>) -> Instance {
    Instance::new(name, jobs).expect("parser enforces instance invariants")
}

/// Parses the OR-Library "standard" layout (0-based machine ids).
pub fn parse_standard(text: &str) -> Result<Instance, ParseError> {
    let lines = tokenize(text);
    let (n, m) = parse_header(&lines)?;
    let rows = split_rows(&lines[1..], n, 2 * m, Layout::PairRows)?;
    let mut jobs = Vec::with_capacity(n);
    for (job, row) in rows.iter().enumerate() {
        let mut routing = Vec::with_capacity(m);
        let mut ops = Vec::with_capacity(m);
        for pair in row.chunks(2) {
            let mc = machine(&pair[0], 0, m)?;
            let d = duration(&pair[1])?;
            routing.push((pair[0], mc));
            ops.push(Operation::new(mc, d));
        }
        check_routing(&routing, job, m)?;
        jobs.push(ops);
    }
    Ok(finish("", jobs))
}

/// Parses the Taillard layout; machine ids are converted from 1-based to 0-based.
pub fn parse_taillard(text: &str) -> Result<Instance, ParseError> {
    let lines = tokenize(text);
    let (n, m) = parse_header(&lines)?;
    let rows = split_rows(&lines[1..], 2 * n, m, Layout::Matrices)?;
    let (times, machines) = rows.split_at(n);
    let mut jobs = Vec::with_capacity(n);
    for (job, (trow, mrow)) in times.iter().zip(machines).enumerate() {
        let mut routing = Vec::with_capacity(m);
        let mut ops = Vec::with_capacity(m);
        for (t, mt) in trow.iter().zip(mrow) {
            let d = duration(t)?;
            let mc = machine(mt, 1, m)?;
            routing.push((*mt, mc));
            ops.push(Operation::new(mc, d));
        }
        check_routing(&routing, job, m)?;
        jobs.push(ops);
    }
    Ok(finish("", jobs))
}

pub fn parse(text: &str, format: Format) -> Result<Instance, ParseError> {
    match format {
        Format::Standard => parse_standard(text),
        Format::Taillard => parse_taillard(text),
    }
}

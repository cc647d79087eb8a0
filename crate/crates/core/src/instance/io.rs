//! Plain-text instance and schedule files.
//!
//! Instance:
//! ```text
//! m <int>
//! n <int>
//! e <u> <v>        (zero or more, u ≺ v)
//! ```
//! Schedule:
//! ```text
//! T <int>
//! <job> <slot>     or   <job> D
//! ```
//! Lines starting with `#` are comments. Fields are separated by one space.

use super::{Instance, InstanceError, PartialSchedule, Placement};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `{0}` header")]
    MissingHeader(&'static str),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        msg: msg.into(),
    }
}

/// Splits on single spaces; empty fields (double spaces, trailing blanks) are rejected.
fn fields(line: &str, lineno: usize) -> Result<Vec<&str>, FormatError> {
    let parts: Vec<&str> = line.split(' ').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(syntax(lineno, "fields must be separated by single spaces"));
    }
    Ok(parts)
}

fn int(tok: &str, lineno: usize) -> Result<usize, FormatError> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return Err(syntax(
            lineno,
            format!("expected a non-negative integer, got `{tok}`"),
        ));
    }
    tok.parse()
        .map_err(|_| syntax(lineno, format!("integer `{tok}` out of range")))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let mut m = None;
    let mut n = None;
    let mut edges = Vec::new();
    for (lineno, line) in content_lines(text) {
        if line.contains('\r') {
            return Err(syntax(lineno, "CR characters are not allowed"));
        }
        let f = fields(line, lineno)?;
        match (f[0], f.len()) {
            ("m", 2) if m.is_none() => m = Some(int(f[1], lineno)?),
            ("n", 2) if m.is_some() && n.is_none() => n = Some(int(f[1], lineno)?),
            ("e", 3) if n.is_some() => {
                let (u, v) = (int(f[1], lineno)?, int(f[2], lineno)?);
                if u == v {
                    return Err(syntax(lineno, "edge endpoints must differ"));
                }
                edges.push((u, v));
            }
            _ => return Err(syntax(lineno, format!("unexpected line `{line}`"))),
        }
    }
    let m = m.ok_or(FormatError::MissingHeader("m"))?;
    let n = n.ok_or(FormatError::MissingHeader("n"))?;
    Ok(Instance::new(n, m, &edges)?)
}

pub fn write_instance(inst: &Instance, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "m {}", inst.m());
    let _ = writeln!(out, "n {}", inst.n());
    for &(u, v) in inst.edges() {
        let _ = writeln!(out, "e {u} {v}");
    }
    out
}

/// Parses a schedule for an instance with `n` jobs. Jobs without a line stay unassigned.
pub fn parse_schedule(text: &str, n: usize) -> Result<PartialSchedule, FormatError> {
    let mut sched: Option<PartialSchedule> = None;
    for (lineno, line) in content_lines(text) {
        if line.contains('\r') {
            return Err(syntax(lineno, "CR characters are not allowed"));
        }
        let f = fields(line, lineno)?;
        if f.len() != 2 {
            return Err(syntax(lineno, format!("unexpected line `{line}`")));
        }
        match sched.as_mut() {
            None => {
                if f[0] != "T" {
                    return Err(FormatError::MissingHeader("T"));
                }
                sched = Some(PartialSchedule::new(n, int(f[1], lineno)?));
            }
            Some(s) => {
                let j = int(f[0], lineno)?;
                if j >= n {
                    return Err(syntax(lineno, format!("job {j} outside 0..{n}")));
                }
                if s.placement(j) != Placement::Unassigned {
                    return Err(syntax(lineno, format!("job {j} listed twice")));
                }
                if f[1] == "D" {
                    s.discard(j);
                } else {
                    s.assign(j, int(f[1], lineno)?);
                }
            }
        }
    }
    sched.ok_or(FormatError::MissingHeader("T"))
}

pub fn write_schedule(sched: &PartialSchedule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "T {}", sched.horizon());
    for j in 0..sched.n() {
        match sched.placement(j) {
            Placement::Slot(t) => {
                let _ = writeln!(out, "{j} {t}");
            }
            Placement::Discarded => {
                let _ = writeln!(out, "{j} D");
            }
            Placement::Unassigned => {}
        }
    }
    out
}

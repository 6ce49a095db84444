//! Plain-text model archive format.
//!
//! A model file is line-oriented; `#` starts a comment (inline or whole
//! line) and blank lines are ignored. The first significant line must be
//! `format_version 1`. Header lines then name scalars, and section keywords
//! switch to data lines:
//!
//! ```text
//! format_version 1
//! m 4                      # number of states (required, before sections)
//! n 2                      # size scale; defaults to log2(m)
//! family two-level N=2 …   # free-form provenance label (optional)
//! potential                # exactly m lines, one float per state
//! 0
//! 1.5
//! 1.5
//! 3
//! kinetic                  # one line per link: i j value, with i < j;
//! 0 1 -1                   # value is the kinetic matrix entry K(i,j):
//! 0 2 -1                   # negative = sign-free link, positive = signed
//! 1 3 -1
//! 2 3 0.25
//! cavity                   # optional: one state id per line
//! 0
//! ```
//!
//! Floats are written with the shortest round-tripping representation, so
//! write → parse → write is byte-identical.

use crate::fock::{FockError, Hamiltonian};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("first significant line must be 'format_version 1'")]
    MissingVersion,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("line {line}: unknown keyword '{token}'")]
    UnknownField { line: usize, token: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing required header '{0}'")]
    MissingHeader(&'static str),
    #[error("missing or empty required section '{0}'")]
    MissingSection(&'static str),
    #[error("expected {expected} potential entries, found {found}")]
    PotentialCount { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] FockError),
}

/// A parsed model file: the Hamiltonian plus the optional annotations.
#[derive(Debug, Clone)]
pub struct ParsedModel {
    pub h: Hamiltonian,
    pub family: Option<String>,
    pub cavity: Option<Vec<usize>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Potential,
    Kinetic,
    Cavity,
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 =
        tok.parse().map_err(|_| syntax(line, format!("expected a number, got '{tok}'")))?;
    if !v.is_finite() {
        return Err(syntax(line, "numbers must be finite"));
    }
    Ok(v)
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, ParseError> {
    tok.parse().map_err(|_| syntax(line, format!("expected a state id, got '{tok}'")))
}

/// Parse a model file.
pub fn parse_model(text: &str) -> Result<ParsedModel, ParseError> {
    let mut m: Option<usize> = None;
    let mut n: Option<f64> = None;
    let mut family: Option<String> = None;
    let mut potential: Vec<f64> = Vec::new();
    let mut links: Vec<(usize, usize, f64)> = Vec::new();
    let mut cavity: Option<Vec<usize>> = None;
    let mut section = Section::Header;
    let mut version_seen = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let first = tokens.next().unwrap();

        if !version_seen {
            if first != "format_version" {
                return Err(ParseError::MissingVersion);
            }
            let v = tokens
                .next()
                .ok_or_else(|| syntax(line, "format_version needs a value"))?
                .parse::<u32>()
                .map_err(|_| syntax(line, "format_version must be an integer"))?;
            if v != 1 {
                return Err(ParseError::UnsupportedVersion(v));
            }
            version_seen = true;
            continue;
        }

        if first.chars().next().unwrap().is_ascii_alphabetic() {
            let expect_header = |sec: Section| -> Result<(), ParseError> {
                if sec == Section::Header {
                    Ok(())
                } else {
                    Err(syntax(line, format!("header line '{first}' inside a section")))
                }
            };
            match first {
                "m" => {
                    expect_header(section)?;
                    let tok = tokens.next().ok_or_else(|| syntax(line, "m needs a value"))?;
                    m = Some(parse_usize(tok, line)?);
                }
                "n" => {
                    expect_header(section)?;
                    let tok = tokens.next().ok_or_else(|| syntax(line, "n needs a value"))?;
                    n = Some(parse_f64(tok, line)?);
                }
                "family" => {
                    expect_header(section)?;
                    let rest = content["family".len()..].trim();
                    if rest.is_empty() {
                        return Err(syntax(line, "family needs a label"));
                    }
                    family = Some(rest.to_string());
                }
                "potential" => {
                    if m.is_none() {
                        return Err(syntax(line, "m must come before the potential section"));
                    }
                    section = Section::Potential;
                }
                "kinetic" => section = Section::Kinetic,
                "cavity" => {
                    section = Section::Cavity;
                    cavity = Some(Vec::new());
                }
                "format_version" => return Err(syntax(line, "duplicate format_version")),
                other => {
                    return Err(ParseError::UnknownField { line, token: other.to_string() })
                }
            }
            continue;
        }

        match section {
            Section::Header => return Err(syntax(line, "data line before any section")),
            Section::Potential => {
                potential.push(parse_f64(first, line)?);
                if tokens.next().is_some() {
                    return Err(syntax(line, "potential lines carry exactly one number"));
                }
            }
            Section::Kinetic => {
                let i = parse_usize(first, line)?;
                let j_tok =
                    tokens.next().ok_or_else(|| syntax(line, "kinetic line needs 'i j value'"))?;
                let v_tok =
                    tokens.next().ok_or_else(|| syntax(line, "kinetic line needs 'i j value'"))?;
                if tokens.next().is_some() {
                    return Err(syntax(line, "kinetic lines carry exactly three fields"));
                }
                let j = parse_usize(j_tok, line)?;
                if i >= j {
                    return Err(syntax(line, format!("links are written with i < j, got {i} {j}")));
                }
                links.push((i, j, parse_f64(v_tok, line)?));
            }
            Section::Cavity => {
                cavity.as_mut().unwrap().push(parse_usize(first, line)?);
                if tokens.next().is_some() {
                    return Err(syntax(line, "cavity lines carry exactly one state id"));
                }
            }
        }
    }

    if !version_seen {
        return Err(ParseError::MissingVersion);
    }
    let m = m.ok_or(ParseError::MissingHeader("m"))?;
    if potential.is_empty() {
        return Err(ParseError::MissingSection("potential"));
    }
    if potential.len() != m {
        return Err(ParseError::PotentialCount { expected: m, found: potential.len() });
    }
    if links.is_empty() {
        return Err(ParseError::MissingSection("kinetic"));
    }
    let n = n.unwrap_or_else(|| (m as f64).log2());
    let h = Hamiltonian::new(m, n, potential, &links)?;
    Ok(ParsedModel { h, family, cavity })
}

/// Render a model (with optional family label and cavity set) in the archive
/// format. Floats use the shortest representation that parses back to the
/// same bits, so the output is stable under round trips.
pub fn write_model(h: &Hamiltonian, family: Option<&str>, cavity: Option<&[usize]>) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    out.push_str("format_version 1\n");
    let _ = writeln!(out, "m {}", h.dim());
    let _ = writeln!(out, "n {}", h.size_scale());
    if let Some(label) = family {
        let _ = writeln!(out, "family {label}");
    }
    out.push_str("potential\n");
    for s in 0..h.dim() {
        let _ = writeln!(out, "{}", h.v(s));
    }
    out.push_str("kinetic\n");
    for (i, j, k) in h.kinetic_links() {
        let _ = writeln!(out, "{i} {j} {k}");
    }
    if let Some(ids) = cavity {
        out.push_str("cavity\n");
        for id in ids {
            let _ = writeln!(out, "{id}");
        }
    }
    out
}

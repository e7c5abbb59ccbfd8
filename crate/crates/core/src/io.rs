//! File formats: CHF1 binary field snapshots, CSV with a provenance header
//! line, and one-line JSON summaries with fixed key order.

use crate::field::TorusField;
use crate::params::Dim;
use std::fmt;
use std::io::{self, Read, Write};

#[derive(Debug)]
pub enum IoError {
    Io(io::Error),
    /// CHF1 header missing or malformed.
    BadHeader(String),
    /// Payload length disagrees with the header's n^d.
    PayloadMismatch { expected: usize, got: usize },
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Io(e) => write!(f, "{e}"),
            IoError::BadHeader(msg) => write!(f, "bad CHF1 header: {msg}"),
            IoError::PayloadMismatch { expected, got } => {
                write!(f, "payload mismatch: header promises {expected} values, found {got}")
            }
        }
    }
}

impl std::error::Error for IoError {}

impl From<io::Error> for IoError {
    fn from(e: io::Error) -> Self {
        IoError::Io(e)
    }
}

/// Write a CHF1 snapshot: one ASCII header line
/// `CHF1 d=<d> n=<n> L=<L> phi=<phi>` then n^d little-endian binary64
/// values in row-major order. Floats in the header use shortest
/// round-trip formatting, so they re-parse to the exact bits.
pub fn write_chf1<W: Write>(w: &mut W, u: &TorusField, phi: f64) -> Result<(), IoError> {
    writeln!(w, "CHF1 d={} n={} L={} phi={}", u.d(), u.n(), u.l(), phi)?;
    for v in u.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read a CHF1 snapshot back. Rejects malformed headers and any payload
/// whose length disagrees with n^d from the header.
pub fn read_chf1<R: Read>(r: &mut R) -> Result<(TorusField, f64), IoError> {
    let mut header = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let got = r.read(&mut byte)?;
        if got == 0 {
            return Err(IoError::BadHeader("unterminated header line".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 4096 {
            return Err(IoError::BadHeader("header line too long".into()));
        }
    }
    let header = String::from_utf8(header)
        .map_err(|_| IoError::BadHeader("header is not ASCII".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("CHF1") {
        return Err(IoError::BadHeader(format!("missing magic in line: {header}")));
    }
    let mut d = None;
    let mut n = None;
    let mut l = None;
    let mut phi = None;
    for tok in parts {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| IoError::BadHeader(format!("token without '=': {tok}")))?;
        match key {
            "d" => d = val.parse::<u32>().ok(),
            "n" => n = val.parse::<usize>().ok(),
            "L" => l = val.parse::<f64>().ok(),
            "phi" => phi = val.parse::<f64>().ok(),
            other => return Err(IoError::BadHeader(format!("unknown key {other}"))),
        }
    }
    let (d, n, l, phi) = match (d, n, l, phi) {
        (Some(d), Some(n), Some(l), Some(phi)) => (d, n, l, phi),
        _ => return Err(IoError::BadHeader(format!("incomplete header: {header}"))),
    };
    let dim = Dim::new(d).map_err(|e| IoError::BadHeader(e.to_string()))?;
    let expected = n
        .checked_pow(d)
        .ok_or_else(|| IoError::BadHeader(format!("n^d overflows: n={n}, d={d}")))?;

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != expected * 8 {
        return Err(IoError::PayloadMismatch { expected, got: payload.len() / 8 });
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut field = TorusField::constant(dim, n, l, 0.0);
    field.values_mut().copy_from_slice(&values);
    Ok((field, phi))
}

/// Fixed CSV float format: 17 significant digits, exact round trip.
pub fn fmt_g(x: f64) -> String {
    format!("{x:.16e}")
}

/// Provenance line placed first in every CSV: tool version, subcommand,
/// full parameter set.
pub fn provenance_line(subcommand: &str, params: &[(&str, String)]) -> String {
    let mut line = format!("# chb {} {subcommand}", env!("CARGO_PKG_VERSION"));
    for (k, v) in params {
        line.push_str(&format!(" {k}={v}"));
    }
    line
}

/// Write a CSV: provenance line, header line, then numeric rows.
pub fn write_csv<W: Write>(
    w: &mut W,
    provenance: &str,
    header: &str,
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<(), IoError> {
    writeln!(w, "{provenance}")?;
    writeln!(w, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| fmt_g(x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// One-line JSON object with insertion-ordered keys (diff-friendly).
#[derive(Debug, Default, Clone)]
pub struct JsonObject {
    entries: Vec<(String, String)>,
}

fn escape_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

impl JsonObject {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(mut self, key: &str, value: f64) -> Self {
        assert!(value.is_finite(), "JSON numbers must be finite: {key}={value}");
        self.entries.push((key.to_string(), format!("{value}")));
        self
    }

    pub fn int(mut self, key: &str, value: i64) -> Self {
        self.entries.push((key.to_string(), format!("{value}")));
        self
    }

    pub fn bool(mut self, key: &str, value: bool) -> Self {
        self.entries.push((key.to_string(), format!("{value}")));
        self
    }

    pub fn str(mut self, key: &str, value: &str) -> Self {
        self.entries.push((key.to_string(), format!("\"{}\"", escape_json(value))));
        self
    }

    pub fn to_line(&self) -> String {
        let body: Vec<String> = self
            .entries
            .iter()
            .map(|(k, v)| format!("\"{}\":{v}", escape_json(k)))
            .collect();
        format!("{{{}}}", body.join(","))
    }
}

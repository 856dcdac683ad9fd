//! Helpers shared by the line-oriented text formats.

use crate::error::{parse_err, Result};

/// Decimal text with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(s: &str, what: &'static str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| parse_err(what, line, format!("bad number {s:?}: {e}")))
}

pub fn parse_usize(s: &str, what: &'static str, line: usize) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| parse_err(what, line, format!("bad count {s:?}: {e}")))
}

pub fn parse_u64(s: &str, what: &'static str, line: usize) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|e| parse_err(what, line, format!("bad integer {s:?}: {e}")))
}

pub fn join_f64s(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

/// Parse `key=value` tokens from a header line such as `history v1 m=2 n=1`.
pub fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace().find_map(|tok| {
        let (k, v) = tok.split_once('=')?;
        (k == key).then_some(v)
    })
}

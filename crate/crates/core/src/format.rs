//! Shared text encodings for reals and line-oriented record files.

use crate::error::{Error, Result};

/// Largest power-of-two denominator printed as an exact short decimal.
const DYADIC_BITS: i32 = 30;

/// Exact decimal for dyadic rationals with small denominators (such as
/// `0.375`), otherwise 17 significant digits. Both forms parse back to the
/// same `f64`.
pub fn format_real(x: f64) -> String {
    if x.is_finite() && x.abs() < 2f64.powi(52) && (x * 2f64.powi(DYADIC_BITS)).fract() == 0.0 {
        format!("{x}")
    } else {
        format_sig17(x)
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_sig17(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_real(text: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number `{text}`")))
}

/// Parses `(x1,x2,...)`.
pub fn parse_real_list(text: &str) -> Result<Vec<f64>> {
    let inner = text
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("list `{text}` must be parenthesised")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(parse_real).collect()
}

pub fn format_real_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|&v| format_real(v)).collect();
    format!("({})", parts.join(","))
}

/// Splits a record line into `key=value` fields separated by whitespace.
pub(crate) fn fields(line: &str) -> Result<Vec<(&str, &str)>> {
    line.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{tok}`")))
        })
        .collect()
}

/// Header line `# <kind> policy=<id> seed=<n>`; returns `(policy, seed)`.
pub(crate) fn parse_header(line: &str, kind: &str) -> Option<(String, u64)> {
    let rest = line.strip_prefix('#')?.trim();
    let rest = rest.strip_prefix(kind)?;
    let mut policy = String::new();
    let mut seed = 0;
    for tok in rest.split_whitespace() {
        match tok.split_once('=') {
            Some(("policy", v)) => policy = v.to_string(),
            Some(("seed", v)) => seed = v.parse().ok()?,
            _ => {}
        }
    }
    Some((policy, seed))
}

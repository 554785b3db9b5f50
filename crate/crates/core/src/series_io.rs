//! Newline-delimited series files: UTF-8, one decimal literal per line.
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub fn parse_series(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => {
                return Err(Error::MalformedLine {
                    line: i + 1,
                    content: raw.to_string(),
                });
            }
        }
    }
    Ok(out)
}

pub fn format_series(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 20);
    for v in values {
        writeln!(out, "{v}").expect("writing to a String cannot fail");
    }
    out
}

pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    parse_series(&fs::read_to_string(path)?)
}

pub fn write_series(path: &Path, values: &[f64]) -> Result<()> {
    fs::write(path, format_series(values))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reports_the_offending_line() {
        let err = parse_series("1.0\n2.5\nabc\n").unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 3, .. }));
        assert!(parse_series("1.0\nNaN\n").is_err());
        assert_eq!(parse_series("1\n\n-2e-3\n").unwrap(), vec![1.0, -0.002]);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(values in proptest::collection::vec(-1e300f64..1e300, 0..50)) {
            let back = parse_series(&format_series(&values)).unwrap();
            prop_assert_eq!(back.len(), values.len());
            for (a, b) in values.iter().zip(&back) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

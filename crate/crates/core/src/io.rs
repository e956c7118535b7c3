//! Shared text formatting and CSV plumbing.
//!
//! All numeric output is written with 17 significant digits so that files
//! are digest-stable and every value round-trips exactly through `parse()`.

use crate::{Error, Result};

/// Format a float with full round-trip precision.
pub fn fmt_f64(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        // Keep integers readable; still exact.
        format!("{x:.1}")
    } else {
        format!("{x:.16e}")
    }
}

/// Assemble one CSV line from already-formatted fields.
pub fn csv_line(fields: &[String]) -> String {
    fields.join(",")
}

/// Split a CSV payload into trimmed lines, skipping blank ones.
pub fn csv_rows(text: &str) -> Vec<(usize, Vec<String>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(|f| f.trim().to_string()).collect()))
        .collect()
}

/// Parse one CSV field as f64 with a line-numbered error.
pub fn parse_field(field: &str, what: &str, line: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::config(
            format!("cannot parse {what} from {field:?}"),
            Some(what),
            Some(line),
        )
    })
}

/// Check that a header row matches the expected schema exactly.
pub fn expect_header(rows: &[(usize, Vec<String>)], expected: &[&str]) -> Result<()> {
    match rows.first() {
        Some((line, fields)) => {
            if fields
                .iter()
                .map(String::as_str)
                .ne(expected.iter().copied())
            {
                return Err(Error::config(
                    format!("bad CSV header {fields:?}, expected {expected:?}"),
                    None,
                    Some(*line),
                ));
            }
            Ok(())
        }
        None => Err(Error::config("empty CSV input", None, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [
            0.1,
            -3.5e-17,
            6.62607015e-34,
            154000.0,
            std::f64::consts::PI,
            1.0 / 3.0,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }

    #[test]
    fn header_check() {
        let rows = csv_rows("a,b,c\n1,2,3\n");
        assert!(expect_header(&rows, &["a", "b", "c"]).is_ok());
        assert!(expect_header(&rows, &["a", "b"]).is_err());
    }
}

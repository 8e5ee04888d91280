//! Line-oriented flat-file persistence helpers.
//!
//! Files in this family start with a magic+version line ("bluesim-network v1",
//! "bluesim-codebook v1"), followed by `key = value` lines in a fixed order.
//! Vector values are space-separated. Floats are written with Rust's shortest
//! round-trip formatting, so save followed by load is bit-exact.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Join values with single spaces using their `Display` form.
pub(crate) fn join<T: std::fmt::Display>(values: &[T]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out
}

/// Strict sequential reader for the `key = value` format.
pub(crate) struct Reader<'a> {
    path: String,
    lines: std::str::Lines<'a>,
    lineno: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(path: &std::path::Path, text: &'a str) -> Self {
        Reader {
            path: path.display().to_string(),
            lines: text.lines(),
            lineno: 0,
        }
    }

    fn err(&self, reason: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            reason: format!("line {}: {}", self.lineno, reason),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        self.lineno += 1;
        self.lines
            .next()
            .ok_or_else(|| self.err("unexpected end of file".into()))
    }

    /// First line must match the expected magic+version exactly.
    pub(crate) fn expect_magic(&mut self, magic: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != magic {
            return Err(self.err(format!("expected header {magic:?}, found {line:?}")));
        }
        Ok(())
    }

    /// Next line must be `key = value` for the given key; returns the value.
    pub(crate) fn kv(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| self.err(format!("expected `{key} = ...`, found {line:?}")))?;
        if k.trim() != key {
            return Err(self.err(format!("expected key {key:?}, found {:?}", k.trim())));
        }
        Ok(v.trim())
    }

    pub(crate) fn kv_f64(&mut self, key: &str) -> Result<f64> {
        let v = self.kv(key)?;
        v.parse()
            .map_err(|_| self.err(format!("{key}: invalid float {v:?}")))
    }

    pub(crate) fn kv_u64(&mut self, key: &str) -> Result<u64> {
        let v = self.kv(key)?;
        v.parse()
            .map_err(|_| self.err(format!("{key}: invalid integer {v:?}")))
    }

    pub(crate) fn kv_usize(&mut self, key: &str) -> Result<usize> {
        let v = self.kv(key)?;
        v.parse()
            .map_err(|_| self.err(format!("{key}: invalid integer {v:?}")))
    }

    /// Space-separated float vector of exactly `len` entries.
    pub(crate) fn kv_f64_vec(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let raw = self.kv(key)?;
        let vals = parse_f64_seq(raw)
            .map_err(|bad| self.err(format!("{key}: invalid float {bad:?}")))?;
        if vals.len() != len {
            return Err(self.err(format!(
                "{key}: expected {len} values, found {}",
                vals.len()
            )));
        }
        Ok(vals)
    }

    /// Space-separated float vector of any length (possibly empty).
    pub(crate) fn kv_f64_seq(&mut self, key: &str) -> Result<Vec<f64>> {
        let raw = self.kv(key)?;
        parse_f64_seq(raw).map_err(|bad| self.err(format!("{key}: invalid float {bad:?}")))
    }

    /// No content may remain after the last expected line.
    pub(crate) fn expect_end(&mut self) -> Result<()> {
        if let Some(line) = self.lines.next() {
            self.lineno += 1;
            return Err(self.err(format!("expected end of file, found {line:?}")));
        }
        Ok(())
    }
}

fn parse_f64_seq(raw: &str) -> std::result::Result<Vec<f64>, String> {
    raw.split_whitespace()
        .map(|tok| tok.parse().map_err(|_| tok.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn floats_round_trip_exactly() {
        for &x in &[
            0.0,
            1.0,
            -30.0,
            1e-12,
            std::f64::consts::PI,
            0.1_f64.next_up(),
            f64::MIN_POSITIVE,
        ] {
            let s = format!("{x}");
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn reader_walks_fixed_order() {
        let text = "demo v1\nk = 3\ngains = 0.5 0.25 0.125\nhistory =\n";
        let mut r = Reader::new(Path::new("demo"), text);
        r.expect_magic("demo v1").unwrap();
        assert_eq!(r.kv_usize("k").unwrap(), 3);
        assert_eq!(r.kv_f64_vec("gains", 3).unwrap(), vec![0.5, 0.25, 0.125]);
        assert!(r.kv_f64_seq("history").unwrap().is_empty());
        r.expect_end().unwrap();
    }

    #[test]
    fn reader_rejects_wrong_key_and_trailing_content() {
        let mut r = Reader::new(Path::new("demo"), "demo v1\nwrong = 1\n");
        r.expect_magic("demo v1").unwrap();
        assert!(r.kv_f64("k").is_err());

        let mut r = Reader::new(Path::new("demo"), "demo v1\nextra\n");
        r.expect_magic("demo v1").unwrap();
        assert!(r.expect_end().is_err());
    }

    #[test]
    fn reader_rejects_wrong_magic_and_length() {
        let mut r = Reader::new(Path::new("demo"), "other v2\n");
        assert!(r.expect_magic("demo v1").is_err());

        let mut r = Reader::new(Path::new("demo"), "demo v1\ngains = 1 2\n");
        r.expect_magic("demo v1").unwrap();
        assert!(r.kv_f64_vec("gains", 3).is_err());
    }
}

//! Line-oriented text format shared by the model files.
//!
//! Each line is a key followed by space-separated values. Floats are written
//! in Rust's shortest round-trip form so a reload reproduces every bit.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Default)]
pub struct TextWriter {
    buf: String,
}

impl TextWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn line<I, T>(&mut self, key: &str, values: I) -> &mut Self
    where
        I: IntoIterator<Item = T>,
        T: std::fmt::Display,
    {
        self.buf.push_str(key);
        for v in values {
            let _ = write!(self.buf, " {v}");
        }
        self.buf.push('\n');
        self
    }

    pub fn value<T: std::fmt::Display>(&mut self, key: &str, v: T) -> &mut Self {
        self.line(key, [v])
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub struct TextReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> TextReader<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
        }
    }

    /// Key of the next non-empty line, without consuming it.
    pub fn peek_key(&mut self) -> Option<&'a str> {
        while let Some((_, l)) = self.lines.peek() {
            if l.trim().is_empty() {
                self.lines.next();
                continue;
            }
            return l.split_whitespace().next();
        }
        None
    }

    /// Consumes the next line, which must start with `key`, and returns its values.
    pub fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        self.peek_key();
        let (no, line) = self
            .lines
            .next()
            .ok_or_else(|| Error::ModelFormat(format!("unexpected end of file, wanted `{key}`")))?;
        let mut parts = line.split_whitespace();
        let found = parts.next().unwrap_or("");
        if found != key {
            return Err(Error::ModelFormat(format!(
                "line {}: expected `{key}`, found `{found}`",
                no + 1
            )));
        }
        Ok(parts.collect())
    }

    pub fn parse_all<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        self.expect(key)?
            .into_iter()
            .map(|v| parse(key, v))
            .collect()
    }

    pub fn parse_one<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let vals = self.expect(key)?;
        match vals.as_slice() {
            [v] => parse(key, v),
            _ => Err(Error::ModelFormat(format!("`{key}` takes one value"))),
        }
    }
}

pub fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::ModelFormat(format!("`{key}`: cannot parse `{v}`")))
}

/// Checks a `<name> <version>` header line.
pub fn check_header(r: &mut TextReader<'_>, name: &str, version: &str) -> Result<()> {
    let vals = r.expect(name)?;
    match vals.as_slice() {
        [v] if *v == version => Ok(()),
        [v] => Err(Error::ModelVersion {
            found: (*v).to_string(),
            expected: version.to_string(),
        }),
        _ => Err(Error::ModelFormat(format!("bad `{name}` header"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        let xs = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE];
        let mut w = TextWriter::new();
        w.line("xs", xs);
        let text = w.finish();
        let mut r = TextReader::new(&text);
        let back: Vec<f64> = r.parse_all("xs").unwrap();
        for (a, b) in xs.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_version_mismatch() {
        let mut r = TextReader::new("thing 2\n");
        assert!(matches!(check_header(&mut r, "thing", "1"), Err(Error::ModelVersion { .. })));
        let mut r = TextReader::new("other 1\n");
        assert!(matches!(check_header(&mut r, "thing", "1"), Err(Error::ModelFormat(_))));
    }
}

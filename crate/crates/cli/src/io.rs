//! Correspondence text format and atomic file output.
//!
//! The text format is one pair per line, `x y x' y'`, whitespace- or
//! comma-separated, with `#` starting a comment. Values are written with
//! 17 significant digits, which round-trips every finite f64 exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use vtm_core::{CorrespondenceSet, Point2};

/// A parse failure with its 1-based line number.
#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses the text correspondence format. Ids are assigned positionally
/// over the data lines (0-based).
pub fn parse_correspondences(text: &str) -> Result<CorrespondenceSet, ParseError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let data = raw.split('#').next().unwrap_or("").trim();
        if data.is_empty() {
            continue;
        }
        let fields: Vec<&str> = data
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 4 {
            return Err(ParseError {
                line,
                message: format!("expected 4 values, found {}", fields.len()),
            });
        }
        let mut values = [0.0f64; 4];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse::<f64>().map_err(|_| ParseError {
                line,
                message: format!("`{field}` is not a number"),
            })?;
            if !slot.is_finite() {
                return Err(ParseError {
                    line,
                    message: format!("`{field}` is not finite"),
                });
            }
        }
        pairs.push((
            Point2::new(values[0], values[1]),
            Point2::new(values[2], values[3]),
        ));
    }
    Ok(CorrespondenceSet::from_pairs(pairs))
}

/// 17-significant-digit decimal form; parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the canonical text form (single-space separated, `\n` lines).
pub fn write_correspondences(corr: &CorrespondenceSet) -> String {
    let mut out = String::new();
    for (_, r, s) in corr.iter() {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            fmt_f64(r.x),
            fmt_f64(r.y),
            fmt_f64(s.x),
            fmt_f64(s.y)
        );
    }
    out
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::env::current_dir()?,
    };
    fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?
        .to_string_lossy()
        .into_owned();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

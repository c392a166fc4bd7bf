//! `<label> <index>:<value> ...` text format.
//!
//! Labels are `+1`, `1` or `-1`. Text after `#` is ignored, blank lines are
//! skipped. Indices must be strictly increasing within a line; a repeated
//! index is an error rather than being summed.

use super::{DataError, Dataset, DatasetMeta, Instance, Label, SparseVector};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

pub fn parse_libsvm<R: BufRead>(reader: R, source: &str) -> Result<Dataset, DataError> {
    let mut instances = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(inst) = parse_line(&line, lineno + 1)? {
            instances.push(inst);
        }
    }
    Ok(Dataset::new(instances, DatasetMeta::new(source)))
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset, DataError> {
    parse_libsvm(text.as_bytes(), "<memory>")
}

pub fn read_libsvm_file(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_libsvm(BufReader::new(file), &path.display().to_string())
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<Instance>, DataError> {
    let err = |message: String| DataError::Parse {
        line: lineno,
        message,
    };
    let content = line.split('#').next().unwrap_or("");
    let mut tokens = content.split_ascii_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let label = match label_tok {
        "+1" | "1" => Label::Positive,
        "-1" => Label::Negative,
        other => return Err(err(format!("label `{other}` is not +1 or -1"))),
    };

    let mut pairs: Vec<(u32, f64)> = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("malformed pair `{tok}`")))?;
        let idx: u32 = idx
            .parse()
            .map_err(|_| err(format!("bad index in `{tok}`")))?;
        if idx == 0 {
            return Err(err(format!("index 0 in `{tok}` (indices are 1-based)")));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| err(format!("bad value in `{tok}`")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite value in `{tok}`")));
        }
        if let Some(&(prev, _)) = pairs.last() {
            if idx == prev {
                return Err(err(format!("duplicate index {idx}")));
            }
            if idx < prev {
                return Err(err(format!(
                    "index {idx} after {prev}: indices must increase"
                )));
            }
        }
        pairs.push((idx, val));
    }
    let features = SparseVector::from_pairs(pairs).map_err(|e| err(e.to_string()))?;
    Ok(Some(Instance { features, label }))
}

/// Canonical text: `+1`/`-1` labels, entries in index order, shortest
/// round-trip decimals, one `\n`-terminated line per instance.
pub fn write_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for inst in &data.instances {
        out.push_str(&inst.label.to_string());
        for (i, v) in inst.features.entries() {
            let _ = write!(out, " {i}:{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm_file(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    std::fs::write(path, write_libsvm(data))?;
    Ok(())
}

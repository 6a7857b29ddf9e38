//! Sparse `label index:value ...` files with 1-based, strictly ascending indices.
//!
//! Blank lines and lines starting with `#` are skipped. Original labels must
//! be numeric; they are sorted and remapped to classes `1..=K`.

use std::fmt::Write as _;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::losses::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseFile {
    pub dataset: Dataset,
    /// Original label of class `i + 1` at position `i`, ascending.
    pub label_map: Vec<f64>,
}

pub fn parse_sparse(path: &Path) -> Result<SparseFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sparse_str(&text)
}

pub fn parse_sparse_str(text: &str) -> Result<SparseFile> {
    let mut raw_labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut dim = 0;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: ln, message };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("label `{label_tok}` is not a number")))?;
        if !label.is_finite() {
            return Err(err(format!("label `{label_tok}` is not finite")));
        }
        let mut entries = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected `index:value`, found `{tok}`")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad index `{idx}`")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("index {idx} does not ascend past {last}")));
            }
            let val: f64 = val.parse().map_err(|_| err(format!("bad value `{val}`")))?;
            last = idx;
            entries.push((idx, val));
        }
        dim = dim.max(last);
        raw_labels.push(label);
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no examples".into(),
        });
    }
    let mut label_map = raw_labels.clone();
    label_map.sort_by(f64::total_cmp);
    label_map.dedup();
    let labels: Vec<Label> = raw_labels
        .iter()
        .map(|l| Label::from_index(label_map.binary_search_by(|m| m.total_cmp(l)).expect("present")))
        .collect();
    let mut features = vec![0.0; rows.len() * dim];
    for (r, entries) in rows.iter().enumerate() {
        for &(idx, val) in entries {
            features[r * dim + idx - 1] = val;
        }
    }
    let classes = label_map.len();
    Ok(SparseFile {
        dataset: Dataset::new(features, labels, dim, classes)?,
        label_map,
    })
}

/// Writes non-zero features plus the last column (even when zero), so the
/// dimension survives a round trip. Labels are written through `label_map`
/// when given, otherwise one-based.
pub fn write_sparse_string(data: &Dataset, label_map: Option<&[f64]>) -> Result<String> {
    if let Some(map) = label_map {
        if map.len() != data.classes() {
            return Err(Error::DimensionMismatch {
                expected: data.classes(),
                found: map.len(),
            });
        }
    }
    let d = data.dim();
    let mut s = String::new();
    for (x, y) in data.rows() {
        match label_map {
            Some(map) => write!(s, "{}", map[y.index()]).unwrap(),
            None => write!(s, "{}", y.one_based()).unwrap(),
        }
        for (j, &v) in x.iter().enumerate() {
            if v != 0.0 || j + 1 == d {
                write!(s, " {}:{}", j + 1, v).unwrap();
            }
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_sparse(path: &Path, data: &Dataset, label_map: Option<&[f64]>) -> Result<()> {
    let text = write_sparse_string(data, label_map)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let f = parse_sparse_str("3 1:0.5 7:-2.0\n").unwrap();
        let d = &f.dataset;
        assert_eq!(d.dim(), 7);
        assert_eq!(d.row(0), &[0.5, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0]);
        assert_eq!(f.label_map, vec![3.0]);
        assert_eq!(d.label(0).one_based(), 1);
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let f = parse_sparse_str("# header\n\n-1 2:1\n   \n+1 1:3\n").unwrap();
        assert_eq!(f.dataset.len(), 2);
        assert_eq!(f.label_map, vec![-1.0, 1.0]);
        assert_eq!(f.dataset.label(1).one_based(), 2);
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let err = parse_sparse_str("1 1:2\n2 3:1 2:1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(parse_sparse_str("1 0:2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_sparse_str("x 1:2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_sparse_str("1 1-2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_sparse_str("# only a comment\n").is_err());
    }

    #[test]
    fn write_keeps_dimension() {
        let f = parse_sparse_str("2 1:1.5\n5 4:0\n").unwrap();
        let text = write_sparse_string(&f.dataset, Some(&f.label_map)).unwrap();
        assert_eq!(text, "2 1:1.5 4:0\n5 4:0\n");
        let back = parse_sparse_str(&text).unwrap();
        assert_eq!(back, f);
    }
}

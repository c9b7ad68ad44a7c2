//! Plain-text formats.
//!
//! * features: one sample per line, comma-separated reals, uniform width
//! * labels / truth: `sample_index,class_index` lines
//! * predictions: `sample_index,argmax_class,F_0,...,F_{c-1}`
//!
//! Blank lines are ignored; errors carry 1-based line numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::partition::FeatureMatrix;

fn parse_err(path: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        reason: reason.into(),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_features(text: &str, source: &str) -> Result<FeatureMatrix> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(source, i + 1, format!("non-numeric field `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(
                    source,
                    i + 1,
                    format!("non-finite value `{field}`"),
                ));
            }
            values.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(parse_err(
                    source,
                    i + 1,
                    format!("row has {count} values, expected {w}"),
                ));
            }
            _ => {}
        }
        rows += 1;
    }
    let Some(d) = width else {
        return Err(parse_err(source, 0, "no samples"));
    };
    FeatureMatrix::new(rows, d, values)
}

/// Parses `sample,class` pairs. Sample indices must be below `n`; a sample
/// may appear at most once.
pub fn parse_labels(text: &str, source: &str, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut seen_at = vec![0usize; n];
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_err(
                source,
                i + 1,
                format!("expected `sample,class`, got {} fields", fields.len()),
            ));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| {
                parse_err(
                    source,
                    i + 1,
                    format!("{what} `{s}` is not a non-negative integer"),
                )
            })
        };
        let sample = parse(fields[0], "sample index")?;
        let class = parse(fields[1], "class index")?;
        if sample >= n {
            return Err(parse_err(
                source,
                i + 1,
                format!("sample index {sample} out of range (n = {n})"),
            ));
        }
        if seen_at[sample] != 0 {
            return Err(parse_err(
                source,
                i + 1,
                format!(
                    "sample {sample} already labeled on line {}",
                    seen_at[sample]
                ),
            ));
        }
        seen_at[sample] = i + 1;
        out.push((sample, class));
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    parse_features(&read(path)?, &path.display().to_string())
}

pub fn read_labels(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    parse_labels(&read(path)?, &path.display().to_string(), n)
}

/// Features and labeled samples, ready for a run.
pub fn ingest(features: &Path, labels: &Path) -> Result<(FeatureMatrix, Vec<(usize, usize)>)> {
    let x = read_features(features)?;
    let y = read_labels(labels, x.rows())?;
    Ok((x, y))
}

pub fn format_predictions(f: &DMatrix<f64>, classes: &[usize]) -> String {
    let mut out = String::with_capacity(f.nrows() * (8 + 24 * f.ncols()));
    for (i, row) in f.row_iter().enumerate() {
        let _ = write!(out, "{i},{}", classes[i]);
        for v in row.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn format_features(x: &FeatureMatrix) -> String {
    let mut out = String::new();
    for i in 0..x.rows() {
        let row: Vec<String> = x.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn format_labels(pairs: &[(usize, usize)]) -> String {
    pairs.iter().map(|(s, c)| format!("{s},{c}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_files() {
        let x = parse_features("1,2\n3,4\n5,6\n7,8\n", "f").unwrap();
        assert_eq!((x.rows(), x.dim()), (4, 2));
        let y = parse_labels("0,1\n3,0\n", "l", 4).unwrap();
        assert_eq!(y, vec![(0, 1), (3, 0)]);
        assert!(parse_labels("", "l", 4).unwrap().is_empty());
    }

    #[test]
    fn ragged_row_names_line() {
        let err = parse_features("1,2\n3\n", "feat.csv").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                path: "feat.csv".into(),
                line: 2,
                reason: "row has 1 values, expected 2".into()
            }
        );
        assert!(err.to_string().starts_with("feat.csv:2:"));
    }

    #[test]
    fn label_errors() {
        assert!(matches!(
            parse_features("1,x\n", "f"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_labels("0,1\n5,0\n", "l", 4),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_labels("0,1\n\n0,0\n", "l", 4),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_labels("0,-1\n", "l", 4),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_labels("0,1,2\n", "l", 4),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn prediction_lines() {
        let f = DMatrix::from_row_slice(2, 2, &[0.5, -0.25, 0.0, 1.0]);
        assert_eq!(format_predictions(&f, &[0, 1]), "0,0,0.5,-0.25\n1,1,0,1\n");
    }

    #[test]
    fn features_round_trip() {
        let x = FeatureMatrix::from_rows(&[vec![0.1, -2.5e-7], vec![3.0, 1e300]]).unwrap();
        assert_eq!(parse_features(&format_features(&x), "x").unwrap(), x);
    }
}

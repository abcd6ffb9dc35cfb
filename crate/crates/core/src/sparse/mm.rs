use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::SparseMatrix;

#[derive(Debug, Error)]
pub enum MmError {
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: io::Error },
    #[error("read error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed header: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: malformed size line: {msg}")]
    Size { line: usize, msg: String },
    #[error("line {line}: index ({row}, {col}) out of range for a {n}x{n} matrix")]
    Index { line: usize, row: usize, col: usize, n: usize },
    #[error("line {line}: non-numeric token {token:?}")]
    Number { line: usize, token: String },
    #[error("expected {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix<f64>, MmError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|source| MmError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    read_matrix_market_from(BufReader::new(f))
}

/// Coordinate format, `real` or `integer` field, `general` or `symmetric`.
/// Symmetric files are expanded to full storage and duplicates are summed.
pub fn read_matrix_market_from<R: BufRead>(reader: R) -> Result<SparseMatrix<f64>, MmError> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or(MmError::Header {
        line: 1,
        msg: "empty file".into(),
    })?;
    let header = header?;
    let toks: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    let herr = |msg: &str| MmError::Header {
        line: 1,
        msg: msg.to_string(),
    };
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(herr("expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    if toks[2] != "coordinate" {
        return Err(herr(&format!("unsupported format {:?}", toks[2])));
    }
    if toks[3] != "real" && toks[3] != "integer" {
        return Err(herr(&format!("unsupported field {:?}", toks[3])));
    }
    let sym = match toks[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(herr(&format!("unsupported symmetry {other:?}"))),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut count = 0usize;
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(MmError::Size {
                        line: lineno,
                        msg: "expected 'rows cols nnz'".into(),
                    });
                }
                let nums: Vec<usize> = parts
                    .iter()
                    .map(|p| {
                        p.parse::<usize>().map_err(|_| MmError::Number {
                            line: lineno,
                            token: p.to_string(),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if nums[0] != nums[1] {
                    return Err(MmError::Size {
                        line: lineno,
                        msg: format!("matrix is {}x{}, only square matrices are supported", nums[0], nums[1]),
                    });
                }
                size = Some((nums[0], nums[2]));
                triplets.reserve(if sym == Symmetry::Symmetric { 2 * nums[2] } else { nums[2] });
            }
            Some((n, _)) => {
                if parts.len() != 3 {
                    return Err(MmError::Number {
                        line: lineno,
                        token: t.to_string(),
                    });
                }
                let parse_idx = |p: &str| {
                    p.parse::<usize>().map_err(|_| MmError::Number {
                        line: lineno,
                        token: p.to_string(),
                    })
                };
                let r = parse_idx(parts[0])?;
                let c = parse_idx(parts[1])?;
                let v: f64 = parts[2].parse().map_err(|_| MmError::Number {
                    line: lineno,
                    token: parts[2].to_string(),
                })?;
                if r == 0 || c == 0 || r > n || c > n {
                    return Err(MmError::Index {
                        line: lineno,
                        row: r,
                        col: c,
                        n,
                    });
                }
                triplets.push((r - 1, c - 1, v));
                if sym == Symmetry::Symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
                count += 1;
            }
        }
    }
    let (n, nnz) = size.ok_or(MmError::Size {
        line: 0,
        msg: "missing size line".into(),
    })?;
    if count != nnz {
        return Err(MmError::EntryCount {
            expected: nnz,
            found: count,
        });
    }
    Ok(SparseMatrix::from_triplets(n, &triplets).expect("indices validated"))
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseMatrix<f64>) -> Result<(), MmError> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|source| MmError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(f);
    write_matrix_market_to(&mut w, a)?;
    w.flush()?;
    Ok(())
}

/// General coordinate format, 17 significant digits so values round-trip.
pub fn write_matrix_market_to<W: Write>(w: &mut W, a: &SparseMatrix<f64>) -> Result<(), MmError> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, c + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<SparseMatrix<f64>, MmError> {
        read_matrix_market_from(s.as_bytes())
    }

    #[test]
    fn identity_2x2() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 1.0\n").unwrap();
        assert_eq!((a.n(), a.nnz()), (2, 2));
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(a.get(1, 1), 1.0);
    }

    #[test]
    fn symmetric_lower_triangle_expands() {
        let a = parse("%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n").unwrap();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.to_dense(), crate::dense::DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]));
    }

    #[test]
    fn duplicates_are_summed() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 0.5\n1 1 0.5\n2 2 1\n").unwrap();
        let mut dense = [[0.0f64; 2]; 2];
        for (r, c, v) in [(0, 0, 0.5), (0, 0, 0.5), (1, 1, 1.0)] {
            dense[r][c] += v;
        }
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), dense[0][0]);
        assert_eq!(a.get(0, 0), 1.0);
    }

    #[test]
    fn integer_field_accepted() {
        let a = parse("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 7\n").unwrap();
        assert_eq!(a.get(0, 0), 7.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse("%%MatrixMarket matrix array real general\n"), Err(MmError::Header { line: 1, .. })));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate complex general\n"),
            Err(MmError::Header { .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"),
            Err(MmError::Index { line: 3, row: 3, .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n"),
            Err(MmError::Number { line: 3, .. })
        ));
        assert!(matches!(
            parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"),
            Err(MmError::EntryCount { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn write_read_round_trip_is_bit_exact() {
        let a = SparseMatrix::from_triplets(
            3,
            &[(0, 0, 1.0 / 3.0), (0, 2, -2.5e-300), (1, 1, std::f64::consts::PI), (2, 0, 1e300)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_matrix_market_to(&mut buf, &a).unwrap();
        let b = read_matrix_market_from(&buf[..]).unwrap();
        assert_eq!(a, b);
    }
}

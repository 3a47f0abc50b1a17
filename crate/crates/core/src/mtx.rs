//! MatrixMarket coordinate format.
//!
//! Only `matrix coordinate (real|integer) (general|symmetric)` is understood.
//! Indices are 1-based on disk and 0-based in memory.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Real,
    Integer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

#[derive(Clone, Debug)]
pub struct Coordinate {
    pub nrows: usize,
    pub ncols: usize,
    pub field: Field,
    pub symmetry: Symmetry,
    /// `%` comment lines after the banner, without the leading `%`.
    pub comments: Vec<String>,
    /// Entries as stored in the file. Symmetric files are *not* expanded here.
    pub entries: Vec<(usize, usize, f64)>,
}

impl Coordinate {
    /// Entries with the mirrored half of a symmetric file filled in.
    pub fn expanded_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.entries.len() * 2);
        for &(i, j, v) in &self.entries {
            out.push((i, j, v));
            if self.symmetry == Symmetry::Symmetric && i != j {
                out.push((j, i, v));
            }
        }
        out
    }
}

fn parse_banner(line: &str) -> Result<(Field, Symmetry)> {
    let tokens: Vec<String> = line
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(Error::parse(1, "missing %%MatrixMarket banner"));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(Error::parse(
            1,
            format!("unsupported object/format `{} {}`", tokens[1], tokens[2]),
        ));
    }
    let field = match tokens[3].as_str() {
        "real" => Field::Real,
        "integer" => Field::Integer,
        other => return Err(Error::parse(1, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(Error::parse(1, format!("unsupported symmetry `{other}`"))),
    };
    Ok((field, symmetry))
}

pub fn read_coordinate<R: BufRead>(reader: R) -> Result<Coordinate> {
    let mut lines = reader.lines().enumerate();
    let banner = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::parse(1, e.to_string()))?,
        None => return Err(Error::Data("empty MatrixMarket file".into())),
    };
    let (field, symmetry) = parse_banner(&banner)?;

    let mut comments = Vec::new();
    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let trimmed = line.trim();
        if let Some(c) = trimmed.strip_prefix('%') {
            if size.is_none() {
                comments.push(c.trim().to_string());
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if tokens.len() != 3 {
                    return Err(Error::parse(lineno, "size line must be `rows cols nnz`"));
                }
                let parse = |t: &str| {
                    t.parse::<usize>()
                        .map_err(|_| Error::parse(lineno, format!("bad size token `{t}`")))
                };
                let dims = (parse(tokens[0])?, parse(tokens[1])?, parse(tokens[2])?);
                entries.reserve(dims.2);
                size = Some(dims);
            }
            Some((nrows, ncols, _)) => {
                if tokens.len() != 3 {
                    return Err(Error::parse(lineno, "entry line must be `row col value`"));
                }
                let index = |t: &str, bound: usize| -> Result<usize> {
                    let i = t
                        .parse::<usize>()
                        .map_err(|_| Error::parse(lineno, format!("bad index `{t}`")))?;
                    if i == 0 || i > bound {
                        return Err(Error::parse(
                            lineno,
                            format!("index {i} outside declared bound 1..={bound}"),
                        ));
                    }
                    Ok(i - 1)
                };
                let i = index(tokens[0], nrows)?;
                let j = index(tokens[1], ncols)?;
                let v = tokens[2]
                    .parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("bad value `{}`", tokens[2])))?;
                entries.push((i, j, v));
            }
        }
    }
    let (nrows, ncols, nnz) = size.ok_or_else(|| Error::parse(1, "missing size line"))?;
    if entries.len() != nnz {
        return Err(Error::Data(format!(
            "header declares {nnz} entries, found {}",
            entries.len()
        )));
    }
    if symmetry == Symmetry::Symmetric && nrows != ncols {
        return Err(Error::Data("symmetric matrix must be square".into()));
    }
    Ok(Coordinate {
        nrows,
        ncols,
        field,
        symmetry,
        comments,
        entries,
    })
}

/// Writes the lower triangle of a symmetric matrix given as a dense
/// column-major accessor. Zero entries are not stored.
pub fn write_symmetric<W: Write>(
    mut w: W,
    n: usize,
    get: impl Fn(usize, usize) -> f64,
    comments: &[String],
) -> std::io::Result<()> {
    let mut integer = true;
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j..n {
            let v = get(i, j);
            if v != 0.0 {
                integer &= v.fract() == 0.0 && v.abs() < 9.0e15;
                entries.push((i, j, v));
            }
        }
    }
    let field = if integer { "integer" } else { "real" };
    writeln!(w, "%%MatrixMarket matrix coordinate {field} symmetric")?;
    for c in comments {
        writeln!(w, "% {c}")?;
    }
    writeln!(w, "{n} {n} {}", entries.len())?;
    for (i, j, v) in entries {
        if integer {
            writeln!(w, "{} {} {}", i + 1, j + 1, v as i64)?;
        } else {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_general_file() {
        let src = "%%MatrixMarket matrix coordinate real general\n% note\n3 3 2\n1 1 2\n3 2 1\n";
        let c = read_coordinate(src.as_bytes()).unwrap();
        assert_eq!((c.nrows, c.ncols), (3, 3));
        assert_eq!(c.entries, vec![(0, 0, 2.0), (2, 1, 1.0)]);
        assert_eq!(c.comments, vec!["note".to_string()]);
    }

    #[test]
    fn rejects_out_of_bounds_index() {
        let src = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n";
        let err = read_coordinate(src.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_bad_banner() {
        for src in [
            "2 2 0\n",
            "%%MatrixMarket matrix array real general\n2 2\n",
            "%%MatrixMarket matrix coordinate complex general\n1 1 0\n",
        ] {
            assert!(read_coordinate(src.as_bytes()).is_err(), "{src}");
        }
    }

    #[test]
    fn symmetric_round_trip() {
        let m = [[4.0, 1.0, 0.0], [1.0, 4.0, 2.5], [0.0, 2.5, 4.0]];
        let mut buf = Vec::new();
        write_symmetric(&mut buf, 3, |i, j| m[i][j], &["hello".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n% hello\n3 3 5\n")
        );
        let c = read_coordinate(buf.as_slice()).unwrap();
        let mut dense = [[0.0; 3]; 3];
        for (i, j, v) in c.expanded_entries() {
            dense[i][j] += v;
        }
        assert_eq!(dense, m);
    }

    #[test]
    fn integer_field_when_counts() {
        let mut buf = Vec::new();
        write_symmetric(&mut buf, 2, |i, j| if i == j { 3.0 } else { 1.0 }, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "%%MatrixMarket matrix coordinate integer symmetric\n2 2 3\n1 1 3\n2 1 1\n2 2 3\n"
        );
    }
}

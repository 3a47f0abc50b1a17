//! Loading column data and labels into the canonical features × observations
//! layout, plus tf-idf weighting for term-by-document counts.

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mtx;

/// Compressed sparse column storage. Row indices are sorted within a column
/// and there are no duplicate or explicitly zero entries.
#[derive(Clone, Debug)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by_key(|t| (t.1, t.0));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut cols = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(i);
                values.push(v);
                cols.push(j);
                last = Some((i, j));
            }
        }
        // summed duplicates may cancel
        let mut keep_rows = Vec::with_capacity(row_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((i, j), v) in row_idx.into_iter().zip(cols).zip(values) {
            if v != 0.0 {
                keep_rows.push(i);
                keep_vals.push(v);
                col_ptr[j + 1] += 1;
            }
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        CscMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx: keep_rows,
            values: keep_vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(row, value)` pairs of column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[range.clone()].binary_search(&i) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for (i, v) in self.column(j) {
                out[(i, j)] = v;
            }
        }
        out
    }

    fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| self.column(j).map(move |(i, v)| (i, j, v)))
    }
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StorageKind {
    Dense,
    Sparse,
}

/// An `m × n` matrix whose columns are the observations being clustered.
///
/// Entries are finite, `n ≥ 2`, and the nonnegativity flag is computed on
/// construction. Immutable once built.
#[derive(Clone, Debug)]
pub struct DataMatrix {
    storage: Storage,
    nonnegative: bool,
}

fn check_entries<'a>(mut values: impl Iterator<Item = &'a f64>, n: usize) -> Result<bool> {
    if n < 2 {
        return Err(Error::Data(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    let mut nonnegative = true;
    if let Some(bad) = values.find(|v| {
        nonnegative &= **v >= 0.0;
        !v.is_finite()
    }) {
        return Err(Error::Data(format!("non-finite entry {bad}")));
    }
    Ok(nonnegative)
}

impl DataMatrix {
    pub fn from_dense(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::Data("matrix has no features".into()));
        }
        let nonnegative = check_entries(values.iter(), values.ncols())?;
        Ok(DataMatrix {
            storage: Storage::Dense(values),
            nonnegative,
        })
    }

    pub fn from_sparse(values: CscMatrix) -> Result<Self> {
        if values.nrows == 0 {
            return Err(Error::Data("matrix has no features".into()));
        }
        let nonnegative = check_entries(values.values.iter(), values.ncols)?;
        Ok(DataMatrix {
            storage: Storage::Sparse(values),
            nonnegative,
        })
    }

    /// `m`, the number of features (rows).
    pub fn feature_count(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.nrows(),
            Storage::Sparse(s) => s.nrows,
        }
    }

    /// `n`, the number of observations (columns).
    pub fn observation_count(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.ncols(),
            Storage::Sparse(s) => s.ncols,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn storage(&self) -> StorageKind {
        match self.storage {
            Storage::Dense(_) => StorageKind::Dense,
            Storage::Sparse(_) => StorageKind::Sparse,
        }
    }

    pub fn as_sparse(&self) -> Option<&CscMatrix> {
        match &self.storage {
            Storage::Sparse(s) => Some(s),
            Storage::Dense(_) => None,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d[(i, j)],
            Storage::Sparse(s) => s.get(i, j),
        }
    }

    /// Dense view; borrows when already dense.
    pub fn dense(&self) -> Cow<'_, DMatrix<f64>> {
        match &self.storage {
            Storage::Dense(d) => Cow::Borrowed(d),
            Storage::Sparse(s) => Cow::Owned(s.to_dense()),
        }
    }

    pub fn transpose(&self) -> Result<Self> {
        match &self.storage {
            Storage::Dense(d) => DataMatrix::from_dense(d.transpose()),
            Storage::Sparse(s) => DataMatrix::from_sparse(CscMatrix::from_triplets(
                s.ncols,
                s.nrows,
                s.triplets().map(|(i, j, v)| (j, i, v)).collect(),
            )),
        }
    }
}

impl PartialEq for DataMatrix {
    /// Entrywise equality, regardless of storage.
    fn eq(&self, other: &Self) -> bool {
        let (m, n) = (self.feature_count(), self.observation_count());
        if (m, n) != (other.feature_count(), other.observation_count()) {
            return false;
        }
        (0..n).all(|j| (0..m).all(|i| self.get(i, j) == other.get(i, j)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    RowsAreObservations,
    ColumnsAreObservations,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Parses comma- or whitespace-delimited numeric text. Lines starting with
/// `#` and blank lines are skipped.
pub fn parse_dense<R: BufRead>(reader: R, layout: Layout) -> Result<DataMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("non-numeric token `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::parse(
                    lineno,
                    format!("ragged row: expected {w} fields, found {}", row.len()),
                ))
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| Error::Data("empty file".into()))?;
    let file_rows = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let as_read = DMatrix::from_row_slice(file_rows, width, &flat);
    let values = match layout {
        Layout::ColumnsAreObservations => as_read,
        Layout::RowsAreObservations => as_read.transpose(),
    };
    DataMatrix::from_dense(values)
}

pub fn load_dense(path: impl AsRef<Path>, layout: Layout) -> Result<DataMatrix> {
    parse_dense(open(path.as_ref())?, layout)
}

/// Loads a MatrixMarket coordinate file as sparse data. Duplicate entries are
/// summed and symmetric files are expanded.
pub fn load_sparse(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let coo = mtx::read_coordinate(open(path.as_ref())?)?;
    DataMatrix::from_sparse(CscMatrix::from_triplets(
        coo.nrows,
        coo.ncols,
        coo.expanded_entries(),
    ))
}

/// Ground-truth class ids, densely numbered `0..class_count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    class_count: usize,
}

impl LabelVector {
    /// Maps arbitrary ids to dense ids in first-appearance order.
    pub fn from_tokens<T: AsRef<str>>(tokens: &[T]) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Data("no labels".into()));
        }
        let mut seen: Vec<&str> = Vec::new();
        let labels = tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                match seen.iter().position(|s| *s == t) {
                    Some(p) => p,
                    None => {
                        seen.push(t);
                        seen.len() - 1
                    }
                }
            })
            .collect();
        Ok(LabelVector {
            labels,
            class_count: seen.len(),
        })
    }

    pub fn from_ids(ids: Vec<usize>) -> Result<Self> {
        let tokens: Vec<String> = ids.iter().map(usize::to_string).collect();
        Self::from_tokens(&tokens)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn parse_labels<R: BufRead>(reader: R, n: usize) -> Result<LabelVector> {
    let mut tokens = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        let t = line.trim();
        if !t.is_empty() {
            tokens.push(t.to_string());
        }
    }
    if tokens.is_empty() {
        return Err(Error::Data("empty label file".into()));
    }
    if tokens.len() != n {
        return Err(Error::Data(format!(
            "expected {n} labels, found {}",
            tokens.len()
        )));
    }
    LabelVector::from_tokens(&tokens)
}

pub fn load_labels(path: impl AsRef<Path>, n: usize) -> Result<LabelVector> {
    parse_labels(open(path.as_ref())?, n)
}

/// tf · log(n / df) weighting followed by unit 2-norm columns.
///
/// `df_i` counts the documents containing term `i`; a term present in every
/// document gets weight zero. Applying this twice is not the same as once.
pub fn tfidf_weight(x: &DataMatrix) -> Result<DataMatrix> {
    if !x.is_nonnegative() {
        return Err(Error::Data(
            "tf-idf weighting requires nonnegative counts".into(),
        ));
    }
    let (m, n) = (x.feature_count(), x.observation_count());
    let mut df = vec![0usize; m];
    for j in 0..n {
        match &x.storage {
            Storage::Dense(d) => {
                for (i, v) in d.column(j).iter().enumerate() {
                    if *v != 0.0 {
                        df[i] += 1;
                    }
                }
            }
            Storage::Sparse(s) => s.column(j).for_each(|(i, _)| df[i] += 1),
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| {
            if d == 0 {
                0.0
            } else {
                (n as f64 / d as f64).ln()
            }
        })
        .collect();
    let empty = |j: usize| {
        Error::Data(format!(
            "document {j} is empty after weighting (all of its terms occur in every document)"
        ))
    };
    match &x.storage {
        Storage::Dense(d) => {
            let mut out = d.clone();
            for (j, mut col) in out.column_iter_mut().enumerate() {
                for (v, w) in col.iter_mut().zip(&idf) {
                    *v *= w;
                }
                let norm = col.norm();
                if norm == 0.0 {
                    return Err(empty(j));
                }
                col /= norm;
            }
            DataMatrix::from_dense(out)
        }
        Storage::Sparse(s) => {
            let mut triplets = Vec::with_capacity(s.nnz());
            for j in 0..n {
                let start = triplets.len();
                triplets.extend(s.column(j).map(|(i, v)| (i, j, v * idf[i])));
                let norm = triplets[start..]
                    .iter()
                    .map(|t| t.2 * t.2)
                    .sum::<f64>()
                    .sqrt();
                if norm == 0.0 {
                    return Err(empty(j));
                }
                triplets[start..].iter_mut().for_each(|t| t.2 /= norm);
            }
            DataMatrix::from_sparse(CscMatrix::from_triplets(m, n, triplets))
        }
    }
}

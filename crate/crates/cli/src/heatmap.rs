//! Consensus heatmaps as binary PGM images.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, Result};

pub const MAX_HEATMAP_N: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering {
    Identity,
    /// Observations grouped by cluster id, original order within a cluster.
    ClusterSorted,
}

/// Row/column order for `ordering`; `labels` is required for cluster-sorted.
pub fn permutation(n: usize, ordering: Ordering, labels: Option<&[usize]>) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    if ordering == Ordering::ClusterSorted {
        let labels = labels
            .ok_or_else(|| CliError::Usage("cluster-sorted ordering needs a partition".into()))?;
        if labels.len() != n {
            return Err(CliError::Usage(format!(
                "partition has {} entries, matrix has {n} rows",
                labels.len()
            )));
        }
        idx.sort_by_key(|&i| (labels[i], i));
    }
    Ok(idx)
}

/// P5 image with pixel `round(255 · M_ij / max M)`.
pub fn heatmap_pgm(m: &DMatrix<f64>, order: &[usize]) -> Result<Vec<u8>> {
    let n = m.nrows();
    if n > MAX_HEATMAP_N {
        return Err(CliError::Usage(format!(
            "heatmap limited to n <= {MAX_HEATMAP_N}, got {n}"
        )));
    }
    let max = m.max();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.reserve(n * n);
    for &i in order {
        for &j in order {
            let v = if max > 0.0 {
                (255.0 * m[(i, j)] / max).round()
            } else {
                0.0
            };
            out.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}

pub fn emit_heatmap(
    m: &DMatrix<f64>,
    ordering: Ordering,
    labels: Option<&[usize]>,
    path: &Path,
) -> Result<()> {
    let order = permutation(m.nrows(), ordering, labels)?;
    let bytes = heatmap_pgm(m, &order)?;
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

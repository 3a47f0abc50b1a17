//! Similarity graphs and the spectrum of the random walk they induce.
//!
//! For a symmetric nonnegative `S` with degrees `D = diag(Se)`, the walk
//! `P = D⁻¹S` is reversible with stationary distribution `π ∝ De`, and it is
//! similar to the symmetric `D^{-1/2} S D^{-1/2} = I − ℒ`. The spectrum of `P`
//! is therefore read off the normalized Laplacian `ℒ` with a symmetric
//! eigensolver; `P` itself is only formed for diagnostics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ingest::DataMatrix;
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimilarityKind {
    Consensus,
    Gaussian,
    Cosine,
    Adjacency,
}

impl SimilarityKind {
    pub fn name(self) -> &'static str {
        match self {
            SimilarityKind::Consensus => "consensus",
            SimilarityKind::Gaussian => "gaussian",
            SimilarityKind::Cosine => "cosine",
            SimilarityKind::Adjacency => "adjacency",
        }
    }
}

/// A symmetric, entrywise nonnegative `n × n` affinity.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    s: DMatrix<f64>,
    kind: SimilarityKind,
}

impl SimilarityMatrix {
    pub fn new(s: DMatrix<f64>, kind: SimilarityKind) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::Data(format!(
                "similarity matrix must be square, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        let n = s.nrows();
        for j in 0..n {
            for i in 0..=j {
                let v = s[(i, j)];
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Data(format!(
                        "entry ({i}, {j}) = {v} is not a valid affinity"
                    )));
                }
                if v != s[(j, i)] {
                    return Err(Error::Data(format!(
                        "similarity is not symmetric at ({i}, {j})"
                    )));
                }
            }
            if kind == SimilarityKind::Consensus && s[(j, j)] <= 0.0 {
                return Err(Error::Data(format!(
                    "consensus diagonal entry {j} is not positive"
                )));
            }
        }
        Ok(SimilarityMatrix { s, kind })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        SimilarityMatrix::new(&self.s * c, self.kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GaussianExponent {
    /// `exp(−‖xᵢ − xⱼ‖ / 2σ²)`.
    #[default]
    Distance,
    /// `exp(−‖xᵢ − xⱼ‖² / 2σ²)`, the textbook kernel.
    SquaredDistance,
}

/// `σ² = Σ‖xᵢ − μ‖² / (n − 1)` with `μ` the mean observation.
pub fn gaussian_sigma2(x: &DMatrix<f64>) -> f64 {
    let n = x.ncols();
    let mu = x.column_mean();
    x.column_iter()
        .map(|c| (c - &mu).norm_squared())
        .sum::<f64>()
        / (n as f64 - 1.0)
}

fn pairwise_sq_dist(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let v = (x.column(i) - x.column(j)).norm_squared();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

pub fn gaussian_similarity(x: &DataMatrix, exponent: GaussianExponent) -> Result<SimilarityMatrix> {
    let xd = x.dense();
    let sigma2 = gaussian_sigma2(&xd);
    if sigma2 <= 0.0 {
        return Err(Error::Data(
            "all observations are identical, so the Gaussian width is zero".into(),
        ));
    }
    let mut s = pairwise_sq_dist(&xd);
    s.iter_mut().for_each(|d| {
        let t = match exponent {
            GaussianExponent::Distance => d.sqrt(),
            GaussianExponent::SquaredDistance => *d,
        };
        *d = (-t / (2.0 * sigma2)).exp();
    });
    SimilarityMatrix::new(s, SimilarityKind::Gaussian)
}

/// Cosine similarity with negative values clipped to zero.
pub fn cosine_similarity(x: &DataMatrix) -> Result<SimilarityMatrix> {
    let mut xd = x.dense().into_owned();
    for (j, mut col) in xd.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::Data(format!("observation {j} is a zero vector")));
        }
        col /= norm;
    }
    let mut s = xd.tr_mul(&xd);
    let n = s.nrows();
    for j in 0..n {
        s[(j, j)] = 1.0;
        for i in 0..j {
            let v = s[(i, j)].clamp(0.0, 1.0);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    SimilarityMatrix::new(s, SimilarityKind::Cosine)
}

/// Spectrum of the walk `P = D⁻¹S`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    /// Descending. All `n` values, or a leading prefix when `complete` is false.
    pub eigenvalues: Vec<f64>,
    pub degrees: Vec<f64>,
    pub stationary: Vec<f64>,
    pub complete: bool,
}

fn degrees(s: &SimilarityMatrix) -> Result<Vec<f64>> {
    let d: Vec<f64> = s.s.row_iter().map(|r| r.sum()).collect();
    let zero: Vec<usize> = d
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= 0.0)
        .map(|(i, _)| i)
        .collect();
    if !zero.is_empty() {
        let shown: Vec<String> = zero.iter().take(20).map(usize::to_string).collect();
        return Err(Error::Data(format!(
            "observations with zero similarity to everything (including themselves): {}{}",
            shown.join(", "),
            if zero.len() > 20 { ", ..." } else { "" }
        )));
    }
    Ok(d)
}

/// `D^{-1/2} S D^{-1/2}`.
fn normalized_affinity(s: &SimilarityMatrix, d: &[f64]) -> DMatrix<f64> {
    let inv_sqrt: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    DMatrix::from_fn(s.n(), s.n(), |i, j| s.s[(i, j)] * inv_sqrt[i] * inv_sqrt[j])
}

pub fn transition_spectrum(s: &SimilarityMatrix) -> Result<SpectralDecomposition> {
    transition_spectrum_with(s, 0)
}

/// As [`transition_spectrum`] for a Perron search up to `k_max`; above the
/// dense limit only the leading `max(4 k_max, 50)` eigenvalues are computed.
pub fn transition_spectrum_with(
    s: &SimilarityMatrix,
    k_max: usize,
) -> Result<SpectralDecomposition> {
    let n = s.n();
    let d = degrees(s)?;
    let total: f64 = d.iter().sum();
    let stationary = d.iter().map(|v| v / total).collect();
    let a = normalized_affinity(s, &d);
    let (eigenvalues, complete) = if n <= linalg::DENSE_EIGEN_LIMIT {
        let laplacian = DMatrix::identity(n, n) - a;
        let mu = linalg::sym_eigenvalues_desc(laplacian)?;
        let mut lambda: Vec<f64> = mu.iter().map(|m| 1.0 - m).collect();
        lambda.sort_by(|a, b| b.total_cmp(a));
        (lambda, true)
    } else {
        let want = (4 * k_max).max(k_max + 1).max(50).min(n);
        let (vals, _) = linalg::lanczos_top(|v| &a * v, n, want, 1e-8, 0x5bec)?;
        (vals, false)
    };
    Ok(SpectralDecomposition {
        eigenvalues,
        degrees: d,
        stationary,
        complete,
    })
}

/// Leading `k` eigenpairs of `D^{-1/2} S D^{-1/2}` plus the degrees.
pub fn leading_eigenvectors(
    s: &SimilarityMatrix,
    k: usize,
) -> Result<(Vec<f64>, DMatrix<f64>, Vec<f64>)> {
    let n = s.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot take {k} eigenvectors of order {n}"
        )));
    }
    let d = degrees(s)?;
    let a = normalized_affinity(s, &d);
    let (vals, vecs) = if n <= linalg::DENSE_EIGEN_LIMIT {
        let (vals, vecs) = linalg::sym_eigen_desc(a)?;
        (vals[..k].to_vec(), vecs.columns(0, k).into_owned())
    } else {
        linalg::lanczos_top(|v| &a * v, n, k, 1e-8, 0x5bec)?
    };
    Ok((vals, vecs, d))
}

/// The explicit walk `P = D⁻¹S` of any nonnegative square matrix with
/// positive row sums.
pub fn transition_matrix(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut p = s.clone();
    for (i, mut row) in p.row_iter_mut().enumerate() {
        let d = row.sum();
        if d <= 0.0 {
            return Err(Error::Data(format!("row {i} has zero sum")));
        }
        row /= d;
    }
    Ok(p)
}

const REVERSIBILITY_LIMIT: usize = 2000;

/// `‖QP − PᵀQ‖_max` with `Q = diag(π)`. Accepts any square nonnegative
/// matrix so that asymmetric inputs can be probed.
pub fn check_reversibility(s: &DMatrix<f64>) -> Result<f64> {
    let n = s.nrows();
    if !s.is_square() {
        return Err(Error::Data("matrix must be square".into()));
    }
    if n > REVERSIBILITY_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "reversibility check materializes P; n = {n} exceeds {REVERSIBILITY_LIMIT}"
        )));
    }
    let p = transition_matrix(s)?;
    let d: Vec<f64> = s.row_iter().map(|r| r.sum()).collect();
    let total: f64 = d.iter().sum();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let qp = d[i] / total * p[(i, j)];
            let ptq = p[(j, i)] * d[j] / total;
            worst = worst.max((qp - ptq).abs());
        }
    }
    Ok(worst)
}

/// `‖πᵀP − πᵀ‖₁` for the degree-proportional `π`.
pub fn stationarity_residual(s: &SimilarityMatrix) -> Result<f64> {
    let p = transition_matrix(&s.s)?;
    let d = degrees(s)?;
    let total: f64 = d.iter().sum();
    let pi = DVector::from_iterator(d.len(), d.iter().map(|v| v / total));
    let moved = p.tr_mul(&pi);
    Ok((moved - pi).abs().sum())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub count: usize,
    /// Component id per observation, numbered in order of lowest member.
    pub labels: Vec<usize>,
}

/// Components of the graph with an edge wherever `S_ij > 0`, `i ≠ j`.
pub fn connected_components(s: &SimilarityMatrix) -> Components {
    let n = s.n();
    let mut labels = vec![usize::MAX; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = count;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for (u, w) in s.s.column(v).iter().enumerate() {
                if u != v && labels[u] == usize::MAX && *w > 0.0 {
                    labels[u] = count;
                    stack.push(u);
                }
            }
        }
        count += 1;
    }
    Components { count, labels }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Visibility {
    Visible,
    Ambiguous,
}

impl Visibility {
    pub fn name(self) -> &'static str {
        match self {
            Visibility::Visible => "visible",
            Visibility::Ambiguous => "ambiguous",
        }
    }
}

/// Members `λᵢ` of the Perron cluster are flagged when they sit at least
/// this fraction of the gap below `λ₁`.
pub const SUBCLUSTER_FRACTION: f64 = 0.1;
/// `λ_k` must reach this for the cluster to count as near 1.
pub const PERRON_FLOOR: f64 = 0.5;
pub const DEFAULT_THETA: f64 = 0.3;
/// Gaps closer than this count as tied, so rounding noise cannot move `k`.
pub const GAP_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PerronReport {
    pub k: usize,
    /// `λ_k − λ_{k+1}`.
    pub gap: f64,
    pub visibility: Visibility,
    /// `λ₁ … λ_{k_max+1}`.
    pub eigenvalues: Vec<f64>,
    /// 1-based indices `i ≤ k` of weak Perron-cluster members.
    pub subcluster_flags: Vec<usize>,
}

/// Picks `k` as the position of the largest consecutive gap among the first
/// `k_max + 1` eigenvalues (earliest wins ties, up to [`GAP_TIE_TOLERANCE`]). The cluster is visible when
/// the gap is at least `theta` and `λ_k ≥ 0.5`.
pub fn detect_perron(
    dec: &SpectralDecomposition,
    k_max: usize,
    theta: f64,
) -> Result<PerronReport> {
    detect_perron_in(&dec.eigenvalues, k_max, theta)
}

pub fn detect_perron_in(eigenvalues: &[f64], k_max: usize, theta: f64) -> Result<PerronReport> {
    if k_max < 2 || k_max >= eigenvalues.len() {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} must satisfy 2 <= k_max < {}",
            eigenvalues.len()
        )));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} must lie in (0, 1)"
        )));
    }
    let mut k = 1;
    let mut gap = f64::NEG_INFINITY;
    for i in 1..=k_max {
        let g = eigenvalues[i - 1] - eigenvalues[i];
        if g > gap + GAP_TIE_TOLERANCE {
            gap = g;
            k = i;
        }
    }
    let visibility = if gap >= theta && eigenvalues[k - 1] >= PERRON_FLOOR {
        Visibility::Visible
    } else {
        Visibility::Ambiguous
    };
    let lead = eigenvalues[0];
    let subcluster_flags = (1..=k)
        .filter(|&i| lead - eigenvalues[i - 1] >= SUBCLUSTER_FRACTION * gap)
        .collect();
    Ok(PerronReport {
        k,
        gap,
        visibility,
        eigenvalues: eigenvalues[..=k_max].to_vec(),
        subcluster_flags,
    })
}

/// `index,eigenvalue` CSV, 1-based, 17 significant digits.
pub fn write_spectrum_csv<W: Write>(mut w: W, eigenvalues: &[f64]) -> std::io::Result<()> {
    writeln!(w, "index,eigenvalue")?;
    for (i, v) in eigenvalues.iter().enumerate() {
        writeln!(w, "{},{:.16e}", i + 1, v)?;
    }
    Ok(())
}

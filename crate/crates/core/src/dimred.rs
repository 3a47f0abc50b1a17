//! Dimension reductions feeding the ensemble: PCA scores, the scaled right
//! factor of a truncated SVD, and the `H` factor of an ACLS nonnegative
//! factorization, each at three ranks.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::ingest::DataMatrix;
use crate::linalg::{self, Svd};
use crate::seed;

/// Three strictly increasing reduction ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankTriple([usize; 3]);

impl RankTriple {
    pub fn new(r1: usize, r2: usize, r3: usize, max_rank: usize) -> Result<Self> {
        if r1 == 0 || r1 >= r2 || r2 >= r3 || r3 > max_rank {
            return Err(Error::InvalidArgument(format!(
                "ranks ({r1}, {r2}, {r3}) must satisfy 1 <= r1 < r2 < r3 <= {max_rank}"
            )));
        }
        Ok(RankTriple([r1, r2, r3]))
    }

    pub fn as_array(&self) -> [usize; 3] {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankPolicy {
    /// Smallest ranks capturing 60%, 75% and 90% of the squared singular
    /// values of the (uncentered) data.
    Variance,
    /// About 1%, 5% and 10% of the number of observations.
    FractionOfN,
}

pub const VARIANCE_FRACTIONS: [f64; 3] = [0.60, 0.75, 0.90];
pub const N_FRACTIONS: [f64; 3] = [0.01, 0.05, 0.10];
/// Largest `min(m, n)` for which the variance policy computes a full SVD.
pub const DEFAULT_VARIANCE_CAP: usize = 2000;

fn make_unique(mut raw: [usize; 3], max_rank: usize, hint: &str) -> Result<RankTriple> {
    raw[0] = raw[0].max(1);
    if raw[1] <= raw[0] {
        raw[1] = raw[0] + 1;
    }
    if raw[2] <= raw[1] {
        raw[2] = raw[1] + 1;
    }
    if raw[2] > max_rank {
        return Err(Error::Data(format!(
            "cannot choose three distinct ranks within min(m, n) = {max_rank} (got {raw:?}){hint}"
        )));
    }
    Ok(RankTriple(raw))
}

/// Variance policy applied to precomputed singular values.
pub fn ranks_from_singular_values(s: &[f64], max_rank: usize) -> Result<RankTriple> {
    let squared: Vec<f64> = s.iter().map(|v| v * v).collect();
    let total: f64 = squared.iter().sum();
    if total <= 0.0 {
        return Err(Error::Data("zero matrix has no variance to capture".into()));
    }
    let mut raw = [0usize; 3];
    for (slot, frac) in raw.iter_mut().zip(VARIANCE_FRACTIONS) {
        let mut cum = 0.0;
        *slot = squared.len();
        for (i, sq) in squared.iter().enumerate() {
            cum += sq;
            if cum / total >= frac {
                *slot = i + 1;
                break;
            }
        }
    }
    make_unique(raw, max_rank, "; consider the fraction-of-n policy")
}

pub fn ranks_from_fraction(n: usize, max_rank: usize) -> Result<RankTriple> {
    if n < 30 {
        return Err(Error::InvalidArgument(format!(
            "fraction-of-n rank policy needs n >= 30, got {n}"
        )));
    }
    let raw = N_FRACTIONS.map(|c| ((c * n as f64).round() as usize).max(1));
    make_unique(raw, max_rank, "")
}

pub fn select_ranks(x: &DataMatrix, policy: RankPolicy) -> Result<RankTriple> {
    select_ranks_capped(x, policy, DEFAULT_VARIANCE_CAP)
}

pub fn select_ranks_capped(x: &DataMatrix, policy: RankPolicy, cap: usize) -> Result<RankTriple> {
    let (m, n) = (x.feature_count(), x.observation_count());
    let max_rank = m.min(n);
    match policy {
        RankPolicy::Variance => {
            if max_rank > cap {
                return Err(Error::InvalidArgument(format!(
                    "variance rank policy needs a full SVD but min(m, n) = {max_rank} exceeds \
                     the cap {cap}; use the fraction-of-n policy"
                )));
            }
            let s = linalg::svd_dense(&x.dense())?.s;
            ranks_from_singular_values(&s, max_rank)
        }
        RankPolicy::FractionOfN => ranks_from_fraction(n, max_rank),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reduction {
    Pca,
    Svd,
    Nmf,
}

impl Reduction {
    pub fn name(self) -> &'static str {
        match self {
            Reduction::Pca => "pca",
            Reduction::Svd => "svd",
            Reduction::Nmf => "nmf",
        }
    }
}

/// An `r × n` reduced representation; columns stay observations.
#[derive(Clone, Debug)]
pub struct ReducedData {
    pub values: DMatrix<f64>,
    pub method: Reduction,
    pub rank: usize,
    pub nonnegative: bool,
}

fn check_rank(x: &DataMatrix, r: usize) -> Result<()> {
    let max_rank = x.feature_count().min(x.observation_count());
    if r == 0 || r > max_rank {
        return Err(Error::InvalidArgument(format!(
            "rank {r} outside 1..={max_rank}"
        )));
    }
    Ok(())
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = x.column_mean();
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        col -= &mean;
    }
    c
}

fn reduced(values: DMatrix<f64>, method: Reduction) -> ReducedData {
    let nonnegative = values.iter().all(|v| *v >= 0.0);
    ReducedData {
        rank: values.nrows(),
        values,
        method,
        nonnegative,
    }
}

/// Principal-component scores `U_rᵀ (X − μeᵀ)`.
pub fn pca(x: &DataMatrix, r: usize) -> Result<ReducedData> {
    Ok(pca_ranks(x, &[r])?.remove(0))
}

/// PCA at several ranks from a single decomposition.
pub fn pca_ranks(x: &DataMatrix, ranks: &[usize]) -> Result<Vec<ReducedData>> {
    ranks.iter().try_for_each(|&r| check_rank(x, r))?;
    let top = ranks.iter().copied().max().unwrap_or(0);
    let c = centered(&x.dense());
    let svd = linalg::svd_truncated(&c, top)?;
    Ok(ranks
        .iter()
        .map(|&r| reduced(svd.truncate(r).scaled_right(), Reduction::Pca))
        .collect())
}

/// `Σ_r V_rᵀ` of the rank-`r` truncated SVD.
pub fn svd_truncated(x: &DataMatrix, r: usize) -> Result<ReducedData> {
    Ok(svd_ranks(x, &[r])?.remove(0))
}

pub fn svd_ranks(x: &DataMatrix, ranks: &[usize]) -> Result<Vec<ReducedData>> {
    ranks.iter().try_for_each(|&r| check_rank(x, r))?;
    let top = ranks.iter().copied().max().unwrap_or(0);
    let svd = truncated_factors(x, top)?;
    Ok(ranks
        .iter()
        .map(|&r| reduced(svd.truncate(r).scaled_right(), Reduction::Svd))
        .collect())
}

/// The full truncated factorization, for callers that need `U_r` too.
pub fn truncated_factors(x: &DataMatrix, r: usize) -> Result<Svd> {
    check_rank(x, r)?;
    linalg::svd_truncated(&x.dense(), r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmfConfig {
    pub lambda_w: f64,
    pub lambda_h: f64,
    /// Stop once the relative change in residual falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Columns averaged per basis vector in the Acol start.
    pub acol_samples: usize,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            lambda_w: 0.5,
            lambda_h: 0.5,
            tol: 1e-4,
            max_sweeps: 100,
            acol_samples: 20,
        }
    }
}

/// `X ≈ W H` with `W ≥ 0` (`m × r`) and `H ≥ 0` (`r × n`).
#[derive(Clone, Debug)]
pub struct NmfFactors {
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// `‖X − WH‖_F` of the returned (best seen) iterate.
    pub residual: f64,
    pub lambda_w: f64,
    pub lambda_h: f64,
}

impl NmfFactors {
    pub fn into_reduced(self) -> ReducedData {
        ReducedData {
            rank: self.h.nrows(),
            values: self.h,
            method: Reduction::Nmf,
            nonnegative: true,
        }
    }
}

/// Solves `(G + λI) Y = B` for symmetric positive semidefinite `G`.
fn ridge_solve(mut g: DMatrix<f64>, lambda: f64, b: DMatrix<f64>) -> Result<DMatrix<f64>> {
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    if let Some(ch) = g.clone().cholesky() {
        return Ok(ch.solve(&b));
    }
    // singular when λ = 0 and a factor column was clipped to zero
    g.pseudo_inverse(1e-12)
        .map(|pinv| pinv * b)
        .map_err(|e| Error::Numerical(format!("ACLS normal equations: {e}")))
}

fn clip(m: &mut DMatrix<f64>) {
    m.iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
}

/// Alternating constrained least squares with ridge penalties and clipping.
/// `W` starts from the Acol rule: each column is the mean of
/// `acol_samples` randomly chosen data columns.
pub fn nmf_acls(x: &DataMatrix, r: usize, cfg: &NmfConfig, seed_value: u64) -> Result<NmfFactors> {
    if !x.is_nonnegative() {
        return Err(Error::Data("NMF requires nonnegative data".into()));
    }
    check_rank(x, r)?;
    if cfg.lambda_w < 0.0 || cfg.lambda_h < 0.0 {
        return Err(Error::InvalidArgument(
            "sparsity parameters must be >= 0".into(),
        ));
    }
    let xd = x.dense();
    let (m, n) = xd.shape();
    let q = cfg.acol_samples.clamp(1, n);
    let mut rng = seed::rng(seed_value);
    let mut w = DMatrix::zeros(m, r);
    for k in 0..r {
        let mut col = DVector::zeros(m);
        for j in index::sample(&mut rng, n, q) {
            col += xd.column(j);
        }
        w.set_column(k, &(col / q as f64));
    }

    let xt = xd.transpose();
    let mut best: Option<(f64, DMatrix<f64>, DMatrix<f64>)> = None;
    let mut prev = f64::INFINITY;
    for _ in 0..cfg.max_sweeps {
        let mut h = ridge_solve(w.tr_mul(&w), cfg.lambda_h, w.tr_mul(&xd))?;
        clip(&mut h);
        let mut wt = ridge_solve(&h * h.transpose(), cfg.lambda_w, &h * &xt)?;
        clip(&mut wt);
        w = wt.transpose();
        let residual = (&*xd - &w * &h).norm();
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, w.clone(), h.clone()));
        }
        let change = (prev - residual).abs() / prev.max(f64::MIN_POSITIVE);
        prev = residual;
        if change < cfg.tol {
            break;
        }
    }
    let (residual, w, h) = best.expect("at least one sweep");
    Ok(NmfFactors {
        w,
        h,
        residual,
        lambda_w: cfg.lambda_w,
        lambda_h: cfg.lambda_h,
    })
}

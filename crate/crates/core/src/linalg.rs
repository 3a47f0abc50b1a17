//! Dense symmetric eigensolver and SVD wrappers with a deterministic ordering
//! and sign convention, plus a Lanczos fallback for large operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Above this order the symmetric eigenproblem switches to Lanczos.
pub const DENSE_EIGEN_LIMIT: usize = 4000;
/// Above this `min(m, n)` the SVD switches to Lanczos on the Gram matrix.
pub const DENSE_SVD_LIMIT: usize = 2000;

const MAX_SWEEPS: usize = 10_000;

/// Flips `v` so that its largest-magnitude entry is positive. Returns whether
/// it flipped. Ties go to the lowest index.
pub fn orient(v: &mut [f64]) -> bool {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors
/// (columns) oriented by [`orient`].
pub fn sym_eigen_desc(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        orient(&mut col);
        vectors.set_column(dst, &DVector::from_vec(col));
    }
    Ok((values, vectors))
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues_desc(a: DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let vals = a.symmetric_eigenvalues();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "symmetric eigensolver produced non-finite values".into(),
        ));
    }
    let mut v: Vec<f64> = vals.iter().copied().collect();
    debug_assert_eq!(v.len(), n);
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Thin SVD `X ≈ U diag(s) Vᵀ` with singular values descending and each left
/// singular vector oriented by [`orient`].
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    /// `r × n`, rows are right singular vectors.
    pub v_t: DMatrix<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn truncate(&self, r: usize) -> Svd {
        Svd {
            u: self.u.columns(0, r).into_owned(),
            s: self.s[..r].to_vec(),
            v_t: self.v_t.rows(0, r).into_owned(),
        }
    }

    /// `diag(s) Vᵀ`, the observation-side factor.
    pub fn scaled_right(&self) -> DMatrix<f64> {
        let mut out = self.v_t.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= self.s[i];
        }
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * self.scaled_right()
    }
}

fn sorted_oriented(u: DMatrix<f64>, s: Vec<f64>, v_t: DMatrix<f64>) -> Svd {
    let r = s.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let mut ou = DMatrix::zeros(u.nrows(), r);
    let mut ov = DMatrix::zeros(r, v_t.ncols());
    let mut os = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = u.column(src).iter().copied().collect();
        let flip = orient(&mut col);
        ou.set_column(dst, &DVector::from_vec(col));
        let mut row = v_t.row(src).into_owned();
        if flip {
            row.neg_mut();
        }
        ov.set_row(dst, &row);
        os.push(s[src]);
    }
    Svd {
        u: ou,
        s: os,
        v_t: ov,
    }
}

/// Full thin SVD by the dense solver.
pub fn svd_dense(x: &DMatrix<f64>) -> Result<Svd> {
    let svd = SVD::try_new(x.clone(), true, true, f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    Ok(sorted_oriented(
        u,
        svd.singular_values.iter().copied().collect(),
        v_t,
    ))
}

/// Leading `r` singular triplets.
pub fn svd_truncated(x: &DMatrix<f64>, r: usize) -> Result<Svd> {
    let (m, n) = x.shape();
    let small = m.min(n);
    if r == 0 || r > small {
        return Err(Error::InvalidArgument(format!(
            "rank {r} outside 1..={small}"
        )));
    }
    if small <= DENSE_SVD_LIMIT {
        return Ok(svd_dense(x)?.truncate(r));
    }
    // Lanczos on the smaller Gram matrix.
    let wide = n > m;
    let apply = |v: &DVector<f64>| -> DVector<f64> {
        if wide {
            x * (x.transpose() * v)
        } else {
            x.transpose() * (x * v)
        }
    };
    let (vals, vecs) = lanczos_top(apply, small, r, 1e-10, 0x5eed)?;
    let s: Vec<f64> = vals.iter().map(|l| l.max(0.0).sqrt()).collect();
    let (u, v_t) = if wide {
        let u = vecs;
        let mut v_t = u.transpose() * x;
        for (i, mut row) in v_t.row_iter_mut().enumerate() {
            if s[i] > 0.0 {
                row /= s[i];
            }
        }
        (u, v_t)
    } else {
        let v = vecs;
        let mut u = x * &v;
        for (i, mut col) in u.column_iter_mut().enumerate() {
            if s[i] > 0.0 {
                col /= s[i];
            }
        }
        (u, v.transpose())
    };
    Ok(sorted_oriented(u, s, v_t))
}

/// Largest `want` eigenpairs of the symmetric operator `apply` on `R^n`, by
/// Lanczos with full reorthogonalization. The Krylov dimension grows until
/// every wanted Ritz pair has residual ≤ `tol · max(1, |λ₁|)`.
pub fn lanczos_top<F>(
    apply: F,
    n: usize,
    want: usize,
    tol: f64,
    seed_value: u64,
) -> Result<(Vec<f64>, DMatrix<f64>)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if want == 0 || want > n {
        return Err(Error::InvalidArgument(format!(
            "requested {want} eigenpairs of an order-{n} operator"
        )));
    }
    let mut rng = seed::rng(seed_value);
    let mut random_unit = |basis: &[DVector<f64>]| -> Option<DVector<f64>> {
        for _ in 0..8 {
            let mut v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            for _ in 0..2 {
                for b in basis {
                    let c = b.dot(&v);
                    v.axpy(-c, b, 1.0);
                }
            }
            let norm = v.norm();
            if norm > 1e-10 {
                return Some(v / norm);
            }
        }
        None
    };

    let mut dim = (2 * want + 20).min(n);
    let mut last_residual = f64::INFINITY;
    loop {
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
        let mut alpha = Vec::with_capacity(dim);
        let mut beta: Vec<f64> = Vec::with_capacity(dim);
        let mut q = random_unit(&basis).expect("fresh start vector");
        let mut tail = 0.0;
        for step in 0..dim {
            let mut w = apply(&q);
            let a = q.dot(&w);
            basis.push(q.clone());
            alpha.push(a);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let b = w.norm();
            if step + 1 == dim {
                tail = b;
                break;
            }
            if b <= 1e-12 * a.abs().max(1.0) {
                // invariant subspace; continue with a fresh direction
                match random_unit(&basis) {
                    Some(fresh) => {
                        beta.push(0.0);
                        q = fresh;
                    }
                    None => break,
                }
            } else {
                beta.push(b);
                q = w / b;
            }
        }
        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let (theta, s) = sym_eigen_desc(t)?;
        let take = want.min(k);
        let scale = theta[0].abs().max(1.0);
        let residual = (0..take)
            .map(|i| (tail * s[(k - 1, i)]).abs())
            .fold(0.0, f64::max);
        if (residual <= tol * scale && take == want) || k == n {
            let mut vecs = DMatrix::zeros(n, take);
            for i in 0..take {
                let mut v = DVector::zeros(n);
                for (j, b) in basis.iter().enumerate() {
                    v.axpy(s[(j, i)], b, 1.0);
                }
                let mut raw: Vec<f64> = v.iter().copied().collect();
                orient(&mut raw);
                vecs.set_column(i, &DVector::from_vec(raw));
            }
            return Ok((theta[..take].to_vec(), vecs));
        }
        if dim == n {
            return Err(Error::Numerical(format!(
                "Lanczos stalled with residual {last_residual:e}"
            )));
        }
        last_residual = residual;
        dim = (dim * 2).min(n);
    }
}

#![allow(dead_code)]

use icc_core::algos::{Clustering, Source};
use icc_core::ingest::DataMatrix;
use icc_core::seed;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Blobs on the simplex: blob `b` is shifted by `delta` along axis `b`, with
/// unit Gaussian noise in every one of `dim` coordinates.
pub fn simplex_blobs(
    seed_value: u64,
    dim: usize,
    delta: f64,
    sizes: &[usize],
) -> (DataMatrix, Vec<usize>) {
    let mut rng = seed::rng(seed_value);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let n: usize = sizes.iter().sum();
    let mut m = DMatrix::zeros(dim, n);
    let mut truth = Vec::with_capacity(n);
    let mut j = 0;
    for (b, &s) in sizes.iter().enumerate() {
        for _ in 0..s {
            for f in 0..dim {
                m[(f, j)] = if f == b { delta } else { 0.0 } + noise.sample(&mut rng);
            }
            truth.push(b);
            j += 1;
        }
    }
    (DataMatrix::from_dense(m).unwrap(), truth)
}

/// Points in the plane around `centers` with standard deviation `spread`.
pub fn planar_blobs(
    seed_value: u64,
    centers: &[(f64, f64)],
    per: usize,
    spread: f64,
) -> (DataMatrix, Vec<usize>) {
    let mut rng = seed::rng(seed_value);
    let noise = Normal::new(0.0, spread).unwrap();
    let n = centers.len() * per;
    let mut m = DMatrix::zeros(2, n);
    let mut truth = Vec::with_capacity(n);
    for (b, c) in centers.iter().enumerate() {
        for i in 0..per {
            let j = b * per + i;
            m[(0, j)] = c.0 + noise.sample(&mut rng);
            m[(1, j)] = c.1 + noise.sample(&mut rng);
            truth.push(b);
        }
    }
    (DataMatrix::from_dense(m).unwrap(), truth)
}

/// Symmetric, nonnegative, with roughly `density` of the off-diagonal pairs
/// nonzero and a positive diagonal.
pub fn random_symmetric(rng: &mut impl Rng, n: usize, density: f64) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = rng.random_range(0.1..1.0);
        for j in 0..i {
            if rng.random_bool(density) {
                let v = rng.random_range(0.0..1.0);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
    }
    s
}

/// Block diagonal with strictly positive blocks of the given sizes.
pub fn block_diagonal(rng: &mut impl Rng, sizes: &[usize]) -> DMatrix<f64> {
    let n = sizes.iter().sum();
    let mut s = DMatrix::zeros(n, n);
    let mut start = 0;
    for &b in sizes {
        for i in start..start + b {
            for j in start..=i {
                let v = rng.random_range(0.05..1.0);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        start += b;
    }
    s
}

pub fn labelled(labels: &[usize]) -> Clustering {
    Clustering::from_labels(labels, Source::default())
}

/// Equal as partitions, ignoring label names.
pub fn same_up_to_relabel(a: &[usize], b: &[usize]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(x, y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

//! Purity scoring and three reference spectral clusterers: the normalized
//! cut embedding, the Ng–Jordan–Weiss embedding and power iteration
//! clustering.

use nalgebra::DMatrix;

use crate::algos::kmeans_best_of;
use crate::algos::{Clustering, Metric, Source};
use crate::error::{Error, Result};
use crate::ingest::LabelVector;
use crate::spectral::{self, SimilarityMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct PurityScore {
    pub value: f64,
    /// `contingency[c][j]` counts members of cluster `c` in class `j`.
    pub contingency: Vec<Vec<usize>>,
}

/// Fraction of observations that belong to the majority class of their
/// cluster.
pub fn purity(c: &Clustering, truth: &LabelVector) -> Result<PurityScore> {
    if c.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "clustering has {} observations but the labels have {}",
            c.len(),
            truth.len()
        )));
    }
    let mut table = vec![vec![0usize; truth.class_count()]; c.k()];
    for (&a, &t) in c.assignment().iter().zip(truth.labels()) {
        table[a][t] += 1;
    }
    let hits: usize = table
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(PurityScore {
        value: hits as f64 / c.len() as f64,
        contingency: table,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralMethod {
    /// Eigenvectors of the random-walk normalization, `D^{-1/2}U`.
    Ncut,
    /// Eigenvector rows rescaled to unit length.
    Njw,
}

impl SpectralMethod {
    pub fn name(self) -> &'static str {
        match self {
            SpectralMethod::Ncut => "ncut",
            SpectralMethod::Njw => "njw",
        }
    }
}

/// Random restarts of the final k-means step in every baseline.
pub const BASELINE_RESTARTS: usize = 10;

fn source(name: &str, k: usize, seed: u64) -> Source {
    Source {
        algorithm: name.into(),
        representation: "similarity".into(),
        rank: None,
        requested_k: k,
        seed: Some(seed),
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must satisfy 2 <= k <= {n}"
        )));
    }
    Ok(())
}

/// Embeds with the top `k` eigenvectors of `D^{-1/2}SD^{-1/2}`, then runs
/// seeded euclidean k-means on the `n` embedded points.
pub fn spectral_partition(
    s: &SimilarityMatrix,
    k: usize,
    method: SpectralMethod,
    seed: u64,
) -> Result<Clustering> {
    check_k(k, s.n())?;
    let (_, u, d) = spectral::leading_eigenvectors(s, k)?;
    let mut emb = u.transpose();
    for (i, mut col) in emb.column_iter_mut().enumerate() {
        match method {
            SpectralMethod::Ncut => col /= d[i].sqrt(),
            SpectralMethod::Njw => {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                }
            }
        }
    }
    let fit = kmeans_best_of(&emb, k, Metric::Euclidean, seed, BASELINE_RESTARTS)?;
    let mut c = fit.clustering;
    c.source = source(method.name(), k, seed);
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicOptions {
    pub max_steps: usize,
    /// Stop once `‖δᵗ⁺¹ − δᵗ‖_max < acceleration / n`.
    pub acceleration: f64,
}

impl Default for PicOptions {
    fn default() -> Self {
        PicOptions {
            max_steps: 1000,
            acceleration: 1e-8,
        }
    }
}

/// The one-dimensional power-iteration embedding.
pub fn pic_embedding(s: &SimilarityMatrix, opts: &PicOptions) -> Result<Vec<f64>> {
    let n = s.n();
    let p = spectral::transition_matrix(s.matrix())?;
    let degrees: Vec<f64> = s.matrix().row_iter().map(|r| r.sum()).collect();
    let total: f64 = degrees.iter().sum();
    let mut v = nalgebra::DVector::from_iterator(n, degrees.iter().map(|d| d / total));
    let mut delta: Option<nalgebra::DVector<f64>> = None;
    let threshold = opts.acceleration / n as f64;
    for _ in 0..opts.max_steps {
        let mut next = &p * &v;
        let norm = next.abs().sum();
        if norm == 0.0 {
            return Err(Error::Numerical("power iteration collapsed to zero".into()));
        }
        next /= norm;
        let step = &next - &v;
        v = next;
        if let Some(prev) = &delta {
            if (&step - prev).amax() < threshold {
                break;
            }
        }
        delta = Some(step);
    }
    Ok(v.iter().copied().collect())
}

pub fn pic_cluster(s: &SimilarityMatrix, k: usize, seed: u64) -> Result<Clustering> {
    pic_cluster_with(s, k, seed, &PicOptions::default())
}

pub fn pic_cluster_with(
    s: &SimilarityMatrix,
    k: usize,
    seed: u64,
    opts: &PicOptions,
) -> Result<Clustering> {
    check_k(k, s.n())?;
    let v = pic_embedding(s, opts)?;
    let emb = DMatrix::from_row_slice(1, v.len(), &v);
    let fit = kmeans_best_of(&emb, k, Metric::Euclidean, seed, BASELINE_RESTARTS)?;
    let mut c = fit.clustering;
    c.source = source("pic", k, seed);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SimilarityKind;

    fn labels(ids: &[usize]) -> LabelVector {
        LabelVector::from_ids(ids.to_vec()).unwrap()
    }

    fn clustering(ids: &[usize]) -> Clustering {
        Clustering::from_labels(ids, Source::default())
    }

    fn blocks(sizes: &[usize]) -> (SimilarityMatrix, Vec<usize>) {
        let n: usize = sizes.iter().sum();
        let mut truth = Vec::with_capacity(n);
        for (b, &s) in sizes.iter().enumerate() {
            truth.extend(std::iter::repeat_n(b, s));
        }
        let m = DMatrix::from_fn(n, n, |i, j| if truth[i] == truth[j] { 1.0 } else { 0.0 });
        (
            SimilarityMatrix::new(m, SimilarityKind::Adjacency).unwrap(),
            truth,
        )
    }

    #[test]
    fn purity_by_hand() {
        let p = purity(&clustering(&[0, 0, 1, 1]), &labels(&[0, 0, 0, 1])).unwrap();
        assert_eq!(p.value, 0.75);
        assert_eq!(p.contingency, vec![vec![2, 0], vec![1, 1]]);
        assert_eq!(
            purity(&clustering(&[2, 2, 5]), &labels(&[1, 1, 0]))
                .unwrap()
                .value,
            1.0
        );
        assert_eq!(
            purity(&clustering(&[0; 4]), &labels(&[0, 1, 0, 1]))
                .unwrap()
                .value,
            0.5
        );
        assert!(purity(&clustering(&[0, 1]), &labels(&[0, 1, 1])).is_err());
    }

    #[test]
    fn baselines_recover_blocks() {
        let (s, truth) = blocks(&[5, 8, 12]);
        let t = clustering(&truth);
        for method in [SpectralMethod::Ncut, SpectralMethod::Njw] {
            assert!(spectral_partition(&s, 3, method, 7)
                .unwrap()
                .same_partition(&t));
        }
        assert!(pic_cluster(&s, 3, 7).unwrap().same_partition(&t));
    }

    #[test]
    fn pic_is_deterministic_on_constant_matrix() {
        let s = SimilarityMatrix::new(DMatrix::from_element(6, 6, 1.0), SimilarityKind::Adjacency)
            .unwrap();
        let v = pic_embedding(&s, &PicOptions::default()).unwrap();
        assert!(v.iter().all(|x| (x - 1.0 / 6.0).abs() < 1e-15));
        assert_eq!(
            pic_cluster(&s, 2, 3).unwrap(),
            pic_cluster(&s, 2, 3).unwrap()
        );
    }

    #[test]
    fn rejects_bad_k() {
        let (s, _) = blocks(&[2, 3]);
        assert!(spectral_partition(&s, 1, SpectralMethod::Njw, 0).is_err());
        assert!(pic_cluster(&s, 6, 0).is_err());
    }
}

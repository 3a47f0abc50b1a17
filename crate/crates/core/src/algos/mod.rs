//! Ensemble members: k-means (random start), PDDP, PDDP-seeded k-means and a
//! diagonal-covariance Gaussian mixture fitted by EM.

mod emgm;
mod kmeans;
mod pddp;

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use emgm::{emgm, emgm_fit, EmFit, EmOptions};
pub use kmeans::{kmeans, kmeans_best_of, kmeans_fit, Init, KMeansFit, KMeansOptions};
pub use pddp::{pddp, pddp_seeded_kmeans};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Euclidean,
    /// Cosine similarity on unit-normalized observations.
    Spherical,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Spherical => "spherical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    KMeansRandom,
    Pddp,
    PddpKMeans,
    Emgm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::KMeansRandom,
        Algorithm::Pddp,
        Algorithm::PddpKMeans,
        Algorithm::Emgm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeansRandom => "kmeans-random",
            Algorithm::Pddp => "pddp",
            Algorithm::PddpKMeans => "pddp-kmeans",
            Algorithm::Emgm => "emgm",
        }
    }

    pub fn id(self) -> u64 {
        self as u64 + 1
    }

    pub fn uses_seed(self) -> bool {
        matches!(self, Algorithm::KMeansRandom | Algorithm::Emgm)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown algorithm `{s}` (expected kmeans-random, pddp, pddp-kmeans or emgm)"
                ))
            })
    }
}

/// Where a clustering came from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Source {
    pub algorithm: String,
    pub representation: String,
    pub rank: Option<usize>,
    pub requested_k: usize,
    pub seed: Option<u64>,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} on {}", self.algorithm, self.representation)?;
        if let Some(r) = self.rank {
            write!(f, "@{r}")?;
        }
        write!(f, " k~={}", self.requested_k)?;
        if let Some(s) = self.seed {
            write!(f, " seed={s:#x}")?;
        }
        Ok(())
    }
}

/// A hard partition of `n` observations into clusters `0..k`, all nonempty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    assignment: Vec<usize>,
    k: usize,
    pub source: Source,
}

impl Clustering {
    /// Relabels arbitrary ids to `0..k`, preserving their relative order.
    pub fn from_labels(labels: &[usize], source: Source) -> Self {
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let assignment = labels
            .iter()
            .map(|l| ids.binary_search(l).expect("present"))
            .collect();
        Clustering {
            assignment,
            k: ids.len(),
            source,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Requested minus achieved cluster count.
    pub fn shortfall(&self) -> usize {
        self.source.requested_k.saturating_sub(self.k)
    }

    /// Member lists, indexed by cluster id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Cluster means of the columns of `data`, one column per cluster.
    pub fn centroids(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(data.nrows(), self.k);
        let mut counts = vec![0usize; self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            let mut col = out.column_mut(c);
            col += data.column(i);
            counts[c] += 1;
        }
        for (c, mut col) in out.column_iter_mut().enumerate() {
            col /= counts[c] as f64;
        }
        out
    }

    /// Whether both clusterings induce the same partition.
    pub fn same_partition(&self, other: &Clustering) -> bool {
        if self.len() != other.len() || self.k != other.k {
            return false;
        }
        let mut map = vec![usize::MAX; self.k];
        self.assignment
            .iter()
            .zip(&other.assignment)
            .all(|(&a, &b)| {
                if map[a] == usize::MAX {
                    map[a] = b;
                }
                map[a] == b
            })
    }
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} must be in 1..={n}"
        )));
    }
    Ok(())
}

/// Unit-normalizes columns; a zero column is an error.
pub(crate) fn normalize_columns(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = data.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::Data(format!(
                "spherical metric needs nonzero observations; column {j} is zero"
            )));
        }
        col /= norm;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_is_contiguous() {
        let c = Clustering::from_labels(&[7, 3, 7, 9], Source::default());
        assert_eq!(c.assignment(), &[1, 0, 1, 2]);
        assert_eq!(c.k(), 3);
    }

    #[test]
    fn partition_equality_ignores_ids() {
        let a = Clustering::from_labels(&[0, 0, 1, 2], Source::default());
        let b = Clustering::from_labels(&[5, 5, 2, 0], Source::default());
        let c = Clustering::from_labels(&[0, 1, 1, 2], Source::default());
        assert!(a.same_partition(&b));
        assert!(!a.same_partition(&c));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("dbscan".parse::<Algorithm>().is_err());
    }
}

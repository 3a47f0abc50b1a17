//! Cluster-count estimation by iterated consensus clustering.
//!
//! An ensemble of clusterings (k-means, PDDP, PDDP-seeded k-means and a
//! diagonal Gaussian mixture, each applied to the raw data and to PCA, truncated
//! SVD and NMF reductions) is folded into a co-clustering count matrix. The
//! random walk on that matrix is nearly uncoupled when the data has `k`
//! well-defined groups, in which case its transition matrix has a cluster of
//! `k` eigenvalues near 1. The iterated variant feeds the consensus matrix back
//! in as data, dropping weak entries each round, until that cluster is visible.
//!
//! The pipeline is split by stage:
//!
//! | Module | Stage |
//! |--------|-------|
//! | [`ingest`] | dense/MatrixMarket loading, labels, tf-idf weighting |
//! | [`dimred`] | rank selection, PCA, truncated SVD, ACLS NMF |
//! | [`algos`] | the four ensemble members |
//! | [`consensus`] | ensemble execution, co-clustering counts, drop tolerance |
//! | [`spectral`] | similarity graphs, walk spectrum, Perron-cluster detection |
//! | [`icc`] | the basic and iterated drivers |
//! | [`eval`] | purity and the NCut / NJW / PIC baselines |

pub mod algos;
pub mod consensus;
pub mod dimred;
pub mod error;
pub mod eval;
pub mod icc;
pub mod ingest;
pub mod linalg;
pub mod mtx;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};

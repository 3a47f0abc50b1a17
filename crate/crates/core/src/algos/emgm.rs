use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::kmeans::{kmeans_fit, Init, KMeansOptions};
use super::{check_k, Clustering, Metric, Source};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop when the log-likelihood changes by less than this.
    pub tol: f64,
    /// Variances are floored at `floor · (feature variance + 1e-12)`.
    pub variance_floor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 200,
            tol: 1e-6,
            variance_floor: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmFit {
    pub clustering: Clustering,
    /// Log-likelihood at each E step.
    pub log_likelihood: Vec<f64>,
    pub means: DMatrix<f64>,
    pub variances: DMatrix<f64>,
    pub weights: Vec<f64>,
}

/// Gaussian mixture with diagonal covariances fitted by EM.
///
/// Means start from a seeded k-means run, every component starts with the
/// per-feature data variance, and weights start uniform. The returned
/// clustering assigns each observation to its most responsible component.
pub fn emgm_fit(data: &DMatrix<f64>, k: usize, seed: u64, opts: &EmOptions) -> Result<EmFit> {
    let (d, n) = data.shape();
    check_k(k, n)?;
    let start = kmeans_fit(
        data,
        k,
        Metric::Euclidean,
        Init::Random { seed },
        &KMeansOptions::default(),
    )?;
    let mut means = start.centroids;
    let k = means.ncols();

    let global_mean = data.column_mean();
    let feature_var: Vec<f64> = (0..d)
        .map(|j| {
            data.row(j)
                .iter()
                .map(|x| (x - global_mean[j]).powi(2))
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let floor: Vec<f64> = feature_var
        .iter()
        .map(|v| opts.variance_floor * (v + 1e-12))
        .collect();
    let mut variances = DMatrix::from_fn(d, k, |j, _| feature_var[j].max(floor[j]));
    let mut weights = vec![1.0 / k as f64; k];

    let mut resp = DMatrix::zeros(k, n);
    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..opts.max_iter.max(1) {
        // E step
        let consts: Vec<f64> = (0..k)
            .map(|c| {
                weights[c].ln()
                    - 0.5
                        * variances
                            .column(c)
                            .iter()
                            .map(|v| (2.0 * PI * v).ln())
                            .sum::<f64>()
            })
            .collect();
        let mut ll = 0.0;
        for i in 0..n {
            let x = data.column(i);
            let mut best = f64::NEG_INFINITY;
            for c in 0..k {
                let mut q = 0.0;
                for j in 0..d {
                    let diff = x[j] - means[(j, c)];
                    q += diff * diff / variances[(j, c)];
                }
                let lp = consts[c] - 0.5 * q;
                resp[(c, i)] = lp;
                best = best.max(lp);
            }
            let mut sum = 0.0;
            for c in 0..k {
                let e = (resp[(c, i)] - best).exp();
                resp[(c, i)] = e;
                sum += e;
            }
            for c in 0..k {
                resp[(c, i)] /= sum;
            }
            ll += best + sum.ln();
        }
        let converged = trace
            .last()
            .is_some_and(|prev| (ll - prev).abs() < opts.tol);
        trace.push(ll);
        if converged {
            break;
        }
        // M step
        for c in 0..k {
            let nk: f64 = resp.row(c).sum();
            weights[c] = nk / n as f64;
            if nk <= 1e-300 {
                continue;
            }
            let mut mean = data * resp.row(c).transpose();
            mean /= nk;
            for j in 0..d {
                let mut v = 0.0;
                for i in 0..n {
                    let diff = data[(j, i)] - mean[j];
                    v += resp[(c, i)] * diff * diff;
                }
                variances[(j, c)] = (v / nk).max(floor[j]);
            }
            means.set_column(c, &mean);
        }
    }

    let labels: Vec<usize> = (0..n).map(|i| resp.column(i).imax()).collect();
    let clustering = Clustering::from_labels(
        &labels,
        Source {
            algorithm: "emgm".into(),
            requested_k: k,
            seed: Some(seed),
            ..Source::default()
        },
    );
    Ok(EmFit {
        clustering,
        log_likelihood: trace,
        means,
        variances,
        weights,
    })
}

pub fn emgm(data: &DMatrix<f64>, k: usize, seed: u64) -> Result<Clustering> {
    emgm_fit(data, k, seed, &EmOptions::default()).map(|f| f.clustering)
}

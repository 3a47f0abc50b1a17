use nalgebra::DMatrix;
use rand::seq::index;

use super::{check_k, normalize_columns, Clustering, Metric, Source};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug)]
pub enum Init<'a> {
    /// `k` distinct observations drawn with the given seed.
    Random { seed: u64 },
    /// Starting centroids, one per column.
    Centroids(&'a DMatrix<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KMeansOptions {
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions { max_iter: 300 }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub clustering: Clustering,
    pub centroids: DMatrix<f64>,
    /// Objective after each assignment step: the sum of squared distances
    /// (euclidean) or the negated sum of cosines (spherical).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl KMeansFit {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("nonempty trace")
    }
}

struct Lloyd<'a> {
    data: &'a DMatrix<f64>,
    metric: Metric,
}

impl Lloyd<'_> {
    /// Cost of placing observation `i` at `centroid`; smaller is closer.
    fn cost(&self, i: usize, centroid: nalgebra::DVectorView<'_, f64>) -> f64 {
        let x = self.data.column(i);
        match self.metric {
            Metric::Euclidean => (x - centroid).norm_squared(),
            Metric::Spherical => -x.dot(&centroid),
        }
    }

    /// Nearest centroid per observation and the total cost. An observation
    /// only leaves its current cluster for a strictly closer centroid; fresh
    /// ties go to the lowest index.
    fn assign(
        &self,
        centroids: &DMatrix<f64>,
        current: &[usize],
        assignment: &mut [usize],
        costs: &mut [f64],
    ) -> f64 {
        let mut total = 0.0;
        for i in 0..self.data.ncols() {
            let mut best = match current[i] {
                c if c < centroids.ncols() => (c, self.cost(i, centroids.column(c))),
                _ => (0, f64::INFINITY),
            };
            for c in 0..centroids.ncols() {
                let d = self.cost(i, centroids.column(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            assignment[i] = best.0;
            costs[i] = best.1;
            total += best.1;
        }
        total
    }

    fn update(&self, assignment: &[usize], k: usize) -> (DMatrix<f64>, Vec<usize>) {
        let mut centroids = DMatrix::zeros(self.data.nrows(), k);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            let mut col = centroids.column_mut(c);
            col += self.data.column(i);
            counts[c] += 1;
        }
        for (c, mut col) in centroids.column_iter_mut().enumerate() {
            if counts[c] > 0 {
                match self.metric {
                    Metric::Euclidean => col /= counts[c] as f64,
                    Metric::Spherical => {
                        let norm = col.norm();
                        if norm > 0.0 {
                            col /= norm;
                        }
                    }
                }
            }
        }
        (centroids, counts)
    }

    /// Moves the observation farthest from its own centroid into each empty
    /// cluster, while donors with more than one member remain.
    fn repair(
        &self,
        centroids: &mut DMatrix<f64>,
        counts: &mut [usize],
        assignment: &mut [usize],
        costs: &mut [f64],
    ) {
        for empty in 0..counts.len() {
            if counts[empty] > 0 {
                continue;
            }
            let donor = (0..assignment.len())
                .filter(|&i| counts[assignment[i]] > 1)
                .max_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(b.cmp(&a)));
            let Some(i) = donor else { return };
            counts[assignment[i]] -= 1;
            counts[empty] = 1;
            assignment[i] = empty;
            costs[i] = f64::NEG_INFINITY;
            centroids.set_column(empty, &self.data.column(i));
        }
    }
}

/// Lloyd iteration from the given start until assignments stop changing or
/// `max_iter` rounds pass. Empty clusters are reseeded at the observation
/// farthest from its current centroid.
pub fn kmeans_fit(
    data: &DMatrix<f64>,
    k: usize,
    metric: Metric,
    init: Init<'_>,
    opts: &KMeansOptions,
) -> Result<KMeansFit> {
    let n = data.ncols();
    let normalized;
    let data = match metric {
        Metric::Euclidean => data,
        Metric::Spherical => {
            normalized = normalize_columns(data)?;
            &normalized
        }
    };
    let (mut centroids, seed_used) = match init {
        Init::Random { seed } => {
            check_k(k, n)?;
            let mut rng = seed::rng(seed);
            let mut picks = index::sample(&mut rng, n, k).into_vec();
            picks.sort_unstable();
            let mut c = DMatrix::zeros(data.nrows(), k);
            for (dst, &src) in picks.iter().enumerate() {
                c.set_column(dst, &data.column(src));
            }
            (c, Some(seed))
        }
        Init::Centroids(given) => {
            if given.nrows() != data.nrows() {
                return Err(Error::InvalidArgument(format!(
                    "initial centroids have dimension {}, data has {}",
                    given.nrows(),
                    data.nrows()
                )));
            }
            check_k(given.ncols(), n)?;
            let mut c = given.clone();
            if metric == Metric::Spherical {
                for mut col in c.column_iter_mut() {
                    let norm = col.norm();
                    if norm > 0.0 {
                        col /= norm;
                    }
                }
            }
            (c, None)
        }
    };
    let k = centroids.ncols();
    let lloyd = Lloyd { data, metric };
    let mut assignment = vec![usize::MAX; n];
    let mut next = vec![0usize; n];
    let mut costs = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..opts.max_iter.max(1) {
        iterations += 1;
        let total = lloyd.assign(&centroids, &assignment, &mut next, &mut costs);
        trace.push(total);
        if next == assignment {
            break;
        }
        assignment.copy_from_slice(&next);
        let (mut updated, mut counts) = lloyd.update(&assignment, k);
        if counts.contains(&0) {
            lloyd.repair(&mut updated, &mut counts, &mut assignment, &mut costs);
        }
        centroids = updated;
    }
    if assignment[0] == usize::MAX {
        assignment.copy_from_slice(&next);
    }
    let clustering = Clustering::from_labels(
        &assignment,
        Source {
            algorithm: "kmeans".into(),
            requested_k: k,
            seed: seed_used,
            ..Source::default()
        },
    );
    let (final_centroids, _) = lloyd.update(clustering.assignment(), clustering.k());
    Ok(KMeansFit {
        clustering,
        centroids: final_centroids,
        objective_trace: trace,
        iterations,
    })
}

pub fn kmeans(data: &DMatrix<f64>, k: usize, metric: Metric, init: Init<'_>) -> Result<Clustering> {
    kmeans_fit(data, k, metric, init, &KMeansOptions::default()).map(|f| f.clustering)
}

/// Best of `restarts` seeded random starts by final objective; earlier
/// restarts win ties.
pub fn kmeans_best_of(
    data: &DMatrix<f64>,
    k: usize,
    metric: Metric,
    seed_value: u64,
    restarts: usize,
) -> Result<KMeansFit> {
    let mut best: Option<KMeansFit> = None;
    for r in 0..restarts.max(1) {
        let fit = kmeans_fit(
            data,
            k,
            metric,
            Init::Random {
                seed: seed::derive(seed_value, &[r as u64]),
            },
            &KMeansOptions::default(),
        )?;
        if best
            .as_ref()
            .is_none_or(|b| fit.objective() < b.objective())
        {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

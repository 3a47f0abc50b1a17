//! Running the clustering ensemble and folding it into co-clustering counts.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::algos::{self, Algorithm, Clustering, Init, Metric, Source};
use crate::dimred::{self, NmfConfig, RankPolicy, Reduction};
use crate::error::{Error, Result};
use crate::ingest::DataMatrix;
use crate::mtx;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Representation {
    Raw,
    Reduced(Reduction),
}

impl Representation {
    pub const ALL: [Representation; 4] = [
        Representation::Raw,
        Representation::Reduced(Reduction::Pca),
        Representation::Reduced(Reduction::Svd),
        Representation::Reduced(Reduction::Nmf),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Raw => "raw",
            Representation::Reduced(r) => r.name(),
        }
    }

    fn id(self) -> u64 {
        match self {
            Representation::Raw => 1,
            Representation::Reduced(Reduction::Pca) => 2,
            Representation::Reduced(Reduction::Svd) => 3,
            Representation::Reduced(Reduction::Nmf) => 4,
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Representation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown representation `{s}` (expected raw, pca, svd or nmf)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RankSpec {
    Policy(RankPolicy),
    /// Strictly increasing explicit ranks.
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    /// Strictly increasing hypothesized cluster counts.
    pub ktilde: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub representations: Vec<Representation>,
    pub ranks: RankSpec,
    /// Geometry used by the two k-means members.
    pub metric: Metric,
    pub base_seed: u64,
    pub nmf: NmfConfig,
    pub variance_cap: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            ktilde: vec![2, 3, 4, 5],
            algorithms: Algorithm::ALL.to_vec(),
            representations: Representation::ALL.to_vec(),
            ranks: RankSpec::Policy(RankPolicy::Variance),
            metric: Metric::Euclidean,
            base_seed: 0,
            nmf: NmfConfig::default(),
            variance_cap: dimred::DEFAULT_VARIANCE_CAP,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.ktilde.is_empty() {
            return Err(Error::InvalidArgument("ktilde must not be empty".into()));
        }
        if self.ktilde[0] == 0 || self.ktilde.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "ktilde must be strictly increasing positive integers, got {:?}",
                self.ktilde
            )));
        }
        let kmax = *self.ktilde.last().expect("nonempty");
        if kmax >= n {
            return Err(Error::InvalidArgument(format!(
                "largest ktilde {kmax} must be below the observation count {n}"
            )));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("no algorithms selected".into()));
        }
        if self.representations.is_empty() {
            return Err(Error::InvalidArgument("no representations selected".into()));
        }
        if let RankSpec::Explicit(r) = &self.ranks {
            if r.is_empty() || r[0] == 0 || r.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "explicit ranks must be strictly increasing positive integers, got {r:?}"
                )));
            }
        }
        Ok(())
    }

    /// Clusterings per k̃ when every representation is available.
    pub fn nominal_runs_per_k(&self, rank_count: usize) -> usize {
        let reductions = self
            .representations
            .iter()
            .filter(|r| **r != Representation::Raw)
            .count();
        let raw = usize::from(self.representations.contains(&Representation::Raw));
        self.algorithms.len() * (raw + reductions * rank_count)
    }
}

/// The `J · N` clusterings of one ensemble pass.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub clusterings: Vec<Clustering>,
    /// Number of k̃ values.
    pub j: usize,
    /// Clusterings per k̃ value.
    pub n_per_k: usize,
    /// Representations that could not be produced, with the reason.
    pub skipped: Vec<String>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.clusterings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusterings.is_empty()
    }
}

struct Prepared {
    representation: Representation,
    rank: Option<usize>,
    data: DMatrix<f64>,
    metric: Metric,
}

fn has_zero_column(m: &DMatrix<f64>) -> bool {
    m.column_iter().any(|c| c.iter().all(|v| *v == 0.0))
}

fn prepare(
    x: &DataMatrix,
    cfg: &EnsembleConfig,
    skipped: &mut Vec<String>,
) -> Result<Vec<Prepared>> {
    let mut out = Vec::new();
    let wants_reduction = cfg
        .representations
        .iter()
        .any(|r| *r != Representation::Raw);
    let max_rank = x.feature_count().min(x.observation_count());
    let ranks: Option<Vec<usize>> = if !wants_reduction {
        None
    } else {
        match &cfg.ranks {
            RankSpec::Explicit(r) => {
                if *r.last().expect("validated") > max_rank {
                    return Err(Error::InvalidArgument(format!(
                        "explicit rank {} exceeds min(m, n) = {max_rank}",
                        r.last().unwrap()
                    )));
                }
                Some(r.clone())
            }
            RankSpec::Policy(p) => match dimred::select_ranks_capped(x, *p, cfg.variance_cap) {
                Ok(t) => Some(t.as_array().to_vec()),
                Err(e) => {
                    skipped.push(format!("all reductions: {e}"));
                    None
                }
            },
        }
    };

    let mut push = |representation: Representation, rank: Option<usize>, data: DMatrix<f64>| {
        let metric = if cfg.metric == Metric::Spherical && has_zero_column(&data) {
            warn!(
                "{representation}{} has zero observations; k-means falls back to euclidean there",
                rank.map(|r| format!("@{r}")).unwrap_or_default()
            );
            Metric::Euclidean
        } else {
            cfg.metric
        };
        out.push(Prepared {
            representation,
            rank,
            data,
            metric,
        });
    };

    for &rep in &cfg.representations {
        match (rep, &ranks) {
            (Representation::Raw, _) => push(rep, None, x.dense().into_owned()),
            (Representation::Reduced(_), None) => {}
            (Representation::Reduced(method), Some(ranks)) => {
                let reduced = match method {
                    Reduction::Pca => dimred::pca_ranks(x, ranks),
                    Reduction::Svd => dimred::svd_ranks(x, ranks),
                    Reduction::Nmf => {
                        if !x.is_nonnegative() {
                            skipped.push("nmf: data has negative entries".into());
                            continue;
                        }
                        ranks
                            .iter()
                            .map(|&r| {
                                let s =
                                    seed::derive(cfg.base_seed, &[rep.id(), r as u64, 0x4e4d46]);
                                dimred::nmf_acls(x, r, &cfg.nmf, s).map(|f| f.into_reduced())
                            })
                            .collect()
                    }
                };
                for (r, red) in ranks.iter().zip(reduced?) {
                    push(rep, Some(*r), red.values);
                }
            }
        }
    }
    for s in skipped.iter() {
        warn!("skipped {s}");
    }
    Ok(out)
}

fn run_one(
    algorithm: Algorithm,
    prepared: &Prepared,
    k: usize,
    base_seed: u64,
) -> Result<Clustering> {
    let seed_value = seed::derive(
        base_seed,
        &[
            algorithm.id(),
            prepared.representation.id(),
            prepared.rank.unwrap_or(0) as u64,
            k as u64,
        ],
    );
    let data = &prepared.data;
    let mut c = match algorithm {
        Algorithm::KMeansRandom => {
            algos::kmeans(data, k, prepared.metric, Init::Random { seed: seed_value })?
        }
        Algorithm::Pddp => algos::pddp(data, k)?,
        Algorithm::PddpKMeans => algos::pddp_seeded_kmeans(data, k, prepared.metric)?,
        Algorithm::Emgm => algos::emgm(data, k, seed_value)?,
    };
    c.source = Source {
        algorithm: algorithm.name().into(),
        representation: prepared.representation.name().into(),
        rank: prepared.rank,
        requested_k: k,
        seed: algorithm.uses_seed().then_some(seed_value),
    };
    Ok(c)
}

/// Runs every (k̃, algorithm, representation, rank) combination.
///
/// Reductions are computed once and shared. A representation that cannot be
/// produced (NMF on data with negative entries, or no valid rank triple) is
/// skipped with a warning; runs that fall short of k̃ are kept as they are.
pub fn run_ensemble(x: &DataMatrix, cfg: &EnsembleConfig) -> Result<Ensemble> {
    cfg.validate(x.observation_count())?;
    let mut skipped = Vec::new();
    let prepared = prepare(x, cfg, &mut skipped)?;
    let n_per_k = cfg.algorithms.len() * prepared.len();
    if n_per_k == 0 {
        return Err(Error::Data(format!(
            "no representation available ({})",
            skipped.join("; ")
        )));
    }
    let mut tasks: Vec<(usize, Algorithm, &Prepared)> = Vec::new();
    for &k in &cfg.ktilde {
        for &a in &cfg.algorithms {
            tasks.extend(prepared.iter().map(|p| (k, a, p)));
        }
    }
    let clusterings = tasks
        .par_iter()
        .map(|&(k, a, p)| run_one(a, p, k, cfg.base_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        clusterings,
        j: cfg.ktilde.len(),
        n_per_k,
        skipped,
    })
}

/// Symmetric co-clustering counts over an ensemble of size `JN`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusMatrix {
    m: DMatrix<f64>,
    ensemble_size: usize,
}

impl ConsensusMatrix {
    /// Wraps an existing matrix after checking symmetry, nonnegativity and a
    /// positive diagonal.
    pub fn from_parts(m: DMatrix<f64>, ensemble_size: usize) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Data("consensus matrix must be square".into()));
        }
        if ensemble_size == 0 {
            return Err(Error::Data("ensemble size must be positive".into()));
        }
        let n = m.nrows();
        for j in 0..n {
            if m[(j, j)] <= 0.0 {
                return Err(Error::Data(format!("diagonal entry {j} is not positive")));
            }
            for i in 0..n {
                let v = m[(i, j)];
                if !(v >= 0.0 && v.is_finite()) || v != m[(j, i)] {
                    return Err(Error::Data(format!(
                        "entry ({i}, {j}) breaks symmetry or nonnegativity"
                    )));
                }
            }
        }
        Ok(ConsensusMatrix { m, ensemble_size })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// The consensus matrix as `n × n` column data for the next iteration.
    pub fn to_data(&self) -> Result<DataMatrix> {
        DataMatrix::from_dense(self.m.clone())
    }

    pub fn write_mtx<W: Write>(&self, w: W) -> std::io::Result<()> {
        mtx::write_symmetric(
            w,
            self.n(),
            |i, j| self.m[(i, j)],
            &[format!("ensemble_size {}", self.ensemble_size)],
        )
    }

    /// Reads a file written by [`ConsensusMatrix::write_mtx`]. Without an
    /// `ensemble_size` comment the largest diagonal entry is used.
    pub fn read_mtx<R: BufRead>(r: R) -> Result<Self> {
        let coo = mtx::read_coordinate(r)?;
        if coo.nrows != coo.ncols {
            return Err(Error::Data("consensus matrix must be square".into()));
        }
        let mut m = DMatrix::<f64>::zeros(coo.nrows, coo.ncols);
        for (i, j, v) in coo.expanded_entries() {
            m[(i, j)] += v;
        }
        let declared = coo.comments.iter().find_map(|c| {
            c.strip_prefix("ensemble_size")
                .and_then(|rest| rest.trim().parse::<usize>().ok())
        });
        let size = declared.unwrap_or_else(|| m.diagonal().max().round().max(1.0) as usize);
        ConsensusMatrix::from_parts(m, size)
    }
}

/// `M_ij` = number of clusterings placing `i` and `j` together; `M_ii = JN`.
pub fn build_consensus(clusterings: &[Clustering]) -> Result<ConsensusMatrix> {
    let first = clusterings
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let n = first.len();
    if let Some(bad) = clusterings.iter().position(|c| c.len() != n) {
        return Err(Error::Data(format!(
            "clustering {bad} covers {} observations, expected {n}",
            clusterings[bad].len()
        )));
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for c in clusterings {
        for members in c.members() {
            for &j in &members {
                for &i in &members {
                    m[(i, j)] += 1.0;
                }
            }
        }
    }
    Ok(ConsensusMatrix {
        m,
        ensemble_size: clusterings.len(),
    })
}

/// Zeroes every entry strictly below `τ · JN`, for `0 ≤ τ < 0.5`.
pub fn apply_drop_tolerance(m: &ConsensusMatrix, tau: f64) -> Result<ConsensusMatrix> {
    if !(0.0..0.5).contains(&tau) {
        return Err(Error::InvalidArgument(format!(
            "drop tolerance must lie in [0, 0.5), got {tau}"
        )));
    }
    let threshold = tau * m.ensemble_size as f64;
    let mut out = m.m.clone();
    out.iter_mut().for_each(|v| {
        if *v < threshold {
            *v = 0.0;
        }
    });
    Ok(ConsensusMatrix {
        m: out,
        ensemble_size: m.ensemble_size,
    })
}

/// Counts of achieved cluster counts per (algorithm, requested k̃), for
/// reporting shortfalls.
pub fn shortfall_summary(e: &Ensemble) -> BTreeMap<(String, usize), usize> {
    let mut out = BTreeMap::new();
    for c in &e.clusterings {
        if c.shortfall() > 0 {
            *out.entry((c.source.algorithm.clone(), c.source.requested_k))
                .or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn clustering(labels: &[usize]) -> Clustering {
        Clustering::from_labels(labels, Source::default())
    }

    #[test]
    fn counts_by_definition() {
        let m = build_consensus(&[clustering(&[0, 0, 1]), clustering(&[0, 1, 1])]).unwrap();
        assert_eq!(
            *m.matrix(),
            dmatrix![2.0, 1.0, 0.0; 1.0, 2.0, 1.0; 0.0, 1.0, 2.0]
        );
        assert_eq!(m.ensemble_size(), 2);
    }

    #[test]
    fn identical_clusterings_give_blocks() {
        let c = clustering(&[0, 1, 0, 1]);
        let m = build_consensus(&vec![c; 5]).unwrap();
        assert_eq!(m.matrix()[(0, 2)], 5.0);
        assert_eq!(m.matrix()[(0, 1)], 0.0);
        assert_eq!(m.matrix()[(3, 3)], 5.0);
    }

    #[test]
    fn disagreeing_pair_bounded() {
        let m = build_consensus(&[clustering(&[0, 0, 1, 1]), clustering(&[0, 1, 0, 1])]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(m.matrix()[(i, j)] <= 1.0);
                }
            }
        }
    }

    #[test]
    fn mismatched_lengths() {
        assert!(build_consensus(&[clustering(&[0, 1]), clustering(&[0, 1, 1])]).is_err());
        assert!(build_consensus(&[]).is_err());
    }

    #[test]
    fn drop_tolerance_is_strict() {
        let mut raw = DMatrix::from_element(3, 3, 2.0);
        raw[(0, 1)] = 1.0;
        raw[(1, 0)] = 1.0;
        for i in 0..3 {
            raw[(i, i)] = 20.0;
        }
        let m = ConsensusMatrix::from_parts(raw, 20).unwrap();
        let d = apply_drop_tolerance(&m, 0.1).unwrap();
        assert_eq!(d.matrix()[(0, 1)], 0.0);
        assert_eq!(d.matrix()[(0, 2)], 2.0);
        assert_eq!(apply_drop_tolerance(&m, 0.0).unwrap(), m);
        assert!(apply_drop_tolerance(&m, 0.5).is_err());
        assert!(apply_drop_tolerance(&m, -0.1).is_err());
    }

    #[test]
    fn mtx_round_trip() {
        let m = build_consensus(&[clustering(&[0, 0, 1]), clustering(&[0, 1, 1])]).unwrap();
        let mut buf = Vec::new();
        m.write_mtx(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("% ensemble_size 2"));
        assert_eq!(ConsensusMatrix::read_mtx(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn config_validation() {
        let mut cfg = EnsembleConfig {
            ktilde: vec![3, 3],
            ..EnsembleConfig::default()
        };
        assert!(cfg.validate(10).is_err());
        cfg.ktilde = vec![3, 10];
        assert!(cfg.validate(10).is_err());
        cfg.ktilde = vec![3, 9];
        assert!(cfg.validate(10).is_ok());
        cfg.algorithms.clear();
        assert!(cfg.validate(10).is_err());
    }

    #[test]
    fn nominal_size() {
        let cfg = EnsembleConfig::default();
        assert_eq!(cfg.nominal_runs_per_k(3), 40);
    }
}

//! The basic and iterated consensus methods.
//!
//! One pass runs the ensemble, accumulates the consensus matrix `M` and
//! reads the Perron cluster off the spectrum of the walk on `M`. The iterated
//! method zeroes weak co-occurrences below `τ · JN` and feeds `M` back in as
//! `n × n` data, clustered with the spherical metric, until the Perron
//! cluster is visible and stable.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::{info, warn};

use crate::algos::{Clustering, Metric, Source};
use crate::consensus::{
    apply_drop_tolerance, build_consensus, run_ensemble, ConsensusMatrix, EnsembleConfig, RankSpec,
    Representation,
};
use crate::dimred::RankPolicy;
use crate::error::{Error, Result};
use crate::eval::{spectral_partition, SpectralMethod};
use crate::ingest::DataMatrix;
use crate::seed;
use crate::spectral::{
    self, connected_components, detect_perron, PerronReport, SimilarityKind, SimilarityMatrix,
    SpectralDecomposition, Visibility,
};

/// Which representations later iterations use when clustering `M`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IterateRepresentations {
    Raw,
    #[default]
    All,
}

impl IterateRepresentations {
    pub fn name(self) -> &'static str {
        match self {
            IterateRepresentations::Raw => "raw",
            IterateRepresentations::All => "all",
        }
    }
}

impl std::str::FromStr for IterateRepresentations {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(IterateRepresentations::Raw),
            "all" => Ok(IterateRepresentations::All),
            _ => Err(Error::InvalidArgument(format!(
                "unknown iterate-representations `{s}` (expected raw or all)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IccConfig {
    pub ensemble: EnsembleConfig,
    /// Drop tolerance in `[0, 0.5)`.
    pub tau: f64,
    pub max_iterations: usize,
    /// Smallest gap that makes the Perron cluster visible.
    pub theta: f64,
    /// Consecutive visible iterations with the same `k` needed to stop.
    pub stability_window: usize,
    /// Largest cluster count considered; default `min(max k̃ + 3, n − 1)`.
    pub k_max: Option<usize>,
    pub iterate_representations: IterateRepresentations,
    /// Run exactly this many iterations, ignoring the stopping rule.
    pub force_iterations: Option<usize>,
}

impl Default for IccConfig {
    fn default() -> Self {
        IccConfig {
            ensemble: EnsembleConfig::default(),
            tau: 0.1,
            max_iterations: 8,
            theta: spectral::DEFAULT_THETA,
            stability_window: 2,
            k_max: None,
            iterate_representations: IterateRepresentations::All,
            force_iterations: None,
        }
    }
}

impl IccConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        self.ensemble.validate(n)?;
        if !(0.0..0.5).contains(&self.tau) {
            return Err(Error::InvalidArgument(format!(
                "drop tolerance must lie in [0, 0.5), got {}",
                self.tau
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be positive".into(),
            ));
        }
        if self.force_iterations == Some(0) {
            return Err(Error::InvalidArgument(
                "forced iteration count must be positive".into(),
            ));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if self.stability_window == 0 {
            return Err(Error::InvalidArgument(
                "stability_window must be positive".into(),
            ));
        }
        let k_max = self.k_max_for(n);
        if k_max < 2 || k_max >= n {
            return Err(Error::InvalidArgument(format!(
                "k_max = {k_max} must satisfy 2 <= k_max < n = {n}"
            )));
        }
        Ok(())
    }

    pub fn k_max_for(&self, n: usize) -> usize {
        self.k_max.unwrap_or_else(|| {
            let top = self.ensemble.ktilde.last().copied().unwrap_or(2);
            (top + 3).min(n.saturating_sub(1))
        })
    }

    /// Ensemble settings for iteration `t`: `t = 0` clusters the input as
    /// configured, later iterations cluster `M` spherically with a seed
    /// mixed with `t`.
    pub fn ensemble_for_iteration(&self, t: usize) -> EnsembleConfig {
        let mut e = self.ensemble.clone();
        if t == 0 {
            return e;
        }
        e.metric = Metric::Spherical;
        e.base_seed = seed::derive(self.ensemble.base_seed, &[t as u64]);
        if self.iterate_representations == IterateRepresentations::Raw {
            e.representations = vec![Representation::Raw];
        }
        if let RankSpec::Explicit(_) = e.ranks {
            e.ranks = RankSpec::Policy(RankPolicy::Variance);
        }
        e
    }
}

/// Spectrum and Perron report of a consensus matrix.
pub fn analyze(
    m: &ConsensusMatrix,
    k_max: usize,
    theta: f64,
) -> Result<(SpectralDecomposition, PerronReport)> {
    let s = SimilarityMatrix::new(m.matrix().clone(), SimilarityKind::Consensus)?;
    let spectrum = spectral::transition_spectrum_with(&s, k_max)?;
    let report = detect_perron(&spectrum, k_max, theta)?;
    Ok((spectrum, report))
}

/// One pass without a drop tolerance.
pub fn basic_run(x: &DataMatrix, cfg: &IccConfig) -> Result<PerronReport> {
    cfg.validate(x.observation_count())?;
    let ensemble = run_ensemble(x, &cfg.ensemble)?;
    let m = build_consensus(&ensemble.clusterings)?;
    analyze(&m, cfg.k_max_for(x.observation_count()), cfg.theta).map(|(_, r)| r)
}

/// As [`basic_run`] on a supplied ensemble.
pub fn basic_run_on(clusterings: &[Clustering], k_max: usize, theta: f64) -> Result<PerronReport> {
    let m = build_consensus(clusterings)?;
    analyze(&m, k_max, theta).map(|(_, r)| r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Visible, and `M` has exactly `k` connected components.
    VisiblePerron,
    /// Visible with the same `k` for the whole stability window.
    StableK,
    MaxIterations,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::VisiblePerron => "visible-perron",
            StopReason::StableK => "stable-k",
            StopReason::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Iteration {
    pub report: PerronReport,
    /// `M` after the drop tolerance.
    pub consensus: ConsensusMatrix,
    pub spectrum: SpectralDecomposition,
    pub components: usize,
    /// Observations left without any off-diagonal similarity.
    pub singletons: Vec<usize>,
    /// Representations skipped by the ensemble.
    pub skipped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IccResult {
    pub k: usize,
    pub iterations_used: usize,
    pub history: Vec<Iteration>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Partition of the final `M` into `k` clusters: its connected components
    /// when there are exactly `k`, else the normalized spectral embedding.
    pub partition: Clustering,
    /// Off-block share of each iteration's `M` against `partition`.
    pub coupling: Vec<f64>,
}

/// Share of the total mass of `m` lying between different clusters.
pub fn coupling_ratio(m: &ConsensusMatrix, partition: &Clustering) -> Result<f64> {
    if partition.len() != m.n() {
        return Err(Error::InvalidArgument(format!(
            "partition covers {} observations, matrix has {}",
            partition.len(),
            m.n()
        )));
    }
    let a = partition.assignment();
    let mut off = 0.0;
    let mut total = 0.0;
    for (j, col) in m.matrix().column_iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            total += v;
            if a[i] != a[j] {
                off += v;
            }
        }
    }
    Ok(off / total)
}

pub fn singletons(m: &ConsensusMatrix) -> Vec<usize> {
    let mat = m.matrix();
    (0..m.n())
        .filter(|&i| (0..m.n()).all(|j| j == i || mat[(i, j)] == 0.0))
        .collect()
}

fn final_partition(m: &ConsensusMatrix, k: usize, seed_value: u64) -> Result<Clustering> {
    let s = SimilarityMatrix::new(m.matrix().clone(), SimilarityKind::Consensus)?;
    let comps = connected_components(&s);
    let source = |name: &str| Source {
        algorithm: name.into(),
        representation: "consensus".into(),
        rank: None,
        requested_k: k,
        seed: None,
    };
    if comps.count == k {
        return Ok(Clustering::from_labels(&comps.labels, source("components")));
    }
    if k < 2 {
        return Ok(Clustering::from_labels(&vec![0; m.n()], source("single")));
    }
    spectral_partition(&s, k, SpectralMethod::Njw, seed_value)
}

pub fn icc_run(x: &DataMatrix, cfg: &IccConfig) -> Result<IccResult> {
    icc_run_observed(x, cfg, |_, _| Ok(()))
}

/// As [`icc_run`], calling `observe(t, iteration)` as each iteration ends.
pub fn icc_run_observed<F>(x: &DataMatrix, cfg: &IccConfig, mut observe: F) -> Result<IccResult>
where
    F: FnMut(usize, &Iteration) -> Result<()>,
{
    let n = x.observation_count();
    cfg.validate(n)?;
    let k_max = cfg.k_max_for(n);
    let limit = cfg.force_iterations.unwrap_or(cfg.max_iterations);
    let mut history: Vec<Iteration> = Vec::new();
    let mut stop: Option<StopReason> = None;
    let mut data: Option<DataMatrix> = None;

    for t in 0..limit {
        let current = data.as_ref().unwrap_or(x);
        let ensemble = run_ensemble(current, &cfg.ensemble_for_iteration(t))?;
        let raw = build_consensus(&ensemble.clusterings)?;
        let consensus = apply_drop_tolerance(&raw, cfg.tau)?;
        let (spectrum, report) = analyze(&consensus, k_max, cfg.theta)?;
        let s = SimilarityMatrix::new(consensus.matrix().clone(), SimilarityKind::Consensus)?;
        let components = connected_components(&s).count;
        let lonely = singletons(&consensus);
        if !lonely.is_empty() {
            warn!("iteration {t}: observations isolated by the drop tolerance: {lonely:?}");
        }
        info!(
            "iteration {t}: k = {}, gap = {:.4}, {}, {components} components",
            report.k,
            report.gap,
            report.visibility.name()
        );
        let it = Iteration {
            report,
            consensus,
            spectrum,
            components,
            singletons: lonely,
            skipped: ensemble.skipped,
        };
        observe(t, &it)?;
        history.push(it);

        let last = history.last().expect("just pushed");
        let visible = last.report.visibility == Visibility::Visible;
        stop = if visible && last.components == last.report.k {
            Some(StopReason::VisiblePerron)
        } else if visible
            && history.len() >= cfg.stability_window
            && history[history.len() - cfg.stability_window..]
                .iter()
                .all(|h| h.report.visibility == Visibility::Visible && h.report.k == last.report.k)
        {
            Some(StopReason::StableK)
        } else {
            None
        };
        if stop.is_some() && cfg.force_iterations.is_none() {
            break;
        }
        if t + 1 < limit {
            data = Some(last.consensus.to_data()?);
        }
    }

    let last = history.last().expect("at least one iteration");
    let k = last.report.k;
    let converged = stop.is_some();
    let stop_reason = match stop {
        Some(r) if cfg.force_iterations.is_none() => r,
        _ => StopReason::MaxIterations,
    };
    let partition = final_partition(
        &last.consensus,
        k,
        seed::derive(cfg.ensemble.base_seed, &[0x9a27]),
    )?;
    let coupling = history
        .iter()
        .map(|h| coupling_ratio(&h.consensus, &partition))
        .collect::<Result<Vec<_>>>()?;
    Ok(IccResult {
        k,
        iterations_used: history.len(),
        history,
        converged,
        stop_reason,
        partition,
        coupling,
    })
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_perron<W: Write>(mut w: W, r: &PerronReport) -> std::io::Result<()> {
    let flags: Vec<String> = r.subcluster_flags.iter().map(usize::to_string).collect();
    writeln!(w, "k = {}", r.k)?;
    writeln!(w, "gap = {:.16e}", r.gap)?;
    writeln!(w, "visibility = {}", r.visibility.name())?;
    writeln!(w, "subcluster_flags = {}", flags.join(","))
}

/// Writes `iter_<t>/consensus.mtx`, `spectrum.csv` and `perron.txt`.
pub fn write_iteration(dir: &Path, t: usize, it: &Iteration) -> Result<()> {
    let sub = dir.join(format!("iter_{t}"));
    fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    write_file(&sub.join("consensus.mtx"), |w| it.consensus.write_mtx(w))?;
    write_file(&sub.join("spectrum.csv"), |w| {
        spectral::write_spectrum_csv(w, &it.spectrum.eigenvalues)
    })?;
    write_file(&sub.join("perron.txt"), |w| {
        write_perron(&mut *w, &it.report)?;
        writeln!(w, "components = {}", it.components)?;
        let s: Vec<String> = it.singletons.iter().map(usize::to_string).collect();
        writeln!(w, "singletons = {}", s.join(","))
    })
}

pub fn write_result<W: Write>(mut w: W, r: &IccResult) -> std::io::Result<()> {
    writeln!(w, "k = {}", r.k)?;
    writeln!(w, "iterations_used = {}", r.iterations_used)?;
    writeln!(w, "converged = {}", r.converged)?;
    writeln!(w, "stop_reason = {}", r.stop_reason.name())?;
    for (t, (h, c)) in r.history.iter().zip(&r.coupling).enumerate() {
        writeln!(
            w,
            "iteration {t}: k = {} gap = {:.6} {} coupling = {:.6e}",
            h.report.k,
            h.report.gap,
            h.report.visibility.name(),
            c
        )?;
    }
    Ok(())
}

/// All per-iteration artifacts plus `result.txt` and `partition.txt`.
pub fn write_artifacts(dir: &Path, r: &IccResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, it) in r.history.iter().enumerate() {
        write_iteration(dir, t, it)?;
    }
    write_file(&dir.join("result.txt"), |w| write_result(w, r))?;
    write_file(&dir.join("partition.txt"), |w| {
        r.partition
            .assignment()
            .iter()
            .try_for_each(|a| writeln!(w, "{a}"))
    })
}

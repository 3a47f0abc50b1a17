//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};

use icc_core::consensus::{build_consensus, run_ensemble, ConsensusMatrix};
use icc_core::eval::{pic_cluster, purity, spectral_partition, SpectralMethod};
use icc_core::icc::{self, analyze, icc_run_observed, IccResult};
use icc_core::ingest::{self, DataMatrix, LabelVector, Layout};
use icc_core::spectral::{
    self, cosine_similarity, detect_perron, gaussian_similarity, transition_spectrum_with,
    GaussianExponent, SimilarityKind, SimilarityMatrix,
};

use crate::config::{RunConfig, Settings};
use crate::error::{CliError, Result};
use crate::heatmap::{self, Ordering};
use crate::manifest::RunManifest;
use crate::plot::emit_eigen_plot;
use crate::{Cli, Command, PipelineArgs};

/// Eigenvalues shown in plots when the cluster search range is smaller.
const PLOT_MIN_EIGENVALUES: usize = 20;

pub fn run(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let resolve = |p: &PipelineArgs| file.clone().overlay(&p.to_settings()).resolve();
    match &cli.command {
        Command::EstimateK {
            pipeline,
            iterations,
            heatmaps,
        } => {
            let mut cfg = resolve(pipeline)?;
            if let Some(n) = iterations {
                if *n == 0 {
                    return Err(CliError::config("iterations", "must be positive"));
                }
                cfg.icc.force_iterations = Some(*n);
            }
            estimate_k(&cfg, pipeline.tfidf, *heatmaps).map(|_| ())
        }
        Command::Basic { pipeline } => basic(&resolve(pipeline)?, pipeline.tfidf),
        Command::Spectrum {
            pipeline,
            kind,
            k_max,
        } => {
            let kind = parse_kind(kind)?;
            spectrum(
                &resolve(pipeline)?,
                kind,
                *k_max,
                pipeline.tfidf,
                "spectrum",
            )
        }
        Command::Baseline {
            pipeline,
            kind,
            k_max,
        } => {
            let kind = parse_kind(kind)?;
            if !matches!(kind, SimilarityKind::Gaussian | SimilarityKind::Cosine) {
                return Err(CliError::config(
                    "kind",
                    "baseline kind must be gaussian or cosine",
                ));
            }
            let name = format!("baseline_{}", kind.name());
            spectrum(&resolve(pipeline)?, kind, *k_max, pipeline.tfidf, &name)
        }
        Command::Heatmap {
            consensus,
            ordering,
            partition,
            output,
        } => heatmap_cmd(consensus, ordering, partition.as_deref(), output),
        Command::Eval {
            pipeline,
            labels,
            consensus,
            k,
        } => eval(
            &resolve(pipeline)?,
            pipeline.tfidf,
            labels,
            consensus.as_deref(),
            *k,
        ),
    }
}

fn parse_kind(s: &str) -> Result<SimilarityKind> {
    match s {
        "consensus" => Ok(SimilarityKind::Consensus),
        "gaussian" => Ok(SimilarityKind::Gaussian),
        "cosine" => Ok(SimilarityKind::Cosine),
        "adjacency" => Ok(SimilarityKind::Adjacency),
        _ => Err(CliError::config(
            "kind",
            format!("expected consensus, gaussian, cosine or adjacency, got `{s}`"),
        )),
    }
}

fn is_mtx(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("mtx"))
}

/// Delimited text honors `layout`; MatrixMarket files are always read with
/// observations as columns.
pub fn load_data(path: &Path, layout: Layout, tfidf: bool) -> Result<DataMatrix> {
    let x = if is_mtx(path) {
        ingest::load_sparse(path)?
    } else {
        ingest::load_dense(path, layout)?
    };
    info!(
        "{}: {} features x {} observations",
        path.display(),
        x.feature_count(),
        x.observation_count()
    );
    Ok(if tfidf { ingest::tfidf_weight(&x)? } else { x })
}

fn start_manifest(cfg: &RunConfig, command: &str, inputs: &[(&str, &Path)]) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, cfg.to_config_text(), cfg.icc.ensemble.base_seed);
    for (label, path) in inputs {
        m.add_input(label, path)?;
    }
    m.write(&cfg.out_dir)?;
    Ok(m)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn plot_prefix(eigenvalues: &[f64], k_max: usize) -> &[f64] {
    &eigenvalues[..eigenvalues.len().min((k_max + 1).max(PLOT_MIN_EIGENVALUES))]
}

pub fn estimate_k(cfg: &RunConfig, tfidf: bool, heatmaps: bool) -> Result<IccResult> {
    let input = cfg.input()?;
    let mut manifest = start_manifest(cfg, "estimate-k", &[("input", input)])?;
    let x = load_data(input, cfg.layout, tfidf)?;
    cfg.icc.validate(x.observation_count())?;
    let k_max = cfg.icc.k_max_for(x.observation_count());
    let out = &cfg.out_dir;
    let mut iteration_error: Option<CliError> = None;
    let result = icc_run_observed(&x, &cfg.icc, |t, it| {
        icc::write_iteration(out, t, it)?;
        let path = out.join(format!("iter_{t}")).join("eigenvalues.svg");
        let title = format!("Eigenvalues of the transition matrix, iteration {t}");
        if let Err(e) = emit_eigen_plot(
            plot_prefix(&it.spectrum.eigenvalues, k_max),
            Some(it.report.k),
            &title,
            &path,
        ) {
            iteration_error = Some(e);
        }
        Ok(())
    })?;
    if let Some(e) = iteration_error {
        return Err(e);
    }
    icc::write_artifacts(out, &result)?;
    if heatmaps {
        for (t, it) in result.history.iter().enumerate() {
            let dir = out.join(format!("iter_{t}"));
            heatmap::emit_heatmap(
                it.consensus.matrix(),
                Ordering::Identity,
                None,
                &dir.join("consensus.pgm"),
            )?;
            heatmap::emit_heatmap(
                it.consensus.matrix(),
                Ordering::ClusterSorted,
                Some(result.partition.assignment()),
                &dir.join("consensus_sorted.pgm"),
            )?;
        }
    }
    let last = result.history.last().expect("nonempty history");
    if !last.singletons.is_empty() {
        warn!(
            "observations isolated in the final consensus matrix: {:?}",
            last.singletons
        );
    }
    println!(
        "k = {} ({}, {} after {} iteration{}, gap {:.4})",
        result.k,
        last.report.visibility.name(),
        result.stop_reason.name(),
        result.iterations_used,
        if result.iterations_used == 1 { "" } else { "s" },
        last.report.gap
    );
    manifest.finish(out)?;
    Ok(result)
}

pub fn basic(cfg: &RunConfig, tfidf: bool) -> Result<()> {
    let input = cfg.input()?;
    let mut manifest = start_manifest(cfg, "basic", &[("input", input)])?;
    let x = load_data(input, cfg.layout, tfidf)?;
    let n = x.observation_count();
    cfg.icc.validate(n)?;
    let k_max = cfg.icc.k_max_for(n);
    let ensemble = run_ensemble(&x, &cfg.icc.ensemble)?;
    let m = build_consensus(&ensemble.clusterings)?;
    let (dec, report) = analyze(&m, k_max, cfg.icc.theta)?;
    let out = &cfg.out_dir;
    write_consensus(&m, &out.join("consensus.mtx"))?;
    write_spectrum(&dec.eigenvalues, &out.join("spectrum.csv"))?;
    let mut perron = Vec::new();
    icc::write_perron(&mut perron, &report).map_err(|e| CliError::io(out.join("perron.txt"), e))?;
    fs::write(out.join("perron.txt"), perron)
        .map_err(|e| CliError::io(out.join("perron.txt"), e))?;
    emit_eigen_plot(
        plot_prefix(&dec.eigenvalues, k_max),
        Some(report.k),
        "Eigenvalues of the transition matrix",
        &out.join("eigenvalues.svg"),
    )?;
    println!(
        "k = {} ({}, gap {:.4})",
        report.k,
        report.visibility.name(),
        report.gap
    );
    manifest.finish(out)
}

fn write_consensus(m: &ConsensusMatrix, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    m.write_mtx(&mut buf).map_err(|e| CliError::io(path, e))?;
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

fn write_spectrum(eigenvalues: &[f64], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    spectral::write_spectrum_csv(&mut buf, eigenvalues).map_err(|e| CliError::io(path, e))?;
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

fn read_consensus(path: &Path) -> Result<ConsensusMatrix> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(ConsensusMatrix::read_mtx(std::io::BufReader::new(f))?)
}

fn similarity(cfg: &RunConfig, kind: SimilarityKind, tfidf: bool) -> Result<SimilarityMatrix> {
    let input = cfg.input()?;
    Ok(match kind {
        SimilarityKind::Consensus => {
            let m = read_consensus(input)?;
            SimilarityMatrix::new(m.into_matrix(), SimilarityKind::Consensus)?
        }
        SimilarityKind::Adjacency => {
            let a = if is_mtx(input) {
                ingest::load_sparse(input)?
            } else {
                ingest::load_dense(input, Layout::ColumnsAreObservations)?
            };
            SimilarityMatrix::new(a.dense().into_owned(), SimilarityKind::Adjacency)?
        }
        SimilarityKind::Gaussian => {
            let x = load_data(input, cfg.layout, tfidf)?;
            gaussian_similarity(&x, exponent(cfg))?
        }
        SimilarityKind::Cosine => cosine_similarity(&load_data(input, cfg.layout, tfidf)?)?,
    })
}

fn exponent(cfg: &RunConfig) -> GaussianExponent {
    if cfg.squared_exponent {
        GaussianExponent::SquaredDistance
    } else {
        GaussianExponent::Distance
    }
}

/// Default search range for standalone spectra: the first ten eigenvalues.
const SPECTRUM_K_MAX: usize = 9;

pub fn spectrum(
    cfg: &RunConfig,
    kind: SimilarityKind,
    k_max: Option<usize>,
    tfidf: bool,
    name: &str,
) -> Result<()> {
    let input = cfg.input()?;
    let mut manifest = start_manifest(cfg, name, &[("input", input)])?;
    let s = similarity(cfg, kind, tfidf)?;
    let n = s.n();
    let k_max = k_max.unwrap_or(SPECTRUM_K_MAX).min(n.saturating_sub(1));
    let dec = transition_spectrum_with(&s, k_max)?;
    let report = detect_perron(&dec, k_max, cfg.icc.theta)?;
    let out = &cfg.out_dir;
    write_spectrum(&dec.eigenvalues, &out.join(format!("{name}.csv")))?;
    let mut perron = Vec::new();
    let ppath = out.join(format!("{name}_perron.txt"));
    icc::write_perron(&mut perron, &report).map_err(|e| CliError::io(&ppath, e))?;
    fs::write(&ppath, perron).map_err(|e| CliError::io(&ppath, e))?;
    emit_eigen_plot(
        plot_prefix(&dec.eigenvalues, k_max),
        Some(report.k),
        &format!("Eigenvalues, {} similarity", kind.name()),
        &out.join(format!("{name}.svg")),
    )?;
    println!(
        "{} similarity: largest gap after eigenvalue {} ({:.4}, {})",
        kind.name(),
        report.k,
        report.gap,
        report.visibility.name()
    );
    manifest.finish(out)
}

fn read_partition(path: &Path, n: usize) -> Result<Vec<usize>> {
    let labels = ingest::load_labels(path, n)?;
    Ok(labels.labels().to_vec())
}

pub fn heatmap_cmd(
    consensus: &Path,
    ordering: &str,
    partition: Option<&Path>,
    output: &Path,
) -> Result<()> {
    let ordering = match ordering {
        "identity" => Ordering::Identity,
        "cluster-sorted" => Ordering::ClusterSorted,
        _ => {
            return Err(CliError::config(
                "ordering",
                format!("expected identity or cluster-sorted, got `{ordering}`"),
            ))
        }
    };
    let m = read_consensus(consensus)?;
    let labels = partition.map(|p| read_partition(p, m.n())).transpose()?;
    if ordering == Ordering::ClusterSorted && labels.is_none() {
        return Err(CliError::config(
            "partition",
            "cluster-sorted ordering needs --partition",
        ));
    }
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    heatmap::emit_heatmap(m.matrix(), ordering, labels.as_deref(), output)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PurityRow {
    pub method: &'static str,
    /// One entry per similarity column; `None` where the similarity could not be built.
    pub values: Vec<Option<f64>>,
}

pub fn purity_table(
    sims: &[(&'static str, Option<SimilarityMatrix>)],
    truth: &LabelVector,
    k: usize,
    seed: u64,
) -> Result<Vec<PurityRow>> {
    let methods: [&'static str; 3] = ["ncut", "njw", "pic"];
    let mut rows = Vec::new();
    for method in methods {
        let mut values = Vec::new();
        for (_, s) in sims {
            let Some(s) = s else {
                values.push(None);
                continue;
            };
            let c = match method {
                "ncut" => spectral_partition(s, k, SpectralMethod::Ncut, seed)?,
                "njw" => spectral_partition(s, k, SpectralMethod::Njw, seed)?,
                _ => pic_cluster(s, k, seed)?,
            };
            values.push(Some(purity(&c, truth)?.value));
        }
        rows.push(PurityRow { method, values });
    }
    Ok(rows)
}

pub fn render_table(columns: &[&str], rows: &[PurityRow]) -> String {
    let width = columns.iter().map(|c| c.len()).max().unwrap_or(0).max(9);
    let mut s = format!("{:<8}", "method");
    for c in columns {
        let _ = write!(s, "  {c:>width$}");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{:<8}", r.method);
        for v in &r.values {
            match v {
                Some(v) => {
                    let _ = write!(s, "  {v:>width$.4}");
                }
                None => {
                    let _ = write!(s, "  {:>width$}", "n/a");
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn render_csv(columns: &[&str], rows: &[PurityRow]) -> String {
    let mut s = String::from("method,similarity,purity\n");
    for r in rows {
        for (c, v) in columns.iter().zip(&r.values) {
            let v = v.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(s, "{},{c},{v}", r.method);
        }
    }
    s
}

pub fn eval(
    cfg: &RunConfig,
    tfidf: bool,
    labels: &Path,
    consensus: Option<&Path>,
    k: Option<usize>,
) -> Result<()> {
    let input = cfg.input()?;
    let mut inputs = vec![("input", input), ("labels", labels)];
    if let Some(c) = consensus {
        inputs.push(("consensus", c));
    }
    let mut manifest = start_manifest(cfg, "eval", &inputs)?;
    let x = load_data(input, cfg.layout, tfidf)?;
    let n = x.observation_count();
    let truth = ingest::load_labels(labels, n)?;
    let k = k.unwrap_or(truth.class_count());
    let mut sims: Vec<(&'static str, Option<SimilarityMatrix>)> = Vec::new();
    if let Some(c) = consensus {
        let m = read_consensus(c)?;
        if m.n() != n {
            return Err(CliError::Core(icc_core::Error::Data(format!(
                "consensus matrix has {} observations, data has {n}",
                m.n()
            ))));
        }
        sims.push((
            "consensus",
            Some(SimilarityMatrix::new(
                m.into_matrix(),
                SimilarityKind::Consensus,
            )?),
        ));
    }
    let gaussian = gaussian_similarity(&x, exponent(cfg))
        .map_err(|e| warn!("gaussian similarity: {e}"))
        .ok();
    sims.push(("gaussian", gaussian));
    let cosine = cosine_similarity(&x)
        .map_err(|e| warn!("cosine similarity: {e}"))
        .ok();
    sims.push(("cosine", cosine));
    let rows = purity_table(&sims, &truth, k, cfg.icc.ensemble.base_seed)?;
    let columns: Vec<&str> = sims.iter().map(|(c, _)| *c).collect();
    print!("{}", render_table(&columns, &rows));
    write_text(
        &cfg.out_dir.join("purity.csv"),
        &render_csv(&columns, &rows),
    )?;
    manifest.finish(&cfg.out_dir)
}

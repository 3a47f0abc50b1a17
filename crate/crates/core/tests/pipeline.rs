mod common;

use icc_core::algos::Metric;
use icc_core::consensus::{
    apply_drop_tolerance, build_consensus, run_ensemble, EnsembleConfig, Representation,
};
use icc_core::dimred;
use icc_core::eval::{purity, spectral_partition, SpectralMethod};
use icc_core::icc::{
    self, analyze, basic_run, icc_run, IccConfig, IterateRepresentations, StopReason,
};
use icc_core::ingest::{DataMatrix, LabelVector};
use icc_core::seed;
use icc_core::spectral::{SimilarityKind, SimilarityMatrix, Visibility};
use nalgebra::DMatrix;
use rand::Rng;

use common::*;

fn ncut(s: &DMatrix<f64>, side: &[bool]) -> f64 {
    let n = s.nrows();
    let (mut cut, mut vol_a, mut vol_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = s[(i, j)];
            if side[i] {
                vol_a += w;
            } else {
                vol_b += w;
            }
            if side[i] && !side[j] {
                cut += w;
            }
        }
    }
    cut / vol_a + cut / vol_b
}

fn brute_force_min_ncut(s: &DMatrix<f64>) -> Vec<usize> {
    let n = s.nrows();
    let mut best = (f64::INFINITY, 0u32);
    // Observation 0 is fixed on side A to skip mirrored partitions.
    for mask in 1u32..(1 << (n - 1)) {
        let side: Vec<bool> = (0..n)
            .map(|i| i == 0 || mask & (1 << (i - 1)) == 0)
            .collect();
        if side.iter().all(|b| *b) {
            continue;
        }
        let v = ncut(s, &side);
        if v < best.0 {
            best = (v, mask);
        }
    }
    (0..n)
        .map(|i| usize::from(i != 0 && best.1 & (1 << (i - 1)) != 0))
        .collect()
}

#[test]
fn two_way_partition_matches_brute_force_ncut() {
    let mut rng = seed::rng(11);
    for trial in 0..40 {
        let n = rng.random_range(4..=10);
        let split = rng.random_range(2..=n - 2);
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let same = (i < split) == (j < split);
                let w = if same {
                    rng.random_range(0.4..1.0)
                } else {
                    rng.random_range(0.0..0.05)
                };
                s[(i, j)] = w;
                s[(j, i)] = w;
            }
        }
        let best = brute_force_min_ncut(&s);
        let sim = SimilarityMatrix::new(s, SimilarityKind::Adjacency).unwrap();
        for method in [SpectralMethod::Ncut, SpectralMethod::Njw] {
            let c = spectral_partition(&sim, 2, method, trial).unwrap();
            assert!(
                same_up_to_relabel(c.assignment(), &best),
                "trial {trial} {method:?}: {:?} vs {best:?}",
                c.assignment()
            );
        }
    }
}

#[test]
fn weak_edge_is_the_cut() {
    // Two triangles joined by one weak edge.
    let mut s = DMatrix::zeros(6, 6);
    for (i, j, w) in [
        (0, 1, 1.0),
        (1, 2, 1.0),
        (0, 2, 1.0),
        (3, 4, 1.0),
        (4, 5, 1.0),
        (3, 5, 1.0),
        (2, 3, 0.1),
    ] {
        s[(i, j)] = w;
        s[(j, i)] = w;
    }
    let best = brute_force_min_ncut(&s);
    assert_eq!(best, vec![0, 0, 0, 1, 1, 1]);
    let sim = SimilarityMatrix::new(s, SimilarityKind::Adjacency).unwrap();
    let c = spectral_partition(&sim, 2, SpectralMethod::Ncut, 0).unwrap();
    assert!(same_up_to_relabel(c.assignment(), &best));
}

#[test]
fn truncated_svd_matches_full_decomposition() {
    let mut rng = seed::rng(5);
    let m = DMatrix::from_fn(30, 20, |_, _| rng.random_range(-1.0..1.0));
    let x = DataMatrix::from_dense(m.clone()).unwrap();
    let oracle = m.clone().svd(false, false).singular_values;
    let mut expect: Vec<f64> = oracle.iter().copied().collect();
    expect.sort_by(|a, b| b.total_cmp(a));
    for r in [1, 5, 20] {
        let f = dimred::truncated_factors(&x, r).unwrap();
        assert_eq!(f.s.len(), r);
        for (a, b) in f.s.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "rank {r}: {a} vs {b}");
        }
        let tail: f64 = expect[r..].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(((&m - f.reconstruct()).norm() - tail).abs() < 1e-9);
    }
}

/// Clusterings that agree on `blocks` but cut each block differently.
fn block_consensus(
    blocks: &[usize],
    runs: usize,
    rng: &mut impl Rng,
) -> icc_core::consensus::ConsensusMatrix {
    let mut clusterings = Vec::new();
    for _ in 0..runs {
        let mut labels = Vec::new();
        let mut next = 0;
        for &b in blocks {
            let parts = rng.random_range(1..=2);
            for _ in 0..b {
                labels.push(next + rng.random_range(0..parts));
            }
            next += parts;
        }
        clusterings.push(labelled(&labels));
    }
    build_consensus(&clusterings).unwrap()
}

#[test]
fn block_diagonal_consensus_is_a_fixed_point() {
    let mut rng = seed::rng(21);
    let blocks = [8, 10, 12];
    let m = block_consensus(&blocks, 6, &mut rng);
    let x = m.to_data().unwrap();
    let cfg = IccConfig {
        ensemble: EnsembleConfig {
            ktilde: vec![3, 4, 5],
            representations: vec![Representation::Raw],
            metric: Metric::Spherical,
            base_seed: 4,
            ..Default::default()
        },
        iterate_representations: IterateRepresentations::Raw,
        force_iterations: Some(3),
        ..Default::default()
    };
    let r = icc_run(&x, &cfg).unwrap();
    assert_eq!(r.iterations_used, 3);
    for (t, it) in r.history.iter().enumerate() {
        let ones = it
            .spectrum
            .eigenvalues
            .iter()
            .filter(|v| **v >= 1.0 - 1e-8)
            .count();
        assert_eq!(ones, 3, "iteration {t}");
        assert_eq!(it.components, 3, "iteration {t}");
        assert_eq!(it.report.k, 3);
        assert_eq!(it.report.visibility, Visibility::Visible);
    }
    assert_eq!(r.stop_reason, StopReason::MaxIterations);
    assert!(r.converged);
    let truth: Vec<usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, &n)| vec![b; n])
        .collect();
    assert!(same_up_to_relabel(r.partition.assignment(), &truth));
    assert!(r.coupling.iter().all(|c| *c == 0.0));
}

fn small_cfg(seed_value: u64) -> IccConfig {
    IccConfig {
        ensemble: EnsembleConfig {
            ktilde: vec![4, 5, 6],
            base_seed: seed_value,
            ..Default::default()
        },
        max_iterations: 4,
        ..Default::default()
    }
}

#[test]
fn icc_run_is_deterministic() {
    let (x, _) = planar_blobs(2, &[(0.0, 0.0), (5.0, 0.0), (2.0, 4.0)], 15, 1.2);
    let cfg = small_cfg(9);
    let a = icc_run(&x, &cfg).unwrap();
    let b = icc_run(&x, &cfg).unwrap();
    assert_eq!(a, b);

    let dir = tempfile::tempdir().unwrap();
    icc::write_artifacts(&dir.path().join("a"), &a).unwrap();
    icc::write_artifacts(&dir.path().join("b"), &b).unwrap();
    for t in 0..a.iterations_used {
        for f in ["consensus.mtx", "spectrum.csv", "perron.txt"] {
            let rel = format!("iter_{t}/{f}");
            let fa = std::fs::read(dir.path().join("a").join(&rel)).unwrap();
            let fb = std::fs::read(dir.path().join("b").join(&rel)).unwrap();
            assert_eq!(fa, fb, "{rel}");
        }
    }
}

#[test]
fn every_iteration_keeps_consensus_invariants() {
    let (x, _) = planar_blobs(3, &[(0.0, 0.0), (4.0, 0.0), (2.0, 3.5)], 15, 1.5);
    let mut cfg = small_cfg(1);
    cfg.force_iterations = Some(3);
    cfg.tau = 0.3;
    let r = icc_run(&x, &cfg).unwrap();
    assert_eq!(r.iterations_used, 3);
    assert_eq!(r.stop_reason, StopReason::MaxIterations);
    for it in &r.history {
        let m = it.consensus.matrix();
        assert_eq!(m, &m.transpose());
        let jn = it.consensus.ensemble_size() as f64;
        for i in 0..m.nrows() {
            assert_eq!(m[(i, i)], jn);
        }
        assert!(m.iter().all(|v| *v >= 0.0 && *v <= jn && v.fract() == 0.0));
    }
}

#[test]
fn single_iteration_is_basic_run_plus_drop() {
    let (x, _) = planar_blobs(4, &[(0.0, 0.0), (6.0, 0.0), (3.0, 5.0)], 12, 1.0);
    let mut cfg = small_cfg(6);
    cfg.max_iterations = 1;
    let r = icc_run(&x, &cfg).unwrap();
    assert_eq!(r.iterations_used, 1);

    let e = run_ensemble(&x, &cfg.ensemble).unwrap();
    let m = build_consensus(&e.clusterings).unwrap();
    let dropped = apply_drop_tolerance(&m, cfg.tau).unwrap();
    let k_max = cfg.k_max_for(x.observation_count());
    let (_, report) = analyze(&dropped, k_max, cfg.theta).unwrap();
    assert_eq!(r.history[0].consensus, dropped);
    assert_eq!(r.history[0].report, report);

    let mut no_drop = cfg.clone();
    no_drop.tau = 0.0;
    let r0 = icc_run(&x, &no_drop).unwrap();
    assert_eq!(r0.history[0].report, basic_run(&x, &no_drop).unwrap());
}

#[test]
fn converged_consensus_partitions_separated_blobs_exactly() {
    let (x, truth) = planar_blobs(8, &[(0.0, 0.0), (20.0, 0.0), (10.0, 17.0)], 30, 1.0);
    let mut cfg = small_cfg(3);
    cfg.ensemble.representations = vec![Representation::Raw];
    let r = icc_run(&x, &cfg).unwrap();
    assert!(
        r.converged,
        "{:?}",
        r.history
            .iter()
            .map(|h| (h.report.k, h.report.gap))
            .collect::<Vec<_>>()
    );
    assert_eq!(r.k, 3);
    let truth = LabelVector::from_ids(truth).unwrap();
    let s = SimilarityMatrix::new(
        r.history.last().unwrap().consensus.matrix().clone(),
        SimilarityKind::Consensus,
    )
    .unwrap();
    for method in [SpectralMethod::Ncut, SpectralMethod::Njw] {
        let c = spectral_partition(&s, 3, method, 0).unwrap();
        assert_eq!(purity(&c, &truth).unwrap().value, 1.0);
    }
    assert_eq!(purity(&r.partition, &truth).unwrap().value, 1.0);
}

#[test]
fn invalid_configuration_is_rejected() {
    let (x, _) = planar_blobs(0, &[(0.0, 0.0), (3.0, 3.0)], 5, 1.0);
    let mut cfg = small_cfg(0);
    cfg.tau = 0.5;
    assert!(icc_run(&x, &cfg).is_err());
    let mut cfg = small_cfg(0);
    cfg.ensemble.ktilde = vec![4, 12];
    assert!(icc_run(&x, &cfg).is_err());
    let mut cfg = small_cfg(0);
    cfg.theta = 1.0;
    assert!(icc_run(&x, &cfg).is_err());
}

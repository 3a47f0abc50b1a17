use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn icc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_icc"));
    c.env("ICC_THREADS", "1");
    c
}

fn ruspini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/ruspini.csv")
}

fn ruspini_labels() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/ruspini_labels.txt")
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn estimate(out_dir: &Path) -> Output {
    run(icc()
        .args([
            "estimate-k",
            "--ktilde",
            "6:10",
            "--tau",
            "0.1",
            "--seed",
            "3",
            "--heatmaps",
        ])
        .arg("--input")
        .arg(ruspini())
        .arg("--out-dir")
        .arg(out_dir))
}

fn numeric_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.txt" {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn estimate_k_writes_artifacts_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = estimate(&a);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("k = 4"), "{stdout}");
    for f in [
        "manifest.txt",
        "result.txt",
        "partition.txt",
        "iter_0/consensus.mtx",
        "iter_0/spectrum.csv",
        "iter_0/perron.txt",
        "iter_0/eigenvalues.svg",
        "iter_0/consensus.pgm",
        "iter_0/consensus_sorted.pgm",
    ] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert!(manifest.contains("ktilde = 6,7,8,9,10"));
    assert!(manifest.contains("input.sha256 = "));
    assert!(!manifest.contains("finished_unix = running"));

    assert!(estimate(&b).status.success());
    let (fa, fb) = (numeric_artifacts(&a), numeric_artifacts(&b));
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs between identical runs");
    }
}

#[test]
fn tau_out_of_range_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(icc()
        .args(["basic", "--tau", "0.7"])
        .arg("--input")
        .arg(ruspini())
        .arg("--out-dir")
        .arg(tmp.path()));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("tau") && err.contains("[0, 0.5)"), "{err}");
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(icc()
        .args(["basic", "--input", "/nonexistent/file.csv"])
        .arg("--out-dir")
        .arg(tmp.path()));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn ragged_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.csv");
    fs::write(&p, "1,2\n3\n").unwrap();
    let out = run(icc()
        .args(["basic"])
        .arg("--input")
        .arg(&p)
        .arg("--out-dir")
        .arg(tmp.path().join("o")));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    fs::write(
        &cfg,
        format!(
            "input = {}\nktilde = 6:10\nalgorithms = pddp,kmeans-random\nseed = 5\ntau = 0.9\n",
            ruspini().display()
        ),
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let bad = run(icc()
        .arg("--config")
        .arg(&cfg)
        .arg("basic")
        .arg("--out-dir")
        .arg(&out_dir));
    assert_eq!(bad.status.code(), Some(2));
    let ok = run(icc()
        .arg("--config")
        .arg(&cfg)
        .args(["basic", "--tau", "0.1"])
        .arg("--out-dir")
        .arg(&out_dir));
    assert!(ok.status.success());
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(
        manifest.contains("algorithms = kmeans-random,pddp")
            || manifest.contains("algorithms = pddp,kmeans-random")
    );
    assert!(manifest.contains("tau = 0.1\n"));
    assert!(out_dir.join("consensus.mtx").is_file());
}

#[test]
fn baseline_gaussian_on_ruspini_gaps_after_first() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(icc()
        .args(["baseline", "--kind", "gaussian"])
        .arg("--input")
        .arg(ruspini())
        .arg("--out-dir")
        .arg(tmp.path()));
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("largest gap after eigenvalue 1 "));
    let csv = fs::read_to_string(tmp.path().join("baseline_gaussian.csv")).unwrap();
    assert_eq!(csv.lines().count(), 76);
    assert!(tmp.path().join("baseline_gaussian.svg").is_file());
}

#[test]
fn heatmap_and_eval_from_estimate_output() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    assert!(estimate(&run_dir).status.success());
    let consensus = run_dir.join("iter_0/consensus.mtx");

    let img = tmp.path().join("img/h.pgm");
    let out = run(icc()
        .arg("heatmap")
        .arg("--consensus")
        .arg(&consensus)
        .args(["--ordering", "cluster-sorted"])
        .arg("--partition")
        .arg(run_dir.join("partition.txt"))
        .arg("--output")
        .arg(&img));
    assert!(out.status.success());
    let bytes = fs::read(&img).unwrap();
    assert!(bytes.starts_with(b"P5\n75 75\n255\n"));
    assert_eq!(bytes.len(), "P5\n75 75\n255\n".len() + 75 * 75);

    let missing = run(icc()
        .arg("heatmap")
        .arg("--consensus")
        .arg(&consensus)
        .args(["--ordering", "cluster-sorted"])
        .arg("--output")
        .arg(&img));
    assert_eq!(missing.status.code(), Some(2));

    let eval_dir = tmp.path().join("eval");
    let out = run(icc()
        .arg("eval")
        .arg("--input")
        .arg(ruspini())
        .arg("--labels")
        .arg(ruspini_labels())
        .arg("--consensus")
        .arg(&consensus)
        .arg("--out-dir")
        .arg(&eval_dir));
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4, "{table}");
    assert!(
        lines[0].contains("consensus")
            && lines[0].contains("gaussian")
            && lines[0].contains("cosine")
    );
    let csv = fs::read_to_string(eval_dir.join("purity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    let consensus_ncut: f64 = csv
        .lines()
        .find(|l| l.starts_with("ncut,consensus,"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(consensus_ncut, 1.0);
}

#[test]
fn spectrum_of_consensus_file() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m.mtx");
    fs::write(&m, "%%MatrixMarket matrix coordinate integer symmetric\n% ensemble_size 2\n4 4 6\n1 1 2\n2 1 2\n2 2 2\n3 3 2\n4 3 2\n4 4 2\n").unwrap();
    let out = run(icc()
        .args(["spectrum", "--kind", "consensus", "--k-max", "3"])
        .arg("--input")
        .arg(&m)
        .arg("--out-dir")
        .arg(tmp.path()));
    assert!(out.status.success());
    let csv = fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    let vals: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(vals.len(), 4);
    assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
    assert!(vals[2].abs() < 1e-12 && vals[3].abs() < 1e-12);
    let perron = fs::read_to_string(tmp.path().join("spectrum_perron.txt")).unwrap();
    assert!(perron.starts_with("k = 2\n"));
}

#[test]
fn forced_iterations() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(icc()
        .args([
            "estimate-k",
            "--ktilde",
            "6:10",
            "--iterations",
            "3",
            "--algorithms",
            "pddp,pddp-kmeans",
        ])
        .arg("--input")
        .arg(ruspini())
        .arg("--out-dir")
        .arg(tmp.path()));
    assert!(out.status.success());
    let result = fs::read_to_string(tmp.path().join("result.txt")).unwrap();
    assert!(result.contains("iterations_used = 3\n"));
    assert!(result.contains("stop_reason = max-iterations\n"));
    assert!(tmp.path().join("iter_2/spectrum.csv").is_file());
}

#[test]
fn bad_thread_count() {
    let out = run(icc()
        .env("ICC_THREADS", "zero")
        .args(["basic", "--input", "x.csv"]));
    assert_eq!(out.status.code(), Some(2));
}

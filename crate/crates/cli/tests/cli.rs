use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use symsylv::sparse::mm::{read_dense, write_dense, write_sparse};
use symsylv::SparseSymmetric;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symsylv")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn summary(dir: &Path, file: &str) -> HashMap<String, String> {
    std::fs::read_to_string(dir.join(file))
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn solve_lyap_generated_laplacian() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    ok(&["solve-lyap", "--problem", "laplacian2d", "--n", "32", "--s", "1", "--tol", "1e-6", "--out", out.to_str().unwrap(), "--verify"]);
    let s = summary(&out, "summary.txt");
    let rel: f64 = s["final_relative_residual"].parse().unwrap();
    let verified: f64 = s["verified_relative_residual"].parse().unwrap();
    assert!(rel <= 1e-6);
    assert!((verified - rel).abs() <= 1e-2 * rel, "{verified} vs {rel}");
    let z = read_dense(out.join("Z.mtx")).unwrap();
    assert_eq!(z.nrows(), 1024);
    assert_eq!(z.ncols().to_string(), s["rank"]);

    let (header, rows) = csv_rows(&out.join("history.csv"));
    assert_eq!(header, ["m", "space_dim", "relative_residual", "cum_basis_secs", "cum_residual_secs"]);
    assert_eq!(rows.len().to_string(), s["iterations"]);
    let last: f64 = rows.last().unwrap()[2].parse().unwrap();
    assert_eq!(last, rel);
}

#[test]
fn asymmetric_input_is_rejected() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("A.mtx");
    std::fs::write(&a, "%%MatrixMarket matrix coordinate real general\n3 3 4\n1 1 -2\n2 2 -2\n3 3 -2\n2 1 0.5\n").unwrap();
    let c = dir.path().join("C.mtx");
    std::fs::write(&c, "%%MatrixMarket matrix array real general\n3 1\n1\n0\n0\n").unwrap();
    let out = run(&["solve-lyap", "--a", a.to_str().unwrap(), "--c", c.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(1, 0)") && err.contains("(0, 1)"), "{err}");
}

#[test]
fn windowed_and_stored_runs_agree() {
    let dir = TempDir::new().unwrap();
    let mut z = Vec::new();
    let mut peaks = Vec::new();
    for storage in ["windowed", "stored"] {
        let out = dir.path().join(storage);
        ok(&["solve-lyap", "--problem", "fd2d-exp", "--n", "16", "--s", "2", "--storage", storage, "--out", out.to_str().unwrap()]);
        z.push(read_dense(out.join("Z.mtx")).unwrap());
        let s = summary(&out, "summary.txt");
        peaks.push((s["peak_basis_vectors"].parse::<usize>().unwrap(), s["iterations"].parse::<usize>().unwrap()));
    }
    assert!((&z[0] - &z[1]).norm() <= 1e-12 * z[1].norm());
    assert_eq!(peaks[0].0, 3 * 2);
    // The stored basis also holds the block of step m + 1.
    assert_eq!(peaks[1].0, 2 * (peaks[1].1 + 1));
}

#[test]
fn bench_residual_small_problem() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench");
    ok(&["bench-residual", "--problem", "fd2d-exp", "--n", "12", "--s", "2", "--max-m", "25", "--tol", "1e-12", "--out", out.to_str().unwrap()]);
    let (header, rows) = csv_rows(&out.join("bench.csv"));
    assert_eq!(
        header,
        [
            "m",
            "space_dim",
            "ctri_relative_residual",
            "naive_relative_residual",
            "relative_difference",
            "ctri_secs",
            "naive_secs",
            "gain_percent"
        ]
    );
    assert_eq!(rows.len(), 25);
    for r in &rows {
        let dim: usize = r[1].parse().unwrap();
        assert!(dim <= 50);
        let diff: f64 = r[4].parse().unwrap();
        assert!(diff <= 1e-10, "m={} diff {diff}", r[0]);
        let (fast, naive): (f64, f64) = (r[5].parse().unwrap(), r[6].parse().unwrap());
        let gain: f64 = r[7].parse().unwrap();
        assert!((gain - 100.0 * (naive - fast) / naive).abs() <= 0.006);
    }
    let s = summary(&out, "bench_summary.txt");
    assert_eq!(s["checks"], "25");
    assert_eq!(s["reps"], "3");
}

#[test]
fn generated_files_solve_like_inline_problem() {
    let dir = TempDir::new().unwrap();
    let gen = dir.path().join("gen");
    ok(&["gen", "--problem", "fd2d-trig", "--n", "10", "--s", "2", "--seed", "4", "--out", gen.to_str().unwrap()]);
    let inline = dir.path().join("inline");
    ok(&["solve-lyap", "--problem", "fd2d-trig", "--n", "10", "--s", "2", "--seed", "4", "--out", inline.to_str().unwrap()]);
    let files = dir.path().join("files");
    ok(&[
        "solve-lyap",
        "--a",
        gen.join("A.mtx").to_str().unwrap(),
        "--c",
        gen.join("C.mtx").to_str().unwrap(),
        "--out",
        files.to_str().unwrap(),
    ]);
    // Matrices are written with 17 significant digits, so the runs match exactly.
    assert_eq!(read_dense(inline.join("Z.mtx")).unwrap(), read_dense(files.join("Z.mtx")).unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nproblem = laplacian2d\nn = 12\ns = 1\ntol = 1e-2\ncheck_period = 2\nout = cfgout\n").unwrap();
    ok(&["solve-lyap", "--config", cfg.to_str().unwrap(), "--tol", "1e-7"]);
    let s = summary(&dir.path().join("cfgout"), "summary.txt");
    let rel: f64 = s["final_relative_residual"].parse().unwrap();
    assert!(rel <= 1e-7);
    assert_eq!(s["check_period"], "2");
    let (_, rows) = csv_rows(&dir.path().join("cfgout").join("history.csv"));
    assert!(rows.iter().all(|r| r[0].parse::<usize>().unwrap() % 2 == 0 || r[0] == s["iterations"]));

    std::fs::write(&cfg, "problem = laplacian2d\nmaxm = 3\n").unwrap();
    let out = run(&["solve-lyap", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("maxm"));
}

#[test]
fn sylvester_split_problem() {
    let dir = TempDir::new().unwrap();
    for method in ["two-sided", "one-sided"] {
        let out = dir.path().join(method);
        ok(&["solve-sylv", "--problem", "fd3d-split", "--n", "12", "--s", "1", "--method", method, "--tol", "1e-7", "--verify", "--out", out.to_str().unwrap()]);
        let s = summary(&out, "summary.txt");
        let verified: f64 = s["verified_relative_residual"].parse().unwrap();
        assert!(verified <= 2e-7, "{method}: {verified}");
        assert_eq!(read_dense(out.join("Z1.mtx")).unwrap().nrows(), 144);
        assert_eq!(read_dense(out.join("Z2.mtx")).unwrap().nrows(), 12);
    }
}

#[test]
fn extended_space_from_files() {
    let dir = TempDir::new().unwrap();
    let n = 60;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, -2.0 - 0.01 * i as f64));
        if i + 1 < n {
            t.push((i, i + 1, 1.0));
            t.push((i + 1, i, 1.0));
        }
    }
    let a = SparseSymmetric::from_triplets(n, &t).unwrap();
    write_sparse(dir.path().join("A.mtx"), &a).unwrap();
    write_dense(dir.path().join("C.mtx"), &symsylv::problems::gen_rhs(n, 1, 3, true)).unwrap();
    let out = dir.path().join("ext");
    ok(&[
        "solve-lyap",
        "--a",
        dir.path().join("A.mtx").to_str().unwrap(),
        "--c",
        dir.path().join("C.mtx").to_str().unwrap(),
        "--space",
        "extended",
        "--tol",
        "1e-9",
        "--verify",
        "--out",
        out.to_str().unwrap(),
    ]);
    let s = summary(&out, "summary.txt");
    assert!(s["verified_relative_residual"].parse::<f64>().unwrap() <= 2e-9);
}

#[test]
fn non_convergence_exits_nonzero() {
    let dir = TempDir::new().unwrap();
    let out = run(&["solve-lyap", "--problem", "laplacian2d", "--n", "20", "--max-m", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no convergence after 3 iterations"));
}

#[test]
fn bad_flags_are_rejected() {
    for args in [
        vec!["solve-lyap", "--problem", "laplacian2d", "--space", "krylov"],
        vec!["solve-lyap", "--problem", "heat"],
        vec!["solve-lyap", "--problem", "laplacian2d", "--tol", "-1"],
        vec!["solve-lyap", "--problem", "laplacian2d", "--a", "A.mtx"],
        vec!["solve-lyap", "--problem", "fd3d-split"],
    ] {
        let out = run(&args);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}

use std::path::Path;
use std::process::{Command, Output};

use mmm::io::read_file;
use mmm::matrix::AnyMatrix;
use mmm::verify::quantized_checksum;
use mmm::{DenseMatrix, ElemKind, LaneConfig};
use mmm_bench::record::{read_csv, BenchRecord, SweepRecord, Trial, BENCH_HEADER};

fn mmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmm"))
        .args(args)
        .env_remove("MMM_WORKERS")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_all_zero_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("z.mmm");
    let text = ok(&mmm(&[
        "gen",
        "--rows",
        "8",
        "--cols",
        "8",
        "--sparsity",
        "1.0",
        "--out",
        p(&f),
    ]));
    assert!(text.contains("measured sparsity 1.000000"));
    match read_file(&f).unwrap() {
        AnyMatrix::F32(m) => {
            assert_eq!((m.rows(), m.cols()), (8, 8));
            assert_eq!(m.count_nonzeros(), 0);
        }
        AnyMatrix::F64(_) => panic!("expected f32"),
    }
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (f1, f2) = (dir.path().join("1.mmm"), dir.path().join("2.mmm"));
    for f in [&f1, &f2] {
        ok(&mmm(&[
            "gen",
            "--rows",
            "100",
            "--cols",
            "90",
            "--structure",
            "column",
            "--sparsity",
            "0.5",
            "--seed",
            "7",
            "--dtype",
            "f64",
            "--out",
            p(f),
        ]));
    }
    assert_eq!(std::fs::read(&f1).unwrap(), std::fs::read(&f2).unwrap());
}

#[test]
fn gen_large_block_random_hits_target() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("b.mmm");
    ok(&mmm(&[
        "gen",
        "--rows",
        "2048",
        "--cols",
        "2048",
        "--structure",
        "block_random",
        "--sparsity",
        "0.8",
        "--out",
        p(&f),
    ]));
    let AnyMatrix::F32(m) = read_file(&f).unwrap() else {
        panic!()
    };
    assert!((m.elementwise_sparsity() - 0.8).abs() <= 0.01);
}

#[test]
fn dense_bench_on_identity_matches_oracle_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let lanes = LaneConfig::default_for(ElemKind::F32);
    let id = DenseMatrix::<f32>::identity(256, lanes).unwrap();
    let f = dir.path().join("id.mmm");
    mmm::io::write_file(&id, &f).unwrap();
    let csv = dir.path().join("out.csv");
    ok(&mmm(&[
        "bench",
        "--a",
        p(&f),
        "--b",
        p(&f),
        "--algo",
        "dense",
        "--trials",
        "1",
        "--workers",
        "1",
        "--out",
        p(&csv),
    ]));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), BENCH_HEADER);
    let rows: Vec<BenchRecord> = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].checksum, quantized_checksum(&id));
    assert_eq!(rows[0].lane_fma_ops, 256 * 256 * 256);
    assert_eq!(rows[0].structure_b, "file");
}

#[test]
fn all_algorithms_agree_and_summaries_are_medians() {
    let out = mmm(&[
        "bench",
        "--a",
        "random:0.7:1",
        "--b",
        "block_random:0.6:2",
        "--n",
        "300",
        "--algo",
        "all",
        "--trials",
        "10",
        "--workers",
        "2",
    ]);
    let rows: Vec<BenchRecord> = read_csv(ok(&out).as_bytes()).unwrap();
    assert_eq!(rows.len(), 5 * 11);
    let checksum = rows[0].checksum;
    for chunk in rows.chunks(11) {
        let (trials, summary) = chunk.split_at(10);
        let summary = &summary[0];
        assert_eq!(summary.trial, Trial::Median);
        assert!(trials
            .iter()
            .all(|r| r.checksum == checksum && r.counters() == trials[0].counters()));
        assert!(trials.iter().all(|r| r.total_ns >= r.multiply_ns));
        let mut mul: Vec<u64> = trials.iter().map(|r| r.multiply_ns).collect();
        mul.sort_unstable();
        assert_eq!(summary.multiply_ns, (mul[4] + mul[5]) / 2);
        assert_eq!(summary.workers, 2);
    }
    let algos: Vec<&str> = rows.iter().step_by(11).map(|r| r.algo.as_str()).collect();
    assert_eq!(
        algos,
        ["mmm", "dense", "dense_recursive", "skip_a", "spgemm"]
    );
}

#[test]
fn workers_come_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_mmm"))
        .args([
            "bench",
            "--a",
            "random:0.5",
            "--b",
            "random:0.5",
            "--n",
            "64",
            "--algo",
            "mmm",
            "--trials",
            "1",
        ])
        .env("MMM_WORKERS", "3")
        .output()
        .unwrap();
    let rows: Vec<BenchRecord> = read_csv(ok(&out).as_bytes()).unwrap();
    assert_eq!(rows[0].workers, 3);
    let out = mmm(&[
        "bench",
        "--a",
        "random:0.5",
        "--b",
        "random:0.5",
        "--n",
        "64",
        "--algo",
        "mmm",
        "--trials",
        "1",
        "--workers",
        "2",
    ]);
    let rows: Vec<BenchRecord> = read_csv(ok(&out).as_bytes()).unwrap();
    assert_eq!(rows[0].workers, 2);
}

#[test]
fn sweep_cells() {
    let out = mmm(&[
        "sweep",
        "--n",
        "128",
        "--grid-step",
        "0.5",
        "--trials",
        "1",
        "--workers",
        "1",
    ]);
    let rows: Vec<SweepRecord> = read_csv(ok(&out).as_bytes()).unwrap();
    assert_eq!(rows.len(), 9);
    let full = rows
        .iter()
        .find(|r| r.a_sparsity == 1.0 && r.b_sparsity == 1.0)
        .unwrap();
    assert_eq!(full.lane_fma_ops, 0);
    let dense = rows
        .iter()
        .find(|r| r.a_sparsity == 0.0 && r.b_sparsity == 0.0)
        .unwrap();
    assert_eq!(dense.lane_fma_ops, 128 * 128 * 128);
    assert!(rows.iter().all(|r| r.checksums_agree));
}

#[test]
fn verify_passes_on_identity_and_grid_case() {
    let dir = tempfile::tempdir().unwrap();
    let id = DenseMatrix::<f64>::identity(100, LaneConfig::default_for(ElemKind::F64)).unwrap();
    let f = dir.path().join("id.mmm");
    mmm::io::write_file(&id, &f).unwrap();
    let text = ok(&mmm(&["verify", "--a", p(&f), "--b", p(&f)]));
    assert!(text.contains("PASS"));
    assert!(text.lines().filter(|l| l.contains("0.000e0")).count() == 5);
    let text = ok(&mmm(&[
        "verify",
        "--a",
        "random:0.8:1",
        "--b",
        "block_random:0.8:2",
        "--n",
        "1024",
    ]));
    assert!(text.contains("PASS at tolerance 1e-5"));
}

#[test]
fn verify_catches_corrupted_engine() {
    let out = mmm(&[
        "verify",
        "--a",
        "random:0.5:1",
        "--b",
        "random:0.5:2",
        "--n",
        "200",
        "--mutate",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text
        .lines()
        .any(|l| l.starts_with("mmm") && l.ends_with("FAIL")));
}

#[test]
fn analyze_reports() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("id.mmm");
    mmm::io::write_file(
        &DenseMatrix::<f32>::identity(1024, LaneConfig::default_for(ElemKind::F32)).unwrap(),
        &f,
    )
    .unwrap();
    let text = ok(&mmm(&["analyze", "--matrix", p(&f)]));
    let value = |label: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(label)).unwrap();
        line.split_whitespace().last().unwrap().parse().unwrap()
    };
    assert!((value("elementwise sparsity") - (1.0 - 1.0 / 1024.0)).abs() < 1e-6);
    // Row i holds its one non-zero in region i / 64: 1 of 16 regions per row.
    assert!((value("zero regions, width 64") - 15.0 / 16.0).abs() < 1e-6);

    let zero = dir.path().join("z.mmm");
    ok(&mmm(&[
        "gen",
        "--rows",
        "64",
        "--cols",
        "64",
        "--sparsity",
        "1",
        "--out",
        p(&zero),
    ]));
    let text = ok(&mmm(&["analyze", "--matrix", p(&zero)]));
    for line in text
        .lines()
        .filter(|l| l.starts_with("zero") || l.starts_with("elementwise"))
    {
        assert!(line.ends_with("1.000000"), "{line}");
    }

    let text = ok(&mmm(&[
        "analyze",
        "--matrix",
        "block_column:0.7:4",
        "--n",
        "1024",
    ]));
    let line = text
        .lines()
        .find(|l| l.starts_with("zero column blocks"))
        .unwrap();
    let v: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!((v - 0.7).abs() <= 0.01);
}

#[test]
fn exit_codes() {
    let out = mmm(&["bench", "--algo", "nope", "--a", "x", "--b", "y"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mmm(&[
        "bench",
        "--a",
        "random:0.5",
        "--b",
        "/nonexistent/b.mmm",
        "--n",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = mmm(&[
        "gen",
        "--rows",
        "0",
        "--cols",
        "4",
        "--sparsity",
        "0.5",
        "--out",
        "/tmp/never.mmm",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = mmm(&[
        "bench",
        "--a",
        "random:0.5",
        "--b",
        "random:0.5",
        "--n",
        "64",
        "--leaf-dim",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = mmm(&[
        "bench",
        "--a",
        "random:0.5",
        "--b",
        "random:0.5",
        "--n",
        "64",
        "--workers",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let (fa, fb) = (dir.path().join("a.mmm"), dir.path().join("b.mmm"));
    ok(&mmm(&[
        "gen",
        "--rows",
        "4",
        "--cols",
        "5",
        "--sparsity",
        "0",
        "--out",
        p(&fa),
    ]));
    ok(&mmm(&[
        "gen",
        "--rows",
        "6",
        "--cols",
        "4",
        "--sparsity",
        "0",
        "--out",
        p(&fb),
    ]));
    assert_eq!(
        mmm(&["verify", "--a", p(&fa), "--b", p(&fb)]).status.code(),
        Some(2)
    );
    std::fs::write(&fb, b"garbage!").unwrap();
    assert_eq!(
        mmm(&["verify", "--a", p(&fa), "--b", p(&fb)]).status.code(),
        Some(3)
    );
}

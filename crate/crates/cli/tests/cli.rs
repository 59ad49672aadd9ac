use std::path::Path;
use std::process::Command;

use pcpq::eval::top_n;
use pcpq::IVFIndex;
use pcpq_cli::vecs::{parse_fvecs, read_fvecs, read_ivecs};
use pcpq_cli::{exit_code, EXIT_DATA, EXIT_NUMERIC, EXIT_USAGE};
use serde_json::Value;

/// Runs the binary in `dir` with whitespace-separated `args`.
fn pcpq(dir: &Path, args: &str) -> u8 {
    let out = Command::new(env!("CARGO_BIN_EXE_pcpq"))
        .current_dir(dir)
        .args(args.split_whitespace())
        .output()
        .expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap_or(-1) as u8
}

fn ok(dir: &Path, args: &str) {
    assert_eq!(pcpq(dir, args), 0, "pcpq {args}");
}

fn fixture(dir: &Path, n: usize, d: usize) {
    ok(
        dir,
        &format!(
            "gen --n {n} --d {d} --dist clustered --seed 3 --out data.fvecs \
             --queries 40 --queries-out q.fvecs"
        ),
    );
    ok(
        dir,
        "ground-truth --data data.fvecs --queries q.fvecs --topN 10 --out gt.ivecs",
    );
}

fn report(dir: &Path, index: &str, results: &str, name: &str) -> Value {
    ok(
        dir,
        &format!(
            "eval --results {results} --ground-truth gt.ivecs --data data.fvecs \
             --queries q.fvecs --recall-at 1,5,10 --report {name} --index {index}"
        ),
    );
    serde_json::from_slice(&std::fs::read(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn pipeline_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, 1500, 32);
    ok(
        dir,
        "build --data data.fvecs --method pcpq --quantize-scalars --m 8 --k 16 --s 8 --out idx.bin",
    );
    ok(
        dir,
        "query --index idx.bin --queries q.fvecs --topN 10 --out r.ivecs",
    );
    let rep = report(dir, "idx.bin", "r.ivecs", "rep.json");
    let recalls = rep["recall1_at"].as_object().unwrap();
    assert_eq!(recalls.len(), 3);
    let mut prev = 0.0;
    for cut in ["1", "5", "10"] {
        let r = recalls[cut].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&r));
        assert!(r >= prev);
        prev = r;
    }
    let err = rep["mean_relative_error"].as_f64().unwrap();
    assert!(err.is_finite() && err >= 0.0);
    assert_eq!(rep["method"], "pcpq");
    assert_eq!(rep["queries"], 40);
}

#[test]
fn bit_labels_follow_k() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, 600, 16);
    for (k, label) in [(16, "4-bit"), (256, "8-bit")] {
        ok(
            dir,
            &format!("build --data data.fvecs --method kmeans --m 4 --k {k} --iters 3 --out k.bin"),
        );
        ok(dir, "query --index k.bin --queries q.fvecs --out r.ivecs");
        let rep = report(dir, "k.bin", "r.ivecs", "rep.json");
        assert_eq!(rep["label"], label);
    }
}

#[test]
fn probing_every_cell_matches_flat_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, 1200, 16);
    ok(
        dir,
        "build --data data.fvecs --method apcpq --quantize-scalars --m 4 --k 8 --ivf-kbar 12 \
         --out ivf.bin",
    );
    ok(
        dir,
        "query --index ivf.bin --queries q.fvecs --kprobe 12 --topN 10 --out r.ivecs",
    );
    let ivf = IVFIndex::deserialize(&std::fs::read(dir.join("ivf.bin")).unwrap()).unwrap();
    let queries = read_fvecs(&dir.join("q.fvecs")).unwrap();
    let got = read_ivecs(&dir.join("r.ivecs")).unwrap();
    for (q, row) in queries.rows().zip(&got) {
        let scored = ivf.score_all(q).unwrap();
        let all = scored.into_iter().enumerate().map(|(i, s)| (i as u32, s));
        let flat: Vec<u32> = top_n(all.collect(), 10).iter().map(|h| h.0).collect();
        assert_eq!(row, &flat);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, 800, 16);
    let mut runs: Vec<Vec<Vec<u8>>> = Vec::new();
    for run in 0..2 {
        let (index, results, rep) = (
            format!("idx{run}.bin"),
            format!("r{run}.ivecs"),
            format!("rep{run}.json"),
        );
        ok(
            dir,
            &format!(
                "build --data data.fvecs --method scann --m 4 --k 16 --ivf-kbar 4 --seed 9 \
                 --out {index}"
            ),
        );
        ok(
            dir,
            &format!("query --index {index} --queries q.fvecs --kprobe 2 --out {results}"),
        );
        report(dir, &index, &results, &rep);
        runs.push(
            [index, results, rep]
                .iter()
                .map(|f| std::fs::read(dir.join(f)).unwrap())
                .collect(),
        );
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn fvecs_example_record() {
    let bytes = [0x02, 0, 0, 0, 0, 0, 0x80, 0x3F, 0, 0, 0, 0x40];
    let data = parse_fvecs(&bytes, "inline").unwrap();
    assert_eq!((data.n(), data.d()), (1, 2));
    assert_eq!(data.as_slice(), &[1.0, 2.0]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(pcpq(dir, "frobnicate"), EXIT_USAGE);
    assert_eq!(pcpq(dir, "gen --n 5"), EXIT_USAGE);
    assert_eq!(
        pcpq(
            dir,
            "build --data absent.fvecs --method pcpq --m 2 --out x.bin"
        ),
        EXIT_DATA
    );

    std::fs::write(dir.join("short.fvecs"), [4u8, 0, 0, 0, 1, 2]).unwrap();
    assert_eq!(
        pcpq(
            dir,
            "build --data short.fvecs --method kmeans --m 2 --out x.bin"
        ),
        EXIT_DATA
    );

    ok(dir, "gen --n 50 --d 8 --out small.fvecs");
    assert_eq!(
        pcpq(
            dir,
            "build --data small.fvecs --method kmeans --m 9 --out x.bin"
        ),
        EXIT_USAGE
    );
    assert!(!dir.join("x.bin").exists());

    let numeric = anyhow::Error::from(pcpq::Error::NotPositiveDefinite);
    assert_eq!(exit_code(&numeric), EXIT_NUMERIC);
}

use std::path::Path;
use std::process::{Command, Output};

use core_recovery::analysis::read_csv;

fn corectl(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corectl"))
        .env("CORE_STORE", store)
        .args(args)
        .output()
        .expect("corectl runs")
}

fn ok(store: &Path, args: &[&str]) -> String {
    let out = corectl(store, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf29ce484222325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

#[test]
fn encode_fail_recover_read_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let input = dir.path().join("in.bin");
    let data: Vec<u8> = (0..50_000u32).map(|i| (i.wrapping_mul(2654435761) >> 13) as u8).collect();
    std::fs::write(&input, &data).unwrap();

    ok(
        &store,
        &[
            "encode", "--n", "6", "--k", "3", "--code", "msr", "--block-size", "384", "--symbol-size", "32",
            "--in", input.to_str().unwrap(),
        ],
    );
    ok(&store, &["fail", "--nodes", "0,1"]);
    assert!(ok(&store, &["info"]).contains("failed nodes: {N0,N1}"));

    let ledger = dir.path().join("ledger.csv");
    let summary = ok(&store, &["recover", "--scheme", "core", "--report", ledger.to_str().unwrap()]);
    let (headers, rows) = read_csv(&ledger).unwrap();
    assert_eq!(headers, ["node", "bytes_read", "bytes_encoded", "bytes_downloaded", "bytes_uploaded"]);
    let total = rows.last().unwrap();
    assert_eq!(total[0], "total");
    // 6*3*32 bytes of data per stripe; a good pair downloads 8/9 of that.
    let stripes: u64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("stripes: "))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(total[3].parse::<u64>().unwrap(), stripes * 8 * 288 / 9);
    assert!(summary.contains(&format!("downloaded: {} bytes", total[3])));

    let out = dir.path().join("out.bin");
    ok(&store, &["read", "--file", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(fnv1a(&std::fs::read(&out).unwrap()), fnv1a(&data));
    assert!(ok(&store, &["info"]).contains("failed nodes: none"));
}

#[test]
fn degraded_block_read_matches_the_healthy_block() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let input = dir.path().join("in.bin");
    std::fs::write(&input, (0..3000u32).map(|i| (i % 251) as u8).collect::<Vec<_>>()).unwrap();
    ok(
        &store,
        &["encode", "--n", "6", "--k", "3", "--block-size", "36", "--symbol-size", "4", "--in", input.to_str().unwrap()],
    );
    let healthy = Command::new(env!("CARGO_BIN_EXE_corectl"))
        .env("CORE_STORE", &store)
        .args(["read", "--block", "1"])
        .output()
        .unwrap()
        .stdout;
    assert_eq!(healthy.len(), 36);
    // block 1 of group 0 sits on node 1
    ok(&store, &["fail", "--nodes", "1"]);
    let report = dir.path().join("read.csv");
    let degraded = corectl(&store, &["read", "--block", "1", "--report", report.to_str().unwrap()]);
    assert!(degraded.status.success());
    assert_eq!(degraded.stdout, healthy);
    let (_, rows) = read_csv(&report).unwrap();
    // 3 stripes, 5 helpers, one 4-byte symbol each
    assert_eq!(rows.last().unwrap()[3], "60");
}

#[test]
fn recover_on_a_healthy_store_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let input = dir.path().join("in.bin");
    std::fs::write(&input, b"hello").unwrap();
    ok(&store, &["encode", "--n", "4", "--k", "2", "--block-size", "8", "--symbol-size", "4", "--in", input.to_str().unwrap()]);
    let ledger = dir.path().join("ledger.csv");
    let out = ok(&store, &["recover", "--report", ledger.to_str().unwrap()]);
    assert!(out.contains("downloaded: 0 bytes"));
    let (_, rows) = read_csv(&ledger).unwrap();
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| v == "0")));
}

#[test]
fn ratios_print_four_decimals() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["ratios", "--n", "20", "--k", "10"]);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "n,k,t,good_ratio,good_fraction,bad_ratio,bad_fraction");
    let t2: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(t2[..4], ["20", "10", "2", "0.3600"]);
    assert_eq!(t2[5], "0.5100");
}

#[test]
fn census_and_mttf_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(dir.path(), &["census", "--n", "8", "--k", "4", "--t", "1,2,3", "--list"]);
    assert!(a.contains("8,4,3,56,2,0.035714"));
    assert!(a.contains("bad t=3: {N0,N2,N7}"));
    let s1 = ok(dir.path(), &["census", "--n", "12", "--k", "6", "--t", "3", "--samples", "300", "--seed", "9"]);
    let s2 = ok(dir.path(), &["census", "--n", "12", "--k", "6", "--t", "3", "--samples", "300", "--seed", "9"]);
    assert_eq!(s1, s2);

    let m = ok(dir.path(), &["mttf", "--n", "16", "--k", "8", "--lambda", "0.25", "--bandwidth", "1", "--capacity", "1"]);
    let ratio: f64 = m.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((ratio - 26.342).abs() < 1e-3, "{m}");
    let sweep = ok(dir.path(), &["mttf", "--n", "16", "--k", "8", "--bandwidth", "0.1,1,10"]);
    assert_eq!(sweep.lines().count(), 4);
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("missing");
    let out = corectl(&store, &["fail", "--nodes", "0"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: no store"));

    let bad = corectl(&store, &["ratios", "--n", "7", "--k", "3"]);
    assert!(!bad.status.success());
    assert_eq!(String::from_utf8(bad.stderr).unwrap().lines().count(), 1);

    let unknown = corectl(&store, &["ratios", "--n", "6", "--k", "3", "--bogus"]);
    assert!(!unknown.status.success());
    assert!(String::from_utf8(unknown.stderr).unwrap().contains("Usage"));
}

#[test]
fn too_many_failures_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let input = dir.path().join("in.bin");
    std::fs::write(&input, [7u8; 100]).unwrap();
    ok(&store, &["encode", "--n", "6", "--k", "3", "--block-size", "12", "--symbol-size", "4", "--in", input.to_str().unwrap()]);
    let out = corectl(&store, &["fail", "--nodes", "0,1,2,3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("unrecoverable"));
    assert!(ok(&store, &["info"]).contains("failed nodes: none"));
}

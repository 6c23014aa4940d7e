use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stsdep(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stsdep"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn stsdep")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = stsdep(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn gen_writes_one_file_per_sequence() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen", "--n", "10000", "--m", "4", "--out", "a"], dir.path());
    ok(&["gen", "--n", "10000", "--m", "4", "--out", "b"], dir.path());
    for j in 1..=4 {
        let name = format!("seq_{j:06}.bin");
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        assert_eq!(a.len(), 1250);
        assert_eq!(a, fs::read(dir.path().join("b").join(&name)).unwrap());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n"], 10000);
    assert_eq!(manifest["generator"]["kind"], "mt19937");

    ok(&["gen", "--n", "10000", "--m", "4", "--seed", "7", "--out", "c"], dir.path());
    assert_ne!(
        fs::read(dir.path().join("a/seq_000001.bin")).unwrap(),
        fs::read(dir.path().join("c/seq_000001.bin")).unwrap()
    );
}

#[test]
fn gen_aes_matches_known_block() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &[
            "gen", "--kind", "aes128-ctr",
            "--key", "000102030405060708090a0b0c0d0e0f",
            "--counter0", "00112233445566778899aabbccddeeff",
            "--n", "128", "--m", "2", "--out", "aes",
        ],
        dir.path(),
    );
    let first = fs::read(dir.path().join("aes/seq_000001.bin")).unwrap();
    let hex: String = first.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, "69c4e0d86a7b0430d8cdb78070b4c55a");

    ok(&["gen", "--n", "100", "--m", "3", "--format", "txt", "--out", "t"], dir.path());
    let txt = fs::read_to_string(dir.path().join("t/seq_000002.txt")).unwrap();
    assert_eq!(txt.trim().len(), 100);
}

#[test]
fn run_analyze_minset_overlap_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["run", "--n", "10000", "--m", "40", "--out", "m.csv", "--workers", "2"], p);
    let rows = data_lines(&p.join("m.csv"));
    assert_eq!(rows.len(), 41);
    assert_eq!(rows[0].split(',').count(), 163);

    ok(&["run", "--n", "10000", "--m", "40", "--out", "m.bin"], p);
    let stdout = ok(&["analyze", "--matrix", "m.bin", "--out", "hist.csv"], p);
    assert!(stdout.contains("I = "));
    // header + 201 bins + underflow + overflow
    assert_eq!(data_lines(&p.join("hist.csv")).len(), 204);
    // the csv and binary matrices agree
    let a = ok(&["analyze", "--matrix", "m.csv"], p);
    assert_eq!(a, stdout);

    ok(&["minset", "--matrix", "m.bin", "--out-dir", "ms", "--last"], p);
    let traj = data_lines(&p.join("ms/trajectory.csv"));
    assert_eq!(traj.len(), 162);
    let ks: Vec<usize> = traj[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(ks, (1..=161).rev().collect::<Vec<_>>());
    let last = fs::read_to_string(p.join("ms/last_25.txt")).unwrap();
    assert_eq!(last.lines().count(), 25);

    let same = ok(&["overlap", "ms/last_25.txt", "ms/last_25.txt"], p);
    assert!(same.contains("observed overlap 25"), "{same}");
    assert!(same.contains("expected 3.8580"), "{same}");

    let all: Vec<String> = traj[1..].iter().map(|l| l.split(',').nth(1).unwrap().to_string()).collect();
    fs::write(p.join("first.txt"), all[..25].join("\n")).unwrap();
    fs::write(p.join("second.txt"), format!("# comment\n\n{}\n", all[25..50].join("\n"))).unwrap();
    let disjoint = ok(&["overlap", "first.txt", "second.txt"], p);
    assert!(disjoint.contains("observed overlap 0"), "{disjoint}");

    let report = ok(&["report", "--matrix", "10000=m.bin", "--mode", "plain"], p);
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(stsdep(&["frobnicate"], p).status.code(), Some(1));
    assert_eq!(stsdep(&["run", "--n", "100"], p).status.code(), Some(1));
    assert_eq!(stsdep(&["gen", "--kind", "aes128-ctr", "--n", "8", "--m", "1"], p).status.code(), Some(1));
    assert_eq!(stsdep(&["run", "--n", "1000", "--m", "4", "--workers", "0", "--out", "x.bin"], p).status.code(), Some(1));
    assert_eq!(stsdep(&["--help"], p).status.code(), Some(0));

    assert_eq!(stsdep(&["analyze", "--matrix", "missing.bin"], p).status.code(), Some(2));
    fs::write(p.join("junk.bin"), b"PVM1 definitely not a matrix").unwrap();
    assert_eq!(stsdep(&["analyze", "--matrix", "junk.bin"], p).status.code(), Some(2));
    fs::write(p.join("ids.txt"), "no-such-item\n").unwrap();
    assert_eq!(stsdep(&["overlap", "ids.txt", "ids.txt"], p).status.code(), Some(2));
}

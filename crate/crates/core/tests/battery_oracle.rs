//! Full 162-item rows checked against an independent implementation of the
//! reference battery: frozen six-decimal values for two files, and live
//! comparison for two more.

use std::path::PathBuf;

use stsdep::bitseq::{read_sequence, BitSequence};
use stsdep::sts162::{enumerate_items, Battery, BatteryParams};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn our_row(seq: &BitSequence) -> Vec<(String, f64)> {
    let params = BatteryParams::for_length(seq.len());
    let items = enumerate_items(&params).unwrap();
    let row = Battery::new(params).unwrap().run(seq).unwrap();
    items.iter().map(|i| i.id().to_string()).zip(row).collect()
}

fn frozen(name: &str) -> Vec<(String, f64)> {
    std::fs::read_to_string(data(name))
        .unwrap()
        .lines()
        .map(|l| {
            let (id, v) = l.split_once(' ').unwrap();
            (id.to_string(), v.parse().unwrap())
        })
        .collect()
}

fn check_frozen(bin: &str, expected: &str, n: usize) {
    let seq = read_sequence(&data(bin)).unwrap();
    assert_eq!(seq.len(), n);
    let row = our_row(&seq);
    let mut bad = Vec::new();
    for (id, want) in frozen(expected) {
        let got = row.iter().find(|(i, _)| *i == id).unwrap_or_else(|| panic!("no item {id}")).1;
        if (got - want).abs() > 1e-6 {
            bad.push(format!("{id}: got {got:.7} want {want:.6}"));
        }
    }
    assert!(bad.is_empty(), "{bin}: {} mismatches\n{}", bad.len(), bad.join("\n"));
}

#[test]
fn sqrt3_matches_frozen_row() {
    check_frozen("sqrt3.bin", "sqrt3_expected.txt", 1_004_880);
}

#[test]
fn sha1_matches_frozen_row() {
    check_frozen("sha1.bin", "sha1_expected.txt", 1_000_000);
}

/// The other implementation's row, in canonical item order.
fn nistrs_row(seq: &BitSequence) -> Vec<f64> {
    use nistrs::prelude::*;
    let d = BitsData::from_binary(seq.to_bytes());
    assert_eq!(d.len(), seq.len());
    let cusum = cumulative_sums_test(&d);
    let mut row = vec![
        frequency_test(&d).1,
        block_frequency_test(&d, 128).unwrap().1,
        cusum[0].1,
        cusum[1].1,
        runs_test(&d).1,
        longest_run_of_ones_test(&d).unwrap().1,
        rank_test(&d).unwrap().1,
        fft_test(&d).1,
    ];
    row.extend(non_overlapping_template_test(&d, 9).unwrap().iter().map(|r| r.1));
    row.push(overlapping_template_test(&d, 9).1);
    row.push(universal_test(&d).1);
    row.push(approximate_entropy_test(&d, 10).1);
    let serial = serial_test(&d, 16);
    row.push(serial[0].1);
    row.push(serial[1].1);
    row.push(linear_complexity_test(&d, 500).1);
    row
}

fn check_live(bin: &str) {
    let seq = read_sequence(&data(bin)).unwrap();
    let ours = our_row(&seq);
    let theirs = nistrs_row(&seq);
    assert_eq!(ours.len(), 162);
    assert_eq!(theirs.len(), 162);
    let bad: Vec<String> = ours
        .iter()
        .zip(&theirs)
        .filter(|((_, a), b)| (a - *b).abs() > 1e-7)
        .map(|((id, a), b)| format!("{id}: {a} vs {b}"))
        .collect();
    assert!(bad.is_empty(), "{bin}: {} mismatches\n{}", bad.len(), bad.join("\n"));
}

#[test]
fn e_matches_live_oracle() {
    check_live("e.bin");
}

#[test]
fn pi_matches_live_oracle() {
    check_live("pi.bin");
}

use std::process::{Command, Output};

fn arbor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arbor")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// CSV rows without the seed line and the header.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn settled_fractions_of_b() {
    let out = stdout(&arbor(&["--define", "a = (a, id) * eta", "--define", "b = (a, b)", "settled", "b", "--n0", "6", "--budget", "12", "--format", "csv"]));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 6);
    for (n, row) in (1..=6u32).zip(&rows) {
        let size = 1u64 << n;
        assert_eq!(row, &[n.to_string(), (size - 1).to_string(), size.to_string(), format!("{}/{size}", size - 1)]);
    }
}

#[test]
fn valuation_columns_agree_with_residue_oracle() {
    let out = stdout(&arbor(&["--degree", "3", "valuation", "--k", "4", "--to", "2187", "--format", "csv"]));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2187);
    // r(n) mod 3^8 by the recurrence r(n+1) = 1 + 4 r(n); every v_3(n) here is below 8
    let modulus = 3u64.pow(8);
    let mut r = 0u64;
    for (n, row) in (1..=2187u64).zip(&rows) {
        r = (1 + 4 * r) % modulus;
        let mut v = 0;
        let mut x = r;
        while x % 3 == 0 && v < 8 {
            x /= 3;
            v += 1;
        }
        assert_eq!(row[1], n.to_string());
        assert_eq!(row[2], v.to_string(), "n = {n}");
        assert_eq!(row[2], row[3]);
        assert_eq!(row[4], "yes");
    }
}

#[test]
fn non_contracting_definition_is_rejected() {
    let out = arbor(&["--define", "x = x * eta", "eval", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1:1") && err.contains("non-contracting"), "{err}");

    let out = arbor(&["--define", "a = (a, id", "eval", "a"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax error"));
}

#[test]
fn budget_errors_have_their_own_exit_code() {
    assert_eq!(arbor(&["--depth", "30", "eval", "a"]).status.code(), Some(3));
    assert_eq!(arbor(&["affine", "apply", "--m", "1", "--k", "5", "--j", "3", "--level", "20"]).status.code(), Some(3));
    assert_eq!(arbor(&["cycles", "a", "--level", "20"]).status.code(), Some(2));
    assert_eq!(arbor(&["--degree", "4", "affine", "power", "--m", "1", "--k", "5", "--p", "2"]).status.code(), Some(2));
    assert_eq!(arbor(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn weyl_table_for_case_a() {
    let out = stdout(&arbor(&["weyl", "--r", "4", "--s", "2", "--n-max", "8", "--m-max", "3", "--k-max", "15", "--format", "csv"]));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 3 * 8);
    for row in &rows {
        let k: u64 = row[1].parse().unwrap();
        if k % 4 == 1 {
            assert_eq!(row[4], "yes");
            assert_eq!(row[5], "11111111");
        } else {
            assert_eq!(row[4], "no");
        }
    }
}

#[test]
fn csv_is_reproducible() {
    let args = ["--seed", "17", "sample", "--count", "4", "--n0", "3", "--budget", "8", "--format", "csv"];
    let first = stdout(&arbor(&args));
    assert_eq!(first, stdout(&arbor(&args)));
    let pooled = Command::new(env!("CARGO_BIN_EXE_arbor")).args(args).env("ARBOR_WORKERS", "1").output().unwrap();
    assert_eq!(first, stdout(&pooled));
    let other = stdout(&arbor(&["--seed", "18", "sample", "--count", "4", "--n0", "3", "--budget", "8", "--format", "csv"]));
    assert_ne!(first, other);
    let bad = Command::new(env!("CARGO_BIN_EXE_arbor")).args(args).env("ARBOR_WORKERS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn documents_round_trip_through_files() {
    let dir = std::env::temp_dir().join(format!("arbor-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("b.json");
    let path = path.to_str().unwrap();
    let direct = stdout(&arbor(&["--depth", "8", "eval", "b", "--output", path, "--format", "csv"]));
    let loaded = stdout(&arbor(&["--depth", "8", "eval", &format!("@{path}"), "--format", "csv"]));
    assert_eq!(direct, loaded);
    let wrong_depth = arbor(&["--depth", "9", "eval", &format!("@{path}")]);
    assert_eq!(wrong_depth.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn json_report_envelope() {
    let out = stdout(&arbor(&["--seed", "3", "--depth", "4", "minimal", "a", "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "arbor.run.v1");
    assert_eq!(v["seed"], 3);
    assert_eq!(v["command"][1], "--seed");
    assert_eq!(v["payload"]["kind"], "minimal");
    let levels = v["payload"]["data"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    assert!(levels.iter().all(|l| l["transitive"] == true));
}

#[test]
fn affine_power_and_realization() {
    let out = stdout(&arbor(&["--depth", "8", "affine", "power", "--m", "2", "--k", "5", "--p", "3", "--format", "csv"]));
    // sigma^3 = (m (1 + k + k^2), k^3) = (62, 125) mod 256
    assert_eq!(csv_rows(&out), vec![vec!["2", "2", "5", "3", "62", "125"]]);
    let out = stdout(&arbor(&["--degree", "3", "--depth", "6", "affine", "realize", "--m", "3", "--k", "4", "--format", "csv"]));
    for row in csv_rows(&out).iter().skip(1) {
        assert_eq!(row[2], "agrees");
    }
}

#[test]
fn conjugator_between_odometers() {
    let out = stdout(&arbor(&["--depth", "7", "conjugator", "a", "a^-1", "--format", "csv"]));
    assert_eq!(csv_rows(&out), vec![vec!["yes"]]);
    let out = arbor(&["--depth", "7", "conjugator", "a", "b"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dihedral_audit_is_consistent() {
    let out = stdout(&arbor(&["dihedral-audit", "--n-max", "6", "--format", "csv"]));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[6] == "yes"));
}

use std::process::{Command, Output};

fn unmask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unmask"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn coeffs_small_table() {
    let o = unmask(&["coeffs", "--scheme", "tc", "--L", "3", "--Kmax", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,L,K,Lprime,f,log_psi"));
    let row = text.lines().find(|l| l.starts_with("tc,3,2,3,")).unwrap();
    let f: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!((f - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(text.lines().count(), 1 + 3 + 2);
}

#[test]
fn coeffs_rejects_kmax_above_length() {
    let o = unmask(&["coeffs", "--Kmax", "10", "--L", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("K_max"));
}

#[test]
fn coeffs_to_file_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = unmask(&[
        "coeffs",
        "--scheme",
        "dtc",
        "--L",
        "50",
        "--Kmax",
        "10",
        "--out",
        out.to_str().unwrap(),
        "--manifest",
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let rows = std::fs::read_to_string(&out).unwrap().lines().count();
    assert_eq!(rows, 1 + (1..=10).map(|k| 50 - k + 1).sum::<usize>());
    let manifest = std::fs::read_to_string(dir.path().join("t.csv.manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(v["args"][1], "coeffs");
    assert!(v["started"].as_u64().unwrap() <= v["finished"].as_u64().unwrap());
}

#[test]
fn schedule_with_k_equal_l_is_singletons() {
    let args = [
        "schedule", "--scheme", "tc", "--L", "8", "--K", "8", "--seed", "7",
    ];
    let a = unmask(&args);
    let b = unmask(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut seen: Vec<usize> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let (head, rest) = line.split_once(": ").unwrap();
        assert_eq!(head, format!("step {}", k + 1));
        let idx: Vec<usize> = rest.split(' ').map(|t| t.parse().unwrap()).collect();
        assert_eq!(idx.len(), 1);
        seen.extend(idx);
    }
    seen.sort_unstable();
    assert_eq!(seen, (1..=8).collect::<Vec<_>>());
}

#[test]
fn schedule_with_one_step_reveals_everything() {
    for scheme in ["tc", "dtc", "fixed"] {
        let o = unmask(&[
            "schedule", "--scheme", scheme, "--L", "8", "--K", "1", "--seed", "1",
        ]);
        assert_eq!(stdout(&o), "step 1: 1 2 3 4 5 6 7 8\n");
    }
}

#[test]
fn schedule_steps_are_sorted_and_disjoint() {
    let o = unmask(&[
        "schedule", "--scheme", "dtc", "--L", "30", "--K", "6", "--seed", "11",
    ]);
    let mut all = Vec::new();
    for line in stdout(&o).lines() {
        let idx: Vec<usize> = line
            .split_once(": ")
            .unwrap()
            .1
            .split(' ')
            .map(|t| t.parse().unwrap())
            .collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        all.extend(idx);
    }
    all.sort_unstable();
    assert_eq!(all, (1..=30).collect::<Vec<_>>());
}

#[test]
fn randomized_subcommands_need_a_seed() {
    let o = unmask(&["schedule", "--scheme", "tc", "--L", "8", "--K", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = unmask(&[
        "rs", "--scheme", "dtc", "--L", "20", "--q", "32", "--d", "5", "--K", "3",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_default_run_passes() {
    let o = unmask(&["verify"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(
        text.lines().next(),
        Some("check,instances,max_residual,pass")
    );
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn verify_catches_a_corrupted_table() {
    let o = unmask(&[
        "verify",
        "--checks",
        "tc-equality",
        "--dists",
        "50",
        "--L",
        "5",
        "--K",
        "3",
        "--corrupt-table",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("tc-equality,50,"));
    assert!(stdout(&o).trim_end().ends_with(",false"));
}

#[test]
fn verify_reports_capacity_per_check() {
    let o = unmask(&[
        "verify",
        "--checks",
        "tc-equality,tc-as-kl",
        "--L",
        "12",
        "--K",
        "6",
        "--dists",
        "1",
        "--cap",
        "1_000",
    ]);
    assert_eq!(o.status.code(), Some(4));
    let text = stdout(&o);
    assert!(text.contains("tc-equality,0,,capacity"));
    assert!(text.contains("tc-as-kl,1,"));
}

#[test]
fn verify_rejects_unknown_checks() {
    let o = unmask(&["verify", "--checks", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn profile_is_reproducible_and_sums_to_length() {
    let args = [
        "profile", "--scheme", "tc", "--L", "40", "--K", "5", "--trials", "2_000", "--seed", "9",
    ];
    let a = unmask(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, unmask(&args).stdout);
    let means: f64 = stdout(&a)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((means - 40.0).abs() < 1e-9);
}

#[test]
fn rs_fixed_scheme_has_zero_stderr() {
    let o = unmask(&[
        "rs", "--scheme", "fixed", "--L", "30", "--q", "32", "--d", "10", "--K", "4,7",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], "fixed");
        assert_eq!(cols[8], "0");
        assert_eq!(cols[7], cols[10]);
    }
}

#[test]
fn rs_with_exact_dp_and_threads() {
    let args = [
        "--threads",
        "2",
        "rs",
        "--scheme",
        "tc",
        "--L",
        "30",
        "--q",
        "32",
        "--d",
        "10",
        "--K",
        "5",
        "--trials",
        "20_000",
        "--seed",
        "4",
        "--exact-dp",
        "--bits",
    ];
    let o = unmask(&args);
    assert!(o.status.success());
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let cols: Vec<f64> = line
        .split(',')
        .skip(7)
        .map(|c| c.parse().unwrap())
        .collect();
    let (mean, se, exact) = (cols[0], cols[1], cols[2]);
    assert!((mean - exact).abs() < 5.0 * se);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bits"));
    assert_eq!(o.stdout, unmask(&args[2..]).stdout);
}

#[test]
fn rs_rejects_bad_alphabets() {
    let o = unmask(&[
        "rs", "--scheme", "fixed", "--L", "30", "--q", "30", "--d", "10", "--K", "4",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = unmask(&[
        "rs", "--scheme", "fixed", "--L", "40", "--q", "32", "--d", "10", "--K", "4",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn profile_front_loads_tc_batches() {
    let o = unmask(&[
        "profile", "--scheme", "tc", "--L", "2000", "--K", "1000", "--trials", "10000", "--seed",
        "1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 1000);
    assert!(rows[0][1] > rows[999][1]);
}

#[test]
fn rs_dtc_stays_under_its_reference() {
    let o = unmask(&[
        "rs", "--scheme", "dtc", "--L", "2000", "--q", "2048", "--d", "5", "--K", "500",
        "--trials", "100000", "--seed", "1",
    ]);
    assert!(o.status.success());
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let cols: Vec<&str> = line.split(',').collect();
    let (mean, se, theory): (f64, f64, f64) = (
        cols[7].parse().unwrap(),
        cols[8].parse().unwrap(),
        cols[10].parse().unwrap(),
    );
    assert!(mean <= theory + 4.0 * se);
}

#[test]
fn full_size_table_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tc.csv");
    let o = unmask(&[
        "coeffs",
        "--scheme",
        "tc",
        "--L",
        "2000",
        "--Kmax",
        "1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rows = std::fs::read_to_string(&out).unwrap().lines().count() - 1;
    assert_eq!(rows, (1..=1000).map(|k| 2000 - k + 1).sum::<usize>());
}

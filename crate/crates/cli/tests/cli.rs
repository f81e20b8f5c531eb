use std::path::Path;
use std::process::{Command, Output};

fn spn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spn")).args(args).output().expect("spn runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(report: &str, key: &str) -> Option<String> {
    report.lines().find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_builtin() {
    let o = spn(&["validate", "--example", "rybko-stolyar"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(value(&s, "buffers").as_deref(), Some("4"));
    assert_eq!(value(&s, "processors").as_deref(), Some("2"));
    assert_eq!(value(&s, "route_bound").as_deref(), Some("2"));
}

#[test]
fn input_errors_exit_3() {
    assert_eq!(code(&spn(&["validate", "--example", "nope"])), 3);
    assert_eq!(code(&spn(&["validate"])), 3);
    assert_eq!(code(&spn(&["validate", "--example", "tandem", "--spec", "x.toml"])), 3);
    let o = spn(&["simulate", "--example", "tandem"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("cli::MissingSeed"));
    assert_eq!(code(&spn(&["validate", "--spec", "/nonexistent/spec.toml"])), 3);
}

#[test]
fn example_round_trip_and_partition_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = spn(&["--out", p(dir.path()), "example", "rybko-stolyar"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let file = dir.path().join("rybko-stolyar.toml");
    assert_eq!(code(&spn(&["validate", "--spec", p(&file)])), 0);

    let text = std::fs::read_to_string(&file).unwrap();
    let line = text.lines().find(|l| l.starts_with("partition")).unwrap();
    let bad = text.replace(line, "partition = [[1, 2], [3, 4]]");
    let bad_file = dir.path().join("bad.toml");
    std::fs::write(&bad_file, bad).unwrap();
    let o = spn(&["validate", "--spec", p(&bad_file)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("network::PartitionNotProcessorIndependent"), "{}", stderr(&o));

    let o = spn(&["--out", p(dir.path()), "example", "rybko-stolyar", "--unstable"]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("rybko-stolyar-unstable.toml").exists());
    assert_eq!(code(&spn(&["--out", p(dir.path()), "example", "nope"])), 3);
}

#[test]
fn certify_rybko_stolyar() {
    let dir = tempfile::tempdir().unwrap();
    let o = spn(&["--out", p(dir.path()), "certify", "--example", "rybko-stolyar", "--epsilon", "0.1", "--max-slack"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(value(&s, "holds").as_deref(), Some("true"));
    let eta: f64 = value(&s, "eta").unwrap().parse().unwrap();
    assert!((eta - 0.46).abs() < 1e-12);
    let slack: f64 = value(&s, "max_slack").unwrap().parse().unwrap();
    assert!((slack - 3.0 / 7.0).abs() < 1e-9);
    assert_eq!(std::fs::read_to_string(dir.path().join("certificate.txt")).unwrap(), s);

    let o = spn(&["--out", p(dir.path()), "certify", "--example", "rybko-stolyar", "--epsilon", "0.5"]);
    assert_eq!(code(&o), 2);
    assert_eq!(value(&stdout(&o), "holds").as_deref(), Some("false"));
    assert!(value(&stdout(&o), "witness_buffer").is_some());
}

#[test]
fn certify_with_z_file_and_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let z = dir.path().join("z.toml");
    std::fs::write(&z, "spec_version = 1\nz = [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1, 1, 0], [1, 0, 0, 1]]\n").unwrap();
    let args = ["--out", p(dir.path()), "certify", "--example", "rybko-stolyar", "--z", p(&z), "--epsilon", "0.1"];
    let mut with = args.to_vec();
    with.extend(["--condition", "C2", "--samples", "2000", "--seed", "1"]);
    let o = spn(&with);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert_eq!(value(&stdout(&o), "sample_violations").as_deref(), Some("0"));

    std::fs::write(&z, "spec_version = 1\nz = [[1, 2], [0, 1]]\n").unwrap();
    assert_eq!(code(&spn(&args)), 3);
}

#[test]
fn priority_divergence_sets_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--seed", "7", "--out", p(dir.path()), "simulate", "--example", "rybko-stolyar"];
    let mut prio = base.to_vec();
    prio.extend(["--policy", "static-priority", "--horizon", "20000"]);
    let o = spn(&prio);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "verdict").as_deref(), Some("\"diverging\""));
    assert!(dir.path().join("trajectory-seed7.csv").exists());
    prio.push("--expect-stable");
    assert_eq!(code(&spn(&prio)), 2);

    let mut lrfs = base.to_vec();
    lrfs.extend(["--horizon", "20000", "--expect-stable", "--audit"]);
    let o = spn(&lrfs);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "violations").as_deref(), Some("0"));
}

#[test]
fn simulate_is_byte_identical_and_analyzable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = spn(&[
            "--seed", "3", "--out", p(dir.path()), "--format", "tsv", "simulate", "--example", "psn-a2",
            "--horizon", "2000", "--replications", "3",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for name in ["trajectory-seed3.tsv", "trajectory-seed4.tsv", "trajectory-seed5.tsv", "summary.txt"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let header = std::fs::read_to_string(a.path().join("trajectory-seed3.tsv")).unwrap();
    assert!(header.starts_with("t\tnorm\tQ_1\tQ_2\tQ_3\tV_1\tV_2\tV_3\n"));

    let o = spn(&["--out", p(a.path()), "analyze", p(&a.path().join("trajectory-seed3.tsv"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = std::fs::read_to_string(a.path().join("summary.txt")).unwrap();
    let first = summary.split("[[replication]]").nth(1).unwrap();
    assert_eq!(value(first, "time_avg_norm"), value(&stdout(&o), "time_avg_norm"));
    assert!(a.path().join("analysis.txt").exists());
}

#[test]
fn drift_writes_bins() {
    let dir = tempfile::tempdir().unwrap();
    let o = spn(&[
        "--seed", "1", "--out", p(dir.path()), "drift", "--example", "rybko-stolyar", "--horizon", "3000",
        "--initial", "1:1:50", "--trajectories",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(value(&s, "T").as_deref(), Some("7"));
    assert_eq!(value(&s, "D").as_deref(), Some("2"));
    let bins = std::fs::read_to_string(dir.path().join("drift_bins.csv")).unwrap();
    assert!(bins.starts_with("|Y|_lo,|Y|_hi,n,mean_increment,stderr\n"));
    let traj = dir.path().join("trajectory-seed1.csv");
    assert!(std::fs::read_to_string(&traj).unwrap().lines().next().unwrap().ends_with(",Lglo"));
    let o = spn(&["--out", p(dir.path()), "analyze", p(&traj)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "increments"), value(&s, "increments"));
}

#[test]
fn every_builtin_validates_and_certifies() {
    let dir = tempfile::tempdir().unwrap();
    for name in spn_core::examples::NAMES {
        assert_eq!(code(&spn(&["validate", "--example", name])), 0, "{name}");
        let o = spn(&["--out", p(dir.path()), "certify", "--example", name]);
        // Networks outside both constructors report that no certificate applies.
        match code(&o) {
            0 => assert_eq!(value(&stdout(&o), "holds").as_deref(), Some("true"), "{name}"),
            3 => assert!(stderr(&o).contains("cli::NoCertificate"), "{name}: {}", stderr(&o)),
            c => panic!("{name}: exit {c}: {}", stdout(&o)),
        }
    }
}

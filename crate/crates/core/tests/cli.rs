use std::path::Path;
use std::process::{Command, Output};

fn weyl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weyl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn gauss_check_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = weyl(&["gauss-check", "--p", "13", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["params"]["p"], "13");
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["config"]["seed"], "0");
    assert!(manifest["timestamp"].as_str().unwrap().ends_with('Z'));
    assert!(manifest["wall_time_seconds"].as_f64().is_some());
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn moments_example_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = weyl(&[
        "moments",
        "--d",
        "2",
        "--p",
        "3",
        "--nu",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let csv = String::from_utf8(read(dir.path(), "moments.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let value = header.iter().position(|h| *h == "value").unwrap();
    assert_eq!(row[value].parse::<f64>().unwrap(), 135.0);
    // the row carries its parameters
    let p = header.iter().position(|h| *h == "p").unwrap();
    assert_eq!(row[p], "3");
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&[&str], &[&str])] = &[
        (
            &[
                "box-moments",
                "--d",
                "2",
                "--p",
                "31",
                "--nu",
                "1",
                "--seed",
                "9",
            ],
            &["report.json", "box_moments.csv"],
        ),
        (
            &[
                "mr-scan",
                "--samples",
                "12",
                "--N-max",
                "4096",
                "--seed",
                "3",
            ],
            &["report.json", "mr_scan.csv"],
        ),
        (
            &[
                "koksma-check",
                "--d",
                "3",
                "--samples",
                "50",
                "--N-max",
                "300",
                "--seed",
                "1",
            ],
            &["report.json", "koksma.csv"],
        ),
        (
            &["cantor-dim", "--placement", "random", "--seed", "5"],
            &["report.json", "boxes.jsonl", "box_counts.csv"],
        ),
        (
            &["weyl-trace", "--x", "1/3,0.1234", "--N-max", "5000"],
            &["report.json", "trace.csv"],
        ),
    ];
    for (i, (args, files)) in cases.iter().enumerate() {
        let mut outputs = Vec::new();
        for threads in ["1", "4", "4"] {
            let out = dir.path().join(format!("{i}-{threads}-{}", outputs.len()));
            let mut full = args.to_vec();
            full.extend(["--threads", threads, "--out", out.to_str().unwrap()]);
            let o = weyl(&full);
            assert_eq!(
                code(&o),
                0,
                "{args:?}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
            outputs.push(files.iter().map(|f| read(&out, f)).collect::<Vec<_>>());
        }
        assert_eq!(outputs[0], outputs[1], "{args:?} depends on thread count");
        assert_eq!(outputs[1], outputs[2], "{args:?} is not reproducible");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // unknown key
    assert_eq!(
        code(&weyl(&[
            "gauss-check",
            "--p",
            "13",
            "--d",
            "2",
            "--out",
            out
        ])),
        2
    );
    // composite modulus
    assert_eq!(code(&weyl(&["gauss-check", "--p", "15", "--out", out])), 2);
    // resource cap
    assert_eq!(
        code(&weyl(&[
            "moments", "--d", "3", "--p", "401", "--nu", "1", "--cap", "1000", "--out", out
        ])),
        3
    );
    // empty large-value set, so no witness in the box
    assert_eq!(
        code(&weyl(&[
            "box-density",
            "--d",
            "3",
            "--p",
            "5",
            "--gamma",
            "100",
            "--side",
            "2",
            "--out",
            out
        ])),
        4
    );
    // infeasible second level: partial output plus exit 2
    let c = dir.path().join("cantor");
    let o = weyl(&[
        "cantor-build",
        "--d",
        "3",
        "--tau",
        "4",
        "--primes",
        "31,127",
        "--depth",
        "2",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    let boxes = String::from_utf8(read(&c, "boxes.jsonl")).unwrap();
    assert_eq!(boxes.lines().count(), 8);
    for line in boxes.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["depth"], 1);
        assert_eq!(v["certificate"]["pass"], true);
    }
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    std::fs::write(
        &cfg,
        "# Parseval check\ncommand = moments\nd = 2\np = 7\nnu = 1\n",
    )
    .unwrap();
    assert_eq!(
        code(&weyl(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            a.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        code(&weyl(&[
            "moments",
            "--d",
            "2",
            "--p",
            "7",
            "--nu",
            "1",
            "--out",
            b.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(read(&a, "moments.csv"), read(&b, "moments.csv"));
    assert_eq!(read(&a, "report.json"), read(&b, "report.json"));

    std::fs::write(
        &cfg,
        "command = moments\nd = 2\np = 7\nnu = 1\ncolour = blue\n",
    )
    .unwrap();
    assert_eq!(
        code(&weyl(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            a.to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn table_cache_is_reused_and_verified() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("t.wslt");
    let cache_s = cache.to_str().unwrap();
    let out = dir.path().join("o");
    let args = [
        "moments",
        "--d",
        "2",
        "--p",
        "11",
        "--nu",
        "2",
        "--cache",
        cache_s,
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&weyl(&args)), 0);
    let first = read(&out, "moments.csv");
    assert!(cache.exists());
    assert_eq!(code(&weyl(&args)), 0);
    assert_eq!(read(&out, "moments.csv"), first);

    let mut bytes = std::fs::read(&cache).unwrap();
    bytes[40] ^= 1;
    std::fs::write(&cache, bytes).unwrap();
    let o = weyl(&args);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));
}

//! End-to-end runs of the `oevla` binary.

use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn oevla(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_oevla"))
        .args(args)
        .output()
        .expect("spawn oevla");
    out
}

fn ok(args: &[&str]) -> Output {
    let out = oevla(args);
    assert!(
        out.status.success(),
        "oevla {} failed:\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn forge_bench_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |name: &str| tmp.path().join(name);
    ok(&[
        "forge",
        "demos",
        "--n",
        "12",
        "--seed",
        "1",
        "--resolution",
        "32",
        "--workers",
        "3",
        "--out",
        s(&t("demos")),
    ]);
    ok(&[
        "forge",
        "pool",
        "--seed",
        "2",
        "--per-object",
        "2",
        "--out",
        s(&t("pool")),
    ]);
    ok(&[
        "forge",
        "crops",
        "--demos",
        s(&t("demos")),
        "--external",
        s(&t("pool")),
        "--out",
        s(&t("crops")),
    ]);
    ok(&[
        "forge",
        "build",
        "--demos",
        s(&t("demos")),
        "--crops",
        s(&t("crops")),
        "--seed",
        "3",
        "--out",
        s(&t("ds")),
    ]);
    ok(&[
        "forge",
        "manifest",
        "--dataset",
        s(&t("ds")),
        "--stage",
        "2",
        "--out",
        s(&t("m.json")),
    ]);
    let ds = json(&t("ds/manifest.json"));
    let subsets = ds["subsets"].as_array().unwrap();
    assert_eq!(subsets.len(), 5);
    assert!(subsets.iter().all(|s| s["episodes"] == 5));
    assert_eq!(
        json(&t("m.json"))["entries"].as_array().unwrap().len(),
        ds["shuffle"].as_array().unwrap().len()
    );

    ok(&[
        "bench",
        "gen",
        "--form",
        "lang",
        "--n",
        "20",
        "--seed",
        "7",
        "--resolution",
        "64",
        "--out",
        s(&t("suite")),
    ]);
    ok(&[
        "eval",
        "run",
        "--suite",
        s(&t("suite")),
        "--policy",
        "instruction-oracle",
        "--workers",
        "2",
        "--out",
        s(&t("r.json")),
    ]);
    let report = json(&t("r.json"));
    assert!(report["metrics"]["len"].as_f64().unwrap() >= 4.9);
    assert_eq!(report["policy"], "instruction-oracle");

    let score = ok(&["eval", "score", "--logs", s(&t("r.logs.jsonl")), "--verify"]);
    let m: Value = serde_json::from_slice(&score.stdout).unwrap();
    assert_eq!(m, report["metrics"]);

    // hard VOS needs the external pool
    let hard = [
        "bench",
        "gen",
        "--form",
        "vos",
        "--difficulty",
        "hard",
        "--n",
        "4",
        "--seed",
        "7",
    ];
    let no_pool = oevla(&[&hard[..], &["--out", s(&t("h0"))]].concat());
    assert!(!no_pool.status.success());
    ok(&[&hard[..], &["--pool", s(&t("pool")), "--out", s(&t("h1"))]].concat());
    ok(&[&hard[..], &["--pool", s(&t("crops")), "--out", s(&t("h2"))]].concat());
}

#[test]
fn eval_reports_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |name: &str| tmp.path().join(name);
    ok(&[
        "bench",
        "gen",
        "--form",
        "mixed",
        "--n",
        "8",
        "--seed",
        "3",
        "--resolution",
        "32",
        "--out",
        s(&t("suite")),
    ]);
    for (out, workers) in [("a.json", "1"), ("b.json", "4")] {
        ok(&[
            "eval",
            "run",
            "--suite",
            s(&t("suite")),
            "--policy",
            "random",
            "--seed",
            "5",
            "--workers",
            workers,
            "--out",
            s(&t(out)),
        ]);
    }
    assert_eq!(std::fs::read(t("a.json")).unwrap(), std::fs::read(t("b.json")).unwrap());
    assert_eq!(
        std::fs::read(t("a.logs.jsonl")).unwrap(),
        std::fs::read(t("b.logs.jsonl")).unwrap()
    );
    assert_eq!(json(&t("a.json"))["policy"], "random(seed=5)");

    let missing_seed = oevla(&[
        "eval",
        "run",
        "--suite",
        s(&t("suite")),
        "--policy",
        "random",
        "--out",
        s(&t("c.json")),
    ]);
    assert!(!missing_seed.status.success());
    let stderr = String::from_utf8_lossy(&missing_seed.stderr);
    assert!(stderr.starts_with("error: ") && stderr.contains("--seed"), "{stderr}");
}

#[test]
fn codec_round_trip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |name: &str| tmp.path().join(name);
    let chunks: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            (0..35)
                .map(|i| {
                    if i % 7 == 6 {
                        1.0
                    } else {
                        ((i * 37 + k * 11) % 200) as f64 / 100.0 - 1.0
                    }
                })
                .collect()
        })
        .collect();
    std::fs::write(t("in.json"), serde_json::to_string(&chunks).unwrap()).unwrap();
    ok(&[
        "codec",
        "encode",
        "--input",
        s(&t("in.json")),
        "--out",
        s(&t("tok.json")),
    ]);
    let tokens: Vec<Vec<i64>> = serde_json::from_slice(&std::fs::read(t("tok.json")).unwrap()).unwrap();
    assert!(tokens.iter().flatten().all(|&t| (151_808..152_064).contains(&t)));
    ok(&[
        "codec",
        "decode",
        "--input",
        s(&t("tok.json")),
        "--out",
        s(&t("back.json")),
    ]);
    let back: Vec<Vec<f64>> = serde_json::from_slice(&std::fs::read(t("back.json")).unwrap()).unwrap();
    for (a, b) in chunks.iter().flatten().zip(back.iter().flatten()) {
        assert!((a - b).abs() <= 1.0 / 256.0, "{a} vs {b}");
    }

    std::fs::write(t("short.json"), "[151900, 151900]").unwrap();
    let bad = oevla(&["codec", "decode", "--input", s(&t("short.json"))]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("truncated chunk"));
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |name: &str| tmp.path().join(name);
    std::fs::write(
        t("oevla.toml"),
        "[bench.gen]\nform = \"oif\"\nn = 3\nseed = 4\nresolution = 32\n",
    )
    .unwrap();
    ok(&[
        "--config",
        s(&t("oevla.toml")),
        "bench",
        "gen",
        "--n",
        "2",
        "--out",
        s(&t("suite")),
    ]);
    let suite = json(&t("suite/suite.json"));
    assert_eq!(suite["sequences"].as_array().unwrap().len(), 2);
    assert_eq!(suite["config"]["seed"], 4);
}

#[test]
fn env_render_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |name: &str| tmp.path().join(name);
    ok(&[
        "env",
        "render",
        "--seed",
        "3",
        "--view",
        "obs",
        "--resolution",
        "32",
        "--out",
        s(&t("obs.png")),
    ]);
    assert!(std::fs::read(t("obs.png")).unwrap().starts_with(b"\x89PNG"));
    std::fs::write(t("a.jsonl"), "[0.5,0,0,0,0,0,1]\n[0,0.5,0,0,0,0,-1]\n").unwrap();
    ok(&[
        "env",
        "replay",
        "--seed",
        "3",
        "--actions",
        s(&t("a.jsonl")),
        "--out",
        s(&t("s.jsonl")),
        "--frames",
        s(&t("frames")),
        "--resolution",
        "32",
    ]);
    let states = std::fs::read_to_string(t("s.jsonl")).unwrap();
    assert_eq!(states.lines().count(), 3);
    assert_eq!(std::fs::read_dir(t("frames")).unwrap().count(), 3);
    // the first state is the reset scene
    let first: Value = serde_json::from_str(states.lines().next().unwrap()).unwrap();
    std::fs::write(t("state.json"), first.to_string()).unwrap();
    ok(&[
        "env",
        "render",
        "--state",
        s(&t("state.json")),
        "--resolution",
        "32",
        "--out",
        s(&t("again.png")),
    ]);
    ok(&[
        "env",
        "render",
        "--seed",
        "3",
        "--resolution",
        "32",
        "--out",
        s(&t("seeded.png")),
    ]);
    assert_eq!(
        std::fs::read(t("again.png")).unwrap(),
        std::fs::read(t("seeded.png")).unwrap()
    );
}

#[test]
fn stdio_remote_policy_matches_in_process() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |name: &str| tmp.path().join(name);
    ok(&[
        "bench",
        "gen",
        "--form",
        "vdl",
        "--n",
        "4",
        "--seed",
        "2",
        "--resolution",
        "32",
        "--out",
        s(&t("suite")),
    ]);
    ok(&[
        "eval",
        "run",
        "--suite",
        s(&t("suite")),
        "--policy",
        "random",
        "--seed",
        "9",
        "--codec-loop",
        "--out",
        s(&t("local.json")),
    ]);
    let server = format!(
        "'{}' rpc serve --policy random --seed 9 --stdio --tokens",
        env!("CARGO_BIN_EXE_oevla")
    );
    ok(&[
        "eval",
        "run",
        "--suite",
        s(&t("suite")),
        "--policy",
        &format!("remote:stdio:{server}"),
        "--workers",
        "2",
        "--out",
        s(&t("remote.json")),
    ]);
    assert_eq!(
        std::fs::read(t("local.logs.jsonl")).unwrap(),
        std::fs::read(t("remote.logs.jsonl")).unwrap()
    );
    assert_eq!(json(&t("local.json"))["metrics"], json(&t("remote.json"))["metrics"]);
}

#[test]
fn listen_mode_with_connecting_server() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |name: &str| tmp.path().join(name);
    ok(&[
        "bench",
        "gen",
        "--form",
        "lang",
        "--n",
        "3",
        "--seed",
        "2",
        "--resolution",
        "32",
        "--out",
        s(&t("suite")),
    ]);
    // reserve a free port for the harness
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let mut harness = Command::new(env!("CARGO_BIN_EXE_oevla"))
        .args([
            "eval",
            "run",
            "--suite",
            s(&t("suite")),
            "--policy",
            &format!("remote:listen://{addr}"),
            "--privileged",
            "--out",
            s(&t("r.json")),
        ])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // wait for the harness to bind
    let mut served = None;
    for _ in 0..100 {
        std::thread::sleep(std::time::Duration::from_millis(50));
        let out = oevla(&["rpc", "serve", "--policy", "oracle", "--connect", &addr]);
        if out.status.success() {
            served = Some(out);
            break;
        }
    }
    assert!(served.is_some(), "policy server never connected");
    let status = harness.wait().unwrap();
    assert!(status.success());
    assert_eq!(json(&t("r.json"))["metrics"]["len"], 5.0);
}

use std::path::Path;

use shaken_lattice::cli::{dispatch, execute, Cli};
use shaken_lattice::Error;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["shaken-lattice"];
    argv.extend_from_slice(args);
    dispatch(argv)
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "[splitter.hyper]\nepisodes = 30\nbatch = 8\nhidden = 16\n\n[mirror.hyper]\nepisodes = 20\nbatch = 8\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn unknown_subcommand_and_flag_fail() {
    assert_ne!(run(&["fly"]), 0);
    assert_ne!(run(&["baseline-mirror", "--bogus"]), 0);
    assert_ne!(run(&[]), 0);
}

#[test]
fn estimate_without_protocols_is_a_missing_input() {
    use clap::Parser;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est");
    let cli = Cli::try_parse_from(["shaken-lattice", "estimate", "--out", out.to_str().unwrap()]).unwrap();
    match execute(&cli.command) {
        Err(Error::MissingInput(msg)) => {
            assert!(msg.contains("--splitter") && msg.contains("train-splitter"), "{msg}")
        }
        other => panic!("{other:?}"),
    }
    assert!(!out.exists(), "nothing is written before inputs are checked");
    assert_eq!(run(&["estimate", "--splitter", "nowhere.protocol", "--mirror", "x", "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[splitter.hyper]\ngamma = 1.5\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["baseline-mirror", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn training_is_reproducible_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        assert_eq!(run(&["train-splitter", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]), 0);
        outputs.push(out);
    }
    for name in ["training.csv", "splitter.protocol", "checkpoint.bin", "config.toml", "summary.txt"] {
        let a = std::fs::read(outputs[0].join(name)).unwrap();
        let b = std::fs::read(outputs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let csv = std::fs::read_to_string(outputs[0].join("training.csv")).unwrap();
    assert!(csv.starts_with("episode [count],steps [count],fidelity [1]"));
    assert_eq!(csv.lines().count(), 31);
    let echo = std::fs::read_to_string(outputs[0].join("config.toml")).unwrap();
    let parsed = shaken_lattice::io::parse_config(&echo).unwrap();
    assert_eq!(parsed.seed, 7);
    assert_eq!(parsed.splitter.hyper.episodes, 30);

    let p = shaken_lattice::io::ProtocolFile::load(&outputs[0].join("splitter.protocol")).unwrap();
    assert_eq!(p.seed, Some(7));
}

#[test]
fn mirror_pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let m = dir.path().join("m");
    let s = dir.path().join("s");
    assert_eq!(run(&["train-mirror", "--config", &cfg, "--out", m.to_str().unwrap()]), 0);
    assert_eq!(run(&["train-splitter", "--config", &cfg, "--out", s.to_str().unwrap()]), 0);
    let out = dir.path().join("i");
    let code = run(&[
        "run-interferometer",
        "--splitter",
        s.join("splitter.protocol").to_str().unwrap(),
        "--mirror",
        m.join("mirror.protocol").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("ground_return = "));
    let csv = std::fs::read_to_string(out.join("output.csv")).unwrap();
    assert_eq!(csv.lines().count(), 34);

    // Swapped protocol kinds are refused.
    let code = run(&[
        "run-interferometer",
        "--splitter",
        m.join("mirror.protocol").to_str().unwrap(),
        "--mirror",
        s.join("splitter.protocol").to_str().unwrap(),
        "--out",
        dir.path().join("j").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn baseline_mirror_scan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan");
    assert_eq!(run(&["baseline-mirror", "--out", out.to_str().unwrap()]), 0);
    let csv = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    assert!(csv.starts_with("amplitude [rad],half_cycles [count],duration [1/omega_r],channel_fidelity [1]"));
    let best = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(best >= 0.75, "{best}");
}

#[test]
fn bragg_baseline_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[estimation]\natoms = 1000\ntrials = 4\n").unwrap();
    let out = dir.path().join("b");
    assert_eq!(run(&["bragg-baseline", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    let get = |k: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{k} = ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((get("fisher_numeric") / get("fisher_analytic") - 1.0).abs() < 1e-6);
}

//! End-to-end checks of the `autoheal` binary: every subcommand, the
//! config/intents overrides, and output-file schemas.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_autoheal"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("autoheal-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn validate_topology_presets() {
    for preset in ["wpp", "small"] {
        let out = bin()
            .args(["validate-topology", "--topology", preset])
            .output()
            .unwrap();
        assert_ok(&out);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("\"connected\": true"), "{text}");
    }
}

#[test]
fn validate_custom_topology_round_trip() {
    let dir = tmpdir("topo");
    // Export the small preset by hand: two spines, four leaves, hosts.
    let json = {
        use autoheal_core::topology::build_small;
        build_small().to_json().unwrap()
    };
    let path = dir.join("topo.json");
    fs::write(&path, json).unwrap();
    let out = bin()
        .args([
            "validate-topology",
            "--topology",
            &format!("custom:{}", path.display()),
        ])
        .output()
        .unwrap();
    assert_ok(&out);
}

#[test]
fn unknown_scenario_fails() {
    let out = bin()
        .args(["run-scenario", "--id", "TC10", "--agent", "baseline"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn run_scenario_writes_trace_actions_and_flows() {
    let dir = tmpdir("trace");
    let trace = dir.join("trace.jsonl");
    let out = bin()
        .args([
            "run-scenario",
            "--id",
            "TC5",
            "--agent",
            "baseline",
            "--duration-s",
            "3",
            "--topology",
            "small",
            "--trace",
        ])
        .arg(&trace)
        .output()
        .unwrap();
    assert_ok(&out);
    let text = fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().count(), 3000, "one record per tick");
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["t", "u", "l_ms", "loss", "throughput_mbps", "thermal"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert!(dir.join("trace.actions.jsonl").exists());
    let flows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("trace.flows.json")).unwrap()).unwrap();
    assert!(flows.as_array().unwrap().len() > 4);
}

#[test]
fn train_then_evaluate_deterministically() {
    let dir = tmpdir("train");
    let weights = dir.join("w.bin");
    let curves = dir.join("curves.csv");
    let out = bin()
        .args([
            "train",
            "--scenario",
            "TC5",
            "--episodes",
            "4",
            "--seed",
            "42",
            "--topology",
            "small",
            "--episode-duration-s",
            "10",
            "--out",
        ])
        .arg(&weights)
        .arg("--curves")
        .arg(&curves)
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(weights.exists());
    let curves_text = fs::read_to_string(&curves).unwrap();
    assert!(curves_text.starts_with("episode,reward,epsilon,mean_loss"));
    assert_eq!(curves_text.lines().count(), 5);

    let run_eval = |path: &PathBuf| {
        let out = bin()
            .args([
                "evaluate",
                "--scenarios",
                "TC5",
                "--seeds",
                "23,37",
                "--topology",
                "small",
                "--duration-s",
                "8",
                "--weights",
            ])
            .arg(&weights)
            .arg("--out")
            .arg(path)
            .output()
            .unwrap();
        assert_ok(&out);
        fs::read(path).unwrap()
    };
    let a = run_eval(&dir.join("r1.csv"));
    let b = run_eval(&dir.join("r2.csv"));
    assert_eq!(a, b, "identical flags give byte-identical CSV");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(
        "policy,tc,latency_ms_mean,latency_ms_ci,loss_pct,throughput_mbps,reaction_s,recovery_s,dy"
    ));
    // Two policies x one scenario.
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn evaluate_requires_weights_for_agent() {
    let dir = tmpdir("noweights");
    let out = bin()
        .args([
            "evaluate",
            "--scenarios",
            "TC1",
            "--seeds",
            "23",
            "--policies",
            "ttdqsha",
            "--out",
        ])
        .arg(dir.join("r.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights"));
}

#[test]
fn config_and_intents_overrides_apply() {
    let dir = tmpdir("cfg");
    let cfg_path = dir.join("cfg.json");
    fs::write(&cfg_path, r#"{"detection_delay_s": 1.0}"#).unwrap();
    let intents_path = dir.join("intents.json");
    fs::write(
        &intents_path,
        r#"{"u_thr": 0.9, "l_thr_ms": 5.0, "temp_min_c": 10.0, "temp_max_c": 60.0}"#,
    )
    .unwrap();
    let out = bin()
        .env("AUTOHEAL_CONFIG", &cfg_path)
        .args([
            "run-scenario",
            "--id",
            "TC1",
            "--agent",
            "baseline",
            "--duration-s",
            "2",
            "--topology",
            "small",
            "--intents",
        ])
        .arg(&intents_path)
        .output()
        .unwrap();
    assert_ok(&out);

    // A malformed config is rejected loudly.
    fs::write(&cfg_path, r#"{"no_such_knob": 1}"#).unwrap();
    let out = bin()
        .env("AUTOHEAL_CONFIG", &cfg_path)
        .args(["validate-topology", "--topology", "small"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

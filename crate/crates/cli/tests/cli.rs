use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

fn opacue_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_opacue"));
    cmd.args(args).env_remove("OPACUE_CAP");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn opacue(args: &[&str]) -> Run {
    opacue_env(args, &[])
}

fn assert_one_line_error(run: &Run, code: i32) {
    assert_eq!(run.code, code, "stderr: {}", run.stderr);
    assert!(run.stdout.is_empty(), "{}", run.stdout);
    assert_eq!(run.stderr.trim_end().lines().count(), 1, "{}", run.stderr);
}

#[test]
fn first_controller_leaks_the_start_in_cell_five() {
    let g = fixture("gridworld_c1.json");
    let run = opacue(&["verify", "--system", &g, "--notion", "initial-state", "--delta", "0"]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.is_empty());
    let report = run.json();
    assert_eq!(report["status"], "not-opaque");
    assert_eq!(report["witness"]["states"][0], "5/5");
    assert_eq!(report["witness"]["reveal_instant"], 0);
}

#[test]
fn second_controller_is_opaque() {
    let run = opacue(&["verify", "--system", &fixture("gridworld_c2.json"), "--notion", "initial-state", "--delta", "0"]);
    assert_eq!(run.code, 0);
    assert_eq!(run.json()["status"], "opaque");
}

#[test]
fn empty_secret_is_opaque_for_every_notion() {
    let s = fixture("empty_secret.json");
    for notion in [vec!["initial-state"], vec!["current-state"], vec!["k-step", "--k", "2"], vec!["infinite-step"]] {
        let mut args = vec!["verify", "--system", &s, "--delta", "0", "--notion"];
        args.extend(notion);
        assert_eq!(opacue(&args).code, 0, "{args:?}");
    }
}

#[test]
fn oracle_cross_check_is_reported() {
    for (file, code) in [("gridworld_c1.json", Some(1)), ("gridworld_c2.json", Some(0)), ("gridworld.json", None)] {
        let run = opacue(&["verify", "--system", &fixture(file), "--delta", "0", "--oracle"]);
        assert!(code.map_or(run.code <= 1, |c| run.code == c), "{file}: {}", run.stderr);
        let oracle = &run.json()["oracle"];
        assert_eq!(oracle["agrees"], true);
        assert_eq!(oracle["exhaustive"], true);
    }
}

#[test]
fn delayed_notions_on_the_open_grid() {
    let g = fixture("gridworld.json");
    for notion in [&["current-state"][..], &["k-step", "--k", "1"], &["infinite-step"]] {
        let mut args = vec!["verify", "--system", &g, "--delta", "0", "--oracle", "--notion"];
        args.extend_from_slice(notion);
        let run = opacue(&args);
        assert!(run.code == 0 || run.code == 1, "{args:?}: {}", run.stderr);
        assert_eq!(run.json()["oracle"]["agrees"], true);
    }
}

#[test]
fn observer_and_estimator_export_dot() {
    let dir = tempfile::tempdir().unwrap();
    let g = fixture("gridworld_c1.json");
    let obs = dir.path().join("obs.dot");
    let run = opacue(&["observer", "--system", &g, "--delta", "0", "--export-dot", obs.to_str().unwrap()]);
    assert_eq!(run.code, 1);
    assert_eq!(run.json()["status"], "not-opaque");
    let dot = std::fs::read_to_string(&obs).unwrap();
    assert!(dot.starts_with("digraph observer {"));
    assert!(dot.contains("doublecircle"));
    assert!(dot.trim_end().ends_with('}'));

    let est = dir.path().join("est.dot");
    let run = opacue(&["estimator", "--system", &g, "--delta", "0", "--export-dot", est.to_str().unwrap()]);
    assert_eq!(run.code, 1);
    assert_eq!(run.json()["witness"]["states"][0], "5/5");
    assert!(std::fs::read_to_string(&est).unwrap().starts_with("digraph estimator {"));

    let run = opacue(&["observer", "--system", &fixture("gridworld_c2.json"), "--delta", "0"]);
    assert_eq!(run.code, 0);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let g = fixture("gridworld.json");
    let halving = fixture("halving.json");
    let cert = fixture("distance.json");
    let commands: Vec<Vec<&str>> = vec![
        vec!["verify", "--system", &g, "--delta", "0.5", "--notion", "infinite-step", "--oracle"],
        vec!["estimator", "--system", &g, "--delta", "0"],
        vec!["simrel", "--system", &g, "--abstract", &g, "--epsilon", "0"],
        vec!["barrier", "--system", &halving, "--certificate", &cert, "--kind", "lack", "--delta", "0.2", "--resolution", "0.05"],
    ];
    for args in commands {
        let base = opacue(&args);
        for threads in ["1", "3"] {
            let mut threaded = vec!["--threads", threads];
            threaded.extend(&args);
            let run = opacue(&threaded);
            assert_eq!(run.code, base.code);
            assert_eq!(run.stdout, base.stdout, "{args:?} with {threads} threads");
        }
    }
}

#[test]
fn timing_is_opt_in() {
    let g = fixture("gridworld.json");
    let plain = opacue(&["verify", "--system", &g, "--delta", "0"]).json();
    assert!(plain["stats"].get("wall_ms").is_none());
    let timed = opacue(&["--timing", "verify", "--system", &g, "--delta", "0"]).json();
    assert!(timed["stats"]["wall_ms"].is_u64());
}

#[test]
fn usage_and_validation_errors_exit_three() {
    let g = fixture("gridworld.json");
    assert_one_line_error(&opacue(&["verify", "--system", &g]), 3);
    assert_one_line_error(&opacue(&["verify", "--system", &g, "--delta", "-1"]), 3);
    assert_one_line_error(&opacue(&["verify", "--system", &g, "--delta", "0", "--notion", "k-step"]), 3);
    assert_one_line_error(&opacue(&["verify", "--system", "/definitely/missing.json", "--delta", "0"]), 3);
    assert_one_line_error(&opacue(&["verify", "--system", &fixture("linear_1d.json"), "--delta", "0"]), 3);
    assert_one_line_error(&opacue(&["observer", "--system", &g, "--delta", "0", "--notion", "infinite-step"]), 3);
    assert_one_line_error(&opacue(&["bogus"]), 3);
    assert_one_line_error(&opacue(&[]), 3);
}

#[test]
fn state_cap_exits_four_and_the_flag_beats_the_environment() {
    let g = fixture("gridworld_c1.json");
    let args = ["verify", "--system", &g, "--delta", "0"];
    assert_one_line_error(&opacue_env(&args, &[("OPACUE_CAP", "3")]), 4);
    let mut with_flag = vec!["--cap", "1000000"];
    with_flag.extend(args);
    assert_eq!(opacue_env(&with_flag, &[("OPACUE_CAP", "3")]).code, 1);
    assert_one_line_error(&opacue(&["--cap", "3", "observer", "--system", &g, "--delta", "0"]), 4);
}

#[test]
fn abstraction_round_trip_through_verify_and_simrel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("abs.json");
    let out_s = out.to_str().unwrap();
    let sys = fixture("linear_1d.json");
    let run = opacue(&["abstract", "--system", &sys, "--eta", "0.05", "--mu", "0.05", "--epsilon", "0.2", "--output", out_s]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = run.json();
    assert_eq!(report["certified"], true);
    assert_eq!(report["states"], 21);

    // Every system is 0-InitSOP simulated by itself.
    let run = opacue(&["simrel", "--system", out_s, "--abstract", out_s, "--epsilon", "0"]);
    assert_eq!(run.code, 0);
    assert_eq!(run.json()["related"], true);

    // Verifying through an abstraction queries it at δ − 2ε.
    let run = opacue(&["verify", "--system", out_s, "--abstract", out_s, "--epsilon", "0.1", "--delta", "0.3"]);
    assert!(run.code == 0 || run.code == 2, "{}", run.stderr);
    let report = run.json();
    assert_eq!(report["abstract_delta"].as_f64(), Some(0.1));
    assert_eq!(report["abstract_verdict"]["delta"].as_f64(), Some(0.1));

    // Inline output embeds a parseable system.
    let run = opacue(&["abstract", "--system", &sys, "--eta", "0.05", "--mu", "0.05", "--epsilon", "0.2"]);
    assert_eq!(run.json()["system"]["states"].as_array().unwrap().len(), 21);
}

#[test]
fn quantization_gate_and_unsound_override() {
    let sys = fixture("linear_1d.json");
    let args = ["abstract", "--system", &sys, "--eta", "0.1", "--mu", "0.05", "--epsilon", "0.1"];
    assert_one_line_error(&opacue(&args), 3);
    let mut unsound = args.to_vec();
    unsound.push("--unsound");
    let run = opacue(&unsound);
    assert_eq!(run.code, 2);
    assert_eq!(run.json()["certified"], false);
    assert!(run.stderr.contains("certificate-free"));
}

#[test]
fn simrel_precision_error_and_failure() {
    let g = fixture("gridworld_c1.json");
    let c2 = fixture("gridworld_c2.json");
    let run = opacue(&["simrel", "--system", &g, "--abstract", &c2, "--epsilon", "0"]);
    assert!(run.code == 0 || run.code == 1);
    let report = run.json();
    assert_eq!(report["related"].as_bool(), Some(run.code == 0));
    let run = opacue(&["verify", "--system", &g, "--abstract", &c2, "--epsilon", "0.2", "--delta", "0.3"]);
    assert_one_line_error(&run, 3);
}

#[test]
fn barrier_exit_codes() {
    let halving = fixture("halving.json");
    let falsified = opacue(&["barrier", "--system", &halving, "--certificate", &fixture("square_gap.json"), "--delta", "1", "--resolution", "0.05"]);
    assert_eq!(falsified.code, 1);
    let report = falsified.json();
    assert_eq!(report["status"], "falsified");
    assert_eq!(report["condition"], "initial");

    let passed = opacue(&["barrier", "--system", &halving, "--certificate", &fixture("distance.json"), "--delta", "0.2", "--resolution", "0.05"]);
    assert_eq!(passed.code, 2, "{}", passed.stdout);
    assert_eq!(passed.json()["status"], "sample-passed");

    let wrong_dim = opacue(&["barrier", "--system", &fixture("gridworld.json"), "--certificate", &fixture("distance.json"), "--delta", "0.2", "--resolution", "0.05"]);
    assert_one_line_error(&wrong_dim, 3);
}

#[test]
fn compose_modes_and_small_gain_failure() {
    let ic = fixture("interconnection.json");
    let norm = fixture("max_norm.json");
    let dist = fixture("distance.json");
    let run = opacue(&["compose", "--interconnection", &ic, "--certificate1", &norm, "--certificate2", &norm, "--delta", "0.2", "--resolution", "0.05"]);
    assert_eq!(run.code, 2, "{}", run.stderr);
    let report = run.json();
    assert!((report["gain"]["product"].as_f64().unwrap() - 0.16).abs() < 1e-12);
    assert_eq!(report["gain"]["small_gain_ok"], true);

    let run = opacue(&["compose", "--mode", "simulation", "--interconnection", &ic, "--certificate1", &dist, "--certificate2", &dist, "--resolution", "0.05"]);
    assert_eq!(run.code, 2, "{}", run.stderr);

    assert_one_line_error(
        &opacue(&["compose", "--interconnection", &ic, "--certificate1", &norm, "--certificate2", &norm, "--resolution", "0.05"]),
        3,
    );

    let dir = tempfile::tempdir().unwrap();
    let strong = dir.path().join("strong.json");
    std::fs::write(
        &strong,
        r#"{"sub1": {"a": 0.5, "b": 0.6, "state": [0, 1]}, "sub2": {"a": 0.5, "b": 0.6, "state": [0, 1]}}"#,
    )
    .unwrap();
    let run = opacue(&["compose", "--interconnection", strong.to_str().unwrap(), "--certificate1", &norm, "--certificate2", &norm, "--delta", "0.2", "--resolution", "0.05"]);
    assert_one_line_error(&run, 3);
    assert!(run.stderr.contains("small-gain"));
    let run = opacue(&["compose", "--mode", "simulation", "--interconnection", strong.to_str().unwrap(), "--certificate1", &dist, "--certificate2", &dist, "--resolution", "0.05"]);
    assert_one_line_error(&run, 3);
}

use std::path::Path;
use std::process::{Command, Output};

fn hfactor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hfactor")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(stdout(out).trim()).unwrap()
}

#[test]
fn analyze_named_patterns() {
    let out = hfactor(&["analyze", "--named", "lollipop:5,2"]);
    assert!(out.status.success());
    let v = json(&out);
    let report = &v["report"];
    assert_eq!(report["d_h"], "2");
    assert_eq!(report["d_star"], "5/2");
    assert_eq!(report["delta"], "2");
    let out = hfactor(&["analyze", "--named", "complete:4+complete:2"]);
    let v = json(&out);
    assert_eq!(v["report"]["d_h"], "7/5");
    assert_eq!(v["report"]["delta"], "3/2");
}

#[test]
fn analyze_edge_list_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c4.txt");
    std::fs::write(&path, "# four-cycle\n0 1\n1 2\n2 3\n3 0\n").unwrap();
    let out = hfactor(&["analyze", "--file", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["report"]["d_star"], "4/3");
}

#[test]
fn solve_triangles_small() {
    let out = hfactor(&["solve", "--named", "complete:3", "--n", "9", "--seed", "1"]);
    assert!(out.status.success());
    let v = json(&out);
    let sol = &v["solution"];
    assert_eq!(sol["copies"].as_array().unwrap().len(), 3);
    assert_eq!(sol["uncovered"], 0);
    // 17 significant digits in scientific form.
    let text = stdout(&out);
    let weight = text.split("\"total_weight\":").nth(1).unwrap().split(',').next().unwrap();
    let mantissa = weight.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{weight}");
}

#[test]
fn full_allowance_costs_nothing() {
    let out = hfactor(&["solve", "--named", "complete:3", "--n", "9", "--k", "9"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["solution"]["total_weight"].as_f64(), Some(0.0));
    assert_eq!(v["solution"]["copies"].as_array().unwrap().len(), 0);
}

#[test]
fn exact_and_oracle_agree() {
    let args = ["solve", "--named", "path:3", "--n", "8", "--mode", "cover", "--seed", "11"];
    let exact = json(&hfactor(&args));
    let mut oracle_args = args.to_vec();
    oracle_args.extend(["--solver", "oracle"]);
    let oracle = json(&hfactor(&oracle_args));
    assert_eq!(exact["solution"]["total_weight"], oracle["solution"]["total_weight"]);
}

#[test]
fn oracle_refuses_large_hosts() {
    let out = hfactor(&["solve", "--named", "complete:3", "--n", "15", "--solver", "oracle"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn infeasible_exits_3() {
    let out = hfactor(&["solve", "--named", "complete:3", "--n", "8"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
    let out = hfactor(&["solve", "--named", "complete:3", "--n", "9", "--cap", "1e-9"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "0 1\n1 x\n").unwrap();
    let out = hfactor(&["analyze", "--file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('2'));
    assert_eq!(hfactor(&["solve", "--named", "complete:3", "--bogus"]).status.code(), Some(2));
    assert_eq!(hfactor(&["solve", "--named", "nope:3", "--n", "9"]).status.code(), Some(2));
}

#[test]
fn bad_experiment_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"kind": "scaling", "seeds": 0}"#).unwrap();
    let out = hfactor(&["experiment", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&cfg, r#"{"kind": "scaling", "sedes": 3}"#).unwrap();
    let out = hfactor(&["experiment", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"kind": "duality", "n": [9], "seeds": 4, "budgets": 3}"#).unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = hfactor(&["experiment", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push((
            std::fs::read(out_dir.join("duality.jsonl")).unwrap(),
            std::fs::read(out_dir.join("duality_summary.csv")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].0.clone()).unwrap();
    assert!(text.lines().next().unwrap().contains("\"config\""));
    assert!(!text.contains("wall_ms"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"kind": "monotone", "n": [9], "seeds": 2}"#).unwrap();
    let target = dir.path().join("env_out");
    let out = Command::new(env!("CARGO_BIN_EXE_hfactor"))
        .args(["experiment", cfg.to_str().unwrap()])
        .env("HFACTOR_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join("monotone.jsonl").exists());
}

#[test]
fn dumped_instance_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.bin");
    let inst_s = inst.to_str().unwrap();
    let first = hfactor(&["solve", "--named", "complete:3", "--n", "12", "--seed", "5", "--dump-instance", inst_s]);
    assert!(first.status.success());
    let again = hfactor(&["solve", "--named", "complete:3", "--instance", inst_s]);
    assert_eq!(json(&first)["solution"], json(&again)["solution"]);

    let sol = dir.path().join("sol.json");
    std::fs::write(&sol, &first.stdout).unwrap();
    let ok = hfactor(&["validate", "--named", "complete:3", "--instance", inst_s, "--solution", sol.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    // A different instance does not support the same solution.
    let wrong = hfactor(&["validate", "--named", "complete:3", "--n", "12", "--seed", "6", "--solution", sol.to_str().unwrap()]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn heuristic_builds_complete_factor() {
    let out = hfactor(&["solve", "--named", "complete:3", "--n", "45", "--solver", "heuristic", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["solution"]["uncovered"], 0);
    assert_eq!(v["solution"]["copies"].as_array().unwrap().len(), 15);
}

#[test]
fn budget_reports_coverage() {
    let out = hfactor(&["budget", "--named", "complete:3", "--n", "12", "--budget", "100"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["covered"], 12);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg = hfactor::experiments::ExperimentConfig::from_json(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate(&cfg.pattern().unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 11);
}

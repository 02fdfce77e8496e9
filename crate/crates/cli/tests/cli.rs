//! End-to-end tests against the built binary: exit-code contract, report
//! contents, byte-level determinism, and schema round trips.

use std::path::Path;
use std::process::{Command, Output};

use armdp::{io, sample, MultiplierSpec, RewardSpec, UtilityTable};

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_armdp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

fn write_chain_m2_fixture(dir: &Path) {
    let cmp = sample::chain(&["A", "B", "C"]);
    io::write_json(&dir.join("chain.json"), &io::model_file_from_parts(&cmp, None, None)).unwrap();
    let p = |names: &[&str]| sample::state_path(&cmp, "go", names);
    let table = UtilityTable::with_entries(
        2,
        [
            (p(&["A", "B"]), 1.0),
            (p(&["B", "C"]), -1.0),
            (p(&["A", "B", "C"]), -1.0),
        ],
    )
    .unwrap();
    io::write_json(&dir.join("chain-table.json"), &io::table_file_from(&cmp, &table)).unwrap();
}

#[test]
fn additive_round_trip_table_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = sample::rng(71);
    let (cmp, r, _) = sample::random_armdp_parts(&mut rng, &sample::GenConfig::default());
    let table = armdp::table_from_armdp(&cmp, &r, &MultiplierSpec::ones(&cmp), 3).unwrap();
    io::write_json(&dir.path().join("model.json"), &io::model_file_from_parts(&cmp, None, None))
        .unwrap();
    io::write_json(&dir.path().join("table.json"), &io::table_file_from(&cmp, &table)).unwrap();

    let out = run_in(
        dir.path(),
        &[
            "check-axioms",
            "--input",
            "model.json",
            "--table",
            "table.json",
            "--level",
            "additive",
        ],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["status"], "consistent");
}

#[test]
fn slope_two_chain_fails_additivity_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    write_chain_m2_fixture(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "check-axioms",
            "--input",
            "chain.json",
            "--table",
            "chain-table.json",
            "--level",
            "additive",
            "--out",
            "report.json",
        ],
    );
    assert_eq!(exit_code(&out), 2);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["check"], "additivity");
    assert_eq!(report["status"], "violated");
    let witness = &report["witnesses"][0];
    assert_eq!(witness["kind"], "multiplier-not-unit");
    assert_eq!(witness["transition"]["from"], "A");
    assert!((witness["multiplier"].as_f64().unwrap() - 2.0).abs() < 1e-12);

    // the same table is memoryless-consistent: lower level exits 0
    let out = run_in(
        dir.path(),
        &[
            "check-axioms",
            "--input",
            "chain.json",
            "--table",
            "chain-table.json",
            "--level",
            "memoryless",
        ],
    );
    assert_eq!(exit_code(&out), 0);
}

#[test]
fn potential_extraction_writes_the_anchored_file() {
    let dir = tempfile::tempdir().unwrap();
    let cmp = sample::triangle();
    let r_by_from = [1.0, 2.0, -3.0];
    let rewards = RewardSpec::from_fn(&cmp, |t| r_by_from[t.from.index()]);
    io::write_json(
        &dir.path().join("triangle.json"),
        &io::model_file_from_parts(&cmp, Some(&rewards), None),
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "extract",
            "--input",
            "triangle.json",
            "--target",
            "potential",
            "--root",
            "A",
            "--out",
            "phi.json",
        ],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let phi = io::load_potential(&dir.path().join("phi.json"), &cmp).unwrap();
    assert_eq!(phi.get(cmp.state_id("A").unwrap()), Some(0.0));
    assert_eq!(phi.get(cmp.state_id("B").unwrap()), Some(1.0));
    assert_eq!(phi.get(cmp.state_id("C").unwrap()), Some(3.0));
}

#[test]
fn extracted_affine_files_reload_to_equal_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = sample::rng(73);
    let (cmp, r, m) = sample::random_armdp_parts(&mut rng, &sample::GenConfig::default());
    let table = armdp::table_from_armdp(&cmp, &r, &m, 3).unwrap();
    io::write_json(&dir.path().join("model.json"), &io::model_file_from_parts(&cmp, None, None))
        .unwrap();
    io::write_json(&dir.path().join("table.json"), &io::table_file_from(&cmp, &table)).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "extract",
            "--input",
            "model.json",
            "--table",
            "table.json",
            "--target",
            "affine",
            "--out",
            "spec.json",
        ],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let ext = armdp::extract_affine(&cmp, &table, armdp::DEFAULT_REL_TOL).unwrap();
    let (canon_r, canon_m, _) = armdp::canonicalize(&ext.rewards, Some(&ext.multipliers), None);
    let (loaded_r, loaded_m) = io::load_affine_spec(&dir.path().join("spec.json"), &cmp).unwrap();
    assert_eq!(loaded_r, canon_r);
    assert_eq!(loaded_m, canon_m.unwrap());
}

#[test]
fn identical_runs_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    write_chain_m2_fixture(dir.path());
    let args = [
        "check-axioms",
        "--input",
        "chain.json",
        "--table",
        "chain-table.json",
        "--level",
        "additive",
    ];
    let first = run_in(dir.path(), &args);
    let second = run_in(dir.path(), &args);
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());

    let sim_args = [
        "simulate",
        "--input",
        "chain.json",
        "--root",
        "A",
        "--seed",
        "42",
        "--horizon",
        "10",
    ];
    let first = run_in(dir.path(), &sim_args);
    let second = run_in(dir.path(), &sim_args);
    assert_eq!(exit_code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn validate_flags_simplex_violations_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"states":["a","b"],"actions":["x"],"transitions":[
            {"from":"a","action":"x","to":"b","prob":0.9,"term":0}]}"#,
    )
    .unwrap();
    let out = run_in(dir.path(), &["validate", "--input", "bad.json"]);
    assert_eq!(exit_code(&out), 2);
    let report = stdout_json(&out);
    assert_eq!(report["status"], "violated");
    assert_eq!(report["witnesses"][0]["kind"], "simplex-sum");

    let cmp = sample::running_example();
    io::write_json(&dir.path().join("ok.json"), &io::model_file_from_parts(&cmp, None, None))
        .unwrap();
    let out = run_in(dir.path(), &["validate", "--input", "ok.json"]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["status"], "consistent");
    assert!(report["witnesses"].as_array().unwrap().is_empty());
}

fn write_two_action_loop(dir: &Path) {
    std::fs::write(
        dir.join("loop.json"),
        r#"{"states":["X"],"actions":["a1","a2"],"transitions":[
            {"from":"X","action":"a1","to":"X","prob":1.0,"term":0.0},
            {"from":"X","action":"a2","to":"X","prob":1.0,"term":0.0}],
            "rewards":[
            {"from":"X","action":"a1","to":"X","value":1.0},
            {"from":"X","action":"a2","to":"X","value":0.9}],
            "multipliers":[
            {"from":"X","action":"a1","to":"X","value":0.5},
            {"from":"X","action":"a2","to":"X","value":0.6}]}"#,
    )
    .unwrap();
}

#[test]
fn solve_emits_values_policy_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    write_two_action_loop(dir.path());
    let out = run_in(
        dir.path(),
        &["solve", "--input", "loop.json", "--tol", "1e-10"],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let solution = stdout_json(&out);
    assert!((solution["values"]["X"].as_f64().unwrap() - 2.25).abs() < 1e-9);
    assert_eq!(solution["policy"]["X"], "a2");
    assert!((solution["beta"].as_f64().unwrap() - 0.6).abs() < 1e-15);
    assert!(solution["certified_gap"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn gamma_flag_makes_undiscounted_models_solvable() {
    let dir = tempfile::tempdir().unwrap();
    let cmp = sample::triangle();
    let rewards = RewardSpec::from_fn(&cmp, |_| 1.0);
    io::write_json(
        &dir.path().join("ring.json"),
        &io::model_file_from_parts(&cmp, Some(&rewards), None),
    )
    .unwrap();
    let undiscounted = run_in(dir.path(), &["solve", "--input", "ring.json"]);
    assert_eq!(exit_code(&undiscounted), 1, "beta = 1 must be refused");
    let discounted = run_in(
        dir.path(),
        &["solve", "--input", "ring.json", "--gamma", "0.9"],
    );
    assert_eq!(exit_code(&discounted), 0);
    let solution = stdout_json(&discounted);
    // constant reward 1 at discount 0.9: v = 1/(1 - 0.9)
    assert!((solution["values"]["A"].as_f64().unwrap() - 10.0).abs() < 1e-6);
}

#[test]
fn eval_reports_policy_values() {
    let dir = tempfile::tempdir().unwrap();
    write_two_action_loop(dir.path());
    std::fs::write(dir.path().join("policy.json"), r#"{"policy":{"X":"a1"}}"#).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--input",
            "loop.json",
            "--policy",
            "policy.json",
            "--tol",
            "1e-10",
        ],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let values = stdout_json(&out);
    assert!((values["values"]["X"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn complete_returns_the_extended_table_or_the_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cmp = sample::chain(&["s0", "A", "B"]);
    io::write_json(&dir.path().join("chain.json"), &io::model_file_from_parts(&cmp, None, None))
        .unwrap();
    let p = |names: &[&str]| sample::state_path(&cmp, "go", names);
    let partial = UtilityTable::with_entries(
        2,
        [(p(&["s0", "A"]), 1.0), (p(&["s0", "A", "B"]), 3.0)],
    )
    .unwrap();
    io::write_json(&dir.path().join("partial.json"), &io::table_file_from(&cmp, &partial))
        .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "complete",
            "--input",
            "chain.json",
            "--table",
            "partial.json",
            "--root",
            "s0",
        ],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = stdout_json(&out);
    let entries = table["entries"].as_array().unwrap();
    assert!(entries.iter().any(|e| {
        e["start"] == "A" && e["utility"].as_f64().unwrap() == 2.0
    }));

    // an inconsistent partial table on the diamond exits 2 with a witness
    let cmp = sample::running_example();
    io::write_json(&dir.path().join("diamond.json"), &io::model_file_from_parts(&cmp, None, None))
        .unwrap();
    let r = RewardSpec::from_fn(&cmp, |t| t.to.index() as f64);
    let full = armdp::table_from_armdp(&cmp, &r, &MultiplierSpec::ones(&cmp), 3).unwrap();
    let s0 = cmp.state_id("s0").unwrap();
    let target = sample::state_path(&cmp, "go", &["s0", "s1", "s2"]);
    let partial = UtilityTable::with_entries(
        3,
        full.iter().filter(|(t, _)| t.start() == s0).map(|(t, u)| {
            (t.clone(), if *t == target { u + 0.5 } else { u })
        }),
    )
    .unwrap();
    io::write_json(&dir.path().join("corrupt.json"), &io::table_file_from(&cmp, &partial))
        .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "complete",
            "--input",
            "diamond.json",
            "--table",
            "corrupt.json",
            "--root",
            "s0",
        ],
    );
    assert_eq!(exit_code(&out), 2);
    let report = stdout_json(&out);
    assert_eq!(report["check"], "completion");
    assert_eq!(report["witnesses"][0]["kind"], "connector-mismatch");
}

#[test]
fn ordinal_level_checks_raw_comparisons() {
    let dir = tempfile::tempdir().unwrap();
    let cmp = sample::chain(&["A", "B", "C"]);
    io::write_json(&dir.path().join("chain.json"), &io::model_file_from_parts(&cmp, None, None))
        .unwrap();
    std::fs::write(
        dir.path().join("cycle.json"),
        r#"{"comparisons":[
            {"left":{"start":"A","steps":[{"action":"go","to":"B"}]},"relation":">",
             "right":{"start":"B","steps":[{"action":"go","to":"C"}]}},
            {"left":{"start":"B","steps":[{"action":"go","to":"C"}]},"relation":">",
             "right":{"start":"A","steps":[{"action":"go","to":"B"}]}}]}"#,
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "check-axioms",
            "--input",
            "chain.json",
            "--table",
            "cycle.json",
            "--level",
            "ordinal",
        ],
    );
    assert_eq!(exit_code(&out), 2);
    let report = stdout_json(&out);
    assert_eq!(report["check"], "ordinal");
    assert_eq!(report["witnesses"][0]["kind"], "preference-cycle");

    std::fs::write(
        dir.path().join("chain-order.json"),
        r#"{"comparisons":[
            {"left":{"start":"A","steps":[{"action":"go","to":"B"}]},"relation":">",
             "right":{"start":"B","steps":[{"action":"go","to":"C"}]}}]}"#,
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "check-axioms",
            "--input",
            "chain.json",
            "--table",
            "chain-order.json",
            "--level",
            "ordinal",
        ],
    );
    assert_eq!(exit_code(&out), 0);
}

#[test]
fn usage_and_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["validate", "--input", "missing.json"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    let out = run_in(dir.path(), &["validate"]);
    assert_eq!(exit_code(&out), 1, "missing required flag is a usage error");

    write_chain_m2_fixture(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "simulate",
            "--input",
            "chain.json",
            "--root",
            "nope",
        ],
    );
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));

    let out = run_in(dir.path(), &["--help"]);
    assert_eq!(exit_code(&out), 0, "help is not an error");
}

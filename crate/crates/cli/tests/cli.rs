use std::fs;
use std::process::{Command, Output};

use noiseless_core::auditor::{audit, AuditOptions};
use noiseless_core::text::{parse_domains, parse_mechanism, parse_query};
use noiseless_core::{play_game, synthesize_panel, DatasetSpec, GameConfig, MechanismChoice, Policy};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noiseless")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn audit_report_matches_the_library() {
    let out = run(&["audit", "--domains", "0,1;0,1", "--query", "mean", "--mech", "identity"]);
    assert_eq!(out.status.code(), Some(0));
    let ds = DatasetSpec::new(parse_domains("0,1;0,1").unwrap(), parse_query("mean").unwrap(), None).unwrap();
    let report = audit(&ds, &parse_mechanism("identity").unwrap(), &AuditOptions::default()).unwrap();
    assert_eq!(stdout(&out), report.to_string());
    assert!(stdout(&out).contains("epsilon_star = 1.0"));

    let csv = run(&["audit", "--domains", "0,1;0,1", "--query", "mean", "--mech", "identity", "--format", "csv"]);
    assert_eq!(stdout(&csv), report.csv_rows());
}

#[test]
fn game_row_matches_the_library() {
    let out = run(&[
        "game", "--policy", "correlation", "--n", "4", "--epsilon", "2", "--trials", "500", "--seed", "7", "--panel",
        "synthetic:300x48:1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let panel = synthesize_panel(300, 48, 1).unwrap();
    let cfg = GameConfig::new(4, MechanismChoice::Quantized { epsilon: 2.0 }, 500, 7, Policy::Correlation);
    let row = play_game(&panel, &cfg).unwrap().csv_row();
    assert_eq!(stdout(&out), format!("policy,n,epsilon,trials,adv,ci_halfwidth\n{row}\n"));
}

#[test]
fn synth_rules() {
    let base = ["synth", "--epsilon", "2", "--ymin", "0", "--ymax", "1", "--sens", "0.25"];
    let guarded = stdout(&run(&base));
    assert!(guarded.starts_with("q = 12\nrule = guarded\n"), "{guarded}");
    let mut stated = base.to_vec();
    stated.extend(["--rule", "stated"]);
    assert!(stdout(&run(&stated)).starts_with("q = 16\n"));
    let from_data = stdout(&run(&["synth", "--epsilon", "1", "--domains", "0..1;0..1", "--query", "mean"]));
    assert!(from_data.contains("mechanism = quantizer:2:0..1"), "{from_data}");
}

#[test]
fn sweep_has_one_row_per_grid_point() {
    let out = run(&[
        "game", "--policy", "correlation,mse,peaks", "--n", "4", "--epsilon", "1,2,3,4,5,6,7,8", "--trials", "50",
        "--seed", "3", "--panel", "synthetic:40x24:2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 1 + 24);
    let again = run(&[
        "game", "--policy", "correlation,mse,peaks", "--n", "4", "--epsilon", "1,2,3,4,5,6,7,8", "--trials", "50",
        "--seed", "3", "--panel", "synthetic:40x24:2",
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn config_file_and_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(&config, "# audit settings\ndomains = 0,1,2;0,1\nquery = sum\nmech = quantizer:2:0..3 # coarse\n").unwrap();
    let report = dir.path().join("report.txt");
    let out = run(&["audit", "--config", config.to_str().unwrap(), "--output", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(fs::read_to_string(&report).unwrap().contains("epsilon_star = 1.0"));

    // Command-line flags win over the file.
    let out = run(&["audit", "--config", config.to_str().unwrap(), "--mech", "identity"]);
    assert!(stdout(&out).contains("epsilon_star = 1.584962500721156"));
}

#[test]
fn exit_codes() {
    let cases: &[(&[&str], i32)] = &[
        (&["frobnicate"], 1),
        (&["audit", "--domains", "0,1", "--query", "mean", "--mech", "identity", "--bogus"], 1),
        (&["audit", "--domains", "0,,1", "--query", "mean", "--mech", "identity"], 1),
        (&["audit", "--domains", "0..1", "--query", "mean", "--mech", "identity"], 0),
        (&["audit", "--domains", "0..1", "--query", "table:0->1", "--mech", "identity"], 1),
        (&["game", "--policy", "mse", "--n", "2", "--epsilon", "1", "--trials", "5", "--panel", "synthetic:5x8:1"], 1),
        (&["game", "--policy", "mse", "--n", "2", "--trials", "5", "--seed", "1", "--panel", "synthetic:5x8:1"], 1),
        (&["game", "--policy", "mse", "--n", "9", "--epsilon", "1", "--trials", "5", "--seed", "1", "--panel", "synthetic:5x8:1"], 1),
        (&["t4check", "--domains", "0..1", "--query", "mean", "--mech", "quantizer:2:0..1", "--individual", "1", "--p", "2"], 1),
        (&["capacity", "--channel", "0=a|b;1=b|c;2=c|d;3=d|e;4=e|a", "--k", "2"], 0),
        (&["measure", "--relation", "1:a,2:a,3:b"], 0),
        (&["measure"], 1),
        (&["synth", "--epsilon", "-1", "--ymin", "0", "--ymax", "1", "--sens", "1"], 1),
        (&["audit", "--config", "/nonexistent/run.conf"], 1),
    ];
    for (args, code) in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(*code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn measure_capacity_and_t4check_reports() {
    let m = stdout(&run(&["measure", "--relation", "1:a,2:a,3:b", "--prior", "uniform"]));
    assert!(m.contains("maximin = 1.0"), "{m}");
    assert!(m.contains("maximal_leakage = 1.0"), "{m}");
    let c = stdout(&run(&["capacity", "--channel", "0=a|b;1=b|c;2=c|d;3=d|e;4=e|a", "--k", "2"]));
    assert!(c.contains("size = 5"), "{c}");
    let args = [
        "t4check", "--domains", "0..1", "--query", "mean", "--mech", "quantizer:2:0..1", "--individual", "1", "--p",
        "2", "--trials", "20000", "--seed", "4",
    ];
    let t = stdout(&run(&args));
    assert!(t.contains("pass = true"), "{t}");
    assert_eq!(t, stdout(&run(&args)));
    let h = stdout(&run(&[
        "hypothesis", "--domains", "0,1,2;0,1", "--query", "sum", "--mech", "identity", "--individual", "1", "--xa",
        "0", "--xb", "2", "--others", "1",
    ]));
    assert!(h.contains("bound = 1.0"), "{h}");
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL_PARAMS: &str = r#"{ "n_transmon": 3, "n_cavity": 3 }"#;
const TINY_PIPELINE: &str = r#"{
  "time_step_ns": 0.5,
  "stage1": { "n_freq_samples": 3, "n_amplitudes": 3 },
  "stage2": { "top_k": 1, "max_evals": 6 },
  "stage3": { "iter_max": 2 },
  "evaluation": { "lindblad": false, "no_dissipation": false }
}"#;

fn cqed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqed")).current_dir(dir).args(args).env_remove("CQED_RUN_DIR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("params.json"), SMALL_PARAMS).unwrap();
    std::fs::write(dir.path().join("tiny.json"), TINY_PIPELINE).unwrap();
    let root = dir.path().to_path_buf();
    (dir, root)
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).count() - 1
}

#[test]
fn fieldfree_writes_every_map() {
    let (_guard, root) = setup();
    let o = cqed(&root, &["--params", "params.json", "--run-dir", "ff", "fieldfree", "--grid", "3x3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let maps = root.join("ff/maps");
    for name in ["zeta", "t_pi", "decay_ratio", "shifts"] {
        assert_eq!(data_rows(&maps.join(format!("{name}.csv"))), 9, "{name}");
    }
    assert!(maps.join("slice_fixed_deltac.csv").exists() && maps.join("slice_fixed_delta2.csv").exists());
    assert_eq!(data_rows(&root.join("ff/fieldfree.csv")), 9);
}

#[test]
fn malformed_pulse_names_the_line() {
    let (_guard, root) = setup();
    let text = "# omega_r_GHz_2pi = 6.0\n# t_start_ns = 0\n# duration_ns = 2\nt_ns,re_eps_MHz_2pi,im_eps_MHz_2pi\n0.5,1.0,0.0\n1.5,oops,0.0\n";
    std::fs::write(root.join("bad.csv"), text).unwrap();
    let o = cqed(&root, &["--params", "params.json", "--run-dir", "ev", "evaluate", "--pulse", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.csv:6"), "{}", stderr(&o));
}

#[test]
fn zero_pulse_is_the_identity_without_coupling_or_decay() {
    let (_guard, root) = setup();
    std::fs::write(
        root.join("free.json"),
        r#"{ "n_transmon": 3, "n_cavity": 2, "g": {"value": 0, "unit": "MHz_2pi"},
             "gamma": {"value": 0, "unit": "MHz_2pi"}, "kappa": {"value": 0, "unit": "MHz_2pi"} }"#,
    )
    .unwrap();
    let mut text = String::from("# omega_r_GHz_2pi = 6.0\n# t_start_ns = 0\n# duration_ns = 20\nt_ns,re_eps_MHz_2pi,im_eps_MHz_2pi\n");
    for k in 0..40 {
        text.push_str(&format!("{},0,0\n", 0.25 + 0.5 * k as f64));
    }
    std::fs::write(root.join("zero.csv"), text).unwrap();
    let o = cqed(&root, &["--params", "free.json", "--run-dir", "ev", "evaluate", "--pulse", "zero.csv", "--target", "identity"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join("ev/report.json")).unwrap()).unwrap();
    let eps = report["eps_avg"].as_f64().unwrap();
    assert!(eps < 1e-8, "{eps}");
    for label in ["00", "01", "10", "11"] {
        assert!(root.join(format!("ev/maps/trajectory_{label}.csv")).exists());
    }
}

#[test]
fn landscape_rerun_has_nothing_to_do() {
    let (_guard, root) = setup();
    let args = ["--params", "params.json", "--run-dir", "ls", "landscape", "--grid", "2x2", "--T", "10ns", "--goals", "pe", "--config", "tiny.json", "--export"];
    let first = cqed(&root, &args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let records = std::fs::read_to_string(root.join("ls/records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 4);
    for name in ["entanglement", "combined", "weyl", "pe_polyhedron"] {
        assert!(root.join(format!("ls/maps/{name}.csv")).exists(), "{name}");
    }
    let second = cqed(&root, &args);
    assert_eq!(second.status.code(), Some(0), "{}", stderr(&second));
    assert_eq!(std::fs::read_to_string(root.join("ls/records.jsonl")).unwrap(), records);
    assert!(stdout(&second).contains("ran: 0 "), "{}", stdout(&second));

    // a different configuration may not reuse the directory
    let other = cqed(&root, &["--params", "params.json", "--run-dir", "ls", "landscape", "--grid", "3x3", "--T", "10ns", "--config", "tiny.json"]);
    assert_eq!(other.status.code(), Some(2));
}

#[test]
fn qsl_sweep_has_one_row_per_duration() {
    let (_guard, root) = setup();
    let o = cqed(&root, &["--params", "params.json", "--run-dir", "q", "qsl", "--T", "5ns,10ns", "--config", "tiny.json"]);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1), "{}", stderr(&o));
    assert_eq!(data_rows(&root.join("q/maps/qsl.csv")), 2);
}

#[test]
fn optimize_without_krotov_keeps_the_stage_two_pulse() {
    let (_guard, root) = setup();
    let o = cqed(&root, &["--params", "params.json", "--run-dir", "opt", "optimize", "--goal", "pe", "--T", "10ns", "--config", "tiny.json", "--iters", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let value = |prefix: &str| out.lines().find_map(|l| l.strip_prefix(prefix)).unwrap().trim().parse::<f64>().unwrap();
    // the pulse is still the stage-2 pulse, whose PE scan value is 1 − C(1 − pop)
    let rebuilt = 1.0 - value("concurrence:") * (1.0 - value("pop_loss:"));
    assert!((value("stage 2 functional:") - rebuilt).abs() < 1e-9, "{out}");
    assert_eq!(data_rows(&root.join("opt/maps/iterations.csv")), 1);
    assert!(root.join("opt/pulses/optimized.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let (_guard, root) = setup();
    assert_eq!(cqed(&root, &["landscape", "--T", "200"]).status.code(), Some(2));
    assert_eq!(cqed(&root, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(cqed(&root, &["--help"]).status.code(), Some(0));
}

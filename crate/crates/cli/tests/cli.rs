use std::path::PathBuf;
use std::process::Command;

use frontdoor::docalculus::{frontdoor_formula, Derivation};
use frontdoor::probtab::{parse_model, JointTable};
use frontdoor::{parse_graph, NodeSet};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_frontdoor")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn set(names: &[&str]) -> NodeSet {
    names.iter().map(|&n| n.into()).collect()
}

fn fd_graph() -> frontdoor::CausalGraph {
    parse_graph(&std::fs::read_to_string(data("g_fd.json")).unwrap()).unwrap()
}

#[test]
fn dsep_exit_codes() {
    let g = data("g_fd.json");
    let r = run(&["dsep", &g, "--a", "X", "--b", "Y", "--given", "Z"]);
    assert_eq!(r.code, 1, "{}", r.stdout);
    assert!(r.stdout.contains("open path"));

    let r = run(&["dsep", &g, "--a", "Z", "--b", "X", "--underline", "X"]);
    assert_eq!(r.code, 0, "{}", r.stdout);

    let r = run(&["dsep", &g, "--a", "Y", "--b", "Z", "--given", "X", "--underline", "Z"]);
    assert_eq!(r.code, 0, "{}", r.stdout);

    let r = run(&["dsep", &g, "--a", "X", "--b", "X"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error:"));
}

#[test]
fn dsep_json() {
    let r = run(&["--output", "json", "dsep", &data("g_fd.json"), "--a", "X", "--b", "Y"]);
    assert_eq!(r.code, 1);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["separated"], false);
}

#[test]
fn paths_listing() {
    let r = run(&["paths", &data("g_fd.json"), "--from", "X", "--to", "Y", "--given", "Z"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout.lines().count(), 2, "{}", r.stdout);
}

#[test]
fn frontdoor_check_and_enumeration() {
    let g = data("g_fd.json");
    let ok = run(&["frontdoor", &g, "--x", "X", "--y", "Y", "--z", "Z"]);
    assert_eq!(ok.code, 0, "{}", ok.stdout);

    let empty = run(&["frontdoor", &g, "--x", "X", "--y", "Y", "--z", ""]);
    assert_eq!(empty.code, 1);
    assert!(empty.stdout.contains("X→Z→Y"), "{}", empty.stdout);

    let latent = run(&["frontdoor", &g, "--x", "X", "--y", "Y", "--z", "U"]);
    assert_eq!(latent.code, 2);

    let list = run(&["frontdoor", &g, "--x", "X", "--y", "Y"]);
    assert_eq!(list.code, 0);
    assert!(list.stdout.contains("{Z}"), "{}", list.stdout);
}

#[test]
fn backdoor_check() {
    let g = data("g_fd.json");
    assert_eq!(run(&["backdoor", &g, "--x", "Z", "--y", "Y", "--z", "X"]).code, 0);
    assert_eq!(run(&["backdoor", &g, "--x", "X", "--y", "Y", "--z", ""]).code, 1);
}

#[test]
fn rule_queries() {
    let g = data("g_fd.json");
    let r = run(&["rule", &g, "--rule", "2", "--y", "Y", "--x", "X", "--z", "Z"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let r = run(&["rule", &g, "--rule", "2", "--y", "Y", "--z", "X"]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.contains("underline{X}"), "{}", r.stdout);
    assert_eq!(run(&["rule", &g, "--rule", "4", "--y", "Y", "--z", "X"]).code, 2);
}

#[test]
fn identify_json_revalidates() {
    let g = fd_graph();
    let r = run(&["--output", "json", "identify", &data("g_fd.json"), "--x", "X", "--y", "Y", "--z", "Z"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let d: Derivation = serde_json::from_str(&r.stdout).unwrap();
    d.verify(&g).unwrap();
    assert_eq!(
        frontdoor::docalculus::canonicalize(&d.result),
        frontdoor_formula(&set(&["X"]), &set(&["Y"]), &set(&["Z"]))
    );
}

#[test]
fn identify_pretty_lists_certificates() {
    let r = run(&["identify", &data("g_fd.json"), "--x", "X", "--y", "Y", "--z", "Z"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("Step 1: Rule 2 (backward)"), "{}", r.stdout);
    assert!(r.stdout.contains("[holds]"));
    assert!(r.stdout.contains("result:"));
}

#[test]
fn identify_search_mode() {
    let g = fd_graph();
    let r = run(&["--output", "json", "identify", &data("g_fd.json"), "--x", "X", "--y", "Y", "--search"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let d: Derivation = serde_json::from_str(&r.stdout).unwrap();
    d.verify(&g).unwrap();

    let bow = run(&["identify", &data("bow.json"), "--x", "X", "--y", "Y", "--search", "--depth", "4"]);
    assert_eq!(bow.code, 1);
    assert!(bow.stderr.contains("no derivation found"), "{}", bow.stderr);

    assert_eq!(run(&["identify", &data("g_fd.json"), "--x", "X", "--y", "Y", "--z", ""]).code, 1);
    assert_eq!(run(&["identify", &data("bow.json"), "--x", "X", "--y", "Y", "--z", "Z"]).code, 2);
}

#[test]
fn estimate_from_model() {
    let m = data("model_a.json");
    let r = run(&["--rational", "estimate", &m, "--frontdoor", "--x", "X=1", "--z", "Z", "--y", "Y=1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("141/200"), "{}", r.stdout);

    // Σ_u P(u) P(Y=1|u,Z=1) = 0.5 * 0.6 + 0.5 * 0.9
    let r = run(&["--rational", "estimate", &m, "--backdoor", "--x", "Z=1", "--z", "X", "--y", "Y=1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("3/4"), "{}", r.stdout);
}

#[test]
fn estimate_from_table_file() {
    let model = parse_model(&std::fs::read_to_string(data("model_a.json")).unwrap()).unwrap();
    let t: JointTable<f64> = model.observational_joint();
    let vars: Vec<serde_json::Value> = t
        .variables()
        .iter()
        .map(|(n, c)| serde_json::json!({"name": n.as_str(), "cardinality": c}))
        .collect();
    let body = serde_json::json!({"variables": vars, "probabilities": t.probabilities()});
    let path = std::env::temp_dir().join(format!("frontdoor-table-{}.json", std::process::id()));
    std::fs::write(&path, body.to_string()).unwrap();

    let r = run(&["--output", "json", "estimate", path.to_str().unwrap(), "--frontdoor", "--x", "X=1", "--z", "Z", "--y", "Y"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("0.705"), "{text}");
}

#[test]
fn positivity_violation_exits_one() {
    let r = run(&["estimate", &data("structural_zero.json"), "--frontdoor", "--x", "X=1", "--z", "Z", "--y", "Y=1"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("P(X=0, Z=1)"), "{}", r.stderr);
}

#[test]
fn oracle_and_verify() {
    let m = data("model_a.json");
    let r = run(&["oracle", &m, "--do", "X=1", "--outcome", "Y"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("0.705"), "{}", r.stdout);

    let r = run(&["--rational", "verify", &m, "--x", "X", "--y", "Y", "--z", "Z"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let r = run(&["--seed", "3", "verify", &m, "--x", "X", "--y", "Y", "--z", "Z", "--trials", "20"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(r.stdout.contains("21/21"), "{}", r.stdout);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["dsep"]).code, 2);
    assert_eq!(run(&["dsep", "/nonexistent.json", "--a", "X", "--b", "Y"]).code, 2);
    assert_eq!(run(&["oracle", &data("model_a.json"), "--do", "Q=1", "--outcome", "Y"]).code, 2);
}

#[test]
fn version_flag() {
    let r = run(&["--version"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains(env!("CARGO_PKG_VERSION")));
}

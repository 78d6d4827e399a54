use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbatlas")).args(args).output().expect("binary runs")
}

fn path(name: &str) -> String {
    fixture(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_fixtures() {
    assert_eq!(run(&["validate", &path("eq_a.json")]).status.code(), Some(0));
    assert_eq!(run(&["validate", &path("eq_b.json")]).status.code(), Some(0));
    let bad = run(&["validate", &path("eq_a_mutated.json")]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stdout(&bad).contains("FAIL   atlas.module-laws"), "{}", stdout(&bad));
}

#[test]
fn parse_failures_exit_3_with_location() {
    let dir = std::env::temp_dir().join(format!("orbatlas-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("broken.json");
    std::fs::write(&file, "{\n  \"kind\": \"atlas\",\n  \"format_version\": 1\n  \"groups\": {}\n}\n").unwrap();
    let o = run(&["validate", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("broken.json:4:3"), "{}", stdout(&o));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn groupoid_summary_lines() {
    let a = stdout(&run(&["groupoid", &path("eq_a.json")]));
    let b = stdout(&run(&["groupoid", &path("eq_b.json")]));
    assert!(a.contains("groupoid.inertia"));
    assert!(a.lines().any(|l| l.contains("groupoid.inertia") && l.contains("3 components")), "{a}");
    assert!(b.lines().any(|l| l.contains("groupoid.inertia") && l.contains("2 components")), "{b}");
}

#[test]
fn compare_reports_differ() {
    let o = run(&["compare", &path("eq_a.json"), &path("eq_b.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("differ: inertia 3 vs 2"));
}

#[test]
fn machine_format_is_line_delimited_json() {
    let o = run(&["--format", "machine", "roundtrip", &path("eq_b.json")]);
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines() {
        assert!(line.starts_with('{') && line.contains("\"schema\":\"orbatlas-report/1\""), "{line}");
    }
}

#[test]
fn from_groupoid_writes_an_atlas() {
    let o = run(&["from-groupoid", &path("groupoid_G.json"), "--cover", "coarse"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\"kind\": \"atlas\""));
}

#[test]
fn refinement_and_keys() {
    assert_eq!(run(&["refinement", &path("identity_eq_b.json")]).status.code(), Some(0));
    let k = stdout(&run(&["keys"]));
    assert!(k.contains("`morita.verdict`"));
}

#[test]
fn lenient_flag_downgrades_unknown_fields() {
    let dir = std::env::temp_dir().join(format!("orbatlas-cli-lenient-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let text = std::fs::read_to_string(fixture("single_chart_trivial.json")).unwrap().replacen("\"kind\"", "\"colour\": 1, \"kind\"", 1);
    let file = dir.join("extra.json");
    std::fs::write(&file, text).unwrap();
    assert_eq!(run(&["validate", file.to_str().unwrap()]).status.code(), Some(3));
    let o = run(&["--lenient", "validate", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("document.unknown-field"));
    std::fs::remove_dir_all(&dir).unwrap();
}

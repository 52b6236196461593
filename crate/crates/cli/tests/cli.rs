//! Runs the `mathwiki` binary against temporary data directories and checks
//! its output against direct library calls.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mathwiki_core::store::{QueryPattern, TriplePattern};
use mathwiki_core::wiki::Wiki;
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str], dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mathwiki"));
    cmd.args(args).env_remove("WIKI_DATA").env_remove("WIKI_PORT");
    if let Some(d) = dir {
        cmd.arg("--data-dir").arg(d);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn imported(file: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["import", data(file).to_str().unwrap()], Some(dir.path()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

#[test]
fn validate_fig1_succeeds() {
    let o = run(&["validate", data("fig1.xml").to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "");
    let o = run(&["validate", "--json", data("fig1.xml").to_str().unwrap()], None);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["valid"], true);
}

#[test]
fn validate_reports_problems() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.xml");
    std::fs::write(&bad, "<omdoc>\n  <theory xml:id=\"t\">\n    <proof id=\"p\"/>\n").unwrap();
    let o = run(&["validate", bad.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.xml:"));

    let cyclic = dir.path().join("cyclic.xml");
    std::fs::write(
        &cyclic,
        r#"<omdoc><theory xml:id="a"><imports from="b"/></theory><theory xml:id="b"><imports from="a"/></theory></omdoc>"#,
    )
    .unwrap();
    let o = run(&["validate", cyclic.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("CyclicImport"));
}

#[test]
fn render_plain_times_plus() {
    let dir = imported("arith.xml");
    let o = run(&["render", "arith/ex", "--plain"], Some(dir.path()));
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "(1 + 2) · 3\n");
}

#[test]
fn outputs_agree_with_library() {
    let dir = imported("arith.xml");
    let wiki = Wiki::open(dir.path()).unwrap();
    for p in wiki.list_pages() {
        let o = run(&["render", &p.name], Some(dir.path()));
        assert_eq!(stdout(&o).trim_end(), wiki.render_page(&p.name).unwrap().layout_xml());
    }
    let o = run(&["tasks", "--json"], Some(dir.path()));
    let tasks: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(tasks, serde_json::to_value(wiki.work_queue()).unwrap());

    let o = run(&["query", "--json", "--pattern", "?t type Assertion", "--not", "?p proves ?t"], Some(dir.path()));
    let q = QueryPattern::new(
        vec![TriplePattern::new("?t", "type", "Assertion")],
        vec![TriplePattern::new("?p", "proves", "?t")],
    );
    let rows: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows, serde_json::to_value(wiki.query(&q).unwrap()).unwrap());

    let o = run(&["export", "ring", "--closure"], Some(dir.path()));
    assert_eq!(stdout(&o).trim_end(), wiki.export_theory("ring", true).unwrap());
}

#[test]
fn import_export_import_round_trip() {
    let first = imported("arith.xml");
    let o = run(&["export", "ring", "--closure"], Some(first.path()));
    assert_eq!(code(&o), 0);
    let exported = first.path().join("exported.xml");
    std::fs::write(&exported, stdout(&o)).unwrap();

    let second = tempfile::tempdir().unwrap();
    let o = run(&["import", exported.to_str().unwrap()], Some(second.path()));
    assert_eq!(code(&o), 0);
    let listing = |d: &Path| {
        Wiki::open(d)
            .unwrap()
            .list_pages()
            .into_iter()
            .map(|p| (p.name, p.kind))
            .collect::<Vec<_>>()
    };
    assert_eq!(listing(first.path()), listing(second.path()));
}

#[test]
fn import_failure_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.xml");
    std::fs::write(&bad, "<omdoc><theory xml:id=\"t\"><bogus/></theory></omdoc>").unwrap();
    let o = run(&["import", bad.to_str().unwrap(), "--json"], Some(&dir.path().join("wiki")));
    assert_eq!(code(&o), 2);
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["detail"]["line"], 1);
    assert!(err["detail"]["column"].as_u64().unwrap() > 1);
    assert_eq!(stdout(&o), "");

    let o = run(&["import", data("arith.xml").to_str().unwrap()], Some(&dir.path().join("wiki")));
    assert_eq!(code(&o), 0);
    let o = run(&["import", data("arith.xml").to_str().unwrap()], Some(&dir.path().join("wiki")));
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["frobnicate"], None)), 1);
    assert_eq!(code(&run(&["render"], None)), 1);
    assert_eq!(code(&run(&["tasks"], None)), 1);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["query", "--pattern", "?a ?b ?c"], Some(dir.path()))), 1);
    assert_eq!(code(&run(&["query", "--pattern", "?a type X", "--not", "?x proves ?y"], Some(dir.path()))), 1);
    assert_eq!(code(&run(&["--help"], None)), 0);
}

#[test]
fn unknown_page_is_a_data_error() {
    let dir = imported("arith.xml");
    let o = run(&["render", "nowhere"], Some(dir.path()));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere"));
}

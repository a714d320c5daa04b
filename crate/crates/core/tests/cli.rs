mod common;

use std::fs;
use std::path::{Path, PathBuf};

use astxform::cli::{run, EXIT_CONFLICT, EXIT_INPUT, EXIT_OK, EXIT_SYNTHESIS};
use astxform::dsl::TransformationProgram;
use astxform::tree::parse_tree;
use common::fixture_path;
use common::scenarios::write_corpus;
use tempfile::TempDir;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("astxform").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A temp dir holding `NNN.before/after.tree.json` copies of the fixtures.
fn examples(names: &[&str]) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (i, name) in names.iter().enumerate() {
        for side in ["before", "after"] {
            fs::copy(
                fixture_path(&format!("{name}.{side}")),
                dir.path().join(format!("{:03}.{side}.tree.json", i + 1)),
            )
            .unwrap();
        }
    }
    dir
}

fn learn_to_file(names: &[&str], dir: &TempDir) -> PathBuf {
    let ex = examples(names);
    let program = dir.path().join("program.json");
    let (code, _, err) = cli(&["learn", s(ex.path()), "-o", s(&program)]);
    assert_eq!(code, EXIT_OK, "{err}");
    program
}

#[test]
fn learn_and_apply_fig2() {
    let work = tempfile::tempdir().unwrap();
    let program = learn_to_file(&["fig2a", "fig2b"], &work);
    let parsed = TransformationProgram::from_json(&fs::read_to_string(&program).unwrap()).unwrap();
    assert_eq!(parsed.rules.len(), 1);

    let target = fixture_path("fig2c.before");
    let (code, out, _) = cli(&["apply", s(&program), s(&target)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.trim_end().ends_with("3 edit(s)"), "{out}");
    assert_eq!(out.matches("\n+ ").count(), 3);
    assert!(out.starts_with("edit 1 (rule 0) at /"), "{out}");

    let (code, out, _) = cli(&["apply", s(&program), s(&target), "--materialize", "all"]);
    assert_eq!(code, EXIT_OK);
    let expected = parse_tree(&fs::read_to_string(fixture_path("fig2c.after")).unwrap()).unwrap();
    assert_eq!(parse_tree(&out).unwrap().root, expected.root);
}

#[test]
fn learn_prints_program_to_stdout() {
    let ex = examples(&["fig1a", "fig1b"]);
    let (code, out, _) = cli(&["learn", s(ex.path())]);
    assert_eq!(code, EXIT_OK);
    let program = TransformationProgram::from_json(&out).unwrap();
    assert_eq!(program.rules.len(), 1);
    assert!(out.contains("\"term\""));
}

#[test]
fn rank_lists_candidates() {
    let ex = examples(&["fig2a", "fig2b"]);
    let work = tempfile::tempdir().unwrap();
    let all = work.path().join("all.json");
    let (code, _, _) = cli(&["learn", s(ex.path()), "--all-candidates", s(&all)]);
    assert_eq!(code, EXIT_OK);
    let (code, out, _) = cli(&["rank", s(&all), "--limit", "3", "--explain"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("program(s) in the candidate set"));
    assert!(out.contains("#1 score"));
    assert!(!out.contains("#4 score"));
    assert!(out.contains("total"));
}

#[test]
fn input_errors_exit_1() {
    let empty = tempfile::tempdir().unwrap();
    let (code, _, err) = cli(&["learn", s(empty.path())]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("no example pairs"), "{err}");

    let (code, _, _) = cli(&["learn", "/nonexistent/examples"]);
    assert_eq!(code, EXIT_INPUT);

    let unpaired = tempfile::tempdir().unwrap();
    fs::copy(fixture_path("fig1a.before"), unpaired.path().join("001.before.tree.json")).unwrap();
    assert_eq!(cli(&["learn", s(unpaired.path())]).0, EXIT_INPUT);

    let bad = tempfile::tempdir().unwrap();
    fs::write(bad.path().join("001.before.tree.json"), "{not json").unwrap();
    fs::write(bad.path().join("001.after.tree.json"), "{}").unwrap();
    assert_eq!(cli(&["learn", s(bad.path())]).0, EXIT_INPUT);

    assert_eq!(cli(&["learn"]).0, EXIT_INPUT);
    assert_eq!(cli(&["frobnicate"]).0, EXIT_INPUT);
}

#[test]
fn config_file_is_validated() {
    let ex = examples(&["fig1a"]);
    let work = tempfile::tempdir().unwrap();
    let config = work.path().join("config.json");
    fs::write(&config, r#"{"eps": 0.5, "bogus": 1}"#).unwrap();
    assert_eq!(cli(&["--config", s(&config), "learn", s(ex.path())]).0, EXIT_INPUT);
    fs::write(&config, r#"{"eps": 0.5, "min_pts": 1, "context_depths": [0, 1]}"#).unwrap();
    assert_eq!(cli(&["--config", s(&config), "learn", s(ex.path())]).0, EXIT_OK);
}

#[test]
fn synthesis_failure_exits_2() {
    let ex = examples(&["fig1a"]);
    let (code, _, err) = cli(&["learn", s(ex.path()), "--depths", "40"]);
    assert_eq!(code, EXIT_SYNTHESIS, "{err}");
    assert!(!err.is_empty());
}

#[test]
fn overlapping_edits_exit_3() {
    let work = tempfile::tempdir().unwrap();
    let target = work.path().join("t.tree.json");
    fs::write(&target, r#"{"kind":"A","children":[{"kind":"B","value":"x"}]}"#).unwrap();
    let update = |pattern: &str| {
        format!(
            r#"{{"op":"Map","operation":{{"op":"Update","ast":{{"op":"ConstNode","kind":"C","value":null,"children":[]}}}},"locations":{{"op":"Filter","match":{{"op":"Context","pattern":{pattern},"path":{{"op":"Absolute","s":""}}}}}}}}"#
        )
    };
    let program_text = format!(
        r#"{{"op":"Transformation","rules":[{},{}]}}"#,
        update(r#"{"op":"Abstract","kind":"A"}"#),
        update(r#"{"op":"Abstract","kind":"B"}"#)
    );
    let program = work.path().join("p.json");
    fs::write(&program, program_text).unwrap();
    let (code, out, _) = cli(&["apply", s(&program), s(&target)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("2 edit(s)"), "{out}");
    let (code, _, err) = cli(&["apply", s(&program), s(&target), "--materialize", "all"]);
    assert_eq!(code, EXIT_CONFLICT, "{err}");
}

#[test]
fn apply_with_command_oracle() {
    let work = tempfile::tempdir().unwrap();
    let program = learn_to_file(&["fig2a", "fig2b"], &work);
    let target = fixture_path("fig2c.before");
    let (code, out, _) = cli(&["apply", s(&program), s(&target), "--oracle", "grep -q IsKind {file}"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "fixed");
    assert_eq!(v["edits_tried"], 1);

    let (code, out, _) = cli(&["apply", s(&program), s(&target), "--oracle", "exit 1 {file}", "--cap", "3"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "exhausted");
    assert_eq!(v["edits_tried"], 3);

    assert_eq!(cli(&["apply", s(&program), s(&target), "--oracle", "true"]).0, EXIT_INPUT);
}

#[test]
fn replay_reports_json() {
    let corpus = tempfile::tempdir().unwrap();
    write_corpus(corpus.path(), &common::mini_students());
    for (mode, fixed) in [("batch", 6), ("incremental", 4)] {
        let (code, out, err) = cli(&["replay", s(corpus.path()), "--mode", mode]);
        assert_eq!(code, EXIT_OK, "{err}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["fixed"], fixed);
        assert_eq!(v["students"], 6);
    }
}

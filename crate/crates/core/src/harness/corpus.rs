//! Submission corpora on disk:
//! `<root>/<task>/<student>/<timestamp>.tree.json` with a
//! `<timestamp>.verdict` file next to each tree holding `pass` or `fail`.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tree::{parse_tree, SourceTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub timestamp: String,
    pub tree: SourceTree,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Student {
    pub id: String,
    /// Chronological.
    pub submissions: Vec<Submission>,
}

impl Student {
    /// The first passing submission and the last failing one before it.
    pub fn fix_pair(&self) -> Option<(&Submission, &Submission)> {
        let fixed = self.submissions.iter().position(|s| s.verdict == Verdict::Pass)?;
        let before = self.submissions[..fixed].iter().rev().find(|s| s.verdict == Verdict::Fail)?;
        Some((before, &self.submissions[fixed]))
    }

    pub fn failing(&self) -> impl Iterator<Item = &Submission> {
        self.submissions.iter().filter(|s| s.verdict == Verdict::Fail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub name: String,
    pub students: Vec<Student>,
}

impl Task {
    pub fn passing_trees(&self) -> Vec<crate::tree::TreeNode> {
        self.students
            .iter()
            .flat_map(|s| &s.submissions)
            .filter(|s| s.verdict == Verdict::Pass)
            .map(|s| s.tree.root.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub tasks: Vec<Task>,
    pub warnings: Vec<String>,
}

/// Numeric timestamps sort numerically, others as text after them.
pub(crate) fn timestamp_key(ts: &str) -> (bool, u64, &str) {
    match ts.parse::<u64>() {
        Ok(n) => (false, n, ts),
        Err(_) => (true, 0, ts),
    }
}

fn sorted_dirs(path: &Path) -> io::Result<Vec<(String, std::path::PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(path)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            out.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

fn load_student(id: &str, dir: &Path, warnings: &mut Vec<String>) -> io::Result<Student> {
    let mut submissions = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let Some(timestamp) = name.strip_suffix(".tree.json") else { continue };
        let verdict_path = dir.join(format!("{timestamp}.verdict"));
        let verdict = match fs::read_to_string(&verdict_path) {
            Ok(text) => match text.trim() {
                "pass" => Verdict::Pass,
                "fail" => Verdict::Fail,
                other => {
                    warnings.push(format!("{}: unknown verdict {other:?}, skipped", verdict_path.display()));
                    continue;
                }
            },
            Err(_) => {
                warnings.push(format!("{}: missing verdict, skipped", path.display()));
                continue;
            }
        };
        let tree = match fs::read_to_string(&path).map_err(|e| e.to_string()).and_then(|t| parse_tree(&t).map_err(|e| e.to_string())) {
            Ok(t) => SourceTree::with_origin(t.root, format!("{id}/{timestamp}")),
            Err(e) => {
                warnings.push(format!("{}: {e}, skipped", path.display()));
                continue;
            }
        };
        submissions.push(Submission {
            timestamp: timestamp.to_owned(),
            tree,
            verdict,
        });
    }
    submissions.sort_by(|a, b| timestamp_key(&a.timestamp).cmp(&timestamp_key(&b.timestamp)));
    Ok(Student {
        id: id.to_owned(),
        submissions,
    })
}

pub fn load_corpus(root: &Path) -> io::Result<Corpus> {
    let mut corpus = Corpus::default();
    for (task_name, task_dir) in sorted_dirs(root)? {
        let mut students = Vec::new();
        for (id, dir) in sorted_dirs(&task_dir)? {
            let student = load_student(&id, &dir, &mut corpus.warnings)?;
            if student.submissions.is_empty() {
                corpus.warnings.push(format!("{task_name}/{id}: no usable submissions"));
                continue;
            }
            students.push(student);
        }
        corpus.tasks.push(Task {
            name: task_name,
            students,
        });
    }
    Ok(corpus)
}

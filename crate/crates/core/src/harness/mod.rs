//! Applying a learned program to a target with oracle-checked edit search,
//! and replaying learn/fix experiments over a corpus of submissions.

mod corpus;
mod replay;

use std::io::Write;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{apply_transformation, find_conflict, materialize, Edit, TransformationProgram};
use crate::tree::{serialize_tree, SourceTree, TreeNode};

pub use corpus::{load_corpus, Corpus, Student, Submission, Task, Verdict};
pub use replay::{replay_batch, replay_corpus, replay_incremental, ReplayConfig, ReplayMode, ReplayReport, StudentOutcome, TaskReport};

pub const DEFAULT_CAP: usize = 500;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle template must contain exactly one {{file}} placeholder, found {0}")]
    Template(usize),
    #[error("oracle I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("oracle exited with status {0}")]
    Status(i32),
    #[error("oracle killed by a signal")]
    Signal,
    #[error("{0}")]
    Other(String),
}

/// Decides whether a candidate program is correct. `Err` means the check
/// itself broke, not that the candidate failed.
pub trait Oracle: Sync {
    fn check(&self, candidate: &SourceTree) -> Result<bool, OracleError>;
}

/// Runs `sh -c TEMPLATE` with `{file}` replaced by a temporary file holding
/// the candidate tree. Exit 0 passes, exit 1 fails, anything else is an
/// oracle error.
#[derive(Debug, Clone)]
pub struct CommandOracle {
    template: String,
}

impl CommandOracle {
    pub fn new(template: impl Into<String>) -> Result<Self, OracleError> {
        let template = template.into();
        match template.matches("{file}").count() {
            1 => Ok(CommandOracle { template }),
            n => Err(OracleError::Template(n)),
        }
    }

    fn run(&self, path: &Path) -> Result<bool, OracleError> {
        let cmd = self.template.replace("{file}", &path.display().to_string());
        let status = Command::new("sh").arg("-c").arg(&cmd).status()?;
        match status.code() {
            Some(0) => Ok(true),
            Some(1) => Ok(false),
            Some(code) => Err(OracleError::Status(code)),
            None => Err(OracleError::Signal),
        }
    }
}

impl Oracle for CommandOracle {
    fn check(&self, candidate: &SourceTree) -> Result<bool, OracleError> {
        let mut file = tempfile::Builder::new().suffix(".tree.json").tempfile()?;
        file.write_all(serialize_tree(&candidate.root).as_bytes())?;
        file.flush()?;
        self.run(file.path())
    }
}

/// Passes when the candidate equals one of the accepted trees.
#[derive(Debug, Clone, Default)]
pub struct ExpectedOracle {
    pub accepted: Vec<TreeNode>,
}

impl Oracle for ExpectedOracle {
    fn check(&self, candidate: &SourceTree) -> Result<bool, OracleError> {
        Ok(self.accepted.contains(&candidate.root))
    }
}

pub struct FnOracle<F>(pub F);

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&SourceTree) -> Result<bool, OracleError> + Sync,
{
    fn check(&self, candidate: &SourceTree) -> Result<bool, OracleError> {
        (self.0)(candidate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Fixed,
    Exhausted,
    NoEdits,
    OracleError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicationOutcome {
    pub status: Status,
    pub edits_tried: usize,
    pub winning_subset: Option<Vec<Edit>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApplyConfig {
    pub cap: usize,
    pub workers: usize,
}

impl Default for ApplyConfig {
    fn default() -> Self {
        ApplyConfig {
            cap: DEFAULT_CAP,
            workers: 1,
        }
    }
}

/// Index subsets of `0..n`: the full set first, then smaller sizes, each
/// size in lexicographic order. The empty set is never produced.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Vec<usize>,
    started: bool,
}

impl Subsets {
    pub fn new(n: usize) -> Self {
        Subsets {
            n,
            current: (0..n).collect(),
            started: false,
        }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if !self.started {
            self.started = true;
            return (self.n > 0).then(|| self.current.clone());
        }
        let k = self.current.len();
        // Advance to the next combination of the same size.
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return Some(self.current.clone());
            }
        }
        if k <= 1 {
            return None;
        }
        self.current = (0..k - 1).collect();
        Some(self.current.clone())
    }
}

/// Identical edits from different rules collapse into one.
fn distinct_edits(edits: Vec<Edit>) -> Vec<Edit> {
    let mut out: Vec<Edit> = Vec::new();
    for e in edits {
        if !out
            .iter()
            .any(|o| o.target_path == e.target_path && o.replacement == e.replacement)
        {
            out.push(e);
        }
    }
    out
}

/// Bound on conflicting subsets skipped without being tried.
const SKIP_LIMIT: usize = 1_000_000;

pub fn apply_with_verification(
    program: &TransformationProgram,
    target: &SourceTree,
    oracle: &dyn Oracle,
    config: &ApplyConfig,
) -> ApplicationOutcome {
    let edits = distinct_edits(apply_transformation(program, &target.root));
    let outcome = |status, edits_tried, winning_subset, error| ApplicationOutcome {
        status,
        edits_tried,
        winning_subset,
        error,
    };
    if edits.is_empty() {
        return outcome(Status::NoEdits, 0, None, None);
    }
    let cap = config.cap.max(1);
    let workers = config.workers.max(1);
    let mut subsets = Subsets::new(edits.len());
    let mut tried = 0;
    let mut skipped = 0;
    while tried < cap {
        let mut batch: Vec<Vec<Edit>> = Vec::new();
        while batch.len() < workers && tried + batch.len() < cap {
            let Some(idx) = subsets.next() else { break };
            let chosen: Vec<Edit> = idx.iter().map(|&i| edits[i].clone()).collect();
            if find_conflict(&chosen).is_some() {
                skipped += 1;
                if skipped >= SKIP_LIMIT {
                    break;
                }
                continue;
            }
            batch.push(chosen);
        }
        if batch.is_empty() {
            break;
        }
        let results = check_batch(&batch, target, oracle);
        for (chosen, result) in batch.into_iter().zip(results) {
            tried += 1;
            match result {
                Ok(true) => return outcome(Status::Fixed, tried, Some(chosen), None),
                Ok(false) => {}
                Err(e) => return outcome(Status::OracleError, tried, None, Some(e.to_string())),
            }
        }
    }
    outcome(Status::Exhausted, tried, None, None)
}

fn check_one(edits: &[Edit], target: &SourceTree, oracle: &dyn Oracle) -> Result<bool, OracleError> {
    let root = materialize(&target.root, edits).map_err(|e| OracleError::Other(e.to_string()))?;
    let candidate = SourceTree {
        root,
        origin: target.origin.clone(),
    };
    oracle.check(&candidate)
}

fn check_batch(batch: &[Vec<Edit>], target: &SourceTree, oracle: &dyn Oracle) -> Vec<Result<bool, OracleError>> {
    if batch.len() == 1 {
        return vec![check_one(&batch[0], target, oracle)];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = batch
            .iter()
            .map(|edits| scope.spawn(move || check_one(edits, target, oracle)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("oracle worker panicked"))
            .collect()
    })
}

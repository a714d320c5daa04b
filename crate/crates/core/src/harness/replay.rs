//! Batch (leave-one-out) and incremental (chronological) fix experiments.

use serde::{Deserialize, Serialize};

use crate::dsl::TransformationProgram;
use crate::synthesis::{synthesize, SynthesisConfig};

use super::corpus::{timestamp_key, Corpus, Student, Submission, Task, Verdict};
use super::{apply_with_verification, ApplyConfig, ExpectedOracle, Oracle, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    Batch,
    Incremental,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayConfig {
    pub synthesis: SynthesisConfig,
    pub apply: ApplyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentOutcome {
    pub student: String,
    pub fixed: bool,
    /// 1-based index among the attempted failing submissions.
    pub submissions_to_fix: Option<usize>,
    pub fixed_submission: Option<String>,
    pub submissions_attempted: usize,
    pub programs_tried: usize,
    pub edits_tried: usize,
    pub oracle_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    pub students: Vec<StudentOutcome>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub mode: ReplayMode,
    pub tasks: Vec<TaskReport>,
    pub students: usize,
    pub fixed: usize,
    pub fixed_rate: f64,
    pub mean_submissions_to_fix: Option<f64>,
    pub warnings: Vec<String>,
}

impl ReplayReport {
    fn new(mode: ReplayMode, tasks: Vec<TaskReport>, mut warnings: Vec<String>) -> Self {
        let outcomes: Vec<&StudentOutcome> = tasks.iter().flat_map(|t| &t.students).collect();
        let fixed: Vec<usize> = outcomes.iter().filter_map(|o| o.submissions_to_fix).collect();
        warnings.extend(tasks.iter().flat_map(|t| t.warnings.iter().cloned()));
        ReplayReport {
            mode,
            students: outcomes.len(),
            fixed: fixed.len(),
            fixed_rate: if outcomes.is_empty() {
                0.0
            } else {
                fixed.len() as f64 / outcomes.len() as f64
            },
            mean_submissions_to_fix: (!fixed.is_empty()).then(|| fixed.iter().sum::<usize>() as f64 / fixed.len() as f64),
            tasks,
            warnings,
        }
    }
}

/// A program learned from one student's fix.
struct Learned {
    student: usize,
    fixed_at: String,
    program: TransformationProgram,
}

fn learn_fixes(task: &Task, config: &ReplayConfig, warnings: &mut Vec<String>) -> Vec<Learned> {
    let mut out = Vec::new();
    for (i, s) in task.students.iter().enumerate() {
        let Some((before, after)) = s.fix_pair() else {
            continue;
        };
        let pair = [(before.tree.clone(), after.tree.clone())];
        match synthesize(&pair, &config.synthesis) {
            Ok(set) if !set.rules.is_empty() => out.push(Learned {
                student: i,
                fixed_at: after.timestamp.clone(),
                program: set.top(&config.synthesis.weights),
            }),
            Ok(_) => {}
            Err(e) => warnings.push(format!("{}/{}: {e}", task.name, s.id)),
        }
    }
    out
}

/// Failing submissions up to the student's first pass.
fn attempts(student: &Student) -> Vec<&Submission> {
    student
        .submissions
        .iter()
        .take_while(|s| s.verdict == Verdict::Fail)
        .collect()
}

fn attempt<'a, F>(student: &Student, oracle: &dyn Oracle, config: &ApplyConfig, available: F) -> StudentOutcome
where
    F: Fn(&Submission) -> Vec<&'a TransformationProgram>,
{
    let mut outcome = StudentOutcome {
        student: student.id.clone(),
        fixed: false,
        submissions_to_fix: None,
        fixed_submission: None,
        submissions_attempted: 0,
        programs_tried: 0,
        edits_tried: 0,
        oracle_errors: 0,
    };
    for (i, sub) in attempts(student).into_iter().enumerate() {
        outcome.submissions_attempted += 1;
        for program in available(sub) {
            let result = apply_with_verification(program, &sub.tree, oracle, config);
            outcome.programs_tried += 1;
            outcome.edits_tried += result.edits_tried;
            match result.status {
                Status::Fixed => {
                    outcome.fixed = true;
                    outcome.submissions_to_fix = Some(i + 1);
                    outcome.fixed_submission = Some(sub.timestamp.clone());
                    return outcome;
                }
                Status::OracleError => outcome.oracle_errors += 1,
                Status::Exhausted | Status::NoEdits => {}
            }
        }
    }
    outcome
}

fn targets(task: &Task, warnings: &mut Vec<String>) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, s) in task.students.iter().enumerate() {
        if attempts(s).is_empty() {
            warnings.push(format!("{}/{}: no failing submission before the first pass, skipped", task.name, s.id));
        } else {
            out.push(i);
        }
    }
    out
}

/// Every student is attempted with the programs learned from all other
/// students' fixes.
pub fn replay_batch(task: &Task, oracle: &dyn Oracle, config: &ReplayConfig) -> TaskReport {
    let mut warnings = Vec::new();
    let learned = learn_fixes(task, config, &mut warnings);
    let students = targets(task, &mut warnings)
        .into_iter()
        .map(|i| {
            attempt(&task.students[i], oracle, &config.apply, |_| {
                learned.iter().filter(|l| l.student != i).map(|l| &l.program).collect()
            })
        })
        .collect();
    TaskReport {
        task: task.name.clone(),
        students,
        warnings,
    }
}

/// Like [`replay_batch`], but a submission only sees programs learned from
/// fixes submitted strictly before it.
pub fn replay_incremental(task: &Task, oracle: &dyn Oracle, config: &ReplayConfig) -> TaskReport {
    let mut warnings = Vec::new();
    let learned = learn_fixes(task, config, &mut warnings);
    let students = targets(task, &mut warnings)
        .into_iter()
        .map(|i| {
            attempt(&task.students[i], oracle, &config.apply, |sub| {
                learned
                    .iter()
                    .filter(|l| l.student != i && timestamp_key(&l.fixed_at) < timestamp_key(&sub.timestamp))
                    .map(|l| &l.program)
                    .collect()
            })
        })
        .collect();
    TaskReport {
        task: task.name.clone(),
        students,
        warnings,
    }
}

/// Replays every task. Without an explicit oracle a submission counts as
/// fixed when it becomes identical to some passing submission of the task.
pub fn replay_corpus(corpus: &Corpus, mode: ReplayMode, oracle: Option<&dyn Oracle>, config: &ReplayConfig) -> ReplayReport {
    let tasks = corpus
        .tasks
        .iter()
        .map(|task| {
            let fallback = ExpectedOracle {
                accepted: task.passing_trees(),
            };
            let oracle = oracle.unwrap_or(&fallback);
            match mode {
                ReplayMode::Batch => replay_batch(task, oracle, config),
                ReplayMode::Incremental => replay_incremental(task, oracle, config),
            }
        })
        .collect();
    ReplayReport::new(mode, tasks, corpus.warnings.clone())
}

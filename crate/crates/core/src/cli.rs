//! The `astxform` command line: `learn`, `apply`, `rank` and `replay`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 synthesis failure,
//! 3 conflicting edits.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dsl::{apply_to_source, materialize, DslError, TransformationProgram};
use crate::extraction::{ClusterParams, DistanceMetric};
use crate::harness::{
    apply_with_verification, load_corpus, replay_corpus, ApplyConfig, CommandOracle, Oracle, ReplayConfig, ReplayMode,
    DEFAULT_CAP,
};
use crate::ranking::{explain, score_program, Weights};
use crate::synthesis::{synthesize, CandidateSet, SynthesisConfig};
use crate::tree::{parse_tree, serialize_tree, SourceTree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SYNTHESIS: i32 = 2;
pub const EXIT_CONFLICT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "astxform", version, about = "Learn AST rewrite rules from before/after examples and apply them")]
pub struct Cli {
    /// JSON file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, clap::Args)]
struct LearnFlags {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    min_pts: Option<usize>,
    /// Comma-separated context depths for location patterns.
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Materialize {
    None,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Batch,
    Incremental,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Synthesize a program from NNN.before.tree.json / NNN.after.tree.json pairs.
    Learn {
        examples: PathBuf,
        /// Where to write the top program (stdout if omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write the full factored candidate set to this file.
        #[arg(long)]
        all_candidates: Option<PathBuf>,
        #[command(flatten)]
        flags: LearnFlags,
    },
    /// Apply a program to a tree.
    Apply {
        program: PathBuf,
        target: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        materialize: Materialize,
        /// Verify edit subsets with `sh -c CMD`, `{file}` naming the candidate.
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Rank the programs of a candidate set written by `learn --all-candidates`.
    Rank {
        candidates: PathBuf,
        #[arg(long)]
        explain: bool,
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
    /// Replay fix experiments over a corpus directory.
    Replay {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "batch")]
        mode: Mode,
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: LearnFlags,
    },
}

/// Settings accepted by `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub eps: f64,
    pub min_pts: usize,
    pub context_depths: Vec<usize>,
    pub metric: DistanceMetric,
    pub weights: Weights,
    pub cap: usize,
    pub worker_count: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        let s = SynthesisConfig::default();
        CliConfig {
            eps: s.cluster.eps,
            min_pts: s.cluster.min_pts,
            context_depths: s.depths,
            metric: s.cluster.metric,
            weights: s.weights,
            cap: DEFAULT_CAP,
            worker_count: 1,
        }
    }
}

impl CliConfig {
    fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig {
            cluster: ClusterParams {
                eps: self.eps,
                min_pts: self.min_pts,
                metric: self.metric,
            },
            depths: self.context_depths.clone(),
            weights: self.weights,
            workers: self.worker_count,
        }
    }

    fn apply(&self) -> ApplyConfig {
        ApplyConfig {
            cap: self.cap,
            workers: self.worker_count,
        }
    }

    fn with_flags(mut self, flags: &LearnFlags) -> Self {
        if let Some(eps) = flags.eps {
            self.eps = eps;
        }
        if let Some(m) = flags.min_pts {
            self.min_pts = m;
        }
        if let Some(d) = &flags.depths {
            self.context_depths = d.clone();
        }
        self
    }

    fn validate(&self) -> Result<(), Failure> {
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(input(format!("eps must be a non-negative number, got {}", self.eps)));
        }
        if self.min_pts == 0 || self.cap == 0 || self.worker_count == 0 {
            return Err(input("min_pts, cap and worker_count must be at least 1"));
        }
        if self.context_depths.is_empty() {
            return Err(input("at least one context depth is required"));
        }
        Ok(())
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read_tree(path: &Path) -> Result<SourceTree, Failure> {
    let tree = parse_tree(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok(SourceTree::with_origin(tree.root, path.display().to_string()))
}

fn write_out(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => writeln!(stdout, "{text}").map_err(|e| input(e.to_string())),
    }
}

/// Pairs `NNN.before.tree.json` with `NNN.after.tree.json`, sorted by NNN.
pub fn load_examples(dir: &Path) -> Result<Vec<(SourceTree, SourceTree)>, String> {
    let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut befores = Vec::new();
    let mut afters = Vec::new();
    for entry in entries {
        let name = entry.map_err(|e| e.to_string())?.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".before.tree.json") {
            befores.push(stem.to_owned());
        } else if let Some(stem) = name.strip_suffix(".after.tree.json") {
            afters.push(stem.to_owned());
        }
    }
    befores.sort();
    afters.sort();
    if befores.is_empty() && afters.is_empty() {
        return Err(format!("{}: no example pairs", dir.display()));
    }
    if befores != afters {
        return Err(format!("{}: before/after files do not pair up", dir.display()));
    }
    let mut pairs = Vec::new();
    for stem in befores {
        let load = |side: &str| -> Result<SourceTree, String> {
            let path = dir.join(format!("{stem}.{side}.tree.json"));
            let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_tree(&text).map_err(|e| format!("{}: {e}", path.display()))
        };
        let before = load("before")?;
        pairs.push((SourceTree::with_origin(before.root, stem.clone()), load("after")?));
    }
    Ok(pairs)
}

fn learn(dir: &Path, out: Option<&Path>, all: Option<&Path>, config: &CliConfig, stdout: &mut dyn Write) -> Result<(), Failure> {
    let pairs = load_examples(dir).map_err(input)?;
    let synthesis = config.synthesis();
    let set = synthesize(&pairs, &synthesis).map_err(|e| Failure {
        code: EXIT_SYNTHESIS,
        message: e.to_string(),
    })?;
    if let Some(path) = all {
        let text = serde_json::to_string_pretty(&set).expect("serializable");
        fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    write_out(out, &set.top(&synthesis.weights).to_json_pretty(), stdout)
}

fn read_program(path: &Path) -> Result<TransformationProgram, Failure> {
    TransformationProgram::from_json(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

/// One block per edit: header, then the old and new subtrees.
pub fn format_edits(target: &SourceTree, edits: &[crate::dsl::Edit]) -> String {
    let mut text = String::new();
    for (i, e) in edits.iter().enumerate() {
        let old = target.root.get(&e.target_path).map(|n| n.to_sexp()).unwrap_or_default();
        text.push_str(&format!("edit {} (rule {}) at {}\n", i + 1, e.rule_index, e.target_path));
        text.push_str(&format!("- {old}\n+ {}\n", e.replacement.to_sexp()));
    }
    text.push_str(&format!("{} edit(s)", edits.len()));
    text
}

struct ApplyArgs<'a> {
    program: &'a Path,
    target: &'a Path,
    materialize: Materialize,
    oracle: Option<&'a str>,
    out: Option<&'a Path>,
}

fn apply(args: ApplyArgs, config: &CliConfig, stdout: &mut dyn Write) -> Result<(), Failure> {
    let program = read_program(args.program)?;
    let target = read_tree(args.target)?;
    if let Some(template) = args.oracle {
        let oracle = CommandOracle::new(template).map_err(|e| input(e.to_string()))?;
        let outcome = apply_with_verification(&program, &target, &oracle, &config.apply());
        return write_out(args.out, &serde_json::to_string_pretty(&outcome).expect("serializable"), stdout);
    }
    let edits = apply_to_source(&program, &target);
    match args.materialize {
        Materialize::None => write_out(args.out, &format_edits(&target, &edits), stdout),
        Materialize::All => match materialize(&target.root, &edits) {
            Ok(tree) => write_out(args.out, &serialize_tree(&tree), stdout),
            Err(e @ DslError::Conflict(..)) => Err(Failure {
                code: EXIT_CONFLICT,
                message: e.to_string(),
            }),
            Err(e) => Err(input(e.to_string())),
        },
    }
}

fn rank(path: &Path, show: bool, limit: usize, config: &CliConfig, stdout: &mut dyn Write) -> Result<(), Failure> {
    let set: CandidateSet = serde_json::from_str(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let mut text = format!("{} program(s) in the candidate set\n", set.count());
    for (i, p) in set.programs(&config.weights, limit).iter().enumerate() {
        let score = score_program(p, &config.weights);
        text.push_str(&format!("#{} score {:.2}\n{p}\n", i + 1, score.total));
        if show {
            text.push_str(&explain(p, &config.weights));
        }
    }
    write_out(None, text.trim_end(), stdout)
}

fn replay(dir: &Path, mode: Mode, oracle: Option<&str>, out: Option<&Path>, config: &CliConfig, stdout: &mut dyn Write) -> Result<(), Failure> {
    let corpus = load_corpus(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
    for w in &corpus.warnings {
        log::warn!("{w}");
    }
    let oracle = oracle
        .map(CommandOracle::new)
        .transpose()
        .map_err(|e| input(e.to_string()))?;
    let replay_config = ReplayConfig {
        synthesis: config.synthesis(),
        apply: config.apply(),
    };
    let mode = match mode {
        Mode::Batch => ReplayMode::Batch,
        Mode::Incremental => ReplayMode::Incremental,
    };
    let report = replay_corpus(&corpus, mode, oracle.as_ref().map(|o| o as &dyn Oracle), &replay_config);
    write_out(out, &serde_json::to_string_pretty(&report).expect("serializable"), stdout)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut config = match &cli.config {
        Some(path) => serde_json::from_str(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?,
        None => CliConfig::default(),
    };
    if let Some(w) = cli.workers {
        config.worker_count = w;
    }
    match &cli.command {
        Cmd::Learn { flags, .. } | Cmd::Replay { flags, .. } => config = config.with_flags(flags),
        _ => {}
    }
    if let Cmd::Apply { cap: Some(c), .. } | Cmd::Replay { cap: Some(c), .. } = &cli.command {
        config.cap = *c;
    }
    config.validate()?;
    match &cli.command {
        Cmd::Learn {
            examples,
            out,
            all_candidates,
            ..
        } => learn(examples, out.as_deref(), all_candidates.as_deref(), &config, stdout),
        Cmd::Apply {
            program,
            target,
            materialize,
            oracle,
            out,
            ..
        } => apply(
            ApplyArgs {
                program,
                target,
                materialize: *materialize,
                oracle: oracle.as_deref(),
                out: out.as_deref(),
            },
            &config,
            stdout,
        ),
        Cmd::Rank { candidates, explain, limit } => rank(candidates, *explain, *limit, &config, stdout),
        Cmd::Replay {
            corpus, mode, oracle, out, ..
        } => replay(corpus, *mode, oracle.as_deref(), out.as_deref(), &config, stdout),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "astxform: {}", f.message);
            f.code
        }
    }
}

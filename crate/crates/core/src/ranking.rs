//! Scoring and ordering of candidate programs.
//!
//! Three preferences, in decreasing weight: reuse input nodes through
//! `Reference` rather than rebuilding them with `ConstNode`; select locations
//! through a non-root context; among non-root contexts, prefer small
//! patterns. Ties on the weighted score fall back to [`specificity`] and then
//! to the serialized program text.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dsl::{AstBuilder, ContextExpr, RewriteRule, TransformationProgram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub w_ref: f64,
    pub w_const: f64,
    pub w_ctx: f64,
    pub w_len: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w_ref: 10.0,
            w_const: 2.0,
            w_ctx: 5.0,
            w_len: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub total: f64,
    pub breakdown: Vec<(String, f64)>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
struct Features {
    references: usize,
    const_nodes: usize,
    non_root: usize,
    pattern_len: usize,
}

impl Features {
    fn of_rule(rule: &RewriteRule) -> Features {
        let (references, const_nodes) = rule.operation.builder().counts();
        let non_root = !rule.location.path.is_root();
        Features {
            references,
            const_nodes,
            non_root: usize::from(non_root),
            pattern_len: if non_root { rule.location.pattern.size() } else { 0 },
        }
    }

    fn add(self, o: Features) -> Features {
        Features {
            references: self.references + o.references,
            const_nodes: self.const_nodes + o.const_nodes,
            non_root: self.non_root + o.non_root,
            pattern_len: self.pattern_len + o.pattern_len,
        }
    }

    fn score(self, w: &Weights) -> Score {
        let breakdown = vec![
            ("references".to_owned(), w.w_ref * self.references as f64),
            ("const_nodes".to_owned(), -w.w_const * self.const_nodes as f64),
            ("non_root_context".to_owned(), w.w_ctx * self.non_root as f64),
            ("pattern_length".to_owned(), -w.w_len * self.pattern_len as f64),
        ];
        Score {
            total: breakdown.iter().map(|(_, v)| v).sum(),
            breakdown,
        }
    }
}

pub fn score_program(program: &TransformationProgram, weights: &Weights) -> Score {
    program
        .rules
        .iter()
        .map(Features::of_rule)
        .fold(Features::default(), Features::add)
        .score(weights)
}

pub fn score_rule(rule: &RewriteRule, weights: &Weights) -> Score {
    Features::of_rule(rule).score(weights)
}

/// Secondary ranking key, smaller first: the number of reference contexts
/// that do not look above the referenced node, then the size plus pinned
/// count of every reference context and the pinned count of the location.
pub type Specificity = (usize, usize);

fn context_specificity(ctx: &ContextExpr) -> Specificity {
    (usize::from(ctx.path.is_root()), ctx.pattern.size() + ctx.pattern.pinned())
}

fn sum(items: impl Iterator<Item = Specificity>) -> Specificity {
    items.fold((0, 0), |(a, b), (c, d)| (a + c, b + d))
}

fn builder_specificity(builder: &AstBuilder) -> Specificity {
    sum(builder.references().into_iter().map(context_specificity))
}

pub fn specificity(rule: &RewriteRule) -> Specificity {
    let (roots, size) = builder_specificity(rule.operation.builder());
    (roots, size + rule.location.pattern.pinned())
}

pub fn program_specificity(program: &TransformationProgram) -> Specificity {
    sum(program.rules.iter().map(specificity))
}

/// Score order, higher first. Totals within rounding error count as ties so
/// that rescaling the weights cannot reorder tied programs.
fn compare_scores(a: f64, b: f64) -> Ordering {
    let tolerance = 1e-9 * a.abs().max(b.abs()).max(1.0);
    if (a - b).abs() <= tolerance {
        Ordering::Equal
    } else {
        b.total_cmp(&a)
    }
}

fn compare_keys(a: (f64, Specificity, &str), b: (f64, Specificity, &str)) -> Ordering {
    compare_scores(a.0, b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2))
}

/// Orders two rules, better first.
pub fn compare_rules(a: &RewriteRule, b: &RewriteRule, weights: &Weights) -> Ordering {
    let ja = serde_json::to_string(a).expect("serializable");
    let jb = serde_json::to_string(b).expect("serializable");
    compare_keys(
        (score_rule(a, weights).total, specificity(a), &ja),
        (score_rule(b, weights).total, specificity(b), &jb),
    )
}

/// Orders two builders for the same output position, better first.
pub fn compare_builders(a: &AstBuilder, b: &AstBuilder, weights: &Weights) -> Ordering {
    let value = |x: &AstBuilder| {
        let (r, c) = x.counts();
        weights.w_ref * r as f64 - weights.w_const * c as f64
    };
    let ja = serde_json::to_string(a).expect("serializable");
    let jb = serde_json::to_string(b).expect("serializable");
    compare_keys(
        (value(a), builder_specificity(a), &ja),
        (value(b), builder_specificity(b), &jb),
    )
}

pub fn compare_programs(a: &TransformationProgram, b: &TransformationProgram, weights: &Weights) -> Ordering {
    compare_keys(
        (score_program(a, weights).total, program_specificity(a), &a.to_json()),
        (score_program(b, weights).total, program_specificity(b), &b.to_json()),
    )
}

pub fn rank(mut programs: Vec<TransformationProgram>, weights: &Weights) -> Vec<TransformationProgram> {
    let mut keyed: Vec<(f64, Specificity, String, TransformationProgram)> = programs
        .drain(..)
        .map(|p| (score_program(&p, weights).total, program_specificity(&p), p.to_json(), p))
        .collect();
    keyed.sort_by(|a, b| compare_keys((a.0, a.1, &a.2), (b.0, b.1, &b.2)));
    keyed.into_iter().map(|(.., p)| p).collect()
}

/// Score table, one line per feature and a total.
pub fn explain(program: &TransformationProgram, weights: &Weights) -> String {
    let score = score_program(program, weights);
    let mut out = String::new();
    for (feature, value) in &score.breakdown {
        out.push_str(&format!("  {feature:<18} {value:>8.2}\n"));
    }
    out.push_str(&format!("  {:<18} {:>8.2}\n", "total", score.total));
    let (roots, size) = program_specificity(program);
    out.push_str(&format!("  {:<18} {:>8}\n", "root_references", roots));
    out.push_str(&format!("  {:<18} {:>8}\n", "specificity", size));
    out
}

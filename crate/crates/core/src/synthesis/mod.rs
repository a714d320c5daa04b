//! Deductive synthesis of transformation programs from example pairs.
//!
//! Example pairs are diffed and split into per-rule specifications
//! ([`witness_transformation`]); each specification is solved independently
//! for location filters and operations. The result is a [`CandidateSet`]
//! kept factored per rule, since the number of consistent programs is the
//! product of the per-rule choices.

mod builders;
mod filters;
mod generalize;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{
    apply_operation, apply_transformation, materialize, ContextExpr, Edit, Operation, RewriteRule,
    TransformationProgram,
};
use crate::edit_distance::edit_script;
use crate::extraction::{cluster_components, components_for, ClusterParams, Component, OperationExample};
use crate::ranking::{compare_rules, rank, Weights};
use crate::tree::{NodePath, SourceTree, TreeNode};

pub use builders::{learn_ast_builder, product, reference_candidates, Site};
pub use filters::{filters_for, Target};
pub use generalize::{anti_unify, generalize, generalize_all, relax};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub cluster: ClusterParams,
    pub depths: Vec<usize>,
    pub weights: Weights,
    pub workers: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            cluster: ClusterParams::default(),
            depths: vec![0, 1, 2],
            weights: Weights::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthesisError {
    #[error("no rule for cluster {cluster} ({}): {reason}", examples.join(", "))]
    Rule {
        cluster: usize,
        examples: Vec<String>,
        reason: String,
    },
    #[error("top program does not reproduce example {example}")]
    Verification { example: String },
}

/// The examples one rewrite rule has to explain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSpec {
    pub examples: Vec<OperationExample>,
}

impl RuleSpec {
    fn labels(&self) -> Vec<String> {
        self.examples
            .iter()
            .map(|e| format!("{}@{}", e.example_id, e.anchor_path))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alternative {
    pub filters: Vec<ContextExpr>,
    pub operations: Vec<Operation>,
}

/// Interchangeable filter/operation choices for one rule. Any filter of an
/// alternative combines with any operation of the same alternative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCandidates {
    pub examples: Vec<String>,
    pub alternatives: Vec<Alternative>,
}

impl RuleCandidates {
    pub fn rules(&self) -> impl Iterator<Item = RewriteRule> + '_ {
        self.alternatives.iter().flat_map(|a| {
            a.filters.iter().flat_map(move |f| {
                a.operations.iter().map(move |op| RewriteRule {
                    location: f.clone(),
                    operation: op.clone(),
                })
            })
        })
    }

    pub fn count(&self) -> usize {
        self.alternatives.iter().map(|a| a.filters.len() * a.operations.len()).sum()
    }

    pub fn best(&self, weights: &Weights) -> RewriteRule {
        self.rules()
            .min_by(|a, b| compare_rules(a, b, weights))
            .expect("rule candidates are non-empty")
    }

    fn ranked(&self, weights: &Weights) -> Vec<RewriteRule> {
        let mut rules: Vec<RewriteRule> = self.rules().collect();
        rules.sort_by(|a, b| compare_rules(a, b, weights));
        rules
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub rules: Vec<RuleCandidates>,
}

impl CandidateSet {
    /// Number of programs represented, saturating.
    pub fn count(&self) -> u128 {
        self.rules
            .iter()
            .fold(1u128, |acc, r| acc.saturating_mul(r.count() as u128))
    }

    pub fn top(&self, weights: &Weights) -> TransformationProgram {
        TransformationProgram::new(self.rules.iter().map(|r| r.best(weights)).collect())
    }

    /// Up to `limit` programs, ranked. Each rule contributes its best
    /// choices first, so the prefix of the enumeration holds the leaders.
    pub fn programs(&self, weights: &Weights, limit: usize) -> Vec<TransformationProgram> {
        let per_rule: Vec<Vec<RewriteRule>> = self.rules.iter().map(|r| r.ranked(weights)).collect();
        let programs = product(&per_rule, limit)
            .into_iter()
            .map(TransformationProgram::new)
            .collect();
        rank(programs, weights)
    }
}

fn example_components(pairs: &[(SourceTree, SourceTree)]) -> Vec<Vec<Component>> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, (before, after))| {
            let id = before.origin.clone().unwrap_or_else(|| format!("{i:03}"));
            let script = edit_script(&before.root, &after.root);
            components_for(&script, &std::sync::Arc::new(before.root.clone()), &after.root, &id)
        })
        .collect()
}

pub fn witness_transformation(pairs: &[(SourceTree, SourceTree)], params: &ClusterParams) -> Vec<RuleSpec> {
    let all: Vec<Component> = example_components(pairs).into_iter().flatten().collect();
    specs_for(&all, params)
}

fn specs_for(components: &[Component], params: &ClusterParams) -> Vec<RuleSpec> {
    cluster_components(components, params)
        .into_iter()
        .map(|c| RuleSpec {
            examples: c.members.iter().map(Component::to_example).collect(),
        })
        .collect()
}

pub fn learn_location_filter(spec: &RuleSpec, depths: &[usize]) -> Result<Vec<ContextExpr>, String> {
    let targets: Vec<Target> = spec
        .examples
        .iter()
        .map(|e| Target {
            input: &e.input,
            location: &e.anchor_path,
            scope: &e.anchor_path,
            touched: &e.touched,
        })
        .collect();
    let found = filters_for(&targets, depths);
    if found.is_empty() {
        return Err("no location pattern selects every anchor".to_owned());
    }
    Ok(found)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Shape {
    Insert(Vec<usize>),
    Delete(Vec<usize>),
    Update,
}

impl Shape {
    fn name(&self) -> &'static str {
        match self {
            Shape::Insert(_) => "Insert",
            Shape::Delete(_) => "Delete",
            Shape::Update => "Update",
        }
    }
}

/// Positions `k` such that `longer` is `shorter` plus one child at `k`.
fn extra_child_positions(shorter: &TreeNode, longer: &TreeNode) -> Vec<usize> {
    if !shorter.same_label(longer) || longer.arity() != shorter.arity() + 1 {
        return Vec::new();
    }
    (1..=longer.arity())
        .filter(|&k| {
            let rest = longer.children[..k - 1].iter().chain(&longer.children[k..]);
            rest.eq(shorter.children.iter())
        })
        .collect()
}

fn shape_of(e: &OperationExample) -> Shape {
    let ins = extra_child_positions(&e.before_subtree, &e.after_subtree);
    if !ins.is_empty() {
        return Shape::Insert(ins);
    }
    let del = extra_child_positions(&e.after_subtree, &e.before_subtree);
    if !del.is_empty() {
        return Shape::Delete(del);
    }
    Shape::Update
}

fn common_shape(spec: &RuleSpec) -> Result<Shape, String> {
    let shapes: Vec<Shape> = spec.examples.iter().map(shape_of).collect();
    if shapes.iter().any(|s| s.name() != shapes[0].name()) {
        return Err("examples disagree on the operation kind".to_owned());
    }
    match &shapes[0] {
        Shape::Insert(_) => {
            let common: BTreeSet<usize> = shapes
                .iter()
                .map(|s| match s {
                    Shape::Insert(ks) => ks.iter().copied().collect::<BTreeSet<_>>(),
                    _ => unreachable!(),
                })
                .reduce(|a, b| &a & &b)
                .unwrap_or_default();
            if common.is_empty() {
                return Err("examples insert at different positions".to_owned());
            }
            Ok(Shape::Insert(common.into_iter().collect()))
        }
        Shape::Delete(_) => Ok(Shape::Delete(Vec::new())),
        Shape::Update => Ok(Shape::Update),
    }
}

fn sites<'a>(spec: &'a RuleSpec, locations: &'a [NodePath]) -> Vec<Site<'a>> {
    spec.examples
        .iter()
        .zip(locations)
        .map(|(e, x)| Site {
            input: &e.input,
            x,
            scope: &e.anchor_path,
            touched: &e.touched,
        })
        .collect()
}

/// True if the operation, run at `locations[i]`, rewrites every anchor to
/// its after-subtree.
fn replays(op: &Operation, spec: &RuleSpec, locations: &[NodePath]) -> bool {
    spec.examples.iter().zip(locations).all(|(e, x)| {
        apply_operation(op, &e.input, x, 0).is_ok_and(|edit| edit.target_path == e.anchor_path && edit.replacement == e.after_subtree)
    })
}

/// Operations grouped by the location they fire at.
struct Grouped {
    locations: Vec<NodePath>,
    operations: Vec<Operation>,
}

fn operation_groups(spec: &RuleSpec, weights: &Weights) -> Result<Vec<Grouped>, String> {
    let anchors: Vec<NodePath> = spec.examples.iter().map(|e| e.anchor_path.clone()).collect();
    let mut groups = Vec::new();
    match common_shape(spec)? {
        Shape::Update => {
            let fragments: Vec<&TreeNode> = spec.examples.iter().map(|e| &e.after_subtree).collect();
            let ops = learn_ast_builder(&sites(spec, &anchors), &fragments, weights)
                .into_iter()
                .map(|ast| Operation::Update { ast })
                .collect();
            groups.push(Grouped {
                locations: anchors,
                operations: ops,
            });
        }
        Shape::Insert(ks) => {
            let mut at_parent = Vec::new();
            for k in ks {
                let fragments: Vec<&TreeNode> = spec.examples.iter().map(|e| &e.after_subtree.children[k - 1]).collect();
                at_parent.extend(
                    learn_ast_builder(&sites(spec, &anchors), &fragments, weights)
                        .into_iter()
                        .map(|ast| Operation::Insert { ast, k }),
                );
                if spec.examples.iter().all(|e| k <= e.before_subtree.arity()) {
                    let siblings: Vec<NodePath> = anchors.iter().map(|a| a.child(k)).collect();
                    let ops = learn_ast_builder(&sites(spec, &siblings), &fragments, weights)
                        .into_iter()
                        .map(|ast| Operation::InsertBefore { ast })
                        .collect();
                    groups.push(Grouped {
                        locations: siblings,
                        operations: ops,
                    });
                }
            }
            groups.insert(
                0,
                Grouped {
                    locations: anchors,
                    operations: at_parent,
                },
            );
        }
        Shape::Delete(_) => {
            let occurrences: Vec<Vec<NodePath>> = spec
                .examples
                .iter()
                .map(|e| {
                    extra_child_positions(&e.after_subtree, &e.before_subtree)
                        .into_iter()
                        .map(|j| e.anchor_path.child(j))
                        .collect()
                })
                .collect();
            let ops = reference_candidates(&sites(spec, &anchors), &occurrences)
                .into_iter()
                .map(|reference| Operation::Delete { reference })
                .collect();
            groups.push(Grouped {
                locations: anchors,
                operations: ops,
            });
        }
    }
    for g in &mut groups {
        let locations = g.locations.clone();
        g.operations.retain(|op| replays(op, spec, &locations));
    }
    groups.retain(|g| !g.operations.is_empty());
    if groups.is_empty() {
        return Err("no operation reproduces every example".to_owned());
    }
    Ok(groups)
}

/// Every operation consistent with the spec, whatever location it needs.
pub fn learn_operation(spec: &RuleSpec, weights: &Weights) -> Result<Vec<Operation>, String> {
    Ok(operation_groups(spec, weights)?
        .into_iter()
        .flat_map(|g| g.operations)
        .collect())
}

pub fn learn_rule(spec: &RuleSpec, config: &SynthesisConfig) -> Result<RuleCandidates, String> {
    let mut alternatives = Vec::new();
    for g in operation_groups(spec, &config.weights)? {
        let targets: Vec<Target> = spec
            .examples
            .iter()
            .zip(&g.locations)
            .map(|(e, location)| Target {
                input: &e.input,
                location,
                scope: &e.anchor_path,
                touched: &e.touched,
            })
            .collect();
        let filters = filters_for(&targets, &config.depths);
        if !filters.is_empty() {
            alternatives.push(Alternative {
                filters,
                operations: g.operations,
            });
        }
    }
    if alternatives.is_empty() {
        return Err("no location pattern selects every anchor".to_owned());
    }
    Ok(RuleCandidates {
        examples: spec.labels(),
        alternatives,
    })
}

/// Learns one or more rules for a cluster, splitting it when no single
/// rule explains all of its examples.
fn learn_cluster(spec: &RuleSpec, config: &SynthesisConfig) -> Result<Vec<RuleCandidates>, String> {
    let reason = match learn_rule(spec, config) {
        Ok(r) => return Ok(vec![r]),
        Err(reason) => reason,
    };
    if spec.examples.len() == 1 {
        return Err(reason);
    }
    let mut parts: Vec<((&'static str, String), Vec<OperationExample>)> = Vec::new();
    for e in &spec.examples {
        let key = (shape_of(e).name(), e.before_subtree.kind.clone());
        match parts.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(e.clone()),
            None => parts.push((key, vec![e.clone()])),
        }
    }
    let parts: Vec<RuleSpec> = if parts.len() > 1 {
        parts.into_iter().map(|(_, examples)| RuleSpec { examples }).collect()
    } else {
        spec.examples.iter().map(|e| RuleSpec { examples: vec![e.clone()] }).collect()
    };
    log::debug!("splitting a {}-example cluster into {} parts: {reason}", spec.examples.len(), parts.len());
    let mut out = Vec::new();
    for part in &parts {
        out.extend(learn_cluster(part, config)?);
    }
    Ok(out)
}

fn learn_all(specs: &[RuleSpec], config: &SynthesisConfig) -> Vec<Result<Vec<RuleCandidates>, String>> {
    let workers = config.workers.max(1);
    if workers == 1 || specs.len() < 2 {
        return specs.iter().map(|s| learn_cluster(s, config)).collect();
    }
    let chunk = specs.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = specs
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| learn_cluster(s, config)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("synthesis worker panicked"))
            .collect()
    })
}

/// The edits of `program` on `input` that reproduce one of the observed
/// components, and the tree they materialize to.
pub fn replay_components(program: &TransformationProgram, input: &TreeNode, components: &[Component]) -> (Vec<Edit>, Option<TreeNode>) {
    let mut chosen: Vec<Edit> = Vec::new();
    for edit in apply_transformation(program, input) {
        let wanted = components
            .iter()
            .any(|c| c.anchor_path == edit.target_path && c.after_subtree == edit.replacement);
        if wanted && !chosen.iter().any(|e| e.target_path == edit.target_path) {
            chosen.push(edit);
        }
    }
    let out = materialize(input, &chosen).ok();
    (chosen, out)
}

pub fn synthesize(pairs: &[(SourceTree, SourceTree)], config: &SynthesisConfig) -> Result<CandidateSet, SynthesisError> {
    let per_pair = example_components(pairs);
    let all: Vec<Component> = per_pair.iter().flatten().cloned().collect();
    let specs = specs_for(&all, &config.cluster);
    let mut set = CandidateSet::default();
    for (cluster, (spec, learned)) in specs.iter().zip(learn_all(&specs, config)).enumerate() {
        match learned {
            Ok(rules) => set.rules.extend(rules),
            Err(reason) => {
                return Err(SynthesisError::Rule {
                    cluster,
                    examples: spec.labels(),
                    reason,
                })
            }
        }
    }

    let top = set.top(&config.weights);
    for (i, ((before, after), components)) in pairs.iter().zip(&per_pair).enumerate() {
        let (_, out) = replay_components(&top, &before.root, components);
        if out.as_ref() != Some(&after.root) {
            return Err(SynthesisError::Verification {
                example: before.origin.clone().unwrap_or_else(|| format!("{i:03}")),
            });
        }
    }
    Ok(set)
}

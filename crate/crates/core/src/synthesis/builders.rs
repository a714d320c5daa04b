//! Learning `AstBuilder`s that produce a given fragment at every example.

use std::collections::BTreeSet;

use crate::dsl::{build_ast, reference_matches, AstBuilder, ContextExpr, PathExpr};
use crate::ranking::{compare_builders, Weights};
use crate::tree::{NodePath, TreeNode};

use super::generalize::{anti_unify, generalize_all, relax};

const PER_POSITION: usize = 6;
const CHILD_COMBOS: usize = 32;
const OCCURRENCE_COMBOS: usize = 16;

/// Where a builder is evaluated: the location `x` in `input`, plus the
/// edited region used to relax reference contexts.
#[derive(Debug, Clone, Copy)]
pub struct Site<'a> {
    pub input: &'a TreeNode,
    pub x: &'a NodePath,
    pub scope: &'a NodePath,
    pub touched: &'a [NodePath],
}

/// Builders producing `fragments[i]` at `sites[i]`, best first.
pub fn learn_ast_builder(sites: &[Site], fragments: &[&TreeNode], weights: &Weights) -> Vec<AstBuilder> {
    let mut out: BTreeSet<AstBuilder> = BTreeSet::new();
    let first = fragments[0];
    if fragments.iter().all(|f| *f == first) {
        out.insert(AstBuilder::constant(first));
    }

    let occurrences: Vec<Vec<NodePath>> = sites
        .iter()
        .zip(fragments)
        .map(|(s, f)| {
            let x = s.input.get(s.x).expect("site location exists");
            x.all_nodes()
                .into_iter()
                .filter(|(_, n)| n == f)
                .map(|(rel, _)| s.x.join(&rel))
                .collect()
        })
        .collect();
    let references = reference_candidates(sites, &occurrences);

    // A fragment that can be copied whole from the input is not rebuilt.
    let decomposable = references.is_empty()
        && first.arity() > 0
        && fragments
            .iter()
            .all(|f| f.kind == first.kind && f.value == first.value && f.arity() == first.arity());
    out.extend(references);
    if decomposable {
        let mut per_child = Vec::with_capacity(first.arity());
        for i in 0..first.arity() {
            let children: Vec<&TreeNode> = fragments.iter().map(|f| &f.children[i]).collect();
            per_child.push(learn_ast_builder(sites, &children, weights));
        }
        for children in product(&per_child, CHILD_COMBOS) {
            out.insert(AstBuilder::ConstNode {
                kind: first.kind.clone(),
                value: first.value.clone(),
                children,
            });
        }
    }

    let mut ranked: Vec<AstBuilder> = out
        .into_iter()
        .filter(|b| {
            sites
                .iter()
                .zip(fragments)
                .all(|(s, f)| build_ast(b, s.input, s.x).as_ref() == Ok(*f))
        })
        .collect();
    ranked.sort_by(|a, b| compare_builders(a, b, weights));
    ranked.truncate(PER_POSITION);
    ranked
}

/// `Reference` builders resolving, at every site, to one of that site's
/// candidate occurrences. Contexts come from the occurrence itself or its
/// parent; the match ordinal must agree across sites.
pub fn reference_candidates(sites: &[Site], occurrences: &[Vec<NodePath>]) -> Vec<AstBuilder> {
    if occurrences.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut out = BTreeSet::new();
    for combo in product(occurrences, OCCURRENCE_COMBOS) {
        for ctx in contexts_for(sites, &combo) {
            let mut ordinal = None;
            let agreed = sites.iter().zip(&combo).all(|(s, occ)| {
                let Ok(found) = reference_matches(&ctx, s.input, s.x) else {
                    return false;
                };
                let Some(k) = found.iter().position(|p| p == occ).map(|i| i + 1) else {
                    return false;
                };
                *ordinal.get_or_insert(k) == k
            });
            if let (true, Some(k)) = (agreed, ordinal) {
                out.insert(AstBuilder::reference(ctx, k));
            }
        }
    }
    out.into_iter().collect()
}

fn contexts_for(sites: &[Site], occ: &[NodePath]) -> Vec<ContextExpr> {
    let mut out = Vec::new();
    let nodes: Vec<&TreeNode> = sites.iter().zip(occ).map(|(s, p)| s.input.get(p).expect("occurrence exists")).collect();
    if let Some(p) = anti_unify(&nodes) {
        out.push(ContextExpr::absolute(p, NodePath::root()));
    }

    let parents: Option<Vec<NodePath>> = occ.iter().map(NodePath::parent).collect();
    let Some(parents) = parents else { return out };
    let last = occ[0].last();
    if occ.iter().any(|p| p.last() != last) {
        return out;
    }
    let step = NodePath::new(vec![last.expect("non-root")]);
    let parent_nodes: Vec<&TreeNode> = sites
        .iter()
        .zip(&parents)
        .map(|(s, p)| s.input.get(p).expect("parent exists"))
        .collect();
    if let Some(p) = anti_unify(&parent_nodes) {
        out.push(ContextExpr::absolute(p, step.clone()));
    }
    let relaxed: Vec<_> = sites
        .iter()
        .zip(&parents)
        .zip(occ)
        .map(|((s, parent), target)| relax(s.input, parent, target, s.scope, s.touched))
        .collect();
    if let Some(p) = generalize_all(&relaxed) {
        let ctx = ContextExpr::absolute(p, step);
        if !out.contains(&ctx) {
            out.push(ctx);
        }
    }
    out.retain(|c| match &c.path {
        PathExpr::Absolute(p) => c.pattern.covers(p),
        PathExpr::Relative(..) => true,
    });
    out
}

/// Cartesian product of the choice lists, in lexicographic index order,
/// truncated to `limit` tuples.
pub fn product<T: Clone>(choices: &[Vec<T>], limit: usize) -> Vec<Vec<T>> {
    if choices.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut out = vec![Vec::new()];
    for options in choices {
        let mut next = Vec::new();
        'fill: for prefix in &out {
            for o in options {
                if next.len() == limit {
                    break 'fill;
                }
                let mut t = prefix.clone();
                t.push(o.clone());
                next.push(t);
            }
        }
        out = next;
    }
    out
}

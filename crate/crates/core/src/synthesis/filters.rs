//! Location filters: which nodes a rule fires on.

use std::collections::BTreeSet;

use crate::dsl::{select_locations, ContextExpr};
use crate::tree::{NodePath, TreeNode};

use super::generalize::{anti_unify, generalize_all, relax};

/// A location a filter must select, with the edited region it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct Target<'a> {
    pub input: &'a TreeNode,
    pub location: &'a NodePath,
    pub scope: &'a NodePath,
    pub touched: &'a [NodePath],
}

/// Context candidates, one or two per depth, each selecting every target.
pub fn filters_for(targets: &[Target], depths: &[usize]) -> Vec<ContextExpr> {
    let mut out: BTreeSet<ContextExpr> = BTreeSet::new();
    for &d in depths {
        let tops: Option<Vec<NodePath>> = targets.iter().map(|t| t.location.ancestor(d)).collect();
        let Some(tops) = tops else { continue };
        let steps = tops[0].relative(targets[0].location).expect("ancestor prefix");
        if tops
            .iter()
            .zip(targets)
            .any(|(top, t)| top.relative(t.location).as_ref() != Some(&steps))
        {
            continue;
        }
        let nodes: Vec<&TreeNode> = tops
            .iter()
            .zip(targets)
            .map(|(top, t)| t.input.get(top).expect("ancestor exists"))
            .collect();
        let relaxed: Vec<_> = tops
            .iter()
            .zip(targets)
            .map(|(top, t)| relax(t.input, top, t.location, t.scope, t.touched))
            .collect();
        for pattern in [anti_unify(&nodes), generalize_all(&relaxed)].into_iter().flatten() {
            if pattern.covers(&steps) {
                out.insert(ContextExpr::absolute(pattern, steps.clone()));
            }
        }
    }
    out.into_iter()
        .filter(|ctx| {
            targets
                .iter()
                .all(|t| select_locations(ctx, t.input).contains(t.location))
        })
        .collect()
}

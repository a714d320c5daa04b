//! Pattern generalization: least-general generalization of trees, merging
//! of patterns, and the edit-focused relaxation of a single example.

use crate::dsl::{Pattern, Token};
use crate::tree::{NodePath, TreeNode};

/// Least-general pattern matching every tree, or `None` when the root kinds
/// disagree. Below the root, disagreeing kinds become a wildcard.
pub fn anti_unify(trees: &[&TreeNode]) -> Option<Pattern> {
    let first = *trees.first()?;
    if trees.iter().any(|t| t.kind != first.kind) {
        return None;
    }
    Some(lgg(trees))
}

fn lgg(trees: &[&TreeNode]) -> Pattern {
    let first = trees[0];
    if trees.iter().any(|t| t.kind != first.kind) {
        return Pattern::Leaf(Token::Wildcard);
    }
    if trees.iter().all(|t| *t == first) {
        return Pattern::Leaf(Token::concrete(first));
    }
    if first.arity() == 0 || trees.iter().any(|t| t.arity() != first.arity()) {
        return Pattern::Leaf(Token::abstract_kind(&first.kind));
    }
    let token = if trees.iter().all(|t| t.value == first.value) {
        Token::concrete(&first.label())
    } else {
        Token::abstract_kind(&first.kind)
    };
    let children = (0..first.arity())
        .map(|i| lgg(&trees.iter().map(|t| &t.children[i]).collect::<Vec<_>>()))
        .collect();
    Pattern::Branch(token, children)
}

/// Concrete leaves with children are unfolded so both sides can be walked
/// position by position.
fn unfold(p: &Pattern) -> Pattern {
    match p {
        Pattern::Leaf(Token::Concrete { value, .. }) if !value.is_leaf() => Pattern::Branch(
            Token::concrete(&value.label()),
            value.children.iter().map(|c| Pattern::Leaf(Token::concrete(c))).collect(),
        ),
        other => other.clone(),
    }
}

/// Least-general pattern more general than both `a` and `b`; `None` when
/// the root kinds disagree.
pub fn generalize(a: &Pattern, b: &Pattern) -> Option<Pattern> {
    match (a.kind(), b.kind()) {
        (Some(x), Some(y)) if x == y => Some(merge(a, b)),
        (None, None) => Some(Pattern::Leaf(Token::Wildcard)),
        _ => None,
    }
}

fn merge(a: &Pattern, b: &Pattern) -> Pattern {
    if a == b {
        return a.clone();
    }
    let kind = match (a.kind(), b.kind()) {
        (Some(x), Some(y)) if x == y => x.to_owned(),
        _ => return Pattern::Leaf(Token::Wildcard),
    };
    if let (Pattern::Leaf(Token::Concrete { value: x, .. }), Pattern::Leaf(Token::Concrete { value: y, .. })) = (a, b) {
        return lgg(&[x, y]);
    }
    match (unfold(a), unfold(b)) {
        (Pattern::Branch(ta, ca), Pattern::Branch(tb, cb)) if ca.len() == cb.len() && !ca.is_empty() => {
            let token = if ta == tb { ta } else { Token::Abstract { kind } };
            Pattern::Branch(token, ca.iter().zip(&cb).map(|(x, y)| merge(x, y)).collect())
        }
        _ => Pattern::Leaf(Token::Abstract { kind }),
    }
}

pub fn generalize_all<'a, I: IntoIterator<Item = &'a Pattern>>(patterns: I) -> Option<Pattern> {
    let mut it = patterns.into_iter();
    let first = it.next()?.clone();
    it.try_fold(first, |acc, p| generalize(&acc, p))
}

/// Edit-focused pattern for the subtree at `top` of `input`.
///
/// Nodes on the way down to `target` keep their labels. Inside `scope` (the
/// edited subtree) nodes that were deleted or relabeled, and their
/// ancestors, stay concrete while untouched subtrees are reduced to their
/// kind. Everything else becomes a wildcard.
pub fn relax(input: &TreeNode, top: &NodePath, target: &NodePath, scope: &NodePath, touched: &[NodePath]) -> Pattern {
    let node = input.get(top).expect("relax starts at an existing node");
    relax_at(node, top.clone(), target, scope, touched)
}

fn relax_at(node: &TreeNode, path: NodePath, target: &NodePath, scope: &NodePath, touched: &[NodePath]) -> Pattern {
    let walk = |node: &TreeNode| -> Vec<Pattern> {
        node.children
            .iter()
            .enumerate()
            .map(|(i, c)| relax_at(c, path.child(i + 1), target, scope, touched))
            .collect()
    };
    if path.is_proper_ancestor_of(target) {
        return Pattern::Branch(Token::concrete(&node.label()), walk(node));
    }
    if scope.is_prefix_of(&path) {
        if !touched.iter().any(|t| path.is_prefix_of(t)) {
            return Pattern::Leaf(Token::abstract_kind(&node.kind));
        }
        if node.is_leaf() {
            return Pattern::Leaf(Token::concrete(node));
        }
        return Pattern::Branch(Token::concrete(&node.label()), walk(node));
    }
    Pattern::Leaf(Token::Wildcard)
}

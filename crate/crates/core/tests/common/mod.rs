#![allow(dead_code)]

pub mod programs;
pub mod scenarios;

use std::path::PathBuf;

use astxform::tree::{parse_tree, SourceTree, TreeNode};
use rand::rngs::StdRng;
use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(format!("{name}.tree.json"))
}

pub fn fixture(name: &str) -> SourceTree {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_tree(&text).expect("fixture parses")
}

pub fn fixture_pair(name: &str) -> (SourceTree, SourceTree) {
    let before = fixture(&format!("{name}.before"));
    (
        SourceTree::with_origin(before.root, name),
        fixture(&format!("{name}.after")),
    )
}

/// Random tree of exactly `size` nodes over a small label alphabet, so that
/// label collisions are frequent.
pub fn random_tree(rng: &mut StdRng, size: usize) -> TreeNode {
    const KINDS: [&str; 3] = ["A", "B", "C"];
    const VALUES: [Option<&str>; 3] = [None, Some("x"), Some("y")];
    let kind = KINDS[rng.gen_range(0..KINDS.len())];
    let value = VALUES[rng.gen_range(0..VALUES.len())];
    let mut left = size - 1;
    let mut children = Vec::new();
    while left > 0 {
        let take = rng.gen_range(1..=left);
        children.push(random_tree(rng, take));
        left -= take;
    }
    TreeNode::new(kind, value, children)
}

pub fn random_sized_tree(rng: &mut StdRng, max: usize) -> TreeNode {
    let size = rng.gen_range(1..=max);
    random_tree(rng, size)
}

/// A tree obtained from `t` by a few random relabels, deletions and
/// insertions, so that pairs are related rather than independent.
pub fn perturb(rng: &mut StdRng, t: &TreeNode, max_nodes: usize) -> TreeNode {
    let mut out = t.clone();
    for _ in 0..rng.gen_range(1..=3) {
        let nodes: Vec<_> = out.all_nodes().into_iter().map(|(p, _)| p).collect();
        let path = nodes[rng.gen_range(0..nodes.len())].clone();
        let node = out.get_mut(&path).expect("existing path");
        match rng.gen_range(0..3) {
            0 => node.value = Some(["x", "y", "z"][rng.gen_range(0..3)].to_owned()),
            1 if !node.children.is_empty() => {
                let i = rng.gen_range(0..node.children.len());
                let removed = node.children.remove(i);
                for (j, c) in removed.children.into_iter().enumerate() {
                    node.children.insert(i + j, c);
                }
            }
            _ => {
                if out.node_count() < max_nodes {
                    let node = out.get_mut(&path).expect("existing path");
                    let i = rng.gen_range(0..=node.children.len());
                    node.children.insert(i, TreeNode::leaf("C", "new"));
                }
            }
        }
    }
    out
}

struct Flat {
    labels: Vec<(String, Option<String>)>,
    pre: Vec<usize>,
    post: Vec<usize>,
}

fn flatten(t: &TreeNode) -> Flat {
    fn walk(t: &TreeNode, f: &mut Flat, post: &mut usize) -> usize {
        let id = f.labels.len();
        f.labels.push((t.kind.clone(), t.value.clone()));
        f.pre.push(id);
        f.post.push(0);
        for c in &t.children {
            walk(c, f, post);
        }
        f.post[id] = *post;
        *post += 1;
        id
    }
    let mut f = Flat {
        labels: Vec::new(),
        pre: Vec::new(),
        post: Vec::new(),
    };
    let mut post = 0;
    walk(t, &mut f, &mut post);
    f
}

/// Minimum unit-cost edit distance by exhaustive search over all mappings
/// that preserve ancestry and sibling order. Two pairs are compatible when
/// their pre-order and post-order ranks compare the same way on both sides.
pub fn exhaustive_ted(a: &TreeNode, b: &TreeNode) -> usize {
    let fa = flatten(a);
    let fb = flatten(b);
    let mut best = fa.labels.len() + fb.labels.len();
    let mut used = vec![false; fb.labels.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    search(&fa, &fb, 0, &mut used, &mut pairs, 0, &mut best);
    best
}

fn search(
    fa: &Flat,
    fb: &Flat,
    i: usize,
    used: &mut Vec<bool>,
    pairs: &mut Vec<(usize, usize)>,
    relabels: usize,
    best: &mut usize,
) {
    let na = fa.labels.len();
    let nb = fb.labels.len();
    let cost = |pairs: &[(usize, usize)], relabels: usize| na + nb - 2 * pairs.len() + relabels;
    // Lower bound: every remaining input node could still be matched for free.
    let remaining = na - i;
    let optimistic = cost(pairs, relabels).saturating_sub(2 * remaining.min(nb - pairs.len()));
    if optimistic >= *best {
        return;
    }
    if i == na {
        *best = (*best).min(cost(pairs, relabels));
        return;
    }
    search(fa, fb, i + 1, used, pairs, relabels, best);
    for j in 0..nb {
        if used[j] {
            continue;
        }
        let ok = pairs.iter().all(|&(x, y)| {
            (fa.pre[x] < fa.pre[i]) == (fb.pre[y] < fb.pre[j]) && (fa.post[x] < fa.post[i]) == (fb.post[y] < fb.post[j])
        });
        if !ok {
            continue;
        }
        used[j] = true;
        pairs.push((i, j));
        let r = relabels + usize::from(fa.labels[i] != fb.labels[j]);
        search(fa, fb, i + 1, used, pairs, r, best);
        pairs.pop();
        used[j] = false;
    }
}

/// The six-student corpus, A students built from the fig1 fixtures.
pub fn mini_students() -> Vec<(String, TreeNode, TreeNode)> {
    let a = fixture_pair("fig1a");
    let b = fixture_pair("fig1b");
    scenarios::student_programs((a.0.root, a.1.root), (b.0.root, b.1.root))
}

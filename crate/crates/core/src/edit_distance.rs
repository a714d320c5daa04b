//! Zhang-Shasha tree edit distance with edit script recovery.
//!
//! Unit costs: insert and delete cost 1, relabeling costs 1 when the
//! `(kind, value)` label differs and 0 otherwise. The recovered mapping is
//! deterministic: while backtracking, keeping a node pair is preferred over
//! deleting or inserting it.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::tree::{NodePath, SourceTree, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EditKind {
    Insert,
    Delete,
    Update,
}

/// A single node-level edit.
///
/// `payload` is the new label (a childless node) for inserts and updates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeEdit {
    pub op_kind: EditKind,
    pub input_path: Option<NodePath>,
    pub output_path: Option<NodePath>,
    pub payload: Option<TreeNode>,
}

impl NodeEdit {
    pub fn delete(input: NodePath) -> Self {
        NodeEdit {
            op_kind: EditKind::Delete,
            input_path: Some(input),
            output_path: None,
            payload: None,
        }
    }

    pub fn insert(output: NodePath, payload: TreeNode) -> Self {
        NodeEdit {
            op_kind: EditKind::Insert,
            input_path: None,
            output_path: Some(output),
            payload: Some(payload),
        }
    }

    pub fn update(input: NodePath, output: NodePath, payload: TreeNode) -> Self {
        NodeEdit {
            op_kind: EditKind::Update,
            input_path: Some(input),
            output_path: Some(output),
            payload: Some(payload),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EditScript {
    pub edits: Vec<NodeEdit>,
    pub cost: usize,
    /// Matched `(input, output)` pairs, kept or relabeled, in input pre-order.
    pub mapping: Vec<(NodePath, NodePath)>,
}

impl EditScript {
    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn input_to_output(&self) -> BTreeMap<NodePath, NodePath> {
        self.mapping.iter().cloned().collect()
    }

    pub fn output_to_input(&self) -> BTreeMap<NodePath, NodePath> {
        self.mapping.iter().map(|(a, b)| (b.clone(), a.clone())).collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("path {0} does not exist in the input tree")]
    MissingInput(NodePath),
    #[error("input node {0} is both kept and deleted, or neither")]
    Coverage(NodePath),
    #[error("output position {0} is produced twice")]
    Duplicate(NodePath),
    #[error("update at {0} has no matching mapping pair")]
    UnmappedUpdate(NodePath),
    #[error("edit is missing a required field: {0:?}")]
    Malformed(Box<NodeEdit>),
    #[error("output positions do not form a tree (orphan at {0})")]
    Shape(NodePath),
}

/// Postorder view of a tree: 1-based indices, slot 0 is the empty forest.
struct Indexed<'a> {
    nodes: Vec<&'a TreeNode>,
    paths: Vec<NodePath>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Indexed<'a> {
    fn new(root: &'a TreeNode) -> Self {
        let n = root.node_count();
        let mut ix = Indexed {
            nodes: Vec::with_capacity(n + 1),
            paths: Vec::with_capacity(n + 1),
            leftmost: Vec::with_capacity(n + 1),
            keyroots: Vec::new(),
        };
        ix.nodes.push(root);
        ix.paths.push(NodePath::root());
        ix.leftmost.push(0);
        ix.visit(root, NodePath::root());

        let mut highest: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 1..=n {
            highest.insert(ix.leftmost[i], i);
        }
        ix.keyroots = highest.into_values().collect();
        ix.keyroots.sort_unstable();
        ix
    }

    fn visit(&mut self, node: &'a TreeNode, path: NodePath) -> usize {
        let mut first_leaf = None;
        for (i, child) in node.children.iter().enumerate() {
            let c = self.visit(child, path.child(i + 1));
            if first_leaf.is_none() {
                first_leaf = Some(self.leftmost[c]);
            }
        }
        self.nodes.push(node);
        self.paths.push(path);
        let me = self.nodes.len() - 1;
        self.leftmost.push(first_leaf.unwrap_or(me));
        me
    }

    fn len(&self) -> usize {
        self.nodes.len() - 1
    }
}

struct Solver<'a> {
    a: Indexed<'a>,
    b: Indexed<'a>,
    tree: Vec<Vec<usize>>,
    forest: Vec<Vec<usize>>,
}

impl<'a> Solver<'a> {
    fn new(a: &'a TreeNode, b: &'a TreeNode) -> Self {
        let a = Indexed::new(a);
        let b = Indexed::new(b);
        let (n, m) = (a.len(), b.len());
        let mut solver = Solver {
            a,
            b,
            tree: vec![vec![0; m + 1]; n + 1],
            forest: vec![vec![0; m + 1]; n + 1],
        };
        for ki in 0..solver.a.keyroots.len() {
            for kj in 0..solver.b.keyroots.len() {
                let (i, j) = (solver.a.keyroots[ki], solver.b.keyroots[kj]);
                solver.forest_dist(i, j);
            }
        }
        solver
    }

    fn relabel(&self, i: usize, j: usize) -> usize {
        usize::from(!self.a.nodes[i].same_label(self.b.nodes[j]))
    }

    fn forest_dist(&mut self, i: usize, j: usize) {
        let (li, lj) = (self.a.leftmost[i], self.b.leftmost[j]);
        let fd = &mut self.forest;
        fd[li - 1][lj - 1] = 0;
        for di in li..=i {
            fd[di][lj - 1] = fd[di - 1][lj - 1] + 1;
        }
        for dj in lj..=j {
            fd[li - 1][dj] = fd[li - 1][dj - 1] + 1;
        }
        for di in li..=i {
            for dj in lj..=j {
                let del = self.forest[di - 1][dj] + 1;
                let ins = self.forest[di][dj - 1] + 1;
                if self.a.leftmost[di] == li && self.b.leftmost[dj] == lj {
                    let rel = self.forest[di - 1][dj - 1] + self.relabel(di, dj);
                    let best = del.min(ins).min(rel);
                    self.forest[di][dj] = best;
                    self.tree[di][dj] = best;
                } else {
                    let sub = self.forest[self.a.leftmost[di] - 1][self.b.leftmost[dj] - 1]
                        + self.tree[di][dj];
                    self.forest[di][dj] = del.min(ins).min(sub);
                }
            }
        }
    }

    fn cost(&self) -> usize {
        self.tree[self.a.len()][self.b.len()]
    }

    fn mapping(&mut self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let mut stack = vec![(self.a.len(), self.b.len())];
        while let Some((i, j)) = stack.pop() {
            self.forest_dist(i, j);
            let (li, lj) = (self.a.leftmost[i], self.b.leftmost[j]);
            let (mut r, mut c) = (i, j);
            while r >= li || c >= lj {
                let here = self.forest[r][c];
                if r >= li && c >= lj {
                    if self.a.leftmost[r] == li && self.b.leftmost[c] == lj {
                        if here == self.forest[r - 1][c - 1] + self.relabel(r, c) {
                            pairs.push((r, c));
                            r -= 1;
                            c -= 1;
                            continue;
                        }
                    } else {
                        let (lr, lc) = (self.a.leftmost[r], self.b.leftmost[c]);
                        if here == self.forest[lr - 1][lc - 1] + self.tree[r][c] {
                            stack.push((r, c));
                            r = lr - 1;
                            c = lc - 1;
                            continue;
                        }
                    }
                }
                if r >= li && here == self.forest[r - 1][c] + 1 {
                    r -= 1;
                } else if c >= lj && here == self.forest[r][c - 1] + 1 {
                    c -= 1;
                } else {
                    unreachable!("forest distance table is inconsistent at ({r}, {c})");
                }
            }
        }
        pairs
    }
}

/// Distance only, without recovering the script.
pub fn tree_distance(before: &TreeNode, after: &TreeNode) -> usize {
    Solver::new(before, after).cost()
}

pub fn tree_edit_distance(before: &SourceTree, after: &SourceTree) -> EditScript {
    edit_script(&before.root, &after.root)
}

pub fn edit_script(before: &TreeNode, after: &TreeNode) -> EditScript {
    let mut solver = Solver::new(before, after);
    let cost = solver.cost();
    let pairs = solver.mapping();

    let mut kept_a = vec![false; solver.a.len() + 1];
    let mut kept_b = vec![false; solver.b.len() + 1];
    let mut mapping = Vec::with_capacity(pairs.len());
    let mut changes: Vec<NodeEdit> = Vec::new();
    for &(i, j) in &pairs {
        kept_a[i] = true;
        kept_b[j] = true;
        let (pa, pb) = (solver.a.paths[i].clone(), solver.b.paths[j].clone());
        if solver.relabel(i, j) == 1 {
            changes.push(NodeEdit::update(pa.clone(), pb.clone(), solver.b.nodes[j].label()));
        }
        mapping.push((pa, pb));
    }
    for (i, kept) in kept_a.iter().enumerate().skip(1) {
        if !kept {
            changes.push(NodeEdit::delete(solver.a.paths[i].clone()));
        }
    }
    changes.sort_by(|x, y| x.input_path.cmp(&y.input_path));

    let mut inserts: Vec<NodeEdit> = (1..=solver.b.len())
        .filter(|&j| !kept_b[j])
        .map(|j| NodeEdit::insert(solver.b.paths[j].clone(), solver.b.nodes[j].label()))
        .collect();
    inserts.sort_by(|x, y| x.output_path.cmp(&y.output_path));
    changes.extend(inserts);
    mapping.sort();

    debug_assert_eq!(cost, changes.len());
    EditScript {
        edits: changes,
        cost,
        mapping,
    }
}

/// Rebuilds the output tree from `before` and a script computed for it.
pub fn replay(script: &EditScript, before: &SourceTree) -> Result<SourceTree, ReplayError> {
    let root = replay_tree(script, &before.root)?;
    Ok(SourceTree {
        root,
        origin: before.origin.clone(),
    })
}

pub fn replay_tree(script: &EditScript, before: &TreeNode) -> Result<TreeNode, ReplayError> {
    let mut updates: BTreeMap<(NodePath, NodePath), TreeNode> = BTreeMap::new();
    let mut deleted: BTreeSet<NodePath> = BTreeSet::new();
    let mut inserted: Vec<(NodePath, TreeNode)> = Vec::new();
    for edit in &script.edits {
        match (edit.op_kind, &edit.input_path, &edit.output_path, &edit.payload) {
            (EditKind::Delete, Some(a), None, None) => {
                if !deleted.insert(a.clone()) {
                    return Err(ReplayError::Coverage(a.clone()));
                }
            }
            (EditKind::Insert, None, Some(b), Some(p)) => inserted.push((b.clone(), p.label())),
            (EditKind::Update, Some(a), Some(b), Some(p)) => {
                updates.insert((a.clone(), b.clone()), p.label());
            }
            _ => return Err(ReplayError::Malformed(Box::new(edit.clone()))),
        }
    }

    let mut labels: BTreeMap<NodePath, TreeNode> = BTreeMap::new();
    let mut kept: BTreeSet<NodePath> = BTreeSet::new();
    for (a, b) in &script.mapping {
        let node = before.get(a).ok_or_else(|| ReplayError::MissingInput(a.clone()))?;
        let label = updates
            .remove(&(a.clone(), b.clone()))
            .unwrap_or_else(|| node.label());
        if !kept.insert(a.clone()) || labels.insert(b.clone(), label).is_some() {
            return Err(ReplayError::Duplicate(b.clone()));
        }
    }
    if let Some(((a, _), _)) = updates.into_iter().next() {
        return Err(ReplayError::UnmappedUpdate(a));
    }
    for (b, label) in inserted {
        if labels.insert(b.clone(), label).is_some() {
            return Err(ReplayError::Duplicate(b));
        }
    }
    for (path, _) in before.all_nodes() {
        if kept.contains(&path) == deleted.contains(&path) {
            return Err(ReplayError::Coverage(path));
        }
    }
    if let Some(d) = deleted.iter().find(|d| before.get(d).is_none()) {
        return Err(ReplayError::MissingInput(d.clone()));
    }

    let total = labels.len();
    let root = assemble(&mut labels, NodePath::root())?;
    if let Some(orphan) = labels.keys().next() {
        return Err(ReplayError::Shape(orphan.clone()));
    }
    debug_assert_eq!(root.node_count(), total);
    Ok(root)
}

fn assemble(labels: &mut BTreeMap<NodePath, TreeNode>, at: NodePath) -> Result<TreeNode, ReplayError> {
    let mut node = labels.remove(&at).ok_or_else(|| ReplayError::Shape(at.clone()))?;
    let mut index = 1;
    while labels.contains_key(&at.child(index)) {
        node.children.push(assemble(labels, at.child(index))?);
        index += 1;
    }
    Ok(node)
}

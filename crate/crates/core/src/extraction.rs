//! Turning node-level edit scripts into subtree-level operation examples.
//!
//! Node edits are grouped into connected components, each component is
//! anchored at a node pair `(input, output)` such that replacing the input
//! subtree by the output subtree performs exactly that component's edits.
//! Components from all example pairs are then clustered with DBSCAN; each
//! cluster is conjectured to be the footprint of one rewrite rule.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::edit_distance::{tree_distance, EditKind, EditScript, NodeEdit};
use crate::tree::{NodePath, SourceTree, TreeNode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub edits: Vec<NodeEdit>,
    pub before_subtree: TreeNode,
    pub after_subtree: TreeNode,
    pub anchor_path: NodePath,
    pub output_anchor: NodePath,
    pub example_id: String,
    /// The whole input program, for context patterns above the anchor.
    pub input: Arc<TreeNode>,
    /// Input paths of deleted or relabeled nodes.
    pub touched: Vec<NodePath>,
    /// Sorted edit signatures, see [`DistanceMetric::EditSignature`].
    pub signature: Vec<String>,
}

impl Component {
    pub fn to_example(&self) -> OperationExample {
        OperationExample {
            before_subtree: self.before_subtree.clone(),
            after_subtree: self.after_subtree.clone(),
            anchor_path: self.anchor_path.clone(),
            example_id: self.example_id.clone(),
            input: Arc::clone(&self.input),
            touched: self.touched.clone(),
        }
    }

    fn sort_key(&self) -> (&str, &NodePath) {
        (&self.example_id, &self.anchor_path)
    }
}

/// One observed application of a rewrite rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationExample {
    pub before_subtree: TreeNode,
    pub after_subtree: TreeNode,
    pub anchor_path: NodePath,
    pub example_id: String,
    pub input: Arc<TreeNode>,
    pub touched: Vec<NodePath>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub members: Vec<Component>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    /// Normalized symmetric difference of the components' edit multisets,
    /// where an edit is identified by its kind and the labels it touches.
    #[default]
    EditSignature,
    /// Before-side plus after-side tree distance over `1 + largest subtree`.
    Subtree,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: usize,
    pub metric: DistanceMetric,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            eps: 0.5,
            min_pts: 1,
            metric: DistanceMetric::EditSignature,
        }
    }
}

struct Touch {
    in_node: Option<NodePath>,
    out_node: Option<NodePath>,
    in_parent: Option<NodePath>,
    out_parent: Option<NodePath>,
}

fn related(a: &Option<NodePath>, a_parent: &Option<NodePath>, b: &Option<NodePath>, b_parent: &Option<NodePath>) -> bool {
    let parent_child = |node: &Option<NodePath>, parent: &Option<NodePath>| {
        matches!((node, parent), (Some(n), Some(p)) if n == p)
    };
    parent_child(a, b_parent)
        || parent_child(b, a_parent)
        || matches!((a_parent, b_parent), (Some(x), Some(y)) if x == y)
}

struct Anchoring<'a> {
    before: &'a TreeNode,
    after: &'a TreeNode,
    to_out: BTreeMap<NodePath, NodePath>,
}

impl Anchoring<'_> {
    fn anchor(&self, edits: &[&NodeEdit]) -> (NodePath, NodePath) {
        let q: Vec<&NodePath> = edits.iter().filter_map(|e| e.input_path.as_ref()).collect();
        let p: Vec<&NodePath> = edits.iter().filter_map(|e| e.output_path.as_ref()).collect();

        let (mut a, mut b) = self
            .to_out
            .iter()
            .filter(|(x, y)| q.iter().all(|t| x.is_prefix_of(t)) && p.iter().all(|t| y.is_prefix_of(t)))
            .max_by_key(|(x, _)| x.len())
            .map(|(x, y)| (x.clone(), y.clone()))
            .unwrap_or_default();

        // Narrow to a single child slot while everything happens inside it.
        loop {
            let slot = q
                .iter()
                .chain(p.iter())
                .next()
                .and_then(|first| {
                    let base = if q.contains(first) { &a } else { &b };
                    first.steps().get(base.len()).copied()
                });
            let Some(j) = slot else { break };
            let (ca, cb) = (a.child(j), b.child(j));
            let inside = q.iter().all(|t| ca.is_prefix_of(t)) && p.iter().all(|t| cb.is_prefix_of(t));
            let exists = self.before.get(&ca).is_some() && self.after.get(&cb).is_some();
            let closed = self
                .to_out
                .iter()
                .all(|(x, y)| ca.is_prefix_of(x) == cb.is_prefix_of(y));
            if inside && exists && closed {
                a = ca;
                b = cb;
            } else {
                break;
            }
        }
        (a, b)
    }
}

fn overlaps(x: &(NodePath, NodePath), y: &(NodePath, NodePath)) -> bool {
    x.0.is_prefix_of(&y.0) || y.0.is_prefix_of(&x.0) || x.1.is_prefix_of(&y.1) || y.1.is_prefix_of(&x.1)
}

fn signature(edit: &NodeEdit, before: &TreeNode) -> String {
    let label = |n: &TreeNode| n.label().to_string();
    match edit.op_kind {
        EditKind::Insert => format!("I{}", label(edit.payload.as_ref().expect("insert payload"))),
        EditKind::Delete => {
            let node = edit.input_path.as_ref().and_then(|p| before.get(p));
            format!("D{}", node.map(label).unwrap_or_default())
        }
        EditKind::Update => {
            let node = edit.input_path.as_ref().and_then(|p| before.get(p));
            format!(
                "U{}{}",
                node.map(label).unwrap_or_default(),
                label(edit.payload.as_ref().expect("update payload"))
            )
        }
    }
}

/// Groups `script.edits` into subtree-level components.
pub fn connected_components(script: &EditScript, before: &SourceTree, after: &SourceTree) -> Vec<Component> {
    let example_id = before.origin.clone().unwrap_or_default();
    components_for(script, &Arc::new(before.root.clone()), &after.root, &example_id)
}

pub(crate) fn components_for(
    script: &EditScript,
    before: &Arc<TreeNode>,
    after: &TreeNode,
    example_id: &str,
) -> Vec<Component> {
    if script.edits.is_empty() {
        return Vec::new();
    }
    let to_out = script.input_to_output();
    let to_in = script.output_to_input();
    let touches: Vec<Touch> = script
        .edits
        .iter()
        .map(|e| {
            let in_parent = match (&e.input_path, &e.output_path) {
                (Some(a), _) => a.parent(),
                (None, Some(b)) => b.parent().and_then(|p| to_in.get(&p).cloned()),
                _ => None,
            };
            let out_parent = match (&e.output_path, &e.input_path) {
                (Some(b), _) => b.parent(),
                (None, Some(a)) => a.parent().and_then(|p| to_out.get(&p).cloned()),
                _ => None,
            };
            Touch {
                in_node: e.input_path.clone(),
                out_node: e.output_path.clone(),
                in_parent,
                out_parent,
            }
        })
        .collect();

    let n = touches.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn find(group: &mut [usize], mut i: usize) -> usize {
        while group[i] != i {
            group[i] = group[group[i]];
            i = group[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (&touches[i], &touches[j]);
            if related(&x.in_node, &x.in_parent, &y.in_node, &y.in_parent)
                || related(&x.out_node, &x.out_parent, &y.out_node, &y.out_parent)
            {
                let (gi, gj) = (find(&mut group, i), find(&mut group, j));
                group[gi.max(gj)] = gi.min(gj);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let g = find(&mut group, i);
        groups.entry(g).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();

    let anchoring = Anchoring {
        before,
        after,
        to_out,
    };
    let anchor_of = |members: &[usize]| {
        let edits: Vec<&NodeEdit> = members.iter().map(|&i| &script.edits[i]).collect();
        anchoring.anchor(&edits)
    };

    // Nested or coinciding anchors become one component.
    let mut anchors: Vec<(NodePath, NodePath)> = groups.iter().map(|g| anchor_of(g)).collect();
    'merge: loop {
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if overlaps(&anchors[i], &anchors[j]) {
                    let moved = groups.remove(j);
                    anchors.remove(j);
                    groups[i].extend(moved);
                    groups[i].sort_unstable();
                    anchors[i] = anchor_of(&groups[i]);
                    continue 'merge;
                }
            }
        }
        break;
    }

    let mut out: Vec<Component> = groups
        .into_iter()
        .zip(anchors)
        .map(|(members, (a, b))| {
            let edits: Vec<NodeEdit> = members.iter().map(|&i| script.edits[i].clone()).collect();
            let touched: BTreeSet<NodePath> = edits.iter().filter_map(|e| e.input_path.clone()).collect();
            let mut signature: Vec<String> = edits.iter().map(|e| signature(e, before)).collect();
            signature.sort();
            Component {
                before_subtree: before.get(&a).expect("anchor exists in input").clone(),
                after_subtree: after.get(&b).expect("anchor exists in output").clone(),
                anchor_path: a,
                output_anchor: b,
                example_id: example_id.to_owned(),
                input: Arc::clone(before),
                touched: touched.into_iter().collect(),
                signature,
                edits,
            }
        })
        .collect();
    out.sort_by(|x, y| x.anchor_path.cmp(&y.anchor_path));
    out
}

pub fn component_distance(a: &Component, b: &Component, metric: DistanceMetric) -> f64 {
    match metric {
        DistanceMetric::EditSignature => {
            let total = a.signature.len() + b.signature.len();
            if total == 0 {
                return 0.0;
            }
            // Both signatures are sorted; count the multiset intersection.
            let (mut i, mut j, mut common) = (0, 0, 0);
            while i < a.signature.len() && j < b.signature.len() {
                match a.signature[i].cmp(&b.signature[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        common += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            (total - 2 * common) as f64 / total as f64
        }
        DistanceMetric::Subtree => {
            let cost = tree_distance(&a.before_subtree, &b.before_subtree)
                + tree_distance(&a.after_subtree, &b.after_subtree);
            let largest = [&a.before_subtree, &a.after_subtree, &b.before_subtree, &b.after_subtree]
                .iter()
                .map(|t| t.node_count())
                .max()
                .unwrap_or(0);
            cost as f64 / (1 + largest) as f64
        }
    }
}

pub fn distance_matrix(components: &[Component], metric: DistanceMetric) -> Vec<Vec<f64>> {
    let n = components.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = component_distance(&components[i], &components[j], metric);
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    m
}

/// DBSCAN over a precomputed distance matrix. Returns clusters as index
/// lists in discovery order; noise points are left out.
pub fn dbscan(distances: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Vec<usize>> {
    let n = distances.len();
    let neighbors = |p: usize| -> Vec<usize> { (0..n).filter(|&q| distances[p][q] <= eps).collect() };
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for p in 0..n {
        if visited[p] {
            continue;
        }
        visited[p] = true;
        let seeds = neighbors(p);
        if seeds.len() < min_pts {
            continue;
        }
        let c = clusters.len();
        clusters.push(vec![p]);
        label[p] = Some(c);
        let mut queue = seeds;
        while let Some(q) = queue.pop() {
            if !visited[q] {
                visited[q] = true;
                let more = neighbors(q);
                if more.len() >= min_pts {
                    queue.extend(more);
                }
            }
            if label[q].is_none() {
                label[q] = Some(c);
                clusters[c].push(q);
            }
        }
    }
    for members in &mut clusters {
        members.sort_unstable();
    }
    clusters
}

pub fn cluster_components(components: &[Component], params: &ClusterParams) -> Vec<Cluster> {
    let matrix = distance_matrix(components, params.metric);
    let mut clusters: Vec<Cluster> = dbscan(&matrix, params.eps, params.min_pts.max(1))
        .into_iter()
        .map(|idx| {
            let mut members: Vec<Component> = idx.into_iter().map(|i| components[i].clone()).collect();
            members.sort_by(|x, y| x.sort_key().cmp(&y.sort_key()));
            Cluster { members }
        })
        .collect();
    clusters.sort_by(|x, y| x.members[0].sort_key().cmp(&y.members[0].sort_key()));
    clusters
}

pub fn extract_operation_examples(cluster: &Cluster) -> Vec<OperationExample> {
    cluster.members.iter().map(Component::to_example).collect()
}

//! Language-agnostic AST model.
//!
//! Every other module operates on [`TreeNode`]: a node category (`kind`), an
//! optional lexeme (`value`) and an ordered list of children. Nodes are
//! addressed by [`NodePath`], a sequence of 1-based child indices from the
//! root.
//!
//! The external format is a JSON object per node with keys in the fixed order
//! `kind`, `value`, `children`. [`serialize_tree`] emits the canonical form
//! (no insignificant whitespace), which is what the rest of the crate treats
//! as the bit-exact interchange format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("malformed tree at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("invalid tree: node at {path} has an empty kind")]
    EmptyKind { path: NodePath },
    #[error("path {path} is invalid: step {step} ({index}) is out of range for a node with {arity} children")]
    Path {
        path: NodePath,
        step: usize,
        index: usize,
        arity: usize,
    },
    #[error("malformed path {0:?}")]
    PathSyntax(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TreeNode {
    pub kind: String,
    #[serde(default)]
    pub value: Option<String>,
    #[serde(default)]
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn new(kind: impl Into<String>, value: Option<&str>, children: Vec<TreeNode>) -> Self {
        TreeNode {
            kind: kind.into(),
            value: value.map(str::to_owned),
            children,
        }
    }

    pub fn leaf(kind: impl Into<String>, value: impl Into<String>) -> Self {
        TreeNode {
            kind: kind.into(),
            value: Some(value.into()),
            children: Vec::new(),
        }
    }

    pub fn branch(kind: impl Into<String>, children: Vec<TreeNode>) -> Self {
        TreeNode {
            kind: kind.into(),
            value: None,
            children,
        }
    }

    pub fn arity(&self) -> usize {
        self.children.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// The node's own label, i.e. the node without its children.
    pub fn label(&self) -> TreeNode {
        TreeNode {
            kind: self.kind.clone(),
            value: self.value.clone(),
            children: Vec::new(),
        }
    }

    pub fn same_label(&self, other: &TreeNode) -> bool {
        self.kind == other.kind && self.value == other.value
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(TreeNode::node_count).sum::<usize>()
    }

    pub fn get(&self, path: &NodePath) -> Option<&TreeNode> {
        let mut node = self;
        for &step in path.steps() {
            node = node.children.get(step.checked_sub(1)?)?;
        }
        Some(node)
    }

    pub fn get_mut(&mut self, path: &NodePath) -> Option<&mut TreeNode> {
        let mut node = self;
        for &step in path.steps() {
            node = node.children.get_mut(step.checked_sub(1)?)?;
        }
        Some(node)
    }

    /// Like [`TreeNode::get`] but reports which step went out of range.
    pub fn node_at(&self, path: &NodePath) -> Result<&TreeNode, TreeError> {
        let mut node = self;
        for (i, &step) in path.steps().iter().enumerate() {
            match step.checked_sub(1).and_then(|s| node.children.get(s)) {
                Some(child) => node = child,
                None => {
                    return Err(TreeError::Path {
                        path: path.clone(),
                        step: i + 1,
                        index: step,
                        arity: node.arity(),
                    })
                }
            }
        }
        Ok(node)
    }

    /// Pre-order enumeration of every node with its path.
    pub fn all_nodes(&self) -> Vec<(NodePath, &TreeNode)> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack = vec![(NodePath::root(), self)];
        while let Some((path, node)) = stack.pop() {
            for (i, child) in node.children.iter().enumerate().rev() {
                stack.push((path.child(i + 1), child));
            }
            out.push((path, node));
        }
        out
    }

    /// Returns a copy of `self` with the subtree at `path` replaced.
    pub fn replaced(&self, path: &NodePath, replacement: TreeNode) -> Result<TreeNode, TreeError> {
        self.node_at(path)?;
        let mut out = self.clone();
        *out.get_mut(path).expect("checked above") = replacement;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        for (path, node) in self.all_nodes() {
            if node.kind.is_empty() {
                return Err(TreeError::EmptyKind { path });
            }
        }
        Ok(())
    }

    pub fn to_sexp(&self) -> String {
        self.to_string()
    }
}

/// S-expression debug rendering: `(kind:value child...)`. Output only.
impl fmt::Display for TreeNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.kind)?;
        if let Some(value) = &self.value {
            write!(f, ":{value}")?;
        }
        for child in &self.children {
            write!(f, " {child}")?;
        }
        write!(f, ")")
    }
}

pub fn subtree_equal(a: &TreeNode, b: &TreeNode) -> bool {
    a == b
}

/// 1-based child indices from the root. The empty path is the root itself.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePath(Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn new(steps: Vec<usize>) -> Self {
        NodePath(steps)
    }

    pub fn steps(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, index: usize) -> NodePath {
        let mut steps = self.0.clone();
        steps.push(index);
        NodePath(steps)
    }

    pub fn join(&self, rest: &NodePath) -> NodePath {
        let mut steps = self.0.clone();
        steps.extend_from_slice(&rest.0);
        NodePath(steps)
    }

    pub fn parent(&self) -> Option<NodePath> {
        let (_, init) = self.0.split_last()?;
        Some(NodePath(init.to_vec()))
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// The ancestor `levels` steps up, if the path is deep enough.
    pub fn ancestor(&self, levels: usize) -> Option<NodePath> {
        (levels <= self.0.len()).then(|| NodePath(self.0[..self.0.len() - levels].to_vec()))
    }

    /// True if `self` is `other` or one of its ancestors.
    pub fn is_prefix_of(&self, other: &NodePath) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn is_proper_ancestor_of(&self, other: &NodePath) -> bool {
        self.0.len() < other.0.len() && self.is_prefix_of(other)
    }

    /// `other` relative to `self`, when `self` is a prefix of it.
    pub fn relative(&self, other: &NodePath) -> Option<NodePath> {
        self.is_prefix_of(other)
            .then(|| NodePath(other.0[self.0.len()..].to_vec()))
    }

    pub fn common_ancestor(&self, other: &NodePath) -> NodePath {
        let n = self
            .0
            .iter()
            .zip(&other.0)
            .take_while(|(a, b)| a == b)
            .count();
        NodePath(self.0[..n].to_vec())
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "/{}", parts.join("/"))
    }
}

impl FromStr for NodePath {
    type Err = TreeError;

    /// Accepts `""`, `"/"`, `"1/2"` and `"/1/2"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim_start_matches('/');
        if trimmed.is_empty() {
            return Ok(NodePath::root());
        }
        trimmed
            .split('/')
            .map(|part| match part.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i),
                _ => Err(TreeError::PathSyntax(s.to_owned())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(NodePath)
    }
}

impl From<Vec<usize>> for NodePath {
    fn from(steps: Vec<usize>) -> Self {
        NodePath(steps)
    }
}

/// A whole program (or example side) together with where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceTree {
    pub root: TreeNode,
    pub origin: Option<String>,
}

impl SourceTree {
    pub fn new(root: TreeNode) -> Self {
        SourceTree { root, origin: None }
    }

    pub fn with_origin(root: TreeNode, origin: impl Into<String>) -> Self {
        SourceTree {
            root,
            origin: Some(origin.into()),
        }
    }

    pub fn node_at(&self, path: &NodePath) -> Result<&TreeNode, TreeError> {
        self.root.node_at(path)
    }

    pub fn all_nodes(&self) -> Vec<(NodePath, &TreeNode)> {
        self.root.all_nodes()
    }
}

pub fn parse_tree(text: &str) -> Result<SourceTree, TreeError> {
    let root: TreeNode = serde_json::from_str(text).map_err(|e| TreeError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    root.validate()?;
    Ok(SourceTree::new(root))
}

pub fn serialize_tree(tree: &TreeNode) -> String {
    serde_json::to_string(tree).expect("tree serialization is infallible")
}

pub fn node_at<'a>(tree: &'a SourceTree, path: &NodePath) -> Result<&'a TreeNode, TreeError> {
    tree.node_at(path)
}

pub fn all_nodes(tree: &SourceTree) -> Vec<(NodePath, &TreeNode)> {
    tree.all_nodes()
}

// serde_json reports 1-based line and column; turn that into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

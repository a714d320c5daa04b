//! The transformation language and its interpreter.
//!
//! A [`TransformationProgram`] is a list of [`RewriteRule`]s. Each rule
//! selects locations with a [`ContextExpr`] and applies an [`Operation`] at
//! every selected node, producing an [`Edit`]: a replacement of one node of
//! the input tree. The edit list is an overapproximation; callers decide
//! which edits to [`materialize`].
//!
//! The JSON form mirrors the grammar one node per production, tagged by the
//! operator name in an `"op"` field.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{NodePath, SourceTree, TreeError, TreeNode};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DslError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("reference wants match #{k} but only {found} node(s) match")]
    Unresolved { k: usize, found: usize },
    #[error("insert position {k} is out of range for a node with {arity} children")]
    InsertOutOfRange { k: usize, arity: usize },
    #[error("cannot insert a sibling before the root")]
    InsertBeforeRoot,
    #[error("delete target {target} is not strictly inside location {location}")]
    DeleteOutside { location: NodePath, target: NodePath },
    #[error("delete expects a Reference builder")]
    NotAReference,
    #[error("edits at {0} and {1} overlap")]
    Conflict(NodePath, NodePath),
}

/// Pattern atom.
///
/// `Wildcard` matches any node. It is produced by generalization where
/// examples disagree on the node kind below the pattern root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum Token {
    Concrete { kind: String, value: TreeNode },
    Abstract { kind: String },
    Wildcard,
}

impl Token {
    pub fn concrete(node: &TreeNode) -> Token {
        Token::Concrete {
            kind: node.kind.clone(),
            value: node.clone(),
        }
    }

    pub fn abstract_kind(kind: impl Into<String>) -> Token {
        Token::Abstract { kind: kind.into() }
    }

    pub fn kind(&self) -> Option<&str> {
        match self {
            Token::Concrete { kind, .. } | Token::Abstract { kind } => Some(kind),
            Token::Wildcard => None,
        }
    }

    /// Leaf position: Concrete compares the whole subtree.
    pub fn matches_subtree(&self, node: &TreeNode) -> bool {
        match self {
            Token::Concrete { kind, value } => node.kind == *kind && node == value,
            Token::Abstract { kind } => node.kind == *kind,
            Token::Wildcard => true,
        }
    }

    /// Branch position: only the node's own kind and value are checked.
    pub fn matches_label(&self, node: &TreeNode) -> bool {
        match self {
            Token::Concrete { kind, value } => node.kind == *kind && node.value == value.value,
            Token::Abstract { kind } => node.kind == *kind,
            Token::Wildcard => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "PatternRepr", into = "PatternRepr")]
pub enum Pattern {
    Leaf(Token),
    Branch(Token, Vec<Pattern>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op")]
enum PatternRepr {
    Concrete { kind: String, value: TreeNode },
    Abstract { kind: String },
    Wildcard,
    Pattern { token: Token, children: Vec<Pattern> },
}

impl From<PatternRepr> for Pattern {
    fn from(r: PatternRepr) -> Self {
        match r {
            PatternRepr::Concrete { kind, value } => Pattern::Leaf(Token::Concrete { kind, value }),
            PatternRepr::Abstract { kind } => Pattern::Leaf(Token::Abstract { kind }),
            PatternRepr::Wildcard => Pattern::Leaf(Token::Wildcard),
            PatternRepr::Pattern { token, children } => Pattern::Branch(token, children),
        }
    }
}

impl From<Pattern> for PatternRepr {
    fn from(p: Pattern) -> Self {
        match p {
            Pattern::Leaf(Token::Concrete { kind, value }) => PatternRepr::Concrete { kind, value },
            Pattern::Leaf(Token::Abstract { kind }) => PatternRepr::Abstract { kind },
            Pattern::Leaf(Token::Wildcard) => PatternRepr::Wildcard,
            Pattern::Branch(token, children) => PatternRepr::Pattern { token, children },
        }
    }
}

impl Pattern {
    pub fn token(&self) -> &Token {
        match self {
            Pattern::Leaf(t) | Pattern::Branch(t, _) => t,
        }
    }

    pub fn kind(&self) -> Option<&str> {
        self.token().kind()
    }

    /// Number of tree nodes the pattern pins down. A concrete leaf counts
    /// every node of its subtree, a wildcard counts nothing.
    pub fn size(&self) -> usize {
        match self {
            Pattern::Leaf(Token::Concrete { value, .. }) => value.node_count(),
            Pattern::Leaf(Token::Abstract { .. }) => 1,
            Pattern::Leaf(Token::Wildcard) => 0,
            Pattern::Branch(t, children) => {
                usize::from(!matches!(t, Token::Wildcard)) + children.iter().map(Pattern::size).sum::<usize>()
            }
        }
    }

    /// Number of nodes whose kind and value are both fixed.
    pub fn pinned(&self) -> usize {
        match self {
            Pattern::Leaf(Token::Concrete { value, .. }) => value.node_count(),
            Pattern::Leaf(_) => 0,
            Pattern::Branch(t, children) => {
                usize::from(matches!(t, Token::Concrete { .. })) + children.iter().map(Pattern::pinned).sum::<usize>()
            }
        }
    }

    /// True if `path` stays inside the region the pattern describes.
    pub fn covers(&self, path: &NodePath) -> bool {
        let Some((&first, rest)) = path.steps().split_first() else {
            return true;
        };
        match self {
            Pattern::Leaf(Token::Concrete { value, .. }) => value.get(path).is_some(),
            Pattern::Leaf(_) => false,
            Pattern::Branch(_, children) => first
                .checked_sub(1)
                .and_then(|i| children.get(i))
                .is_some_and(|c| c.covers(&NodePath::new(rest.to_vec()))),
        }
    }
}

pub fn match_pattern(pattern: &Pattern, node: &TreeNode) -> bool {
    match pattern {
        Pattern::Leaf(token) => token.matches_subtree(node),
        Pattern::Branch(token, children) => {
            token.matches_label(node)
                && children.len() == node.children.len()
                && children.iter().zip(&node.children).all(|(p, n)| match_pattern(p, n))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathExpr {
    Absolute(NodePath),
    Relative(Token, usize),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op")]
enum PathRepr {
    Absolute { s: String },
    Relative { token: Token, k: usize },
}

impl Serialize for PathExpr {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            PathExpr::Absolute(p) => PathRepr::Absolute { s: path_text(p) },
            PathExpr::Relative(t, k) => PathRepr::Relative { token: t.clone(), k: *k },
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PathExpr {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        match PathRepr::deserialize(de)? {
            PathRepr::Absolute { s } => s.parse().map(PathExpr::Absolute).map_err(serde::de::Error::custom),
            PathRepr::Relative { token, k } => Ok(PathExpr::Relative(token, k)),
        }
    }
}

/// `""` for the root, otherwise `"1/2"`.
fn path_text(p: &NodePath) -> String {
    p.steps().iter().map(usize::to_string).collect::<Vec<_>>().join("/")
}

impl PathExpr {
    pub fn is_root(&self) -> bool {
        matches!(self, PathExpr::Absolute(p) if p.is_root())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "op", rename = "Context")]
pub struct ContextExpr {
    pub pattern: Pattern,
    pub path: PathExpr,
}

impl ContextExpr {
    pub fn new(pattern: Pattern, path: PathExpr) -> Self {
        ContextExpr { pattern, path }
    }

    pub fn absolute(pattern: Pattern, path: NodePath) -> Self {
        ContextExpr {
            pattern,
            path: PathExpr::Absolute(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum AstBuilder {
    ConstNode {
        kind: String,
        value: Option<String>,
        children: Vec<AstBuilder>,
    },
    Reference {
        #[serde(rename = "match")]
        context: ContextExpr,
        k: usize,
    },
}

impl AstBuilder {
    /// A constant builder reproducing `node` exactly.
    pub fn constant(node: &TreeNode) -> AstBuilder {
        AstBuilder::ConstNode {
            kind: node.kind.clone(),
            value: node.value.clone(),
            children: node.children.iter().map(AstBuilder::constant).collect(),
        }
    }

    pub fn reference(context: ContextExpr, k: usize) -> AstBuilder {
        AstBuilder::Reference { context, k }
    }

    /// `(references, const nodes)` in the whole builder.
    pub fn counts(&self) -> (usize, usize) {
        match self {
            AstBuilder::Reference { .. } => (1, 0),
            AstBuilder::ConstNode { children, .. } => children
                .iter()
                .map(AstBuilder::counts)
                .fold((0, 1), |(r, c), (r2, c2)| (r + r2, c + c2)),
        }
    }

    pub fn references(&self) -> Vec<&ContextExpr> {
        match self {
            AstBuilder::Reference { context, .. } => vec![context],
            AstBuilder::ConstNode { children, .. } => children.iter().flat_map(AstBuilder::references).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum Operation {
    Insert { ast: AstBuilder, k: usize },
    Delete {
        #[serde(rename = "ref")]
        reference: AstBuilder,
    },
    Update { ast: AstBuilder },
    InsertBefore { ast: AstBuilder },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Insert { .. } => "Insert",
            Operation::Delete { .. } => "Delete",
            Operation::Update { .. } => "Update",
            Operation::InsertBefore { .. } => "InsertBefore",
        }
    }

    pub fn builder(&self) -> &AstBuilder {
        match self {
            Operation::Insert { ast, .. } | Operation::Update { ast } | Operation::InsertBefore { ast } => ast,
            Operation::Delete { reference } => reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RewriteRule {
    pub location: ContextExpr,
    pub operation: Operation,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename = "Filter")]
struct FilterRepr {
    #[serde(rename = "match")]
    context: ContextExpr,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename = "Map")]
struct MapRepr {
    operation: Operation,
    locations: FilterRepr,
}

impl Serialize for RewriteRule {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        MapRepr {
            operation: self.operation.clone(),
            locations: FilterRepr {
                context: self.location.clone(),
            },
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for RewriteRule {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let r = MapRepr::deserialize(de)?;
        Ok(RewriteRule {
            location: r.locations.context,
            operation: r.operation,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "op", rename = "Transformation")]
pub struct TransformationProgram {
    pub rules: Vec<RewriteRule>,
}

impl TransformationProgram {
    pub fn new(rules: Vec<RewriteRule>) -> Self {
        TransformationProgram { rules }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("program serialization is infallible")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// A replacement of the node at `target_path` produced by rule `rule_index`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edit {
    #[serde(serialize_with = "ser_path", deserialize_with = "de_path")]
    pub target_path: NodePath,
    pub replacement: TreeNode,
    pub rule_index: usize,
}

fn ser_path<S: serde::Serializer>(p: &NodePath, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&p.to_string())
}

fn de_path<'de, D: serde::Deserializer<'de>>(de: D) -> Result<NodePath, D::Error> {
    let s = String::deserialize(de)?;
    s.parse().map_err(serde::de::Error::custom)
}

// ---------------------------------------------------------------------------
// Interpreter

pub fn match_context(ctx: &ContextExpr, tree: &TreeNode, node_path: &NodePath) -> Result<bool, DslError> {
    tree.node_at(node_path)?;
    Ok(context_holds(ctx, tree, node_path))
}

fn context_holds(ctx: &ContextExpr, tree: &TreeNode, node_path: &NodePath) -> bool {
    match &ctx.path {
        PathExpr::Absolute(spec) => {
            let Some(ancestor) = node_path.ancestor(spec.len()) else {
                return false;
            };
            ancestor.relative(node_path).as_ref() == Some(spec)
                && tree.get(&ancestor).is_some_and(|a| match_pattern(&ctx.pattern, a))
        }
        PathExpr::Relative(token, k) => (1..=node_path.len()).any(|up| {
            let ancestor = node_path.ancestor(up).expect("within depth");
            let Some(a) = tree.get(&ancestor) else { return false };
            if !match_pattern(&ctx.pattern, a) {
                return false;
            }
            a.all_nodes()
                .into_iter()
                .skip(1)
                .filter(|(_, n)| token.matches_subtree(n))
                .nth(k.saturating_sub(1))
                .is_some_and(|(rel, _)| ancestor.join(&rel) == *node_path)
        }),
    }
}

pub fn select_locations(location: &ContextExpr, tree: &TreeNode) -> Vec<NodePath> {
    tree.all_nodes()
        .into_iter()
        .map(|(p, _)| p)
        .filter(|p| context_holds(location, tree, p))
        .collect()
}

/// Paths of the nodes inside `x_path` (pre-order, `x` included) whose
/// context matches `ctx`.
pub fn reference_matches(ctx: &ContextExpr, tree: &TreeNode, x_path: &NodePath) -> Result<Vec<NodePath>, DslError> {
    let x = tree.node_at(x_path)?;
    Ok(x.all_nodes()
        .into_iter()
        .map(|(rel, _)| x_path.join(&rel))
        .filter(|p| context_holds(ctx, tree, p))
        .collect())
}

fn resolve_reference(builder: &AstBuilder, tree: &TreeNode, x_path: &NodePath) -> Result<NodePath, DslError> {
    let AstBuilder::Reference { context, k } = builder else {
        return Err(DslError::NotAReference);
    };
    let found = reference_matches(context, tree, x_path)?;
    k.checked_sub(1)
        .and_then(|i| found.get(i))
        .cloned()
        .ok_or(DslError::Unresolved { k: *k, found: found.len() })
}

pub fn eval_reference(builder: &AstBuilder, tree: &TreeNode, x_path: &NodePath) -> Result<TreeNode, DslError> {
    let path = resolve_reference(builder, tree, x_path)?;
    Ok(tree.get(&path).expect("resolved inside tree").clone())
}

pub fn build_ast(builder: &AstBuilder, tree: &TreeNode, x_path: &NodePath) -> Result<TreeNode, DslError> {
    match builder {
        AstBuilder::ConstNode { kind, value, children } => Ok(TreeNode {
            kind: kind.clone(),
            value: value.clone(),
            children: children
                .iter()
                .map(|c| build_ast(c, tree, x_path))
                .collect::<Result<_, _>>()?,
        }),
        AstBuilder::Reference { .. } => eval_reference(builder, tree, x_path),
    }
}

pub fn apply_operation(op: &Operation, tree: &TreeNode, x_path: &NodePath, rule_index: usize) -> Result<Edit, DslError> {
    let x = tree.node_at(x_path)?;
    let (target_path, replacement) = match op {
        Operation::Update { ast } => (x_path.clone(), build_ast(ast, tree, x_path)?),
        Operation::Insert { ast, k } => {
            if *k < 1 || *k > x.arity() + 1 {
                return Err(DslError::InsertOutOfRange { k: *k, arity: x.arity() });
            }
            let mut node = x.clone();
            node.children.insert(k - 1, build_ast(ast, tree, x_path)?);
            (x_path.clone(), node)
        }
        Operation::InsertBefore { ast } => {
            let parent_path = x_path.parent().ok_or(DslError::InsertBeforeRoot)?;
            let index = x_path.last().expect("non-root path");
            let mut parent = tree.get(&parent_path).expect("parent of valid path").clone();
            parent.children.insert(index - 1, build_ast(ast, tree, x_path)?);
            (parent_path, parent)
        }
        Operation::Delete { reference } => {
            let target = resolve_reference(reference, tree, x_path)?;
            let rel = x_path
                .relative(&target)
                .filter(|r| !r.is_root())
                .ok_or_else(|| DslError::DeleteOutside {
                    location: x_path.clone(),
                    target: target.clone(),
                })?;
            let mut node = x.clone();
            let parent = node.get_mut(&rel.parent().expect("non-root")).expect("inside x");
            parent.children.remove(rel.last().expect("non-root") - 1);
            (x_path.clone(), node)
        }
    };
    Ok(Edit {
        target_path,
        replacement,
        rule_index,
    })
}

/// Runs every rule at every selected location; locations where the
/// operation cannot be evaluated are skipped.
pub fn apply_transformation(program: &TransformationProgram, tree: &TreeNode) -> Vec<Edit> {
    let mut edits = Vec::new();
    for (index, rule) in program.rules.iter().enumerate() {
        for location in select_locations(&rule.location, tree) {
            match apply_operation(&rule.operation, tree, &location, index) {
                Ok(edit) => edits.push(edit),
                Err(e) => log::debug!("rule {index} skips {location}: {e}"),
            }
        }
    }
    edits
}

pub fn apply_to_source(program: &TransformationProgram, tree: &SourceTree) -> Vec<Edit> {
    apply_transformation(program, &tree.root)
}

pub fn find_conflict<'a, I>(edits: I) -> Option<(NodePath, NodePath)>
where
    I: IntoIterator<Item = &'a Edit>,
{
    let edits: Vec<&Edit> = edits.into_iter().collect();
    for (i, a) in edits.iter().enumerate() {
        for b in &edits[i + 1..] {
            if a.target_path.is_prefix_of(&b.target_path) || b.target_path.is_prefix_of(&a.target_path) {
                return Some((a.target_path.clone(), b.target_path.clone()));
            }
        }
    }
    None
}

pub fn materialize(tree: &TreeNode, edits: &[Edit]) -> Result<TreeNode, DslError> {
    if let Some((a, b)) = find_conflict(edits) {
        return Err(DslError::Conflict(a, b));
    }
    let mut out = tree.clone();
    for edit in edits {
        let slot = out.get_mut(&edit.target_path).ok_or_else(|| {
            DslError::Tree(TreeError::Path {
                path: edit.target_path.clone(),
                step: 0,
                index: 0,
                arity: 0,
            })
        })?;
        *slot = edit.replacement.clone();
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Rendering in the grammar's concrete notation.

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Concrete { kind, value } => write!(f, "Concrete({kind}, {value})"),
            Token::Abstract { kind } => write!(f, "Abstract({kind})"),
            Token::Wildcard => write!(f, "Wildcard()"),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Leaf(t) => write!(f, "{t}"),
            Pattern::Branch(t, children) => {
                write!(f, "Pattern({t}")?;
                for c in children {
                    write!(f, ", {c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathExpr::Absolute(p) => write!(f, "Absolute(\"{}\")", path_text(p)),
            PathExpr::Relative(t, k) => write!(f, "Relative({t}, {k})"),
        }
    }
}

impl fmt::Display for ContextExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Context({}, {})", self.pattern, self.path)
    }
}

impl fmt::Display for AstBuilder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AstBuilder::ConstNode { kind, value, children } => {
                write!(f, "ConstNode({kind}")?;
                if let Some(v) = value {
                    write!(f, ", {v:?}")?;
                }
                for c in children {
                    write!(f, ", {c}")?;
                }
                write!(f, ")")
            }
            AstBuilder::Reference { context, k } => write!(f, "Reference(x, {context}, {k})"),
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operation::Insert { ast, k } => write!(f, "Insert(x, {ast}, {k})"),
            Operation::Delete { reference } => write!(f, "Delete(x, {reference})"),
            Operation::Update { ast } => write!(f, "Update(x, {ast})"),
            Operation::InsertBefore { ast } => write!(f, "InsertBefore(x, {ast})"),
        }
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Map(λx → {}, Filter(λx → Match(x, {}), AllNodes()))",
            self.operation, self.location
        )
    }
}

impl fmt::Display for TransformationProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Transformation(")?;
        for rule in &self.rules {
            writeln!(f, "  {rule},")?;
        }
        write!(f, ")")
    }
}

//! Synthetic workloads: template rules planted into random filler trees,
//! and a small student corpus with two fault types.

use std::fs;
use std::path::Path;

use astxform::tree::{serialize_tree, NodePath, SourceTree, TreeNode};
use rand::rngs::StdRng;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    /// `a * v` becomes `a * term(v)`.
    Wrap,
    /// `r.CSharpKind() == e` becomes `r.IsKind(e)`.
    IsKind,
    /// A guard statement is prepended to every function body.
    Guard,
}

pub const TEMPLATES: [Template; 3] = [Template::Wrap, Template::IsKind, Template::Guard];

#[derive(Debug, Clone)]
pub struct Planted {
    pub before: TreeNode,
    pub after: TreeNode,
    /// Where the rule must fire and what it must produce there.
    pub sites: Vec<(NodePath, TreeNode)>,
}

const FILLER_KINDS: [&str; 4] = ["Stmt", "Expr", "Block", "Op"];
const FILLER_VALUES: [Option<&str>; 4] = [None, Some("p"), Some("q"), Some("r")];
const MAX_NODES: usize = 40;

fn filler(rng: &mut StdRng, size: usize) -> TreeNode {
    let kind = FILLER_KINDS[rng.gen_range(0..FILLER_KINDS.len())];
    let value = FILLER_VALUES[rng.gen_range(0..FILLER_VALUES.len())];
    let mut left = size - 1;
    let mut children = Vec::new();
    while left > 0 {
        let take = rng.gen_range(1..=left.min(4));
        children.push(filler(rng, take));
        left -= take;
    }
    TreeNode::new(kind, value, children)
}

fn pick<'a>(rng: &mut StdRng, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

/// `(before, after, anchor inside the trigger)`.
fn trigger(template: Template, rng: &mut StdRng) -> (TreeNode, TreeNode, NodePath) {
    match template {
        Template::Wrap => {
            let left_size = rng.gen_range(1..=3);
            let left = filler(rng, left_size);
            let v = TreeNode::leaf("Name", pick(rng, &["a", "b", "c", "d", "e"]));
            let wrapped = TreeNode::branch(
                "Call",
                vec![TreeNode::leaf("Name", "term"), TreeNode::branch("Args", vec![v.clone()])],
            );
            (
                TreeNode::new("BinOp", Some("*"), vec![left.clone(), v]),
                TreeNode::new("BinOp", Some("*"), vec![left, wrapped.clone()]),
                NodePath::new(vec![2]),
            )
        }
        Template::IsKind => {
            let id = pick(rng, &["receiver", "m", "node", "r"]);
            let recv = if rng.gen_bool(0.5) {
                TreeNode::leaf("<exp>", id)
            } else {
                TreeNode::branch(
                    "<exp>",
                    vec![TreeNode::leaf("<exp>", id), TreeNode::leaf("<member>", pick(rng, &["Parent", "Left"]))],
                )
            };
            let rhs = TreeNode::leaf("<exp>", pick(rng, &["SyntaxKind.A", "SyntaxKind.B", "modifier"]));
            (
                TreeNode::branch(
                    "==",
                    vec![
                        TreeNode::branch(".", vec![recv.clone(), TreeNode::leaf("<call>", "CSharpKind()")]),
                        rhs.clone(),
                    ],
                ),
                TreeNode::branch(".", vec![recv, TreeNode::leaf("<call>", "IsKind"), rhs]),
                NodePath::root(),
            )
        }
        Template::Guard => {
            let stmts: Vec<TreeNode> = (0..rng.gen_range(0..=2)).map(|_| filler(rng, 1)).collect();
            let name = TreeNode::leaf("Name", pick(rng, &["f", "g", "h"]));
            let mut guarded = vec![TreeNode::leaf("Guard", "check")];
            guarded.extend(stmts.iter().cloned());
            (
                TreeNode::branch("Func", vec![name.clone(), TreeNode::branch("Body", stmts)]),
                TreeNode::branch("Func", vec![name, TreeNode::branch("Body", guarded)]),
                NodePath::new(vec![2]),
            )
        }
    }
}

/// Random filler tree with `n` leaves replaced by template triggers. The
/// chosen leaves have distinct parents: sibling edits are adjacent and would
/// fuse into one component.
pub fn planted(template: Template, rng: &mut StdRng, n: usize) -> Planted {
    loop {
        let size = rng.gen_range(2 * n..=2 * n + 8);
        let base = filler(rng, size);
        let leaves: Vec<NodePath> = base
            .all_nodes()
            .into_iter()
            .filter(|(p, node)| node.is_leaf() && !p.is_root())
            .map(|(p, _)| p)
            .collect();
        let mut parents: Vec<NodePath> = leaves.iter().filter_map(NodePath::parent).collect();
        parents.dedup();
        parents.sort();
        parents.dedup();
        if parents.len() < n {
            continue;
        }
        let mut chosen = Vec::new();
        while chosen.len() < n {
            let p = leaves[rng.gen_range(0..leaves.len())].clone();
            if !chosen.iter().any(|c: &NodePath| c.parent() == p.parent()) {
                chosen.push(p);
            }
        }
        let mut before = base.clone();
        let mut after = base;
        let mut sites = Vec::new();
        for p in &chosen {
            let (b, a, anchor) = trigger(template, rng);
            sites.push((p.join(&anchor), a.get(&anchor).expect("anchor in trigger").clone()));
            *before.get_mut(p).expect("leaf") = b;
            *after.get_mut(p).expect("leaf") = a;
        }
        if before.node_count() <= MAX_NODES {
            sites.sort();
            return Planted { before, after, sites };
        }
    }
}

pub fn as_pair(p: &Planted, id: &str) -> (SourceTree, SourceTree) {
    (
        SourceTree::with_origin(p.before.clone(), id),
        SourceTree::new(p.after.clone()),
    )
}

// ---------------------------------------------------------------------------
// Student corpus

fn name(v: &str) -> TreeNode {
    TreeNode::leaf("Name", v)
}

fn num(v: &str) -> TreeNode {
    TreeNode::leaf("Num", v)
}

fn assign(target: &str, value: TreeNode) -> TreeNode {
    TreeNode::branch("Assign", vec![name(target), value])
}

fn binop(op: &str, l: TreeNode, r: TreeNode) -> TreeNode {
    TreeNode::new("BinOp", Some(op), vec![l, r])
}

fn wrap(v: TreeNode) -> TreeNode {
    TreeNode::branch("Call", vec![name("term"), TreeNode::branch("Args", vec![v])])
}

fn product_loop(fixed: bool) -> TreeNode {
    let factor = if fixed { wrap(name("i")) } else { name("i") };
    TreeNode::new(
        "FunctionDef",
        Some("product"),
        vec![
            TreeNode::branch("Args", vec![name("n"), name("term")]),
            TreeNode::branch(
                "Body",
                vec![
                    assign("result", num("1")),
                    TreeNode::branch(
                        "For",
                        vec![
                            name("i"),
                            TreeNode::branch("Call", vec![name("range"), TreeNode::branch("Args", vec![num("1"), name("n")])]),
                            TreeNode::branch("Body", vec![assign("result", binop("*", name("result"), factor))]),
                        ],
                    ),
                    TreeNode::branch("Return", vec![name("result")]),
                ],
            ),
        ],
    )
}

fn counter(var: &str, limit: &str, step: &str, fixed: bool) -> TreeNode {
    TreeNode::new(
        "FunctionDef",
        Some("count"),
        vec![
            TreeNode::branch("Args", vec![name(limit)]),
            TreeNode::branch(
                "Body",
                vec![
                    assign(var, num("0")),
                    TreeNode::branch(
                        "While",
                        vec![
                            TreeNode::new("Compare", Some(if fixed { "<=" } else { "<" }), vec![name(var), name(limit)]),
                            TreeNode::branch("Body", vec![assign(var, binop("+", name(var), num(step)))]),
                        ],
                    ),
                    TreeNode::branch("Return", vec![name(var)]),
                ],
            ),
        ],
    )
}

/// Six students, two fault types, interleaved in time: A1 B1 A2 B2 A3 B3.
/// Each student submits one failing and then one passing program.
pub fn student_programs(fig1a: (TreeNode, TreeNode), fig1b: (TreeNode, TreeNode)) -> Vec<(String, TreeNode, TreeNode)> {
    vec![
        ("a1".to_owned(), fig1a.0, fig1a.1),
        ("b1".to_owned(), counter("i", "n", "1", false), counter("i", "n", "1", true)),
        ("a2".to_owned(), fig1b.0, fig1b.1),
        ("b2".to_owned(), counter("k", "m", "1", false), counter("k", "m", "1", true)),
        ("a3".to_owned(), product_loop(false), product_loop(true)),
        ("b3".to_owned(), counter("j", "top", "2", false), counter("j", "top", "2", true)),
    ]
}

/// Writes `<root>/task/<student>/<ts>.tree.json` plus verdicts.
pub fn write_corpus(root: &Path, students: &[(String, TreeNode, TreeNode)]) {
    for (i, (id, bad, good)) in students.iter().enumerate() {
        let dir = root.join("task").join(id);
        fs::create_dir_all(&dir).unwrap();
        let t = 2 * i + 1;
        for (ts, tree, verdict) in [(t, bad, "fail"), (t + 1, good, "pass")] {
            fs::write(dir.join(format!("{ts}.tree.json")), serialize_tree(tree)).unwrap();
            fs::write(dir.join(format!("{ts}.verdict")), verdict).unwrap();
        }
    }
}

// ---------------------------------------------------------------------------
// Consistency scenarios

#[derive(Debug, Clone, Default)]
pub struct ScenarioResult {
    pub synthesized: bool,
    /// Every enumerated candidate program reproduced every training output.
    pub replayed: bool,
    pub planted: usize,
    pub recovered: usize,
    pub false_positives: usize,
}

/// One scenario: 1 or 2 training trees and a held-out tree, all carrying
/// 1 to 5 planted instances of the same template.
pub fn run_scenario(template: Template, seed: u64) -> ScenarioResult {
    use astxform::dsl::apply_transformation;
    use astxform::edit_distance::edit_script;
    use astxform::extraction::connected_components;
    use astxform::ranking::Weights;
    use astxform::synthesis::{replay_components, synthesize, SynthesisConfig};
    use rand::SeedableRng;

    let mut rng = StdRng::seed_from_u64(seed);
    let n_train = rng.gen_range(1..=2);
    let train: Vec<Planted> = (0..n_train)
        .map(|_| {
            let n = rng.gen_range(1..=5);
            planted(template, &mut rng, n)
        })
        .collect();
    let held_n = rng.gen_range(1..=5);
    let held = planted(template, &mut rng, held_n);
    let pairs: Vec<(SourceTree, SourceTree)> = train.iter().enumerate().map(|(i, p)| as_pair(p, &format!("train{i}"))).collect();

    let mut result = ScenarioResult {
        planted: held.sites.len(),
        ..ScenarioResult::default()
    };
    let weights = Weights::default();
    let Ok(set) = synthesize(&pairs, &SynthesisConfig::default()) else {
        return result;
    };
    result.synthesized = true;
    result.replayed = set.programs(&weights, 32).iter().all(|program| {
        pairs.iter().all(|(b, a)| {
            let comps = connected_components(&edit_script(&b.root, &a.root), b, a);
            replay_components(program, &b.root, &comps).1.as_ref() == Some(&a.root)
        })
    });
    let edits = apply_transformation(&set.top(&weights), &held.before);
    for (path, expected) in &held.sites {
        if edits.iter().any(|e| &e.target_path == path && &e.replacement == expected) {
            result.recovered += 1;
        }
    }
    result.false_positives = edits
        .iter()
        .filter(|e| !held.sites.iter().any(|(p, x)| *p == e.target_path && *x == e.replacement))
        .count();
    result
}

//! Random DSL programs and the three ranking mutations.

use std::cmp::Ordering;

use astxform::dsl::{AstBuilder, ContextExpr, Operation, Pattern, RewriteRule, Token, TransformationProgram};
use astxform::ranking::{compare_programs, Weights};
use astxform::tree::{NodePath, TreeNode};
use rand::rngs::StdRng;
use rand::Rng;

const KINDS: [&str; 4] = ["A", "B", "C", "D"];

fn kind(rng: &mut StdRng) -> String {
    KINDS[rng.gen_range(0..KINDS.len())].to_owned()
}

fn token(rng: &mut StdRng) -> Token {
    match rng.gen_range(0..3) {
        0 => Token::Wildcard,
        1 => Token::abstract_kind(kind(rng)),
        _ => Token::concrete(&TreeNode::leaf(kind(rng), "v")),
    }
}

pub fn random_pattern(rng: &mut StdRng, depth: usize) -> Pattern {
    if depth == 0 || rng.gen_bool(0.4) {
        return Pattern::Leaf(token(rng));
    }
    let n = rng.gen_range(1..=3);
    let head = Token::abstract_kind(kind(rng));
    Pattern::Branch(head, (0..n).map(|_| random_pattern(rng, depth - 1)).collect())
}

/// A branch pattern with `size() < 5`, located at its first child.
pub fn small_located_pattern(rng: &mut StdRng) -> ContextExpr {
    loop {
        let p = random_pattern(rng, 2);
        if let Pattern::Branch(..) = p {
            if p.size() < 5 {
                return ContextExpr::absolute(p, NodePath::new(vec![1]));
            }
        }
    }
}

fn random_builder(rng: &mut StdRng, depth: usize) -> AstBuilder {
    if depth == 0 || rng.gen_bool(0.5) {
        if rng.gen_bool(0.5) {
            let ctx = ContextExpr::absolute(random_pattern(rng, 1), NodePath::root());
            return AstBuilder::reference(ctx, rng.gen_range(1..=2));
        }
        return AstBuilder::constant(&TreeNode::leaf(kind(rng), "c"));
    }
    AstBuilder::ConstNode {
        kind: kind(rng),
        value: None,
        children: (0..rng.gen_range(1..=3)).map(|_| random_builder(rng, depth - 1)).collect(),
    }
}

pub fn random_rule(rng: &mut StdRng) -> RewriteRule {
    let location = if rng.gen_bool(0.5) {
        ContextExpr::absolute(random_pattern(rng, 2), NodePath::root())
    } else {
        small_located_pattern(rng)
    };
    let ast = random_builder(rng, 2);
    let operation = match rng.gen_range(0..3) {
        0 => Operation::Update { ast },
        1 => Operation::Insert { ast, k: rng.gen_range(1..=2) },
        _ => Operation::InsertBefore { ast },
    };
    RewriteRule { location, operation }
}

pub fn random_program(rng: &mut StdRng) -> TransformationProgram {
    TransformationProgram::new((0..rng.gen_range(1..=3)).map(|_| random_rule(rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Principle {
    ReferenceOverConst,
    NonRootContext,
    ShorterContext,
}

pub const PRINCIPLES: [Principle; 3] = [Principle::ReferenceOverConst, Principle::NonRootContext, Principle::ShorterContext];

fn with_rule(p: &TransformationProgram, i: usize, rule: RewriteRule) -> TransformationProgram {
    let mut rules = p.rules.clone();
    rules[i] = rule;
    TransformationProgram::new(rules)
}

fn set_builder(op: &Operation, ast: AstBuilder) -> Operation {
    match op {
        Operation::Insert { k, .. } => Operation::Insert { ast, k: *k },
        Operation::Update { .. } => Operation::Update { ast },
        Operation::InsertBefore { .. } => Operation::InsertBefore { ast },
        Operation::Delete { .. } => Operation::Delete { reference: ast },
    }
}

/// Builds a `(preferred, worse)` pair of programs that differ only in the
/// aspect the principle is about.
pub fn mutation_pair(rng: &mut StdRng, principle: Principle) -> (TransformationProgram, TransformationProgram) {
    let base = random_program(rng);
    let i = rng.gen_range(0..base.rules.len());
    let rule = base.rules[i].clone();
    match principle {
        Principle::ReferenceOverConst => {
            let ctx = ContextExpr::absolute(random_pattern(rng, 1), NodePath::root());
            let leaf = TreeNode::leaf(kind(rng), "c");
            let good = RewriteRule {
                operation: set_builder(&rule.operation, AstBuilder::reference(ctx, 1)),
                ..rule.clone()
            };
            let bad = RewriteRule {
                operation: set_builder(&rule.operation, AstBuilder::constant(&leaf)),
                ..rule
            };
            (with_rule(&base, i, good), with_rule(&base, i, bad))
        }
        Principle::NonRootContext => {
            let ctx = small_located_pattern(rng);
            let root = ContextExpr::absolute(ctx.pattern.clone(), NodePath::root());
            let good = RewriteRule { location: ctx, ..rule.clone() };
            let bad = RewriteRule { location: root, ..rule };
            (with_rule(&base, i, good), with_rule(&base, i, bad))
        }
        Principle::ShorterContext => {
            let ctx = small_located_pattern(rng);
            let Pattern::Branch(head, mut children) = ctx.pattern.clone() else {
                unreachable!("small_located_pattern returns branches")
            };
            children.push(random_pattern(rng, 1));
            children.push(Pattern::Leaf(Token::abstract_kind(kind(rng))));
            let longer = ContextExpr::absolute(Pattern::Branch(head, children), NodePath::new(vec![1]));
            let good = RewriteRule { location: ctx, ..rule.clone() };
            let bad = RewriteRule { location: longer, ..rule };
            (with_rule(&base, i, good), with_rule(&base, i, bad))
        }
    }
}

/// True when the ranking puts the preferred program strictly first.
pub fn principle_holds(rng: &mut StdRng, principle: Principle, weights: &Weights) -> bool {
    let (good, bad) = mutation_pair(rng, principle);
    compare_programs(&good, &bad, weights) == Ordering::Less
        && compare_programs(&bad, &good, weights) == Ordering::Greater
}

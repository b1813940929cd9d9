//! Algebraic simplification that never changes the value of an expression
//! under the protected operator semantics.
//!
//! Rewrites applied bottom-up until a fixed point:
//! constant folding, additive and multiplicative identities, multiplication
//! by zero, and removal of double negation written as `0 - (0 - x)`.

use super::ops::{apply_binary, apply_unary};
use super::{ExprTree, Token};

fn as_const(t: &ExprTree) -> Option<f64> {
    (t.len() == 1 && t.root().token == Token::Const).then(|| t.root().value)
}

fn is_const(t: &ExprTree, v: f64) -> bool {
    as_const(t) == Some(v)
}

/// If `t` is `0 - x`, return `x`.
fn negated_operand(t: &ExprTree) -> Option<ExprTree> {
    if t.root().token != Token::Sub {
        return None;
    }
    let kids = t.children(0);
    let lhs = t.subtree(kids[0]);
    is_const(&lhs, 0.0).then(|| t.subtree(kids[1]))
}

fn simplify_at(t: &ExprTree, i: usize) -> ExprTree {
    let node = t.node(i);
    match node.token.arity() {
        0 => t.subtree(i),
        1 => {
            let c = simplify_at(t, i + 1);
            match as_const(&c) {
                Some(v) => ExprTree::constant(apply_unary(node.token, v)),
                None => ExprTree::unary(node.token, c),
            }
        }
        _ => {
            let kids = t.children(i);
            let l = simplify_at(t, kids[0]);
            let r = simplify_at(t, kids[1]);
            simplify_binary(node.token, l, r)
        }
    }
}

fn simplify_binary(op: Token, l: ExprTree, r: ExprTree) -> ExprTree {
    if let (Some(a), Some(b)) = (as_const(&l), as_const(&r)) {
        return ExprTree::constant(apply_binary(op, a, b));
    }
    match op {
        Token::Add if is_const(&l, 0.0) => r,
        Token::Add if is_const(&r, 0.0) => l,
        Token::Sub if is_const(&r, 0.0) => l,
        Token::Sub => match negated_operand(&r) {
            Some(inner) if is_const(&l, 0.0) => inner,
            Some(inner) => ExprTree::binary(Token::Add, l, inner),
            None => ExprTree::binary(Token::Sub, l, r),
        },
        Token::Mul if is_const(&l, 0.0) || is_const(&r, 0.0) => ExprTree::constant(0.0),
        Token::Mul if is_const(&l, 1.0) => r,
        Token::Mul if is_const(&r, 1.0) => l,
        _ => ExprTree::binary(op, l, r),
    }
}

/// Simplify `tree` to a fixed point of the rewrite rules.
pub fn simplify(tree: &ExprTree) -> ExprTree {
    let mut cur = simplify_at(tree, 0);
    loop {
        let next = simplify_at(&cur, 0);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

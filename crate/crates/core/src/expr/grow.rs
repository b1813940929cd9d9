//! Random expression trees by the grow method.

use rand::Rng;

use super::{ExprTree, Node, Token};

/// Deepest level at which an operator may still be placed so that a full
/// binary tree fits in `max_nodes`.
pub fn max_operator_depth(max_nodes: usize) -> Option<usize> {
    if max_nodes < 2 {
        return None;
    }
    let levels = (max_nodes + 1).ilog2() as usize;
    Some(levels.saturating_sub(2))
}

/// Draw a tree over `dims` inputs with at most `max_nodes` nodes.
///
/// Each node is an operator with probability `0.5^depth` (so the root is an
/// operator whenever room allows) and a leaf otherwise; operators are chosen
/// uniformly from the nine in the vocabulary, leaves are a uniformly chosen
/// variable with probability 0.75 and the constant 1.0 otherwise. Trees
/// without a variable are redrawn.
pub fn grow_tree<R: Rng>(rng: &mut R, dims: usize, max_nodes: usize) -> ExprTree {
    assert!(dims >= 1 && max_nodes >= 1);
    let ops: Vec<Token> = Token::BINARY
        .iter()
        .chain(Token::UNARY.iter())
        .copied()
        .collect();
    let max_op_depth = max_operator_depth(max_nodes);
    loop {
        let mut nodes = Vec::new();
        // Stack of depths of slots still to fill, in preorder.
        let mut pending = vec![0usize];
        while let Some(depth) = pending.pop() {
            let may_branch = max_op_depth.is_some_and(|d| depth <= d);
            let branch = may_branch && rng.random_bool(0.5f64.powi(depth as i32));
            if branch {
                let op = ops[rng.random_range(0..ops.len())];
                for _ in 0..op.arity() {
                    pending.push(depth + 1);
                }
                nodes.push(Node::new(op));
            } else if rng.random_bool(0.75) {
                nodes.push(Node::var(rng.random_range(0..dims)));
            } else {
                nodes.push(Node::new(Token::Const));
            }
        }
        let tree = ExprTree::from_nodes(nodes).expect("grow builds valid preorder");
        if tree.has_variable() && tree.len() <= max_nodes {
            return tree;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn depth_bound_keeps_trees_within_size() {
        assert_eq!(max_operator_depth(1), None);
        assert_eq!(max_operator_depth(2), Some(0));
        assert_eq!(max_operator_depth(3), Some(0));
        assert_eq!(max_operator_depth(7), Some(1));
        assert_eq!(max_operator_depth(60), Some(3));
        assert_eq!(max_operator_depth(63), Some(4));
    }

    #[test]
    fn single_node_budget_gives_a_variable() {
        let mut rng = rng_for(1, &[]);
        for _ in 0..50 {
            let t = grow_tree(&mut rng, 3, 1);
            assert_eq!(t.len(), 1);
            assert!(matches!(t.root().token, Token::Var(k) if k < 3));
        }
    }

    #[test]
    fn many_trees_are_valid_and_bounded() {
        let mut rng = rng_for(2, &[]);
        for _ in 0..10_000 {
            let t = grow_tree(&mut rng, 2, 15);
            assert!(t.len() <= 15);
            assert!(t.has_variable());
            assert!(t.required_dims() <= 2);
        }
    }
}

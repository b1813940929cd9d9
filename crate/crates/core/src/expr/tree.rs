use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ExprError, Token};

/// A token together with its numeric payload. Only constant nodes carry a
/// meaningful value; every other node stores `0.0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub token: Token,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub value: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0 && v.is_sign_positive()
}

impl Node {
    pub fn new(token: Token) -> Self {
        let value = if token == Token::Const { 1.0 } else { 0.0 };
        Node { token, value }
    }

    pub fn constant(value: f64) -> Self {
        Node {
            token: Token::Const,
            value,
        }
    }

    pub fn var(index: usize) -> Self {
        Node::new(Token::var(index))
    }

    /// Same symbol, ignoring constant values.
    pub fn same_symbol(&self, other: &Node) -> bool {
        self.token == other.token
    }
}

impl From<Token> for Node {
    fn from(t: Token) -> Self {
        Node::new(t)
    }
}

/// An arity-typed expression tree stored as its preorder node list.
///
/// The children of a node are the consecutive subtrees that follow it, so the
/// preorder list is also the tree's linearization. Construction validates
/// that every node has exactly as many children as its arity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Node>", into = "Vec<Node>")]
pub struct ExprTree {
    nodes: Vec<Node>,
}

impl TryFrom<Vec<Node>> for ExprTree {
    type Error = ExprError;

    fn try_from(nodes: Vec<Node>) -> Result<Self, Self::Error> {
        ExprTree::from_nodes(nodes)
    }
}

impl From<ExprTree> for Vec<Node> {
    fn from(t: ExprTree) -> Self {
        t.nodes
    }
}

impl ExprTree {
    /// Build from a preorder node list, rejecting anything that is not an
    /// exact, structurally valid encoding.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, ExprError> {
        if nodes.is_empty() {
            return Err(ExprError::Malformed("empty node list".into()));
        }
        let mut need = 1usize;
        for (pos, n) in nodes.iter().enumerate() {
            if n.token.is_special() {
                return Err(ExprError::InvalidToken {
                    token: n.token,
                    position: pos,
                });
            }
            if need == 0 {
                return Err(ExprError::Malformed(format!(
                    "trailing tokens after position {}",
                    pos - 1
                )));
            }
            need = need - 1 + n.token.arity();
        }
        if need != 0 {
            return Err(ExprError::Malformed(format!("{need} missing operand(s)")));
        }
        Ok(ExprTree { nodes })
    }

    pub fn leaf(token: Token) -> Self {
        assert_eq!(token.arity(), 0);
        assert!(token.is_tree_symbol());
        ExprTree {
            nodes: vec![Node::new(token)],
        }
    }

    pub fn var(index: usize) -> Self {
        ExprTree::leaf(Token::var(index))
    }

    pub fn constant(value: f64) -> Self {
        ExprTree {
            nodes: vec![Node::constant(value)],
        }
    }

    pub fn unary(op: Token, child: ExprTree) -> Self {
        assert_eq!(op.arity(), 1, "{op} is not unary");
        let mut nodes = Vec::with_capacity(child.len() + 1);
        nodes.push(Node::new(op));
        nodes.extend(child.nodes);
        ExprTree { nodes }
    }

    pub fn binary(op: Token, left: ExprTree, right: ExprTree) -> Self {
        assert_eq!(op.arity(), 2, "{op} is not binary");
        let mut nodes = Vec::with_capacity(left.len() + right.len() + 1);
        nodes.push(Node::new(op));
        nodes.extend(left.nodes);
        nodes.extend(right.nodes);
        ExprTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false: a tree has at least one node.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of nodes, each node counted once (constants included).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn tokens(&self) -> impl Iterator<Item = Token> + '_ {
        self.nodes.iter().map(|n| n.token)
    }

    /// One past the last preorder index of the subtree rooted at `i`.
    pub fn subtree_end(&self, i: usize) -> usize {
        let mut need = 1usize;
        let mut k = i;
        while need > 0 {
            need = need - 1 + self.nodes[k].token.arity();
            k += 1;
        }
        k
    }

    pub fn span(&self, i: usize) -> Range<usize> {
        i..self.subtree_end(i)
    }

    /// Preorder indices of the direct children of node `i`.
    pub fn children(&self, i: usize) -> Vec<usize> {
        let arity = self.nodes[i].token.arity();
        let mut out = Vec::with_capacity(arity);
        let mut c = i + 1;
        for _ in 0..arity {
            out.push(c);
            c = self.subtree_end(c);
        }
        out
    }

    pub fn subtree(&self, i: usize) -> ExprTree {
        ExprTree {
            nodes: self.nodes[self.span(i)].to_vec(),
        }
    }

    /// Copy of `self` with the subtree at `i` replaced by `replacement`.
    pub fn replace_subtree(&self, i: usize, replacement: &ExprTree) -> ExprTree {
        let span = self.span(i);
        let mut nodes = Vec::with_capacity(self.len() - span.len() + replacement.len());
        nodes.extend_from_slice(&self.nodes[..span.start]);
        nodes.extend_from_slice(&replacement.nodes);
        nodes.extend_from_slice(&self.nodes[span.end..]);
        ExprTree { nodes }
    }

    /// Depth of every node (root at 0), in preorder.
    pub fn depths(&self) -> Vec<usize> {
        let mut depths = vec![0; self.len()];
        // Stack of (depth, remaining children) for open operators.
        let mut open: Vec<(usize, usize)> = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let d = open.len();
            depths[i] = d;
            if let Some(top) = open.last_mut() {
                top.1 -= 1;
            }
            let arity = n.token.arity();
            if arity > 0 {
                open.push((d, arity));
            } else {
                while matches!(open.last(), Some(&(_, 0))) {
                    open.pop();
                }
            }
        }
        depths
    }

    pub fn depth(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// Indices of constant nodes in preorder.
    pub fn constant_positions(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.token == Token::Const)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn constants(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter(|n| n.token == Token::Const)
            .map(|n| n.value)
            .collect()
    }

    /// Copy with constant values replaced in preorder. Panics if the number of
    /// values does not match the number of constant nodes.
    pub fn with_constants(&self, values: &[f64]) -> ExprTree {
        let mut out = self.clone();
        out.set_constants(values);
        out
    }

    pub fn set_constants(&mut self, values: &[f64]) {
        let mut it = values.iter();
        for n in self.nodes.iter_mut().filter(|n| n.token == Token::Const) {
            n.value = *it.next().expect("too few constant values");
        }
        assert!(it.next().is_none(), "too many constant values");
    }

    pub fn has_variable(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n.token, Token::Var(_)))
    }

    /// Number of input columns the tree needs (highest variable index + 1).
    pub fn required_dims(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n.token {
                Token::Var(k) => Some(k as usize + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Preorder token sequence with constants collapsed to the `C` class.
    pub fn symbol_key(&self) -> Vec<Token> {
        self.tokens().collect()
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::sexpr::to_sexpr(self))
    }
}

/// A flat token sequence: a linearized tree, possibly masked, or two
/// linearized trees joined by a separator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq {
    items: Vec<Node>,
}

impl TokenSeq {
    pub fn new(items: Vec<Node>) -> Self {
        TokenSeq { items }
    }

    pub fn from_tokens(tokens: &[Token]) -> Self {
        TokenSeq {
            items: tokens.iter().map(|&t| Node::new(t)).collect(),
        }
    }

    pub fn items(&self) -> &[Node] {
        &self.items
    }

    pub fn into_items(self) -> Vec<Node> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn token(&self, i: usize) -> Token {
        self.items[i].token
    }

    pub fn tokens(&self) -> Vec<Token> {
        self.items.iter().map(|n| n.token).collect()
    }

    pub fn mask_positions(&self) -> Vec<usize> {
        self.positions_of(Token::Mask)
    }

    pub fn sep_position(&self) -> Option<usize> {
        self.items.iter().position(|n| n.token == Token::Sep)
    }

    fn positions_of(&self, t: Token) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, n)| n.token == t)
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy with `positions` replaced by the mask marker.
    pub fn mask(&self, positions: &[usize]) -> Result<TokenSeq, ExprError> {
        let mut out = self.clone();
        for &p in positions {
            let item = out.items.get_mut(p).ok_or(ExprError::OutOfRange {
                index: p,
                len: self.items.len(),
            })?;
            if item.token == Token::Sep {
                return Err(ExprError::InvalidToken {
                    token: Token::Sep,
                    position: p,
                });
            }
            *item = Node::new(Token::Mask);
        }
        Ok(out)
    }

    /// `a ++ [SEP] ++ b`.
    pub fn joint(a: &TokenSeq, b: &TokenSeq) -> TokenSeq {
        let mut items = Vec::with_capacity(a.len() + b.len() + 1);
        items.extend_from_slice(&a.items);
        items.push(Node::new(Token::Sep));
        items.extend_from_slice(&b.items);
        TokenSeq { items }
    }

    /// Split a joint sequence at its separator.
    pub fn split_joint(&self) -> Option<(TokenSeq, TokenSeq)> {
        let sep = self.sep_position()?;
        Some((
            TokenSeq::new(self.items[..sep].to_vec()),
            TokenSeq::new(self.items[sep + 1..].to_vec()),
        ))
    }

    pub fn set(&mut self, i: usize, node: Node) {
        self.items[i] = node;
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", n.token)?;
        }
        Ok(())
    }
}

/// Depth-first, root-first token list of `tree`.
pub fn linearize(tree: &ExprTree) -> TokenSeq {
    TokenSeq {
        items: tree.nodes.clone(),
    }
}

/// Decode a preorder sequence, repairing it when it is not an exact encoding.
///
/// Tokens after the point where the arity budget reaches zero are dropped;
/// unfilled operands at the end are padded with `x1` leaves.
pub fn decode(seq: &TokenSeq) -> Result<ExprTree, ExprError> {
    decode_with_report(seq).map(|(t, _)| t)
}

/// Like [`decode`], also reporting whether repair changed the sequence.
pub fn decode_with_report(seq: &TokenSeq) -> Result<(ExprTree, bool), ExprError> {
    if seq.is_empty() {
        return Err(ExprError::RepairImpossible);
    }
    let mut nodes = Vec::with_capacity(seq.len());
    let mut need = 1usize;
    let mut repaired = false;
    for (pos, n) in seq.items.iter().enumerate() {
        if n.token.is_special() {
            return Err(ExprError::InvalidToken {
                token: n.token,
                position: pos,
            });
        }
        if need == 0 {
            repaired = true;
            break;
        }
        nodes.push(*n);
        need = need - 1 + n.token.arity();
    }
    if need > 0 {
        repaired = true;
        nodes.extend(std::iter::repeat_n(Node::var(0), need));
    }
    Ok((ExprTree { nodes }, repaired))
}

/// Half-open range of the subtree rooted at `root` in a preorder sequence.
pub fn subtree_span(seq: &TokenSeq, root: usize) -> Result<Range<usize>, ExprError> {
    if root >= seq.len() {
        return Err(ExprError::OutOfRange {
            index: root,
            len: seq.len(),
        });
    }
    let mut need = 1usize;
    for k in root..seq.len() {
        let t = seq.items[k].token;
        if t.is_special() {
            return Err(ExprError::InvalidToken {
                token: t,
                position: k,
            });
        }
        need = need - 1 + t.arity();
        if need == 0 {
            return Ok(root..k + 1);
        }
    }
    Err(ExprError::Malformed(format!(
        "subtree at {root} runs past the end of the sequence"
    )))
}

/// Result of exchanging two subtrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapResult {
    pub first: ExprTree,
    pub second: ExprTree,
    /// `rejected[k]` is set when offspring `k` exceeded the node limit and the
    /// corresponding parent was returned in its place.
    pub rejected: [bool; 2],
}

impl SwapResult {
    pub fn any_rejected(&self) -> bool {
        self.rejected[0] || self.rejected[1]
    }
}

/// Exchange the subtree of `a` rooted at `i` with the subtree of `b` rooted
/// at `j`. Offspring larger than `max_nodes` are replaced by their parent.
pub fn swap_subtrees(
    a: &ExprTree,
    i: usize,
    b: &ExprTree,
    j: usize,
    max_nodes: usize,
) -> Result<SwapResult, ExprError> {
    if i >= a.len() {
        return Err(ExprError::OutOfRange {
            index: i,
            len: a.len(),
        });
    }
    if j >= b.len() {
        return Err(ExprError::OutOfRange {
            index: j,
            len: b.len(),
        });
    }
    let sub_a = a.subtree(i);
    let sub_b = b.subtree(j);
    let child_a = a.replace_subtree(i, &sub_b);
    let child_b = b.replace_subtree(j, &sub_a);
    let reject_a = child_a.len() > max_nodes;
    let reject_b = child_b.len() > max_nodes;
    Ok(SwapResult {
        first: if reject_a { a.clone() } else { child_a },
        second: if reject_b { b.clone() } else { child_b },
        rejected: [reject_a, reject_b],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_sexpr;

    fn t(s: &str) -> ExprTree {
        parse_sexpr(s).unwrap()
    }

    fn seq(tokens: &[Token]) -> TokenSeq {
        TokenSeq::from_tokens(tokens)
    }

    use Token::*;

    #[test]
    fn linearize_is_preorder() {
        let tree = t("(add x1 (sin x1))");
        assert_eq!(linearize(&tree).tokens(), vec![Add, Var(0), Sin, Var(0)]);
        assert_eq!(linearize(&t("x3")).tokens(), vec![Var(2)]);
    }

    #[test]
    fn decode_exact_round_trip() {
        let s = seq(&[Add, Var(0), Sin, Var(0)]);
        let (tree, repaired) = decode_with_report(&s).unwrap();
        assert!(!repaired);
        assert_eq!(tree, t("(add x1 (sin x1))"));
    }

    #[test]
    fn decode_pads_dangling_operator() {
        let tree = decode(&seq(&[Sin])).unwrap();
        assert_eq!(tree, t("(sin x1)"));
        let tree = decode(&seq(&[Add, Var(1)])).unwrap();
        assert_eq!(tree, t("(add x2 x1)"));
    }

    #[test]
    fn decode_truncates_excess() {
        assert_eq!(decode(&seq(&[Var(0), Var(1)])).unwrap(), t("x1"));
    }

    #[test]
    fn decode_rejects_empty_and_special() {
        assert_eq!(decode(&seq(&[])), Err(ExprError::RepairImpossible));
        assert!(matches!(
            decode(&seq(&[Add, Mask, Var(0)])),
            Err(ExprError::InvalidToken { .. })
        ));
    }

    #[test]
    fn mask_replaces_positions() {
        let s = seq(&[Add, Var(0), Var(0)]);
        assert_eq!(s.mask(&[0]).unwrap().tokens(), vec![Mask, Var(0), Var(0)]);
        assert_eq!(s.mask(&[]).unwrap(), s);
        let s = seq(&[Add, Var(0), Sin, Var(0)]);
        assert_eq!(
            s.mask(&[2]).unwrap().tokens(),
            vec![Add, Var(0), Mask, Var(0)]
        );
        assert!(matches!(s.mask(&[4]), Err(ExprError::OutOfRange { .. })));
        let j = TokenSeq::joint(&s, &s);
        assert!(j.mask(&[4]).is_err());
    }

    #[test]
    fn spans() {
        let s = seq(&[Add, Var(0), Sin, Var(0)]);
        assert_eq!(subtree_span(&s, 2).unwrap(), 2..4);
        assert_eq!(subtree_span(&s, 0).unwrap(), 0..4);
        let s = seq(&[Mul, Add, Var(0), Var(1), Var(2)]);
        assert_eq!(subtree_span(&s, 1).unwrap(), 1..4);
        assert!(subtree_span(&s, 5).is_err());
    }

    #[test]
    fn swap_examples() {
        let a = t("(add x1 x2)");
        let b = t("(sin x3)");
        let r = swap_subtrees(&a, 0, &b, 0, 60).unwrap();
        assert_eq!((r.first.clone(), r.second.clone()), (b.clone(), a.clone()));
        let r = swap_subtrees(&a, 1, &b, 1, 60).unwrap();
        assert_eq!(r.first, t("(add x3 x2)"));
        assert_eq!(r.second, t("(sin x1)"));
        assert!(!r.any_rejected());
    }

    #[test]
    fn swap_rejects_oversized_offspring() {
        // Offspring `a` grows to 9 nodes, above the limit of 7.
        let a = t("(add x1 x2)");
        let b = t("(mul (add x1 x2) (sub x3 x1))");
        let r = swap_subtrees(&a, 1, &b, 0, 7).unwrap();
        assert_eq!(a.len() - 1 + b.len(), 9);
        assert_eq!(r.rejected, [true, false]);
        assert_eq!(r.first, a);
        assert_eq!(r.second, t("x1"));
    }

    #[test]
    fn depths_and_children() {
        let tree = t("(mul (add x1 x2) (sin x3))");
        assert_eq!(tree.depths(), vec![0, 1, 2, 2, 1, 2]);
        assert_eq!(tree.children(0), vec![1, 4]);
        assert_eq!(tree.children(4), vec![5]);
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.required_dims(), 3);
    }

    #[test]
    fn from_nodes_validates() {
        assert!(ExprTree::from_nodes(vec![Node::new(Add), Node::var(0)]).is_err());
        assert!(ExprTree::from_nodes(vec![Node::var(0), Node::var(0)]).is_err());
        assert!(ExprTree::from_nodes(vec![]).is_err());
    }
}

//! Expression vocabulary, preorder trees, text formats, simplification and
//! tree edit distance.

mod distance;
mod grow;
mod infix;
pub mod ops;
mod sexpr;
mod simplify;
mod token;
mod tree;

pub use distance::{normalized_edit_distance, tree_edit_distance};
pub use grow::{grow_tree, max_operator_depth};
pub use infix::{parse_infix, to_infix};
pub use sexpr::{parse_sexpr, to_sexpr};
pub use simplify::simplify;
pub use token::{Token, TokenKind, UnknownToken, MAX_VARS, VOCAB_SIZE};
pub use tree::{
    decode, decode_with_report, linearize, subtree_span, swap_subtrees, ExprTree, Node, SwapResult,
    TokenSeq,
};

/// Normalized edit distance, `min(1, d(pred, truth) / |truth|)`.
pub fn ned(pred: &ExprTree, truth: &ExprTree) -> f64 {
    normalized_edit_distance(pred, truth)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("token sequence is empty and cannot be repaired into a tree")]
    RepairImpossible,
    #[error("index {index} is out of range for a sequence of length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("token `{token}` is not allowed at position {position}")]
    InvalidToken { token: Token, position: usize },
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("parse error: {0}")]
    Parse(String),
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of variable symbols in the vocabulary (`x1` .. `x10`).
pub const MAX_VARS: usize = 10;

/// Size of the closed vocabulary: 4 binary, 5 unary, 10 variables, `C`,
/// and the three special markers.
pub const VOCAB_SIZE: usize = 23;

/// Coarse symbol class of a [`Token`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenKind {
    Binary,
    Unary,
    Variable,
    Constant,
    Mask,
    Sep,
    Pad,
}

/// One symbol of the expression vocabulary.
///
/// Constants are a single placeholder symbol `C`; the numeric value lives in
/// the [`Node`](super::Node) that carries the token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Token {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    /// Zero-based variable index; displayed one-based (`Var(0)` is `x1`).
    Var(u8),
    Const,
    Mask,
    Sep,
    Pad,
}

impl Token {
    pub const BINARY: [Token; 4] = [Token::Add, Token::Sub, Token::Mul, Token::Div];
    pub const UNARY: [Token; 5] = [Token::Sin, Token::Cos, Token::Exp, Token::Log, Token::Sqrt];

    pub fn kind(self) -> TokenKind {
        match self {
            Token::Add | Token::Sub | Token::Mul | Token::Div => TokenKind::Binary,
            Token::Sin | Token::Cos | Token::Exp | Token::Log | Token::Sqrt => TokenKind::Unary,
            Token::Var(_) => TokenKind::Variable,
            Token::Const => TokenKind::Constant,
            Token::Mask => TokenKind::Mask,
            Token::Sep => TokenKind::Sep,
            Token::Pad => TokenKind::Pad,
        }
    }

    /// Number of children the token takes inside a tree. Special markers
    /// report 0 but never appear in a finalized tree.
    pub fn arity(self) -> usize {
        match self.kind() {
            TokenKind::Binary => 2,
            TokenKind::Unary => 1,
            _ => 0,
        }
    }

    pub fn is_special(self) -> bool {
        matches!(self, Token::Mask | Token::Sep | Token::Pad)
    }

    /// Tokens allowed inside a finalized tree.
    pub fn is_tree_symbol(self) -> bool {
        !self.is_special()
    }

    pub fn var(index: usize) -> Token {
        assert!(index < MAX_VARS, "variable index {index} out of range");
        Token::Var(index as u8)
    }

    /// Stable vocabulary index in `0..VOCAB_SIZE`.
    pub fn id(self) -> usize {
        match self {
            Token::Add => 0,
            Token::Sub => 1,
            Token::Mul => 2,
            Token::Div => 3,
            Token::Sin => 4,
            Token::Cos => 5,
            Token::Exp => 6,
            Token::Log => 7,
            Token::Sqrt => 8,
            Token::Var(k) => 9 + k as usize,
            Token::Const => 19,
            Token::Mask => 20,
            Token::Sep => 21,
            Token::Pad => 22,
        }
    }

    pub fn from_id(id: usize) -> Option<Token> {
        Some(match id {
            0 => Token::Add,
            1 => Token::Sub,
            2 => Token::Mul,
            3 => Token::Div,
            4 => Token::Sin,
            5 => Token::Cos,
            6 => Token::Exp,
            7 => Token::Log,
            8 => Token::Sqrt,
            9..=18 => Token::Var((id - 9) as u8),
            19 => Token::Const,
            20 => Token::Mask,
            21 => Token::Sep,
            22 => Token::Pad,
            _ => return None,
        })
    }

    /// Every token in vocabulary order.
    pub fn vocabulary() -> impl Iterator<Item = Token> {
        (0..VOCAB_SIZE).filter_map(Token::from_id)
    }

    /// Symbols a guide may place in a masked slot for a dataset with `dims`
    /// input columns, in vocabulary order.
    pub fn fillable(dims: usize) -> Vec<Token> {
        Token::vocabulary()
            .filter(|t| match t {
                Token::Var(k) => (*k as usize) < dims,
                t => t.is_tree_symbol(),
            })
            .collect()
    }

    pub fn name(self) -> String {
        match self {
            Token::Add => "add".into(),
            Token::Sub => "sub".into(),
            Token::Mul => "mul".into(),
            Token::Div => "div".into(),
            Token::Sin => "sin".into(),
            Token::Cos => "cos".into(),
            Token::Exp => "exp".into(),
            Token::Log => "log".into(),
            Token::Sqrt => "sqrt".into(),
            Token::Var(k) => format!("x{}", k + 1),
            Token::Const => "C".into(),
            Token::Mask => "[MASK]".into(),
            Token::Sep => "[SEP]".into(),
            Token::Pad => "[PAD]".into(),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown token `{0}`")]
pub struct UnknownToken(pub String);

impl FromStr for Token {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "add" => Token::Add,
            "sub" => Token::Sub,
            "mul" => Token::Mul,
            "div" => Token::Div,
            "sin" => Token::Sin,
            "cos" => Token::Cos,
            "exp" => Token::Exp,
            "log" => Token::Log,
            "sqrt" => Token::Sqrt,
            "C" => Token::Const,
            "[MASK]" => Token::Mask,
            "[SEP]" => Token::Sep,
            "[PAD]" => Token::Pad,
            _ => {
                let idx = s
                    .strip_prefix('x')
                    .and_then(|rest| rest.parse::<usize>().ok())
                    .filter(|k| (1..=MAX_VARS).contains(k))
                    .ok_or_else(|| UnknownToken(s.to_string()))?;
                Token::Var((idx - 1) as u8)
            }
        })
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.name()
    }
}

impl TryFrom<String> for Token {
    type Error = UnknownToken;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

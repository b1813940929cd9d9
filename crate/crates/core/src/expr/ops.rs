//! Protected (total) semantics of the operator vocabulary.
//!
//! Every operator maps finite inputs to finite outputs: partial functions are
//! guarded and overflowing results saturate at `±f64::MAX`.

use super::Token;

/// Smallest magnitude a divisor is allowed to take.
pub const DIV_GUARD: f64 = 1e-9;
/// Offset added inside the logarithm.
pub const LOG_GUARD: f64 = 1e-9;
/// Upper clamp on the exponent argument.
pub const EXP_CLAMP: f64 = 40.0;

#[inline]
pub fn saturate(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-f64::MAX, f64::MAX)
    }
}

#[inline]
pub fn protected_div(a: f64, b: f64) -> f64 {
    let denom = if b.abs() < DIV_GUARD {
        if b < 0.0 {
            -DIV_GUARD
        } else {
            DIV_GUARD
        }
    } else {
        b
    };
    saturate(a / denom)
}

#[inline]
pub fn protected_log(x: f64) -> f64 {
    saturate((x.abs() + LOG_GUARD).ln())
}

#[inline]
pub fn protected_sqrt(x: f64) -> f64 {
    x.abs().sqrt()
}

#[inline]
pub fn protected_exp(x: f64) -> f64 {
    saturate(x.min(EXP_CLAMP).exp())
}

/// Apply a unary operator token. Panics on non-unary tokens.
#[inline]
pub fn apply_unary(op: Token, x: f64) -> f64 {
    match op {
        Token::Sin => x.sin(),
        Token::Cos => x.cos(),
        Token::Exp => protected_exp(x),
        Token::Log => protected_log(x),
        Token::Sqrt => protected_sqrt(x),
        other => panic!("{other} is not a unary operator"),
    }
}

/// Apply a binary operator token. Panics on non-binary tokens.
#[inline]
pub fn apply_binary(op: Token, a: f64, b: f64) -> f64 {
    match op {
        Token::Add => saturate(a + b),
        Token::Sub => saturate(a - b),
        Token::Mul => saturate(a * b),
        Token::Div => protected_div(a, b),
        other => panic!("{other} is not a binary operator"),
    }
}

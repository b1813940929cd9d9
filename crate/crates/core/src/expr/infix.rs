//! Conventional infix notation, used for the benchmark registry and for
//! human-readable output.
//!
//! The parser lowers everything onto the closed vocabulary: integer powers
//! become left-deep product chains, `tan`, `tanh` and `abs` are rewritten in
//! terms of the base operators, and any other power `b^e` becomes
//! `exp(e * log(b))`. Sums and products associate to the left.

use super::{ExprError, ExprTree, Token};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(s: &str) -> Result<Vec<Tok>, ExprError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // Scientific notation: 1e-3, 2.5E+4.
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| ExprError::Parse(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Tok::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Tok::RParen);
            i += 1;
        } else {
            return Err(ExprError::Parse(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(ExprError::Parse(format!(
                "expected {want:?}, found {other:?}"
            ))),
        }
    }

    fn expr(&mut self) -> Result<ExprTree, ExprError> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { Token::Add } else { Token::Sub };
            acc = ExprTree::binary(op, acc, rhs);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<ExprTree, ExprError> {
        let mut acc = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { Token::Mul } else { Token::Div };
            acc = ExprTree::binary(op, acc, rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<ExprTree, ExprError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(negate(inner));
        }
        if let Some(Tok::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprTree, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            // Exponents bind tighter than unary minus on the left but may
            // themselves carry a sign: x^-2.
            let exponent = self.unary()?;
            return Ok(power(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprTree, ExprError> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(ExprTree::constant(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return function(&name, arg);
                }
                match name.as_str() {
                    "pi" => Ok(ExprTree::constant(std::f64::consts::PI)),
                    "e" => Ok(ExprTree::constant(std::f64::consts::E)),
                    _ => {
                        let t: Token = name.parse().map_err(|_| {
                            ExprError::Parse(format!("unknown identifier `{name}`"))
                        })?;
                        match t {
                            Token::Var(_) => Ok(ExprTree::leaf(t)),
                            _ => Err(ExprError::Parse(format!("`{name}` is not a leaf"))),
                        }
                    }
                }
            }
            other => Err(ExprError::Parse(format!("unexpected {other:?}"))),
        }
    }
}

fn const_value(t: &ExprTree) -> Option<f64> {
    if t.len() == 1 && t.root().token == Token::Const {
        Some(t.root().value)
    } else if !t.has_variable() {
        // Fold a variable-free subexpression such as `1/3`.
        Some(crate::eval::eval_point(t, &[]))
    } else {
        None
    }
}

fn negate(e: ExprTree) -> ExprTree {
    if e.len() == 1 && e.root().token == Token::Const {
        ExprTree::constant(-e.root().value)
    } else {
        ExprTree::binary(Token::Sub, ExprTree::constant(0.0), e)
    }
}

fn product_chain(base: &ExprTree, n: u32) -> ExprTree {
    let mut acc = base.clone();
    for _ in 1..n {
        acc = ExprTree::binary(Token::Mul, acc, base.clone());
    }
    acc
}

fn power(base: ExprTree, exponent: ExprTree) -> ExprTree {
    if let Some(p) = const_value(&exponent) {
        if p == 0.0 {
            return ExprTree::constant(1.0);
        }
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            let chain = product_chain(&base, p.abs() as u32);
            return if p > 0.0 {
                chain
            } else {
                ExprTree::binary(Token::Div, ExprTree::constant(1.0), chain)
            };
        }
        if p == 0.5 {
            return ExprTree::unary(Token::Sqrt, base);
        }
        if p == -0.5 {
            return ExprTree::binary(
                Token::Div,
                ExprTree::constant(1.0),
                ExprTree::unary(Token::Sqrt, base),
            );
        }
    }
    // Fold a constant exponent such as `1/3` into a single literal.
    let exponent = match const_value(&exponent) {
        Some(p) => ExprTree::constant(p),
        None => exponent,
    };
    ExprTree::unary(
        Token::Exp,
        ExprTree::binary(Token::Mul, exponent, ExprTree::unary(Token::Log, base)),
    )
}

fn function(name: &str, arg: ExprTree) -> Result<ExprTree, ExprError> {
    let unary = |t| Ok(ExprTree::unary(t, arg.clone()));
    match name {
        "sin" => unary(Token::Sin),
        "cos" => unary(Token::Cos),
        "exp" => unary(Token::Exp),
        "log" | "ln" => unary(Token::Log),
        "sqrt" => unary(Token::Sqrt),
        "tan" => Ok(ExprTree::binary(
            Token::Div,
            ExprTree::unary(Token::Sin, arg.clone()),
            ExprTree::unary(Token::Cos, arg),
        )),
        "tanh" => {
            // (e^{2a} - 1) / (e^{2a} + 1)
            let e2 = ExprTree::unary(
                Token::Exp,
                ExprTree::binary(Token::Mul, ExprTree::constant(2.0), arg),
            );
            Ok(ExprTree::binary(
                Token::Div,
                ExprTree::binary(Token::Sub, e2.clone(), ExprTree::constant(1.0)),
                ExprTree::binary(Token::Add, e2, ExprTree::constant(1.0)),
            ))
        }
        "abs" => Ok(ExprTree::unary(
            Token::Sqrt,
            ExprTree::binary(Token::Mul, arg.clone(), arg),
        )),
        _ => Err(ExprError::Parse(format!("unknown function `{name}`"))),
    }
}

/// Parse infix notation into a tree over the closed vocabulary.
pub fn parse_infix(s: &str) -> Result<ExprTree, ExprError> {
    let toks = lex(s)?;
    if toks.is_empty() {
        return Err(ExprError::Parse("empty expression".into()));
    }
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(ExprError::Parse(format!(
            "unexpected trailing input at token {}",
            p.pos
        )));
    }
    Ok(e)
}

/// Fully parenthesized infix rendering.
pub fn to_infix(tree: &ExprTree) -> String {
    fn go(t: &ExprTree, i: usize, out: &mut String) -> usize {
        let n = t.node(i);
        match n.token {
            Token::Const => {
                out.push_str(&format!("{}", n.value));
                i + 1
            }
            Token::Var(_) => {
                out.push_str(&n.token.name());
                i + 1
            }
            op if op.arity() == 1 => {
                out.push_str(&op.name());
                out.push('(');
                let next = go(t, i + 1, out);
                out.push(')');
                next
            }
            op => {
                let sym = match op {
                    Token::Add => " + ",
                    Token::Sub => " - ",
                    Token::Mul => " * ",
                    _ => " / ",
                };
                out.push('(');
                let mid = go(t, i + 1, out);
                out.push_str(sym);
                let next = go(t, mid, out);
                out.push(')');
                next
            }
        }
    }
    let mut out = String::new();
    go(tree, 0, &mut out);
    out
}

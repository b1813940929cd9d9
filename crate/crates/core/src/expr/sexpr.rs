//! Canonical S-expression text form, e.g. `(add x1 (mul (const 2.5) x2))`.

use super::{ExprError, ExprTree, Node, Token};

pub fn to_sexpr(tree: &ExprTree) -> String {
    let mut out = String::new();
    write_node(tree, 0, &mut out);
    out
}

fn write_node(tree: &ExprTree, i: usize, out: &mut String) -> usize {
    let n = tree.node(i);
    match n.token.arity() {
        0 => {
            if n.token == Token::Const {
                out.push_str(&format!("(const {})", n.value));
            } else {
                out.push_str(&n.token.name());
            }
            i + 1
        }
        _ => {
            out.push('(');
            out.push_str(&n.token.name());
            let mut next = i + 1;
            for _ in 0..n.token.arity() {
                out.push(' ');
                next = write_node(tree, next, out);
            }
            out.push(')');
            next
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Lex {
    Open,
    Close,
    Atom(String),
}

fn lex(s: &str) -> Vec<Lex> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<Lex>| {
        if !cur.is_empty() {
            out.push(Lex::Atom(std::mem::take(cur)));
        }
    };
    for ch in s.chars() {
        match ch {
            '(' => {
                flush(&mut cur, &mut out);
                out.push(Lex::Open);
            }
            ')' => {
                flush(&mut cur, &mut out);
                out.push(Lex::Close);
            }
            c if c.is_whitespace() => flush(&mut cur, &mut out),
            c => cur.push(c),
        }
    }
    flush(&mut cur, &mut out);
    out
}

/// Parse the S-expression form. A bare `C` is a constant with value 1.
pub fn parse_sexpr(s: &str) -> Result<ExprTree, ExprError> {
    let toks = lex(s);
    let mut pos = 0;
    let mut nodes = Vec::new();
    parse_node(&toks, &mut pos, &mut nodes)?;
    if pos != toks.len() {
        return Err(ExprError::Parse(format!(
            "unexpected trailing input in `{s}`"
        )));
    }
    ExprTree::from_nodes(nodes)
}

fn parse_node(toks: &[Lex], pos: &mut usize, nodes: &mut Vec<Node>) -> Result<(), ExprError> {
    let err = |m: &str| ExprError::Parse(m.to_string());
    match toks.get(*pos) {
        None => Err(err("unexpected end of input")),
        Some(Lex::Close) => Err(err("unexpected `)`")),
        Some(Lex::Atom(a)) => {
            *pos += 1;
            let t: Token = a.parse().map_err(|e| ExprError::Parse(format!("{e}")))?;
            if t.arity() != 0 || t.is_special() {
                return Err(ExprError::Parse(format!("`{a}` cannot appear as a leaf")));
            }
            nodes.push(Node::new(t));
            Ok(())
        }
        Some(Lex::Open) => {
            *pos += 1;
            let head = match toks.get(*pos) {
                Some(Lex::Atom(a)) => a.clone(),
                _ => return Err(err("expected operator after `(`")),
            };
            *pos += 1;
            if head == "const" {
                let v = match toks.get(*pos) {
                    Some(Lex::Atom(a)) => a
                        .parse::<f64>()
                        .map_err(|_| ExprError::Parse(format!("bad constant `{a}`")))?,
                    _ => return Err(err("expected number after `const`")),
                };
                *pos += 1;
                nodes.push(Node::constant(v));
            } else {
                let t: Token = head.parse().map_err(|e| ExprError::Parse(format!("{e}")))?;
                if t.is_special() {
                    return Err(ExprError::Parse(format!("`{head}` is not a tree symbol")));
                }
                nodes.push(Node::new(t));
                for _ in 0..t.arity() {
                    parse_node(toks, pos, nodes)?;
                }
            }
            match toks.get(*pos) {
                Some(Lex::Close) => {
                    *pos += 1;
                    Ok(())
                }
                _ => Err(ExprError::Parse(format!("expected `)` after `{head}`"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for s in [
            "x1",
            "(add x1 (sin x1))",
            "(mul (const 2.5) (div x2 (const -0.125)))",
            "(sqrt (log (exp (cos x10))))",
        ] {
            let t = parse_sexpr(s).unwrap();
            assert_eq!(to_sexpr(&t), s);
        }
    }

    #[test]
    fn bare_constant_defaults_to_one() {
        let t = parse_sexpr("(add C x1)").unwrap();
        assert_eq!(t.constants(), vec![1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        for s in [
            "",
            "(add x1)",
            "(add x1 x2 x3)",
            "(foo x1)",
            "x1 x2",
            "(sin [MASK])",
            "sin",
        ] {
            assert!(parse_sexpr(s).is_err(), "{s}");
        }
    }
}

//! Recursive-descent parser for the expression language.
//!
//! Grammar (standard precedence, `^` binds tightest and is right-associative;
//! its exponent must fold to a numeric constant):
//!
//! ```text
//! expr   := term  (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          -- exponent constant-folded
//! atom   := number | ident | 'sqrt' '(' expr ')' | '(' expr ')'
//! ```
//!
//! A leading minus on a literal is folded into the constant, so the parse of an
//! unparsed tree reproduces the tree.

use super::{parse_indexed, Expr, Node, Signature};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'+' => {
                tokens.push((Tok::Plus, start));
                i += 1;
            }
            b'-' => {
                tokens.push((Tok::Minus, start));
                i += 1;
            }
            b'*' => {
                tokens.push((Tok::Star, start));
                i += 1;
            }
            b'/' => {
                tokens.push((Tok::Slash, start));
                i += 1;
            }
            b'^' => {
                tokens.push((Tok::Caret, start));
                i += 1;
            }
            b'(' => {
                tokens.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                tokens.push((Tok::RParen, start));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                tokens.push((Tok::Num(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character `{}`", &src[start..start + 1]),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    sig: &'a Signature,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, o)| *o)
            .unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<usize> {
        let offset = self.offset();
        match self.bump() {
            Some((t, o)) if t == tok => Ok(o),
            _ => Err(Error::Syntax {
                offset,
                message: format!("expected {what}"),
            }),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    let (_, o) = self.bump().unwrap();
                    let rhs = self.parse_term()?;
                    lhs = Expr::new(Node::Add(Box::new(lhs), Box::new(rhs)), o);
                }
                Some(Tok::Minus) => {
                    let (_, o) = self.bump().unwrap();
                    let rhs = self.parse_term()?;
                    lhs = Expr::new(Node::Sub(Box::new(lhs), Box::new(rhs)), o);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    let (_, o) = self.bump().unwrap();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::new(Node::Mul(Box::new(lhs), Box::new(rhs)), o);
                }
                Some(Tok::Slash) => {
                    let (_, o) = self.bump().unwrap();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::new(Node::Div(Box::new(lhs), Box::new(rhs)), o);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if let Some(Tok::Minus) = self.peek() {
            let (_, o) = self.bump().unwrap();
            let inner = self.parse_unary()?;
            // fold a negated literal into the constant so unparse round-trips
            if let Node::Const(c) = inner.node {
                return Ok(Expr::new(Node::Const(-c), o));
            }
            return Ok(Expr::new(Node::Neg(Box::new(inner)), o));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if let Some(Tok::Caret) = self.peek() {
            let (_, caret_at) = self.bump().unwrap();
            let exp_at = self.offset();
            let exponent = self.parse_unary()?;
            let folded = fold_const(&exponent).ok_or(Error::Syntax {
                offset: exp_at,
                message: "exponent must be a numeric constant".to_string(),
            })?;
            return Ok(Expr::new(Node::Pow(Box::new(base), folded), caret_at));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.bump() {
            Some((Tok::Num(value), o)) => Ok(Expr::new(Node::Const(value), o)),
            Some((Tok::Ident(name), o)) => {
                if name == "sqrt" {
                    self.expect(Tok::LParen, "`(` after sqrt")?;
                    let arg = self.parse_expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::new(Node::Sqrt(Box::new(arg)), o));
                }
                if let Some(i) = parse_indexed(&name, 'x') {
                    if i < self.sig.n() {
                        return Ok(Expr::new(Node::State(i), o));
                    }
                    return Err(Error::UnknownVariable { name, offset: o });
                }
                if let Some(j) = parse_indexed(&name, 'u') {
                    if j < self.sig.r() {
                        return Ok(Expr::new(Node::Input(j), o));
                    }
                    return Err(Error::UnknownVariable { name, offset: o });
                }
                if self.sig.has_param(&name) {
                    return Ok(Expr::new(Node::Param(name), o));
                }
                Err(Error::UnknownVariable { name, offset: o })
            }
            Some((Tok::LParen, _)) => {
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(Error::Syntax {
                offset,
                message: "expected an operand".to_string(),
            }),
        }
    }
}

/// Evaluate a closed constant subtree, if it is one.
fn fold_const(expr: &Expr) -> Option<f64> {
    match &expr.node {
        Node::Const(c) => Some(*c),
        Node::Neg(e) => fold_const(e).map(|c| -c),
        Node::Add(a, b) => Some(fold_const(a)? + fold_const(b)?),
        Node::Sub(a, b) => Some(fold_const(a)? - fold_const(b)?),
        Node::Mul(a, b) => Some(fold_const(a)? * fold_const(b)?),
        Node::Div(a, b) => {
            let d = fold_const(b)?;
            (d != 0.0).then(|| fold_const(a).map(|n| n / d))?
        }
        Node::Pow(base, p) => fold_const(base).map(|b| b.powf(*p)),
        Node::Sqrt(e) => fold_const(e).filter(|c| *c >= 0.0).map(f64::sqrt),
        _ => None,
    }
}

/// Parse `source` against the signature; errors carry byte offsets.
pub fn parse_expr(source: &str, sig: &Signature) -> Result<Expr> {
    if source.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".to_string(),
        });
    }
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: source.len(),
        sig,
    };
    let expr = parser.parse_expr()?;
    if parser.pos < parser.tokens.len() {
        return Err(Error::Syntax {
            offset: parser.offset(),
            message: "unexpected trailing input".to_string(),
        });
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_plain, Node};
    use std::collections::BTreeMap;

    fn sig3() -> Signature {
        Signature::new(3, 1, &["nu", "r0", "chi0", "ar"]).unwrap()
    }

    #[test]
    fn single_token_variable() {
        let e = parse_expr("x2", &sig3()).unwrap();
        assert!(matches!(e.node, Node::State(1)));
    }

    #[test]
    fn trailing_operator_reports_end_offset() {
        let err = parse_expr("x1 +", &sig3()).unwrap_err();
        assert_eq!(
            err,
            Error::Syntax {
                offset: 4,
                message: "expected an operand".into()
            }
        );
    }

    #[test]
    fn unknown_variable_is_reported_with_name() {
        let err = parse_expr("x1 + foo", &sig3()).unwrap_err();
        assert_eq!(
            err,
            Error::UnknownVariable {
                name: "foo".into(),
                offset: 5
            }
        );
        // state index out of range is unknown too
        assert!(matches!(
            parse_expr("x7", &sig3()).unwrap_err(),
            Error::UnknownVariable { .. }
        ));
    }

    #[test]
    fn precedence_and_associativity() {
        let sig = Signature::new(1, 1, &[]).unwrap();
        let params = BTreeMap::new();
        let v = |s: &str| eval_plain(&parse_expr(s, &sig).unwrap(), &[2.0], &[0.0], &params).unwrap();
        assert_eq!(v("1 + 2*3"), 7.0);
        assert_eq!(v("2*x1^3"), 16.0); // pow binds tighter than mul
        assert_eq!(v("-x1^2"), -4.0); // pow binds tighter than unary minus
        assert_eq!(v("8 - 3 - 2"), 3.0); // left associative
        assert_eq!(v("16/4/2"), 2.0);
        assert_eq!(v("2^3^2"), 512.0); // right associative, const-folded
        assert_eq!(v("x1^-2"), 0.25);
        assert_eq!(v("x1^(1/2)"), std::f64::consts::SQRT_2);
    }

    #[test]
    fn non_constant_exponent_rejected() {
        let sig = Signature::new(1, 1, &[]).unwrap();
        assert!(matches!(
            parse_expr("x1^x1", &sig).unwrap_err(),
            Error::Syntax { .. }
        ));
    }

    #[test]
    fn orbital_rhs_parses_and_matches_manual_evaluation() {
        let src = "-nu/(r0+x1)^2 + (chi0+x3)^2/(r0+x1)^3 + ar*u1";
        let e = parse_expr(src, &sig3()).unwrap();
        let mut params = BTreeMap::new();
        params.insert("nu".to_string(), 3.986004418e14);
        params.insert("r0".to_string(), 7.0e6);
        params.insert("chi0".to_string(), (3.986004418e14f64 * 7.0e6).sqrt());
        params.insert("ar".to_string(), 1.0);
        let x = [123.0, -4.0, 55.0];
        let u = [0.25];
        let got = eval_plain(&e, &x, &u, &params).unwrap();
        let nu = params["nu"];
        let r0 = params["r0"];
        let chi0 = params["chi0"];
        let want = -nu / (r0 + x[0]).powi(2) + (chi0 + x[2]).powi(2) / (r0 + x[0]).powi(3)
            + 1.0 * u[0];
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn negative_literal_folds_into_constant() {
        let sig = Signature::new(1, 0, &[]).unwrap();
        let e = parse_expr("-2.5", &sig).unwrap();
        assert!(matches!(e.node, Node::Const(c) if c == -2.5));
    }
}

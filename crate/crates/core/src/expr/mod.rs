//! Arithmetic expressions for system right-hand sides.
//!
//! Expressions are parsed against a fixed signature (state dimension `n`, input
//! dimension `r`, named parameters) and evaluated over any [`ExprNum`] carrier:
//! plain `f64`, [`TaylorJet`] for machine-exact derivatives along a curve, or
//! [`DualJet`] for Jacobian rows along a curve. There is no simplification and
//! no symbolic differentiation; all derivative information flows through jets.

mod jet;
mod parser;

pub use jet::{ArithError, DualJet, ExprNum, TaylorJet};
pub use parser::parse_expr;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Declared variable environment an expression is parsed against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    n: usize,
    r: usize,
    params: Vec<String>,
}

impl Signature {
    /// Parameter names must not shadow the reserved `x<k>` / `u<k>` variables.
    pub fn new(n: usize, r: usize, params: &[&str]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "state dimension n must be at least 1".into(),
            ));
        }
        for p in params {
            if parse_indexed(p, 'x').is_some() || parse_indexed(p, 'u').is_some() {
                return Err(Error::InvalidConfig(format!(
                    "parameter name `{p}` shadows a state/input variable"
                )));
            }
        }
        Ok(Self {
            n,
            r,
            params: params.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn has_param(&self, name: &str) -> bool {
        self.params.iter().any(|p| p == name)
    }
}

/// `x3` -> Some(2) for prefix 'x'; strict digits, 1-based.
fn parse_indexed(name: &str, prefix: char) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let idx: usize = rest.parse().ok()?;
    if idx == 0 {
        None
    } else {
        Some(idx - 1)
    }
}

/// Expression tree node. `Pow` exponents are constants by construction.
#[derive(Debug, Clone)]
pub enum Node {
    Const(f64),
    State(usize),
    Input(usize),
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Sqrt(Box<Expr>),
}

/// A parsed expression with the byte offset of its head token, used to position
/// runtime diagnostics such as divide-by-zero.
#[derive(Debug, Clone)]
pub struct Expr {
    pub node: Node,
    pub offset: usize,
}

impl Expr {
    pub(crate) fn new(node: Node, offset: usize) -> Self {
        Self { node, offset }
    }
}

/// Structural equality; source offsets are diagnostics, not identity.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.node, &other.node) {
            (Node::Const(a), Node::Const(b)) => a == b,
            (Node::State(a), Node::State(b)) => a == b,
            (Node::Input(a), Node::Input(b)) => a == b,
            (Node::Param(a), Node::Param(b)) => a == b,
            (Node::Neg(a), Node::Neg(b)) => a == b,
            (Node::Add(a1, a2), Node::Add(b1, b2))
            | (Node::Sub(a1, a2), Node::Sub(b1, b2))
            | (Node::Mul(a1, a2), Node::Mul(b1, b2))
            | (Node::Div(a1, a2), Node::Div(b1, b2)) => a1 == b1 && a2 == b2,
            (Node::Pow(a, p), Node::Pow(b, q)) => a == b && p == q,
            (Node::Sqrt(a), Node::Sqrt(b)) => a == b,
            _ => false,
        }
    }
}

/// Evaluate over any numeric carrier. `x` must be non-empty; it provides the
/// shape witness for lifting constants.
pub fn eval_with<T: ExprNum>(
    expr: &Expr,
    x: &[T],
    u: &[T],
    params: &BTreeMap<String, f64>,
) -> Result<T> {
    let witness = x.first().ok_or_else(|| {
        Error::InvalidConfig("evaluation requires at least one state variable".into())
    })?;
    eval_node(expr, x, u, params, witness)
}

fn eval_node<T: ExprNum>(
    expr: &Expr,
    x: &[T],
    u: &[T],
    params: &BTreeMap<String, f64>,
    witness: &T,
) -> Result<T> {
    let at = expr.offset;
    match &expr.node {
        Node::Const(c) => Ok(T::from_f64(*c, witness)),
        Node::State(i) => x.get(*i).cloned().ok_or_else(|| Error::UnknownVariable {
            name: format!("x{}", i + 1),
            offset: at,
        }),
        Node::Input(j) => u.get(*j).cloned().ok_or_else(|| Error::UnknownVariable {
            name: format!("u{}", j + 1),
            offset: at,
        }),
        Node::Param(name) => params
            .get(name)
            .map(|c| T::from_f64(*c, witness))
            .ok_or_else(|| Error::UnknownVariable {
                name: name.clone(),
                offset: at,
            }),
        Node::Neg(e) => Ok(eval_node(e, x, u, params, witness)?.neg()),
        Node::Add(a, b) => Ok(eval_node(a, x, u, params, witness)?
            .add(&eval_node(b, x, u, params, witness)?)),
        Node::Sub(a, b) => Ok(eval_node(a, x, u, params, witness)?
            .sub(&eval_node(b, x, u, params, witness)?)),
        Node::Mul(a, b) => Ok(eval_node(a, x, u, params, witness)?
            .mul(&eval_node(b, x, u, params, witness)?)),
        Node::Div(a, b) => {
            let num = eval_node(a, x, u, params, witness)?;
            let den = eval_node(b, x, u, params, witness)?;
            num.div(&den).map_err(|e| position(e, at))
        }
        Node::Pow(base, p) => {
            let b = eval_node(base, x, u, params, witness)?;
            let r = if p.fract() == 0.0 && p.abs() < 1e15 {
                b.powi(*p as i64)
            } else {
                b.powf(*p)
            };
            r.map_err(|e| position(e, at))
        }
        Node::Sqrt(e) => eval_node(e, x, u, params, witness)?
            .sqrt()
            .map_err(|e| position(e, at)),
    }
}

fn position(err: ArithError, offset: usize) -> Error {
    match err {
        ArithError::DivideByZero => Error::DivideByZero { offset },
        ArithError::Domain(message) => Error::Domain { offset, message },
    }
}

/// IEEE double evaluation of the tree.
pub fn eval_plain(
    expr: &Expr,
    x: &[f64],
    u: &[f64],
    params: &BTreeMap<String, f64>,
) -> Result<f64> {
    eval_with(expr, x, u, params)
}

/// Evaluate over jets; all jets must share one truncation order.
pub fn eval_jet(
    expr: &Expr,
    x: &[TaylorJet],
    u: &[TaylorJet],
    params: &BTreeMap<String, f64>,
) -> Result<TaylorJet> {
    let order = x
        .first()
        .map(TaylorJet::order)
        .ok_or_else(|| Error::InvalidConfig("eval_jet requires at least one state jet".into()))?;
    if x.iter().chain(u.iter()).any(|j| j.order() != order) {
        return Err(Error::InvalidConfig(
            "all jets passed to eval_jet must share the same order".into(),
        ));
    }
    eval_with(expr, x, u, params)
}

// Unparsing with minimal parentheses; `parse(format!("{e}"))` reproduces the tree.
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) => 4,
        _ => 5,
    }
}

fn fmt_expr(expr: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = precedence(&expr.node);
    let parens = prec < min_prec;
    if parens {
        write!(f, "(")?;
    }
    match &expr.node {
        Node::Const(c) => write!(f, "{c}")?,
        Node::State(i) => write!(f, "x{}", i + 1)?,
        Node::Input(j) => write!(f, "u{}", j + 1)?,
        Node::Param(p) => write!(f, "{p}")?,
        Node::Neg(e) => {
            write!(f, "-")?;
            fmt_expr(e, 3, f)?;
        }
        Node::Add(a, b) => {
            fmt_expr(a, 1, f)?;
            write!(f, " + ")?;
            fmt_expr(b, 2, f)?;
        }
        Node::Sub(a, b) => {
            fmt_expr(a, 1, f)?;
            write!(f, " - ")?;
            fmt_expr(b, 2, f)?;
        }
        Node::Mul(a, b) => {
            fmt_expr(a, 2, f)?;
            write!(f, "*")?;
            fmt_expr(b, 3, f)?;
        }
        Node::Div(a, b) => {
            fmt_expr(a, 2, f)?;
            write!(f, "/")?;
            fmt_expr(b, 3, f)?;
        }
        Node::Pow(base, p) => {
            fmt_expr(base, 5, f)?;
            write!(f, "^{p}")?;
        }
        Node::Sqrt(e) => {
            write!(f, "sqrt(")?;
            fmt_expr(e, 0, f)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_expr(self, 0, f)
    }
}

//! Controllable system description: dimensions, right-hand side expressions,
//! parameter values, and derivative access through jets.
//!
//! A model is only constructed if it satisfies the standing hypotheses: the
//! input dimension does not exceed the state dimension and the origin is an
//! equilibrium of the uncontrolled system, `f(0,0) = 0` to 1e-12.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{eval_jet, eval_plain, parse_expr, Expr, Signature, TaylorJet};
use crate::linalg::{normalized_rank, GreedyBasis, GREEDY_TOL, RANK_RTOL};

/// Default bound on the control norm when the configuration omits one.
pub const DEFAULT_CONTROL_BOUND: f64 = 1e3;
/// Default bound on the state deviation norm when the configuration omits one.
pub const DEFAULT_STATE_BOUND: f64 = 1e6;

const EQUILIBRIUM_TOL: f64 = 1e-12;

/// The system `dx/dt = f(x, u)` with named parameters and norm bounds.
#[derive(Debug, Clone)]
pub struct SystemModel {
    n: usize,
    r: usize,
    rhs: Vec<Expr>,
    params: BTreeMap<String, f64>,
    control_bound: f64,
    state_bound: f64,
}

/// Jacobians of the right-hand side at the origin.
#[derive(Debug, Clone)]
pub struct LinearizationPair {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

/// Result of the constant-coefficient controllability test.
#[derive(Debug, Clone)]
pub struct KalmanRank {
    pub rank: usize,
    /// The block matrix `(B, AB, ..., A^{n-1}B)`.
    pub s: DMatrix<f64>,
}

/// Greedy block structure of the target-point controllability columns.
#[derive(Debug, Clone)]
pub struct S1Rank {
    pub rank: usize,
    pub block_sizes: Vec<usize>,
}

impl SystemModel {
    pub fn new(
        n: usize,
        r: usize,
        rhs_sources: &[String],
        params: BTreeMap<String, f64>,
        control_bound: Option<f64>,
        state_bound: Option<f64>,
    ) -> Result<Self> {
        if r > n {
            return Err(Error::InvalidConfig(format!(
                "input dimension r = {r} exceeds state dimension n = {n}"
            )));
        }
        if rhs_sources.len() != n {
            return Err(Error::InvalidConfig(format!(
                "expected {n} right-hand sides, got {}",
                rhs_sources.len()
            )));
        }
        let names: Vec<&str> = params.keys().map(String::as_str).collect();
        let sig = Signature::new(n, r, &names)?;
        let rhs = rhs_sources
            .iter()
            .map(|s| parse_expr(s, &sig))
            .collect::<Result<Vec<_>>>()?;
        let model = Self {
            n,
            r,
            rhs,
            params,
            control_bound: control_bound.unwrap_or(DEFAULT_CONTROL_BOUND),
            state_bound: state_bound.unwrap_or(DEFAULT_STATE_BOUND),
        };
        let f0 = model.eval(&vec![0.0; n], &vec![0.0; r])?;
        let worst = f0.amax();
        if worst > EQUILIBRIUM_TOL {
            return Err(Error::InvalidConfig(format!(
                "the origin is not an equilibrium: |f(0,0)| = {worst:.3e}"
            )));
        }
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn control_bound(&self) -> f64 {
        self.control_bound
    }

    pub fn state_bound(&self) -> f64 {
        self.state_bound
    }

    pub fn with_bounds(mut self, control: Option<f64>, state: Option<f64>) -> Self {
        if let Some(c) = control {
            self.control_bound = c;
        }
        if let Some(s) = state {
            self.state_bound = s;
        }
        self
    }

    /// Evaluate `f(x, u)`.
    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.n);
        for (i, e) in self.rhs.iter().enumerate() {
            out[i] = eval_plain(e, x, u, &self.params)?;
        }
        Ok(out)
    }

    /// Evaluate all components over jets.
    pub fn eval_jets(&self, x: &[TaylorJet], u: &[TaylorJet]) -> Result<Vec<TaylorJet>> {
        self.rhs
            .iter()
            .map(|e| eval_jet(e, x, u, &self.params))
            .collect()
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    /// State Jacobian at `(x, u)` via first-order jets along coordinate
    /// directions; machine-exact for the expression class.
    pub fn jacobian_x(&self, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.n, self.n);
        let u_jets: Vec<TaylorJet> = u.iter().map(|v| TaylorJet::constant(*v, 1)).collect();
        for j in 0..self.n {
            let x_jets: Vec<TaylorJet> = x
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    if k == j {
                        TaylorJet::variable(*v, 1)
                    } else {
                        TaylorJet::constant(*v, 1)
                    }
                })
                .collect();
            for i in 0..self.n {
                jac[(i, j)] = eval_jet(&self.rhs[i], &x_jets, &u_jets, &self.params)?.coeff(1);
            }
        }
        Ok(jac)
    }

    /// Input Jacobian at `(x, u)`.
    pub fn jacobian_u(&self, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.n, self.r);
        let x_jets: Vec<TaylorJet> = x.iter().map(|v| TaylorJet::constant(*v, 1)).collect();
        for j in 0..self.r {
            let u_jets: Vec<TaylorJet> = u
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    if k == j {
                        TaylorJet::variable(*v, 1)
                    } else {
                        TaylorJet::constant(*v, 1)
                    }
                })
                .collect();
            for i in 0..self.n {
                jac[(i, j)] = eval_jet(&self.rhs[i], &x_jets, &u_jets, &self.params)?.coeff(1);
            }
        }
        Ok(jac)
    }

    /// `A = df/dx(0,0)`, `B = df/du(0,0)`.
    pub fn linearization(&self) -> Result<LinearizationPair> {
        let zero_x = vec![0.0; self.n];
        let zero_u = vec![0.0; self.r];
        Ok(LinearizationPair {
            a: self.jacobian_x(&zero_x, &zero_u)?,
            b: self.jacobian_u(&zero_x, &zero_u)?,
        })
    }
}

/// Build `(B, AB, ..., A^{n-1}B)` and report its numerical rank.
///
/// Columns are normalized before the singular-value test; physical systems can
/// spread the raw columns over many orders of magnitude.
pub fn kalman_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> KalmanRank {
    let n = a.nrows();
    let r = b.ncols();
    let mut s = DMatrix::zeros(n, n * r);
    let mut block = b.clone();
    for k in 0..n {
        s.view_mut((0, k * r), (n, r)).copy_from(&block);
        if k + 1 < n {
            block = a * &block;
        }
    }
    let rank = normalized_rank(&s, RANK_RTOL);
    KalmanRank { rank, s }
}

/// Greedy per-input column selection over `{q_j, P1 q_j, P1^2 q_j, ...}` with
/// the Jacobians taken at the target state. Errors when the accepted columns
/// do not span the state space.
pub fn rank_s1(model: &SystemModel, xbar: &[f64]) -> Result<S1Rank> {
    let zero_u = vec![0.0; model.r()];
    let p1 = model.jacobian_x(xbar, &zero_u)?;
    let q1 = model.jacobian_u(xbar, &zero_u)?;
    let structure = greedy_block_structure(&p1, &q1);
    let rank: usize = structure.iter().sum();
    if rank < model.n() {
        return Err(Error::NotControllableAtTarget {
            rank,
            n: model.n(),
            blocks: structure,
        });
    }
    Ok(S1Rank {
        rank,
        block_sizes: structure,
    })
}

/// Shared greedy scan: per input `j`, keep extending `P^i q_j` while the
/// candidates stay independent of everything accepted so far.
pub fn greedy_block_structure(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Vec<usize> {
    let n = p.nrows();
    let r = q.ncols();
    let mut basis = GreedyBasis::new(GREEDY_TOL);
    let mut blocks = vec![0usize; r];
    for j in 0..r {
        let mut col: DVector<f64> = q.column(j).into();
        for _ in 0..n {
            if basis.len() == n || !basis.try_accept(&col) {
                break;
            }
            blocks[j] += 1;
            col = p * &col;
        }
        if basis.len() == n {
            break;
        }
    }
    blocks
}

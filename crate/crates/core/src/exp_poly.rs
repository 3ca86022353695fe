//! Exact algebra of exponential polynomials `p(tau) = sum_k a_k e^{-k alpha tau}`.
//!
//! The class is closed under addition, multiplication (exponent addition),
//! and differentiation in `tau`, which is exactly what the time-varying
//! controllability recursion `L_{i+1} = P L_i - dL_i/dtau` needs. Degrees are
//! non-negative, so every member decays (or is constant); coefficients are
//! trimmed at exact zeros only, since they arise from exact recursions.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Finite sum `a_0 + a_1 E + ... + a_d E^d` with `E = e^{-alpha tau}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPoly {
    alpha: f64,
    /// Coefficient of `E^k` at index `k`; no trailing zeros (empty = zero).
    coeffs: Vec<f64>,
}

impl ExpPoly {
    pub fn new(alpha: f64, mut coeffs: Vec<f64>) -> Self {
        assert!(alpha > 0.0, "decay rate alpha must be positive");
        trim(&mut coeffs);
        Self { alpha, coeffs }
    }

    pub fn zero(alpha: f64) -> Self {
        Self::new(alpha, Vec::new())
    }

    pub fn constant(alpha: f64, a: f64) -> Self {
        Self::new(alpha, vec![a])
    }

    /// The single term `a * E^k`.
    pub fn single(alpha: f64, k: usize, a: f64) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = a;
        Self::new(alpha, coeffs)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Highest stored degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Lowest degree with a nonzero coefficient.
    pub fn lowest_degree(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| *c != 0.0)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn check_alpha(&self, other: &Self) -> Result<()> {
        if self.alpha.to_bits() != other.alpha.to_bits() {
            return Err(Error::AlphaMismatch {
                left: self.alpha,
                right: other.alpha,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_alpha(other)?;
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|k| self.coeff(k) + other.coeff(k)).collect();
        Ok(Self::new(self.alpha, coeffs))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Product; degrees add, coefficients convolve.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_alpha(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.alpha));
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Ok(Self::new(self.alpha, coeffs))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.alpha, self.coeffs.iter().map(|c| c * s).collect())
    }

    /// d/dtau: the coefficient of `E^k` picks up a factor `-k alpha`.
    pub fn differentiate(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| -(k as f64) * self.alpha * c)
            .collect();
        Self::new(self.alpha, coeffs)
    }

    pub fn eval(&self, tau: f64) -> f64 {
        // Horner in E = e^{-alpha tau}
        let e = (-self.alpha * tau).exp();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * e + c)
    }

    /// Drop all terms of degree above `max_degree`.
    pub fn truncate(&self, max_degree: usize) -> Self {
        let take = self.coeffs.len().min(max_degree + 1);
        Self::new(self.alpha, self.coeffs[..take].to_vec())
    }
}

fn trim(coeffs: &mut Vec<f64>) {
    while coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
}

impl fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            if first {
                write!(f, "{c}")?;
            } else if *c < 0.0 {
                write!(f, " - {}", -c)?;
            } else {
                write!(f, " + {c}")?;
            }
            if k > 0 {
                write!(f, "*E^{k}")?;
            } else if first && k == 0 {
                // plain constant term, nothing to append
            }
            first = false;
        }
        Ok(())
    }
}

/// Rectangular matrix of [`ExpPoly`] entries sharing one decay rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPolyMatrix {
    rows: usize,
    cols: usize,
    alpha: f64,
    entries: Vec<ExpPoly>, // row-major
}

impl ExpPolyMatrix {
    pub fn zeros(rows: usize, cols: usize, alpha: f64) -> Self {
        Self {
            rows,
            cols,
            alpha,
            entries: vec![ExpPoly::zero(alpha); rows * cols],
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        alpha: f64,
        mut f: impl FnMut(usize, usize) -> ExpPoly,
    ) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let e = f(i, j);
                assert_eq!(
                    e.alpha().to_bits(),
                    alpha.to_bits(),
                    "matrix entries must share the decay rate"
                );
                entries.push(e);
            }
        }
        Self {
            rows,
            cols,
            alpha,
            entries,
        }
    }

    /// `m * E^degree`, lifting a constant matrix into the algebra.
    pub fn from_constant(m: &DMatrix<f64>, alpha: f64, degree: usize) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), alpha, |i, j| {
            ExpPoly::single(alpha, degree, m[(i, j)])
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn entry(&self, i: usize, j: usize) -> &ExpPoly {
        &self.entries[i * self.cols + j]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, p: ExpPoly) {
        assert_eq!(p.alpha().to_bits(), self.alpha.to_bits());
        self.entries[i * self.cols + j] = p;
    }

    fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                left: self.shape_str(),
                right: other.shape_str(),
            });
        }
        let mut out = Self::zeros(self.rows, self.cols, self.alpha);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set_entry(i, j, self.entry(i, j).add(other.entry(i, j))?);
            }
        }
        Ok(out)
    }

    /// Matrix product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                left: self.shape_str(),
                right: other.shape_str(),
            });
        }
        if self.alpha.to_bits() != other.alpha.to_bits() {
            return Err(Error::AlphaMismatch {
                left: self.alpha,
                right: other.alpha,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols, self.alpha);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = ExpPoly::zero(self.alpha);
                for k in 0..self.cols {
                    acc = acc.add(&self.entry(i, k).mul(other.entry(k, j))?)?;
                }
                out.set_entry(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e = e.scale(s);
        }
        out
    }

    pub fn differentiate(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e = e.differentiate();
        }
        out
    }

    pub fn truncate(&self, max_degree: usize) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e = e.truncate(max_degree);
        }
        out
    }

    pub fn eval(&self, tau: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).eval(tau))
    }

    /// Evaluate a column matrix into a vector.
    pub fn eval_vector(&self, tau: f64) -> DVector<f64> {
        assert_eq!(self.cols, 1, "eval_vector expects a column");
        DVector::from_fn(self.rows, |i, _| self.entry(i, 0).eval(tau))
    }

    pub fn column(&self, j: usize) -> Self {
        Self::from_fn(self.rows, 1, self.alpha, |i, _| self.entry(i, j).clone())
    }

    /// Stack columns side by side.
    pub fn from_columns(cols: &[Self]) -> Result<Self> {
        let rows = cols[0].rows;
        let alpha = cols[0].alpha;
        let mut out = Self::zeros(rows, cols.len(), alpha);
        for (j, c) in cols.iter().enumerate() {
            if c.rows != rows || c.cols != 1 {
                return Err(Error::ShapeMismatch {
                    left: format!("{rows}x1"),
                    right: c.shape_str(),
                });
            }
            for i in 0..rows {
                out.set_entry(i, j, c.entry(i, 0).clone());
            }
        }
        Ok(out)
    }
}

impl fmt::Display for ExpPolyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.entry(i, j))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

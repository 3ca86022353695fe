//! Small dense linear-algebra helpers shared by the rank tests and the
//! time-varying gain evaluation.

use nalgebra::{DMatrix, DVector};

/// Threshold for accepting a direction as independent in greedy selection.
pub const GREEDY_TOL: f64 = 1e-8;

/// Relative singular-value cutoff for numerical rank.
pub const RANK_RTOL: f64 = 1e-9;

/// Incremental orthonormal basis for greedy column selection.
///
/// Candidates are normalized before testing, so severely scaled inputs (the
/// orbital system spans many orders of magnitude) do not mask independence.
pub struct GreedyBasis {
    basis: Vec<DVector<f64>>,
    tol: f64,
}

impl GreedyBasis {
    pub fn new(tol: f64) -> Self {
        Self {
            basis: Vec::new(),
            tol,
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Accept `v` if its normalized residual against the current basis exceeds
    /// the tolerance; on acceptance the orthonormalized residual is stored.
    pub fn try_accept(&mut self, v: &DVector<f64>) -> bool {
        let norm = v.norm();
        if !(norm > 0.0) {
            return false;
        }
        let mut w = v / norm;
        // modified Gram-Schmidt, re-orthogonalized once
        for _ in 0..2 {
            for q in &self.basis {
                let c = q.dot(&w);
                w -= q * c;
            }
        }
        let resid = w.norm();
        if resid > self.tol {
            self.basis.push(w / resid);
            true
        } else {
            false
        }
    }
}

/// Numerical rank of `m` after normalizing its nonzero columns.
pub fn normalized_rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let mut scaled = m.clone();
    for mut col in scaled.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    let sv = scaled.singular_values();
    let smax = sv.max();
    if !(smax > 0.0) {
        return 0;
    }
    sv.iter().filter(|s| **s > rtol * smax).count()
}

/// 2-norm condition number of `m` after column normalization.
pub fn normalized_condition(m: &DMatrix<f64>) -> f64 {
    let mut scaled = m.clone();
    for mut col in scaled.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    condition(&scaled)
}

/// Plain 2-norm condition number.
pub fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    }
}

/// LU solver with column equilibration.
///
/// Solves `A y = b` as `(A D) z = b, y = D z` with `D = diag(1/||col_j||)`,
/// which strips the scale disparity between columns before factorization. The
/// reported condition number is that of the equilibrated matrix: it measures
/// achievable solve accuracy rather than raw scaling.
pub struct ScaledLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    col_scale: DVector<f64>,
    condition: f64,
}

impl ScaledLu {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let n = a.ncols();
        let mut scale = DVector::from_element(n, 1.0);
        let mut b = a.clone();
        for (j, mut col) in b.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
                scale[j] = 1.0 / norm;
            }
        }
        let cond = condition(&b);
        Self {
            lu: b.lu(),
            col_scale: scale,
            condition: cond,
        }
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let z = self.lu.solve(rhs)?;
        Some(z.component_mul(&self.col_scale))
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn line_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_basis_rejects_dependent_columns() {
        let mut basis = GreedyBasis::new(GREEDY_TOL);
        assert!(basis.try_accept(&DVector::from_vec(vec![1.0, 0.0, 0.0])));
        assert!(basis.try_accept(&DVector::from_vec(vec![1.0, 1.0, 0.0])));
        assert!(!basis.try_accept(&DVector::from_vec(vec![3.0, -2.0, 0.0])));
        assert!(basis.try_accept(&DVector::from_vec(vec![0.0, 0.0, 1e-12])));
        assert_eq!(basis.len(), 3);
    }

    #[test]
    fn normalized_rank_sees_through_scaling() {
        // second column is 1e-12 times an independent direction
        let m = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0]).column(0).into(),
            DVector::from_vec(vec![1e-12, 1e-12]).column(0).into(),
        ]);
        assert_eq!(normalized_rank(&m, RANK_RTOL), 2);
    }

    #[test]
    fn scaled_lu_handles_badly_scaled_columns() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1e-9, 0.5, 2e-9]);
        let truth = DVector::from_vec(vec![2.0, 3.0]);
        let rhs = &a * &truth;
        let solver = ScaledLu::new(&a);
        let sol = solver.solve(&rhs).unwrap();
        assert!((sol - truth).norm() < 1e-8);
        assert!(solver.condition() < 1e3);
    }

    #[test]
    fn slope_of_a_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.25 * x).collect();
        assert!((line_slope(&xs, &ys) + 0.25).abs() < 1e-12);
    }
}

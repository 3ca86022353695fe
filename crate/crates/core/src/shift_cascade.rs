//! Successive variable shifts that push the control-free terms of the
//! auxiliary system to high exponential order.
//!
//! Writing `E = e^{-alpha tau}`, the deviation is split as `c = c_K + s(tau)`
//! with the offset `s(tau) = -E f(xbar,0) + sum_{k=2..K} E^k phi_k`. Each
//! stage coefficient is chosen so the corresponding power of `E` cancels in
//! the control-free part of the dynamics:
//!
//! ```text
//! phi_k = -(1/k) * [E^{k-1}-coefficient of f(xbar + s~(E), 0)]
//! ```
//!
//! where `s~` collects the previously determined stages. The coefficients are
//! extracted with jets along the one-parameter curve `xbar + s~(E)`; no
//! derivative tensors of `f` are ever formed. The same curve, evaluated with
//! [`DualJet`] perturbations, yields the expansions of the Jacobians that form
//! the truncated linear part `P(tau)`, `Q(tau)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::exp_poly::{ExpPoly, ExpPolyMatrix};
use crate::expr::{eval_with, DualJet, TaylorJet};
use crate::system_model::SystemModel;

/// Extra series orders kept beyond the cascade depth for residual diagnostics.
pub const RESIDUAL_EXTRA_ORDER: usize = 3;

/// The computed shifts, aggregate offset, and transformed initial state.
#[derive(Debug, Clone)]
pub struct ShiftCascade {
    alpha: f64,
    depth: usize,
    xbar: DVector<f64>,
    /// `stages[0]` holds `f(xbar, 0)`; `stages[k-1]` holds `phi_k` for k >= 2.
    stages: Vec<DVector<f64>>,
    /// `s(tau)` as an exponential-polynomial column.
    offset: ExpPolyMatrix,
    /// Transformed initial state `c_K(0) = -xbar - s(0)`.
    c0: DVector<f64>,
    /// Coefficients `g_m` of `f(xbar + s~(E), 0) = sum_m g_m E^m`,
    /// m = 0 .. depth + RESIDUAL_EXTRA_ORDER - 1.
    free_term_coeffs: Vec<DVector<f64>>,
}

impl ShiftCascade {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn xbar(&self) -> &DVector<f64> {
        &self.xbar
    }

    /// Stage vectors; index 0 is `f(xbar,0)`, index k-1 is `phi_k`.
    pub fn stages(&self) -> &[DVector<f64>] {
        &self.stages
    }

    pub fn stage(&self, k: usize) -> &DVector<f64> {
        &self.stages[k - 1]
    }

    /// The offset `s(tau)` as an n-by-1 exponential-polynomial matrix.
    pub fn offset(&self) -> &ExpPolyMatrix {
        &self.offset
    }

    /// `c_K(0) = -xbar - s(0)`.
    pub fn initial_state(&self) -> &DVector<f64> {
        &self.c0
    }

    /// Expansion coefficients of the control-free forcing along the curve.
    pub fn free_term_coeffs(&self) -> &[DVector<f64>] {
        &self.free_term_coeffs
    }

    /// The control-free residual as a series:
    /// coefficient of `E^k` is `alpha (g_{k-1} + k s_k)`, which the stage
    /// choice cancels for k <= depth up to round-off; beyond the depth the
    /// surviving coefficients are `alpha g_{k-1}`.
    pub fn residual_series(&self) -> ExpPolyMatrix {
        let n = self.xbar.len();
        let top = self.free_term_coeffs.len();
        ExpPolyMatrix::from_fn(n, 1, self.alpha, |i, _| {
            let mut coeffs = vec![0.0; top + 1];
            for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
                let g = self.free_term_coeffs[k - 1][i];
                let s = self.offset_coeff(k, i);
                *c = self.alpha * (g + k as f64 * s);
            }
            ExpPoly::new(self.alpha, coeffs)
        })
    }

    /// The residual series with the analytically cancelled low-order
    /// coefficients dropped, leaving the genuine order-(depth+1) tail.
    pub fn residual_tail(&self) -> ExpPolyMatrix {
        let n = self.xbar.len();
        let top = self.free_term_coeffs.len();
        ExpPolyMatrix::from_fn(n, 1, self.alpha, |i, _| {
            let mut coeffs = vec![0.0; top + 1];
            for (k, c) in coeffs.iter_mut().enumerate().skip(self.depth + 1) {
                *c = self.alpha * self.free_term_coeffs[k - 1][i];
            }
            ExpPoly::new(self.alpha, coeffs)
        })
    }

    fn offset_coeff(&self, k: usize, i: usize) -> f64 {
        if k == 1 {
            -self.stages[0][i]
        } else if k <= self.depth {
            self.stages[k - 1][i]
        } else {
            0.0
        }
    }

    /// Jets of the curve `xbar + s~(E)` at the requested truncation order.
    fn curve_jets(&self, order: usize) -> Vec<TaylorJet> {
        (0..self.xbar.len())
            .map(|i| {
                let mut coeffs = vec![0.0; order + 1];
                coeffs[0] = self.xbar[i];
                for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
                    *c = self.offset_coeff(k, i);
                }
                TaylorJet::from_coeffs(coeffs)
            })
            .collect()
    }
}

/// Compute the stage vectors, offset, and transformed initial state.
pub fn compute_phis(
    model: &SystemModel,
    xbar: &[f64],
    alpha: f64,
    depth: usize,
) -> Result<ShiftCascade> {
    if alpha <= 0.0 {
        return Err(Error::NonPositiveAlpha { alpha });
    }
    if depth == 0 {
        return Err(Error::InvalidConfig("shift depth must be at least 1".into()));
    }
    let n = model.n();
    let zero_u = vec![0.0; model.r()];
    let stage1 = model.eval(xbar, &zero_u)?;

    let xbar_vec = DVector::from_column_slice(xbar);
    let scale = (xbar_vec.norm() + stage1.norm()).max(1e-12);
    let limit = 1e2 * scale;

    let mut stages: Vec<DVector<f64>> = vec![stage1.clone()];
    // offset coefficients s_k: s_1 = -f(xbar,0), s_k = phi_k
    let mut s_coeffs: Vec<DVector<f64>> = vec![-stage1];
    for k in 2..=depth {
        let order = k - 1;
        let x_jets: Vec<TaylorJet> = (0..n)
            .map(|i| {
                let mut coeffs = vec![0.0; order + 1];
                coeffs[0] = xbar[i];
                for (m, c) in coeffs.iter_mut().enumerate().skip(1) {
                    *c = s_coeffs[m - 1][i];
                }
                TaylorJet::from_coeffs(coeffs)
            })
            .collect();
        let u_jets: Vec<TaylorJet> = (0..model.r())
            .map(|_| TaylorJet::constant(0.0, order))
            .collect();
        let f_jets = model.eval_jets(&x_jets, &u_jets)?;
        let phi = DVector::from_fn(n, |i, _| -f_jets[i].coeff(k - 1) / k as f64);
        let norm = phi.norm();
        if norm > limit {
            return Err(Error::CascadeDiverged {
                stage: k,
                norm,
                limit,
            });
        }
        stages.push(phi.clone());
        s_coeffs.push(phi);
    }

    let offset = ExpPolyMatrix::from_fn(n, 1, alpha, |i, _| {
        let mut coeffs = vec![0.0; depth + 1];
        for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
            *c = if k == 1 {
                s_coeffs[0][i]
            } else {
                s_coeffs[k - 1][i]
            };
        }
        ExpPoly::new(alpha, coeffs)
    });

    let s0 = offset.eval_vector(0.0);
    let c0 = -&xbar_vec - s0;

    // one deeper jet pass for the residual diagnostics
    let diag_order = depth + RESIDUAL_EXTRA_ORDER - 1;
    let cascade_wip = ShiftCascade {
        alpha,
        depth,
        xbar: xbar_vec,
        stages,
        offset,
        c0,
        free_term_coeffs: Vec::new(),
    };
    let x_jets = cascade_wip.curve_jets(diag_order);
    let u_jets: Vec<TaylorJet> = (0..model.r())
        .map(|_| TaylorJet::constant(0.0, diag_order))
        .collect();
    let f_jets = model.eval_jets(&x_jets, &u_jets)?;
    let free_term_coeffs = (0..=diag_order)
        .map(|m| DVector::from_fn(n, |i, _| f_jets[i].coeff(m)))
        .collect();

    Ok(ShiftCascade {
        free_term_coeffs,
        ..cascade_wip
    })
}

/// Pointwise control-free residual
/// `F(tau) = alpha E f(xbar + s(tau), 0) - ds/dtau`.
pub fn free_term_residual(
    model: &SystemModel,
    cascade: &ShiftCascade,
    tau: f64,
) -> Result<DVector<f64>> {
    let alpha = cascade.alpha();
    let e = (-alpha * tau).exp();
    let s = cascade.offset().eval_vector(tau);
    let x: Vec<f64> = (0..model.n()).map(|i| cascade.xbar()[i] + s[i]).collect();
    let f = model.eval(&x, &vec![0.0; model.r()])?;
    let ds = cascade.offset().differentiate().eval_vector(tau);
    Ok(f * (alpha * e) - ds)
}

/// The truncated linear part of the transformed dynamics.
///
/// `P(tau) = alpha E * [df/dx(xbar + s(tau), 0) expanded in E, cut at E^{n-1}]`
/// and `Q(tau)` likewise for `df/du` cut at `E^{2n-1}`, so `P` carries degrees
/// 1..n and `Q` degrees 1..2n.
#[derive(Debug, Clone)]
pub struct TruncatedLinearPart {
    pub p: ExpPolyMatrix,
    pub q: ExpPolyMatrix,
}

/// Expand both Jacobians along the shift curve and truncate.
pub fn build_pq(model: &SystemModel, cascade: &ShiftCascade) -> Result<TruncatedLinearPart> {
    let n = model.n();
    let r = model.r();
    let alpha = cascade.alpha();
    let order = 2 * n - 1;
    let curve = cascade.curve_jets(order);

    let passive_x: Vec<DualJet> = curve.iter().cloned().map(DualJet::passive).collect();
    let passive_u: Vec<DualJet> = (0..r)
        .map(|_| DualJet::passive(TaylorJet::constant(0.0, order)))
        .collect();

    let mut p = ExpPolyMatrix::zeros(n, n, alpha);
    for j in 0..n {
        let mut x = passive_x.clone();
        x[j] = DualJet::active(curve[j].clone());
        for (i, rhs) in model.rhs().iter().enumerate() {
            let dual = eval_with(rhs, &x, &passive_u, model.params())?;
            p.set_entry(i, j, jet_to_exp_poly(&dual.d, alpha, n - 1));
        }
    }

    let mut q = ExpPolyMatrix::zeros(n, r, alpha);
    for j in 0..r {
        let mut u = passive_u.clone();
        u[j] = DualJet::active(TaylorJet::constant(0.0, order));
        for (i, rhs) in model.rhs().iter().enumerate() {
            let dual = eval_with(rhs, &passive_x, &u, model.params())?;
            q.set_entry(i, j, jet_to_exp_poly(&dual.d, alpha, 2 * n - 1));
        }
    }

    Ok(TruncatedLinearPart { p, q })
}

/// `alpha E * (jet truncated at E^max_order)`: jet coefficient m becomes the
/// degree m+1 coefficient, scaled by alpha.
fn jet_to_exp_poly(jet: &TaylorJet, alpha: f64, max_order: usize) -> ExpPoly {
    let top = max_order.min(jet.order());
    let mut coeffs = vec![0.0; top + 2];
    for m in 0..=top {
        coeffs[m + 1] = alpha * jet.coeff(m);
    }
    ExpPoly::new(alpha, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::line_slope;
    use crate::scenarios::{orbital_model, radial_force_jets, OrbitalParams};
    use crate::system_model::SystemModel;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn simple(n: usize, r: usize, rhs: &[&str]) -> SystemModel {
        SystemModel::new(
            n,
            r,
            &rhs.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            BTreeMap::new(),
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_target_gives_zero_cascade() {
        let m = simple(2, 1, &["x2", "u1"]);
        let c = compute_phis(&m, &[0.0, 0.0], 0.1, 7).unwrap();
        for stage in c.stages() {
            assert_eq!(stage.amax(), 0.0);
        }
        assert_eq!(c.initial_state().amax(), 0.0);
        assert!(c.offset().entry(0, 0).is_zero());
        assert!(c.offset().entry(1, 0).is_zero());
    }

    #[test]
    fn scalar_linear_system_stage_values() {
        // f = x + u, target 0.1: stage 1 = f(xbar,0) = 0.1, phi_2 = 0.05
        let m = simple(1, 1, &["x1 + u1"]);
        let c = compute_phis(&m, &[0.1], 0.1, 3).unwrap();
        assert_relative_eq!(c.stage(1)[0], 0.1, max_relative = 1e-14);
        assert_relative_eq!(c.stage(2)[0], 0.05, max_relative = 1e-13);
    }

    #[test]
    fn orbital_stage_two_is_half_radial_force() {
        let p = OrbitalParams::default();
        let m = orbital_model(&p).unwrap();
        let c = compute_phis(&m, &p.xbar(), 0.1, 7).unwrap();
        let [g0, ..] = radial_force_jets(&p);
        assert_relative_eq!(c.stage(2)[0], 0.5 * g0, max_relative = 1e-12);
        assert_eq!(c.stage(2)[1], 0.0);
        assert_eq!(c.stage(2)[2], 0.0);
    }

    #[test]
    fn initial_state_depth_one_is_target_plus_forcing() {
        let m = simple(1, 1, &["x1 + u1"]);
        let c = compute_phis(&m, &[0.1], 0.1, 1).unwrap();
        // c0 = -xbar + f(xbar, 0)
        assert_relative_eq!(c.initial_state()[0], -0.1 + 0.1, epsilon = 1e-15);
        let c3 = compute_phis(&m, &[0.3], 0.1, 1).unwrap();
        assert_relative_eq!(c3.initial_state()[0], -0.3 + 0.3, epsilon = 1e-15);
    }

    #[test]
    fn cascade_divergence_guard_trips_for_far_targets() {
        let m = simple(1, 1, &["100*x1^2 + x1 + u1"]);
        let err = compute_phis(&m, &[10.0], 0.1, 5).unwrap_err();
        assert!(matches!(err, Error::CascadeDiverged { stage: 2, .. }));
    }

    #[test]
    fn linear_system_pq_is_exact_first_degree() {
        let m = simple(2, 1, &["x2", "u1"]);
        let c = compute_phis(&m, &[0.1, 0.0], 0.1, 7).unwrap();
        let pq = build_pq(&m, &c).unwrap();
        // P = alpha E A, Q = alpha E B exactly
        assert_eq!(pq.p.entry(0, 1), &ExpPoly::single(0.1, 1, 0.1));
        assert!(pq.p.entry(0, 0).is_zero());
        assert!(pq.p.entry(1, 0).is_zero());
        assert!(pq.p.entry(1, 1).is_zero());
        assert!(pq.q.entry(0, 0).is_zero());
        assert_eq!(pq.q.entry(1, 0), &ExpPoly::single(0.1, 1, 0.1));
    }

    #[test]
    fn pq_degree_one_blocks_equal_target_jacobians() {
        let p = OrbitalParams::default();
        let m = orbital_model(&p).unwrap();
        let alpha = 0.1;
        let c = compute_phis(&m, &p.xbar(), alpha, 7).unwrap();
        let pq = build_pq(&m, &c).unwrap();
        let jx = m.jacobian_x(&p.xbar(), &[0.0]).unwrap();
        let ju = m.jacobian_u(&p.xbar(), &[0.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    pq.p.entry(i, j).coeff(1),
                    alpha * jx[(i, j)],
                    max_relative = 1e-13,
                    epsilon = 1e-18
                );
            }
            assert_relative_eq!(
                pq.q.entry(i, 0).coeff(1),
                alpha * ju[(i, 0)],
                max_relative = 1e-13,
                epsilon = 1e-18
            );
        }
    }

    #[test]
    fn orbital_q_third_entry_structure() {
        let p = OrbitalParams::default();
        let m = orbital_model(&p).unwrap();
        let alpha = 0.1;
        let c = compute_phis(&m, &p.xbar(), alpha, 7).unwrap();
        let pq = build_pq(&m, &c).unwrap();
        let [g0, g1, ..] = radial_force_jets(&p);
        let q3 = pq.q.entry(2, 0);
        assert_relative_eq!(
            q3.coeff(1),
            alpha * (p.r0 + p.xbar1) * p.a_psi,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            q3.coeff(3),
            alpha / 2.0 * p.a_psi * g0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            q3.coeff(5),
            alpha * p.a_psi * g1 * g0 / 24.0,
            max_relative = 1e-10
        );
        assert_eq!(q3.coeff(2), 0.0);
        assert_eq!(q3.coeff(4), 0.0);
        // first entry identically zero, second entry pure degree one
        assert!(pq.q.entry(0, 0).is_zero());
        assert_eq!(pq.q.entry(1, 0).degree(), Some(1));
        assert_relative_eq!(pq.q.entry(1, 0).coeff(1), alpha * p.a_r);
    }

    #[test]
    fn orbital_p_second_degree_vanishes() {
        let p = OrbitalParams::default();
        let m = orbital_model(&p).unwrap();
        let alpha = 0.1;
        let c = compute_phis(&m, &p.xbar(), alpha, 7).unwrap();
        let pq = build_pq(&m, &c).unwrap();
        let [g0, _, g2, _] = radial_force_jets(&p);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(pq.p.entry(i, j).coeff(2), 0.0, "entry ({i},{j})");
            }
        }
        // the degree-3 correction comes from the order-2 curve offset g0/2
        assert_relative_eq!(
            pq.p.entry(1, 0).coeff(3),
            alpha * g2 * g0 / 2.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn residual_series_cancels_through_depth() {
        let p = OrbitalParams::default();
        let m = orbital_model(&p).unwrap();
        let c = compute_phis(&m, &p.xbar(), 0.1, 7).unwrap();
        let res = c.residual_series();
        for k in 1..=c.depth() {
            for i in 0..3 {
                let crumb = res.entry(i, 0).coeff(k).abs();
                let scale = 0.1 * c.free_term_coeffs()[k - 1][i].abs();
                assert!(
                    crumb <= 64.0 * f64::EPSILON * scale.max(1e-300),
                    "k = {k}, i = {i}: crumb {crumb:.3e} vs scale {scale:.3e}"
                );
            }
        }
    }

    #[test]
    fn orbital_residual_tail_has_expected_order() {
        let p = OrbitalParams::default();
        let m = orbital_model(&p).unwrap();
        let alpha = 0.1;
        let depth = 7;
        let c = compute_phis(&m, &p.xbar(), alpha, depth).unwrap();
        let tail = c.residual_tail();
        let taus: Vec<f64> = (0..=30).map(|i| 5.0 + 0.5 * i as f64).collect();
        let logs: Vec<f64> = taus.iter().map(|t| tail.eval_vector(*t).norm().ln()).collect();
        let slope = line_slope(&taus, &logs);
        let bound = -0.95 * (depth as f64 + 1.0) * alpha;
        assert!(slope <= bound, "slope {slope} vs bound {bound}");
    }

    #[test]
    fn polynomial_system_direct_residual_order_and_series_agreement() {
        let m = simple(
            2,
            1,
            &["x2 + 0.3*x1^2", "u1 + 0.2*x1*x2 - 0.1*x2^2"],
        );
        let alpha = 0.1;
        let depth = 3;
        let c = compute_phis(&m, &[0.2, -0.1], alpha, depth).unwrap();
        let taus: Vec<f64> = (0..=30).map(|i| 5.0 + 0.5 * i as f64).collect();
        let mut logs = Vec::new();
        for t in &taus {
            let direct = free_term_residual(&m, &c, *t).unwrap().norm();
            let series = c.residual_series().eval_vector(*t).norm();
            // the series route must reproduce the direct evaluation
            assert!(
                (direct - series).abs() <= 1e-9 * direct.max(1e-12),
                "tau {t}: direct {direct:.6e} vs series {series:.6e}"
            );
            logs.push(direct.ln());
        }
        let slope = line_slope(&taus, &logs);
        let bound = -0.95 * (depth as f64 + 1.0) * alpha;
        assert!(slope <= bound, "slope {slope} vs bound {bound}");
    }

    #[test]
    fn stage_norms_shrink_with_the_target() {
        let m = simple(
            2,
            1,
            &["x2 + 0.4*x1^2 - 0.2*x1*x2", "u1 + 0.3*x1^2 + 0.1*x2^2"],
        );
        let dir = [0.6, 0.8];
        let scales = [1e-1, 1e-2, 1e-3];
        for k in 2..=4 {
            let norms: Vec<f64> = scales
                .iter()
                .map(|s| {
                    let xb = [dir[0] * s, dir[1] * s];
                    compute_phis(&m, &xb, 0.1, 4).unwrap().stage(k).norm()
                })
                .collect();
            if norms.iter().any(|n| *n == 0.0) {
                continue;
            }
            let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
            let ys: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
            let slope = line_slope(&xs, &ys);
            assert!(slope >= 1.0 - 1e-6, "stage {k} slope {slope}");
        }
    }
}

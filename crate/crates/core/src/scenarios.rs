//! Built-in reference systems.
//!
//! The orbital transfer model is the canonical workload: a material point in a
//! central gravitational field steered onto a nearby circular orbit by jet
//! power. Its shift coefficients and initial values have independent closed
//! forms (evaluated here through scalar jets of the radial force balance),
//! which the generic cascade machinery is tested against. The remaining
//! registry entries are small systems with known controllability verdicts.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::Result;
use crate::expr::{ExprNum, TaylorJet};
use crate::system_model::SystemModel;

/// Standard gravitational parameter of Earth, m^3/s^2. Used as the default
/// `nu`; configurable, since the reference publication leaves it unstated.
pub const NU_EARTH: f64 = 3.986004418e14;

/// Parameters of the orbital transfer model.
#[derive(Debug, Clone)]
pub struct OrbitalParams {
    /// Circular orbit radius, meters.
    pub r0: f64,
    /// Gravitational parameter, m^3/s^2.
    pub nu: f64,
    /// Relative-velocity projection onto the radial direction.
    pub a_r: f64,
    /// Relative-velocity projection onto the tangential direction.
    pub a_psi: f64,
    /// Target radial offset, meters.
    pub xbar1: f64,
}

impl Default for OrbitalParams {
    fn default() -> Self {
        Self {
            r0: 7.0e6,
            nu: NU_EARTH,
            a_r: 1.0,
            a_psi: 1e-3,
            xbar1: 10.0,
        }
    }
}

impl OrbitalParams {
    /// Generalized momentum of the reference circular orbit, `(nu r0)^{1/2}`.
    pub fn chi0(&self) -> f64 {
        (self.nu * self.r0).sqrt()
    }

    pub fn xbar(&self) -> Vec<f64> {
        vec![self.xbar1, 0.0, 0.0]
    }
}

/// The n=3, r=1 orbital model:
/// radial offset, radial velocity, momentum offset, driven by thrust `u`.
pub fn orbital_model(p: &OrbitalParams) -> Result<SystemModel> {
    let mut params = BTreeMap::new();
    params.insert("nu".to_string(), p.nu);
    params.insert("r0".to_string(), p.r0);
    params.insert("chi0".to_string(), p.chi0());
    params.insert("ar".to_string(), p.a_r);
    params.insert("apsi".to_string(), p.a_psi);
    SystemModel::new(
        3,
        1,
        &[
            "x2".to_string(),
            "-nu/(r0+x1)^2 + (chi0+x3)^2/(r0+x1)^3 + ar*u1".to_string(),
            "(x1+r0)*apsi*u1".to_string(),
        ],
        params,
        None,
        None,
    )
}

/// `g` and its first three radial derivatives at the target offset, obtained
/// by a scalar jet of the force balance
/// `g(c) = -nu/(r0+xbar1+c)^2 + chi0^2/(r0+xbar1+c)^3`.
pub fn radial_force_jets(p: &OrbitalParams) -> [f64; 4] {
    let order = 3;
    let c = TaylorJet::variable(0.0, order);
    let base = TaylorJet::constant(p.r0 + p.xbar1, order).add(&c);
    let nu = TaylorJet::constant(p.nu, order);
    let chi0_sq = TaylorJet::constant(p.chi0() * p.chi0(), order);
    let g = chi0_sq
        .div(&base.powi(3).expect("cube"))
        .expect("nonzero radius")
        .sub(&nu.div(&base.powi(2).expect("square")).expect("nonzero radius"));
    [
        g.derivative_value(0),
        g.derivative_value(1),
        g.derivative_value(2),
        g.derivative_value(3),
    ]
}

/// The seven explicit shift vectors of the orbital cascade.
///
/// Stage 1 is `f(xbar, 0)`; stages 2..7 are the closed forms in `g` and its
/// derivatives. Two misprints in the published forms are corrected here (the
/// stage-4 factor uses the first derivative of `g`, and the second term of the
/// stage-5 combination enters with a plus sign); both corrections follow from
/// the cascade recursion and are confirmed by the published initial values and
/// the stage-6 = stage-5/6 relation.
pub fn reference_shifts(p: &OrbitalParams) -> [DVector<f64>; 7] {
    let [g0, g1, g2, _g3] = radial_force_jets(p);
    let gbar = g1 * g1 * g0 / 120.0 + g2 * g0 * g0 / 40.0;
    let gbarbar = g1 * g1 * g0 / 720.0 + g2 * g0 * g0 / 240.0;
    let gbarbarbar = triple_bar_combination(p);
    [
        DVector::from_vec(vec![0.0, g0, 0.0]),
        DVector::from_vec(vec![g0 / 2.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, -g1 * g0 / 6.0, 0.0]),
        DVector::from_vec(vec![g1 * g0 / 24.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, -gbar, 0.0]),
        DVector::from_vec(vec![gbarbar, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, -gbarbarbar, 0.0]),
    ]
}

fn triple_bar_combination(p: &OrbitalParams) -> f64 {
    let [g0, g1, g2, g3] = radial_force_jets(p);
    (g1.powi(3) * g0 / 720.0 + g3 * g0.powi(3) / 48.0 + g1 * g2 * g0 * g0 / 40.0) / 7.0
}

/// The printed initial values of the transformed coordinates.
pub fn reference_initial_values(p: &OrbitalParams) -> (f64, f64, f64) {
    let [g0, g1, _g2, _g3] = radial_force_jets(p);
    let gbar = g1 * g1 * g0 / 120.0 + radial_force_jets(p)[2] * g0 * g0 / 40.0;
    let gbarbar = g1 * g1 * g0 / 720.0 + radial_force_jets(p)[2] * g0 * g0 / 240.0;
    let gbarbarbar = triple_bar_combination(p);
    let v1 = -p.xbar1 - g0 / 2.0 - g1 * g0 / 24.0 - gbarbar;
    let u2 = g0 + g1 * g0 / 6.0 + gbar + gbarbarbar;
    (v1, u2, 0.0)
}

/// Tuning defaults a scenario carries into the pipeline.
#[derive(Debug, Clone)]
pub struct ScenarioDefaults {
    pub xbar: Vec<f64>,
    pub alpha: f64,
    pub poles: Vec<f64>,
    pub shift_depth: usize,
    pub tau_max: f64,
}

/// A named registry entry with its known controllability verdict.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub model: SystemModel,
    pub defaults: ScenarioDefaults,
    pub controllable: bool,
    /// Expected greedy block sizes at the origin, when controllable.
    pub expected_blocks: Option<Vec<usize>>,
}

fn simple_model(n: usize, r: usize, rhs: &[&str]) -> SystemModel {
    SystemModel::new(
        n,
        r,
        &rhs.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        BTreeMap::new(),
        None,
        None,
    )
    .expect("built-in system")
}

/// All built-in systems.
pub fn registry() -> Vec<Scenario> {
    let orbital = OrbitalParams::default();
    vec![
        Scenario {
            name: "orbital",
            model: orbital_model(&orbital).expect("orbital model"),
            defaults: ScenarioDefaults {
                xbar: orbital.xbar(),
                alpha: 0.1,
                poles: vec![-1.0, -2.0, -3.0],
                shift_depth: 7,
                tau_max: 12.5,
            },
            controllable: true,
            expected_blocks: Some(vec![3]),
        },
        Scenario {
            name: "double_integrator",
            model: simple_model(2, 1, &["x2", "u1"]),
            defaults: ScenarioDefaults {
                xbar: vec![0.1, 0.0],
                alpha: 0.1,
                poles: vec![-1.0, -2.0],
                shift_depth: 7,
                tau_max: 25.0,
            },
            controllable: true,
            expected_blocks: Some(vec![2]),
        },
        Scenario {
            name: "two_input_block",
            model: simple_model(3, 2, &["x2", "u1", "u2"]),
            defaults: ScenarioDefaults {
                xbar: vec![0.1, 0.0, -0.05],
                alpha: 0.1,
                poles: vec![-1.0, -2.0, -3.0],
                shift_depth: 11,
                tau_max: 25.0,
            },
            controllable: true,
            expected_blocks: Some(vec![2, 1]),
        },
        Scenario {
            name: "scalar_linear",
            model: simple_model(1, 1, &["x1 + u1"]),
            defaults: ScenarioDefaults {
                xbar: vec![0.1],
                alpha: 0.1,
                poles: vec![-1.0],
                shift_depth: 3,
                tau_max: 25.0,
            },
            controllable: true,
            expected_blocks: Some(vec![1]),
        },
        Scenario {
            name: "degenerate_zero",
            model: simple_model(2, 1, &["0", "0"]),
            defaults: ScenarioDefaults {
                xbar: vec![0.0, 0.0],
                alpha: 0.1,
                poles: vec![-1.0, -2.0],
                shift_depth: 7,
                tau_max: 10.0,
            },
            controllable: false,
            expected_blocks: None,
        },
    ]
}

pub fn find(name: &str) -> Option<Scenario> {
    registry().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system_model::{kalman_rank, rank_s1};
    use approx::assert_relative_eq;

    #[test]
    fn orbital_origin_is_equilibrium() {
        let m = orbital_model(&OrbitalParams::default()).unwrap();
        assert!(m.eval(&[0.0; 3], &[0.0]).unwrap().amax() <= 1e-12);
    }

    #[test]
    fn radial_force_at_zero_offset_matches_f2_at_target() {
        let p = OrbitalParams::default();
        let m = orbital_model(&p).unwrap();
        let f = m.eval(&[p.xbar1, 0.0, 0.0], &[0.0]).unwrap();
        let [g0, ..] = radial_force_jets(&p);
        assert_relative_eq!(f[1], g0, max_relative = 1e-12);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn radial_force_derivatives_match_finite_differences() {
        let p = OrbitalParams::default();
        let [g0, g1, g2, g3] = radial_force_jets(&p);
        let g = |c: f64| {
            -p.nu / (p.r0 + p.xbar1 + c).powi(2)
                + p.chi0().powi(2) / (p.r0 + p.xbar1 + c).powi(3)
        };
        let h = 40.0;
        assert_relative_eq!(g0, g(0.0), max_relative = 1e-12);
        assert_relative_eq!(g1, (g(h) - g(-h)) / (2.0 * h), max_relative = 1e-6);
        assert_relative_eq!(
            g2,
            (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h),
            max_relative = 1e-4
        );
        assert_relative_eq!(
            g3,
            (g(2.0 * h) - 2.0 * g(h) + 2.0 * g(-h) - g(-2.0 * h)) / (2.0 * h * h * h),
            max_relative = 1e-3
        );
    }

    #[test]
    fn orbital_input_jacobian_at_origin() {
        let p = OrbitalParams::default();
        let m = orbital_model(&p).unwrap();
        let ju = m.jacobian_u(&[0.0; 3], &[0.0]).unwrap();
        assert_eq!(ju[(0, 0)], 0.0);
        assert_relative_eq!(ju[(1, 0)], p.a_r);
        assert_relative_eq!(ju[(2, 0)], p.r0 * p.a_psi, max_relative = 1e-14);
    }

    #[test]
    fn reference_shifts_vanish_at_zero_target() {
        let p = OrbitalParams {
            xbar1: 0.0,
            ..OrbitalParams::default()
        };
        for stage in reference_shifts(&p) {
            assert!(stage.amax() <= 1e-12, "stage norm {}", stage.amax());
        }
        let (v1, u2, c3) = reference_initial_values(&p);
        assert!(v1.abs() <= 1e-12 && u2.abs() <= 1e-12 && c3 == 0.0);
    }

    #[test]
    fn registry_verdicts_hold() {
        for sc in registry() {
            let lin = sc.model.linearization().unwrap();
            let kr = kalman_rank(&lin.a, &lin.b);
            assert_eq!(
                kr.rank == sc.model.n(),
                sc.controllable,
                "scenario {}",
                sc.name
            );
            if let Some(blocks) = &sc.expected_blocks {
                let origin = vec![0.0; sc.model.n()];
                let s1 = rank_s1(&sc.model, &origin).unwrap();
                assert_eq!(&s1.block_sizes, blocks, "scenario {}", sc.name);
            }
            assert!(
                sc.model
                    .eval(&vec![0.0; sc.model.n()], &vec![0.0; sc.model.r()])
                    .unwrap()
                    .amax()
                    <= 1e-12,
                "equilibrium residual for {}",
                sc.name
            );
        }
    }
}

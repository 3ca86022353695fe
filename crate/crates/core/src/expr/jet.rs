//! Truncated univariate Taylor series ("jets") in one formal variable.
//!
//! A [`TaylorJet`] of order `k` stores the coefficients `c0 + c1*e + ... + ck*e^k`
//! of a map composed with a one-parameter curve; arithmetic is exact truncated
//! series arithmetic, so coefficient `k` of an evaluated expression equals
//! `(1/k!) d^k/de^k` of the composition with no truncation error beyond round-off.
//!
//! [`DualJet`] pairs a jet with its first-order perturbation in an independent
//! direction; evaluating an expression on [`DualJet`] inputs yields the jet of a
//! partial derivative along the curve, which is how the time-varying Jacobian
//! expansions are obtained without symbolic differentiation.

/// Arithmetic failures raised by jet and scalar operations, positioned later by
/// the expression evaluator.
#[derive(Debug, Clone, PartialEq)]
pub enum ArithError {
    DivideByZero,
    Domain(String),
}

/// Number-like values an expression can be evaluated over.
///
/// Implemented for `f64` (plain evaluation), [`TaylorJet`] (derivatives along a
/// curve) and [`DualJet`] (Jacobian entries along a curve).
pub trait ExprNum: Clone {
    /// Lift a constant to the same shape (order) as `like`.
    fn from_f64(c: f64, like: &Self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div(&self, o: &Self) -> Result<Self, ArithError>;
    fn sqrt(&self) -> Result<Self, ArithError>;
    fn powi(&self, k: i64) -> Result<Self, ArithError>;
    fn powf(&self, p: f64) -> Result<Self, ArithError>;
}

impl ExprNum for f64 {
    fn from_f64(c: f64, _like: &Self) -> Self {
        c
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, o: &Self) -> Result<Self, ArithError> {
        if *o == 0.0 {
            return Err(ArithError::DivideByZero);
        }
        Ok(self / o)
    }
    fn sqrt(&self) -> Result<Self, ArithError> {
        if *self < 0.0 {
            return Err(ArithError::Domain(format!("sqrt of negative value {self}")));
        }
        Ok(f64::sqrt(*self))
    }
    fn powi(&self, k: i64) -> Result<Self, ArithError> {
        if *self == 0.0 && k < 0 {
            return Err(ArithError::DivideByZero);
        }
        Ok(f64::powi(*self, k as i32))
    }
    fn powf(&self, p: f64) -> Result<Self, ArithError> {
        if *self < 0.0 {
            return Err(ArithError::Domain(format!(
                "non-integer power of negative base {self}"
            )));
        }
        if *self == 0.0 && p < 0.0 {
            return Err(ArithError::DivideByZero);
        }
        Ok(f64::powf(*self, p))
    }
}

/// Truncated Taylor series `c0 + c1*e + ... + ck*e^k` in one formal variable.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorJet {
    coeffs: Vec<f64>,
}

impl TaylorJet {
    /// Jet with the given coefficients; `coeffs.len() == order + 1`, never empty.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least the constant term");
        Self { coeffs }
    }

    pub fn constant(c: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = c;
        Self { coeffs }
    }

    /// The identity curve `value + e` truncated at `order`.
    pub fn variable(value: f64, order: usize) -> Self {
        let mut jet = Self::constant(value, order);
        if order >= 1 {
            jet.coeffs[1] = 1.0;
        }
        jet
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// k-th derivative value at the expansion point, `k! * c_k`.
    pub fn derivative_value(&self, k: usize) -> f64 {
        (1..=k).fold(self.coeff(k), |acc, i| acc * i as f64)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Derivative with respect to the formal variable; drops one order.
    /// Returns the zero jet of order 0 when applied to an order-0 jet.
    pub fn differentiate(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::constant(0.0, 0);
        }
        Self {
            coeffs: (1..self.coeffs.len())
                .map(|k| self.coeffs[k] * k as f64)
                .collect(),
        }
    }

    fn common_order(&self, o: &Self) -> usize {
        self.order().min(o.order())
    }
}

impl ExprNum for TaylorJet {
    fn from_f64(c: f64, like: &Self) -> Self {
        Self::constant(c, like.order())
    }

    fn add(&self, o: &Self) -> Self {
        let n = self.common_order(o);
        Self {
            coeffs: (0..=n).map(|k| self.coeffs[k] + o.coeffs[k]).collect(),
        }
    }

    fn sub(&self, o: &Self) -> Self {
        let n = self.common_order(o);
        Self {
            coeffs: (0..=n).map(|k| self.coeffs[k] - o.coeffs[k]).collect(),
        }
    }

    fn mul(&self, o: &Self) -> Self {
        let n = self.common_order(o);
        let mut coeffs = vec![0.0; n + 1];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += self.coeffs[i] * o.coeffs[k - i];
            }
            *c = acc;
        }
        Self { coeffs }
    }

    fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    fn div(&self, o: &Self) -> Result<Self, ArithError> {
        if o.coeffs[0] == 0.0 {
            return Err(ArithError::DivideByZero);
        }
        let n = self.common_order(o);
        let mut coeffs = vec![0.0; n + 1];
        for k in 0..=n {
            let mut acc = self.coeffs[k];
            for j in 1..=k {
                acc -= o.coeffs[j] * coeffs[k - j];
            }
            coeffs[k] = acc / o.coeffs[0];
        }
        Ok(Self { coeffs })
    }

    fn sqrt(&self) -> Result<Self, ArithError> {
        let c0 = self.coeffs[0];
        if c0 < 0.0 {
            return Err(ArithError::Domain(format!("sqrt of negative value {c0}")));
        }
        if c0 == 0.0 {
            return Err(ArithError::Domain(
                "sqrt has a singular derivative at zero".to_string(),
            ));
        }
        let n = self.order();
        let mut coeffs = vec![0.0; n + 1];
        coeffs[0] = c0.sqrt();
        for k in 1..=n {
            let mut acc = self.coeffs[k];
            for j in 1..k {
                acc -= coeffs[j] * coeffs[k - j];
            }
            coeffs[k] = acc / (2.0 * coeffs[0]);
        }
        Ok(Self { coeffs })
    }

    fn powi(&self, k: i64) -> Result<Self, ArithError> {
        let one = Self::constant(1.0, self.order());
        if k == 0 {
            return Ok(one);
        }
        if k < 0 {
            return one.div(self)?.powi(-k);
        }
        // repeated squaring
        let mut base = self.clone();
        let mut exp = k as u64;
        let mut acc = one;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    fn powf(&self, p: f64) -> Result<Self, ArithError> {
        if p.fract() == 0.0 && p.abs() < 1e15 {
            return self.powi(p as i64);
        }
        Err(ArithError::Domain(format!(
            "non-integer exponent {p} is not supported on jets"
        )))
    }
}

/// A jet paired with its first-order perturbation along an independent direction.
///
/// `v` is the value jet in the curve variable; `d` is the jet of the directional
/// derivative. Standard dual-number rules apply componentwise over jets.
#[derive(Debug, Clone, PartialEq)]
pub struct DualJet {
    pub v: TaylorJet,
    pub d: TaylorJet,
}

impl DualJet {
    pub fn new(v: TaylorJet, d: TaylorJet) -> Self {
        Self { v, d }
    }

    /// A value with zero perturbation.
    pub fn passive(v: TaylorJet) -> Self {
        let order = v.order();
        Self {
            v,
            d: TaylorJet::constant(0.0, order),
        }
    }

    /// A value carrying the unit perturbation direction.
    pub fn active(v: TaylorJet) -> Self {
        let order = v.order();
        Self {
            v,
            d: TaylorJet::constant(1.0, order),
        }
    }
}

impl ExprNum for DualJet {
    fn from_f64(c: f64, like: &Self) -> Self {
        Self::passive(TaylorJet::constant(c, like.v.order()))
    }

    fn add(&self, o: &Self) -> Self {
        Self {
            v: self.v.add(&o.v),
            d: self.d.add(&o.d),
        }
    }

    fn sub(&self, o: &Self) -> Self {
        Self {
            v: self.v.sub(&o.v),
            d: self.d.sub(&o.d),
        }
    }

    fn mul(&self, o: &Self) -> Self {
        Self {
            v: self.v.mul(&o.v),
            d: self.v.mul(&o.d).add(&self.d.mul(&o.v)),
        }
    }

    fn neg(&self) -> Self {
        Self {
            v: self.v.neg(),
            d: self.d.neg(),
        }
    }

    fn div(&self, o: &Self) -> Result<Self, ArithError> {
        let q = self.v.div(&o.v)?;
        let d = self.d.sub(&q.mul(&o.d)).div(&o.v)?;
        Ok(Self { v: q, d })
    }

    fn sqrt(&self) -> Result<Self, ArithError> {
        let s = self.v.sqrt()?;
        let two_s = s.scale(2.0);
        let d = self.d.div(&two_s)?;
        Ok(Self { v: s, d })
    }

    fn powi(&self, k: i64) -> Result<Self, ArithError> {
        if k == 0 {
            let order = self.v.order();
            return Ok(Self::passive(TaylorJet::constant(1.0, order)));
        }
        let v = self.v.powi(k)?;
        let chain = self.v.powi(k - 1)?.scale(k as f64);
        Ok(Self {
            v,
            d: chain.mul(&self.d),
        })
    }

    fn powf(&self, p: f64) -> Result<Self, ArithError> {
        if p.fract() == 0.0 && p.abs() < 1e15 {
            return self.powi(p as i64);
        }
        Err(ArithError::Domain(format!(
            "non-integer exponent {p} is not supported on jets"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn multiplication_is_series_convolution() {
        // (1 + e)^2 = 1 + 2e + e^2
        let a = TaylorJet::from_coeffs(vec![1.0, 1.0, 0.0]);
        let sq = a.mul(&a);
        assert_eq!(sq.coeffs(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn division_inverts_multiplication() {
        let a = TaylorJet::from_coeffs(vec![2.0, -1.0, 0.5, 3.0]);
        let b = TaylorJet::from_coeffs(vec![1.5, 2.0, -0.25, 0.75]);
        let q = a.div(&b).unwrap();
        let back = q.mul(&b);
        for k in 0..=3 {
            assert_relative_eq!(back.coeff(k), a.coeff(k), max_relative = 1e-14, epsilon = 1e-14);
        }
    }

    #[test]
    fn division_by_zero_constant_term_fails() {
        let a = TaylorJet::constant(1.0, 2);
        let b = TaylorJet::from_coeffs(vec![0.0, 1.0, 0.0]);
        assert_eq!(a.div(&b), Err(ArithError::DivideByZero));
    }

    #[test]
    fn sqrt_squares_back() {
        let a = TaylorJet::from_coeffs(vec![4.0, 1.0, -0.5, 0.25]);
        let s = a.sqrt().unwrap();
        let back = s.mul(&s);
        for k in 0..=3 {
            assert_relative_eq!(back.coeff(k), a.coeff(k), max_relative = 1e-14, epsilon = 1e-14);
        }
    }

    #[test]
    fn geometric_series_coefficients() {
        // 1/(1 - e) = 1 + e + e^2 + ...
        let one = TaylorJet::constant(1.0, 4);
        let denom = TaylorJet::from_coeffs(vec![1.0, -1.0, 0.0, 0.0, 0.0]);
        let q = one.div(&denom).unwrap();
        assert_eq!(q.coeffs(), &[1.0; 5]);
    }

    #[test]
    fn powi_matches_repeated_multiplication() {
        let a = TaylorJet::from_coeffs(vec![1.2, -0.7, 0.3]);
        let p3 = a.powi(3).unwrap();
        let manual = a.mul(&a).mul(&a);
        assert_eq!(p3, manual);
        let pm2 = a.powi(-2).unwrap();
        let check = pm2.mul(&a).mul(&a);
        for k in 0..=2 {
            let expect = if k == 0 { 1.0 } else { 0.0 };
            assert_relative_eq!(check.coeff(k), expect, epsilon = 1e-13);
        }
    }

    #[test]
    fn derivative_shifts_coefficients() {
        let a = TaylorJet::from_coeffs(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.differentiate().coeffs(), &[2.0, 6.0, 12.0]);
        assert_eq!(a.derivative_value(2), 6.0);
    }

    #[test]
    fn dual_jet_tracks_partial_derivative() {
        // w = x^2 * y along x = 1 + e (active), y = 3 - e (passive direction):
        // dw/dx = 2xy, as a jet in e: 2(1+e)(3-e) = 6 + 4e - 2e^2
        let x = DualJet::active(TaylorJet::from_coeffs(vec![1.0, 1.0, 0.0]));
        let y = DualJet::passive(TaylorJet::from_coeffs(vec![3.0, -1.0, 0.0]));
        let w = x.powi(2).unwrap().mul(&y);
        assert_eq!(w.d.coeffs(), &[6.0, 4.0, -2.0]);
    }
}

//! Polynomial actions: the classical and quantum parametrizations share one type.
//!
//! Natural units throughout (hbar = k_B = 1). Every potential is a linear
//! combination of four fixed monomial features, so the same coefficient
//! layout serves evaluation, analytic derivatives and the least-squares
//! Jacobian of the action fit.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of potential coefficients in either family.
pub const N_COEFFS: usize = 4;

/// A polynomial potential in `D` dimensions with exact derivatives.
pub trait Field<const D: usize>: Send + Sync {
    fn value(&self, x: &SVector<f64, D>) -> f64;
    fn gradient(&self, x: &SVector<f64, D>) -> SVector<f64, D>;
    fn hessian(&self, x: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    /// Monomials multiplying each coefficient, in coefficient order.
    fn features(&self, x: &SVector<f64, D>) -> [f64; N_COEFFS];
}

/// `V(x) = v0 + v2 x^2 + v4 x^4 + v6 x^6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential1D {
    pub v0: f64,
    pub v2: f64,
    pub v4: f64,
    pub v6: f64,
}

impl Potential1D {
    /// Validated constructor: finite coefficients, confining at large |x|.
    pub fn new(v0: f64, v2: f64, v4: f64, v6: f64) -> Result<Self> {
        let p = Self { v0, v2, v4, v6 };
        if ![v0, v2, v4, v6].iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        if !p.is_confining() {
            return Err(Error::InvalidParameter(format!(
                "potential not confining: leading coefficient of {{v6, v4, v2}} must be > 0 (got {v6}, {v4}, {v2})"
            )));
        }
        Ok(p)
    }

    pub fn from_coefficients(c: [f64; N_COEFFS]) -> Self {
        Self { v0: c[0], v2: c[1], v4: c[2], v6: c[3] }
    }

    pub fn coefficients(&self) -> [f64; N_COEFFS] {
        [self.v0, self.v2, self.v4, self.v6]
    }

    pub fn is_confining(&self) -> bool {
        [self.v6, self.v4, self.v2]
            .into_iter()
            .find(|c| *c != 0.0)
            .is_some_and(|c| c > 0.0)
    }

    /// `V` strictly increasing in `|x|` on `(0, radius]`, i.e. a unique minimum
    /// at the origin over that window.
    pub fn is_well_within(&self, radius: f64) -> bool {
        // x V'(x) = 2 v2 x^2 + 4 v4 x^4 + 6 v6 x^6 > 0  <=>  v2 + 2 v4 s + 3 v6 s^2 > 0 on s = x^2 in (0, r^2]
        let g = |s: f64| self.v2 + 2.0 * self.v4 * s + 3.0 * self.v6 * s * s;
        let s_max = radius * radius;
        if self.v2 < 0.0 || g(s_max) <= 0.0 {
            return false;
        }
        if self.v2 == 0.0 && self.v4 <= 0.0 {
            return false;
        }
        if self.v6 != 0.0 {
            let s_star = -self.v4 / (3.0 * self.v6);
            if s_star > 0.0 && s_star < s_max && g(s_star) <= 0.0 {
                return false;
            }
        }
        true
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.v0 + x2 * (self.v2 + x2 * (self.v4 + x2 * self.v6))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let x2 = x * x;
        x * (2.0 * self.v2 + x2 * (4.0 * self.v4 + x2 * 6.0 * self.v6))
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let x2 = x * x;
        2.0 * self.v2 + x2 * (12.0 * self.v4 + x2 * 30.0 * self.v6)
    }
}

impl Field<1> for Potential1D {
    fn value(&self, x: &SVector<f64, 1>) -> f64 {
        self.eval(x[0])
    }

    fn gradient(&self, x: &SVector<f64, 1>) -> SVector<f64, 1> {
        SVector::<f64, 1>::new(self.derivative(x[0]))
    }

    fn hessian(&self, x: &SVector<f64, 1>) -> SMatrix<f64, 1, 1> {
        SMatrix::<f64, 1, 1>::new(self.second_derivative(x[0]))
    }

    fn features(&self, x: &SVector<f64, 1>) -> [f64; N_COEFFS] {
        let x2 = x[0] * x[0];
        [1.0, x2, x2 * x2, x2 * x2 * x2]
    }
}

/// `V(x, y) = v0 + v2 (x^2 + y^2) + v22 x^2 y^2 + v4 (x^4 + y^4)`.
///
/// Symmetric under `x -> -x`, `y -> -y` and `x <-> y` for any coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential2D {
    pub v0: f64,
    pub v2: f64,
    pub v22: f64,
    pub v4: f64,
}

impl Potential2D {
    pub fn new(v0: f64, v2: f64, v22: f64, v4: f64) -> Result<Self> {
        if ![v0, v2, v22, v4].iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        if v2 <= 0.0 {
            return Err(Error::InvalidParameter(format!("v2 must be > 0 (got {v2})")));
        }
        Ok(Self { v0, v2, v22, v4 })
    }

    pub fn from_coefficients(c: [f64; N_COEFFS]) -> Self {
        Self { v0: c[0], v2: c[1], v22: c[2], v4: c[3] }
    }

    pub fn coefficients(&self) -> [f64; N_COEFFS] {
        [self.v0, self.v2, self.v22, self.v4]
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (x2, y2) = (x * x, y * y);
        self.v0 + self.v2 * (x2 + y2) + self.v22 * (x2 * y2) + self.v4 * (x2 * x2 + y2 * y2)
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let (x2, y2) = (x * x, y * y);
        [
            x * (2.0 * self.v2 + 2.0 * self.v22 * y2 + 4.0 * self.v4 * x2),
            y * (2.0 * self.v2 + 2.0 * self.v22 * x2 + 4.0 * self.v4 * y2),
        ]
    }

    /// Restriction to the x-axis, `V(x, 0)`, as a 1-D potential.
    pub fn on_axis(&self) -> Potential1D {
        Potential1D::from_coefficients([self.v0, self.v2, self.v4, 0.0])
    }
}

impl Field<2> for Potential2D {
    fn value(&self, x: &SVector<f64, 2>) -> f64 {
        self.eval(x[0], x[1])
    }

    fn gradient(&self, x: &SVector<f64, 2>) -> SVector<f64, 2> {
        let g = self.grad(x[0], x[1]);
        SVector::<f64, 2>::new(g[0], g[1])
    }

    fn hessian(&self, x: &SVector<f64, 2>) -> SMatrix<f64, 2, 2> {
        let (x2, y2) = (x[0] * x[0], x[1] * x[1]);
        let xy = 4.0 * self.v22 * x[0] * x[1];
        SMatrix::<f64, 2, 2>::new(
            2.0 * self.v2 + 2.0 * self.v22 * y2 + 12.0 * self.v4 * x2,
            xy,
            xy,
            2.0 * self.v2 + 2.0 * self.v22 * x2 + 12.0 * self.v4 * y2,
        )
    }

    fn features(&self, x: &SVector<f64, 2>) -> [f64; N_COEFFS] {
        let (x2, y2) = (x[0] * x[0], x[1] * x[1]);
        [1.0, x2 + y2, x2 * y2, x2 * x2 + y2 * y2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dimension")]
pub enum Potential {
    #[serde(rename = "1")]
    OneD(Potential1D),
    #[serde(rename = "2")]
    TwoD(Potential2D),
}

/// Mass plus potential. Used for the classical action and for every fitted
/// quantum action alike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub mass: f64,
    pub potential: Potential,
}

impl ActionSpec {
    pub fn new(mass: f64, potential: Potential) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be > 0 (got {mass})")));
        }
        Ok(Self { mass, potential })
    }

    pub fn one_d(mass: f64, v0: f64, v2: f64, v4: f64, v6: f64) -> Result<Self> {
        Self::new(mass, Potential::OneD(Potential1D::new(v0, v2, v4, v6)?))
    }

    pub fn two_d(mass: f64, v0: f64, v2: f64, v22: f64, v4: f64) -> Result<Self> {
        Self::new(mass, Potential::TwoD(Potential2D::new(v0, v2, v22, v4)?))
    }

    /// `m = 1, V = x^2 + 0.01 x^4`.
    pub fn quartic_1d() -> Self {
        Self::one_d(1.0, 0.0, 1.0, 0.01, 0.0).expect("valid constants")
    }

    /// Pullen-Edmonds oscillator: `m = 1, V = 0.5 (x^2 + y^2) + 0.05 x^2 y^2`.
    pub fn pullen_edmonds() -> Self {
        Self::two_d(1.0, 0.0, 0.5, 0.05, 0.0).expect("valid constants")
    }

    pub fn dimension(&self) -> usize {
        match self.potential {
            Potential::OneD(_) => 1,
            Potential::TwoD(_) => 2,
        }
    }

    pub fn coefficients(&self) -> [f64; N_COEFFS] {
        match &self.potential {
            Potential::OneD(p) => p.coefficients(),
            Potential::TwoD(p) => p.coefficients(),
        }
    }

    /// Same family, new mass and coefficients (no validation).
    pub fn with_parameters(&self, mass: f64, c: [f64; N_COEFFS]) -> Self {
        let potential = match self.potential {
            Potential::OneD(_) => Potential::OneD(Potential1D::from_coefficients(c)),
            Potential::TwoD(_) => Potential::TwoD(Potential2D::from_coefficients(c)),
        };
        Self { mass, potential }
    }

    /// `[m, c0, c1, c2, c3]`.
    pub fn parameters(&self) -> [f64; 1 + N_COEFFS] {
        let c = self.coefficients();
        [self.mass, c[0], c[1], c[2], c[3]]
    }

    pub fn from_parameters(&self, p: &[f64]) -> Self {
        self.with_parameters(p[0], [p[1], p[2], p[3], p[4]])
    }

    pub fn parameter_names(&self) -> [&'static str; 1 + N_COEFFS] {
        match self.potential {
            Potential::OneD(_) => ["m", "v0", "v2", "v4", "v6"],
            Potential::TwoD(_) => ["m", "v0", "v2", "v22", "v4"],
        }
    }

    /// Potential at a point; `x.len()` must equal the dimension.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.potential {
            Potential::OneD(p) => p.eval(x[0]),
            Potential::TwoD(p) => p.eval(x[0], x[1]),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match &self.potential {
            Potential::OneD(p) => vec![p.derivative(x[0])],
            Potential::TwoD(p) => p.grad(x[0], x[1]).to_vec(),
        }
    }

    /// Value at the origin, the potential minimum for every action used here.
    pub fn v0(&self) -> f64 {
        self.coefficients()[0]
    }

    /// Cross terms measured compatible with zero that the ansatz leaves out.
    pub fn excluded_terms(&self) -> &'static [&'static str] {
        match self.potential {
            Potential::OneD(_) => &[],
            Potential::TwoD(_) => &["vx*vy", "x*y", "x*y^3+x^3*y", "x^2*y^4+x^4*y^2", "x^4*y^4"],
        }
    }
}

/// Absolute value of imaginary time. With hbar = k_B = 1, `beta = T` and the
/// temperature is `tau = 1 / T`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TimeExtent(f64);

impl TimeExtent {
    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t.is_finite() {
            Ok(Self(t))
        } else {
            Err(Error::InvalidParameter(format!("time extent must be > 0 (got {t})")))
        }
    }

    pub fn from_temperature(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau.is_finite() {
            Self::new(1.0 / tau)
        } else {
            Err(Error::InvalidParameter(format!("temperature must be > 0 (got {tau})")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn beta(self) -> f64 {
        self.0
    }

    pub fn temperature(self) -> f64 {
        1.0 / self.0
    }
}

/// `tau = 1 / T`. Rejects `T <= 0`.
pub fn temperature_of(t: f64) -> Result<f64> {
    TimeExtent::new(t).map(TimeExtent::temperature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn evaluates_quartic_and_coupled_families() {
        let p = ActionSpec::quartic_1d();
        assert_eq!(p.eval(&[0.0]), 0.0);
        assert_relative_eq!(p.eval(&[1.0]), 1.01, epsilon = 1e-15);
        let q = ActionSpec::pullen_edmonds();
        assert_relative_eq!(q.eval(&[1.0, 1.0]), 1.05, epsilon = 1e-15);
    }

    #[test]
    fn gradients_at_reference_points() {
        let p = ActionSpec::quartic_1d();
        assert_eq!(p.grad(&[0.0]), vec![0.0]);
        assert_relative_eq!(p.grad(&[1.0])[0], 2.04, epsilon = 1e-15);
        let q = ActionSpec::pullen_edmonds();
        assert_eq!(q.grad(&[1.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn temperature_inversion() {
        assert_eq!(temperature_of(4.0).unwrap(), 0.25);
        assert_eq!(temperature_of(0.5).unwrap(), 2.0);
        assert_eq!(temperature_of(1.0).unwrap(), 1.0);
        assert!(temperature_of(0.0).is_err());
        assert!(temperature_of(-1.0).is_err());
        let t = TimeExtent::from_temperature(0.25).unwrap();
        assert_eq!(t.value(), 4.0);
        assert_eq!(t.temperature() * t.value(), 1.0);
    }

    #[test]
    fn rejects_invalid_actions() {
        assert!(Potential1D::new(0.0, 1.0, -0.01, 0.0).is_err());
        assert!(Potential1D::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(Potential1D::new(0.0, -1.0, 0.0, 0.1).is_ok());
        assert!(Potential2D::new(0.0, 0.0, 0.05, 0.0).is_err());
        assert!(ActionSpec::one_d(0.0, 0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn well_within_detects_turnover() {
        let p = Potential1D::from_coefficients([0.0, 1.0, 0.01, -1e-6]);
        assert!(p.is_well_within(3.0));
        assert!(!p.is_confining());
        let q = Potential1D::from_coefficients([0.0, 1.0, -0.5, 0.0]);
        assert!(!q.is_well_within(2.0));
        assert!(q.is_well_within(0.5));
    }

    fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
        let h = 1e-5 * (1.0 + x[i].abs());
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[i] += h;
        b[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            x in -3.0f64..3.0, y in -3.0f64..3.0,
            v2 in 0.1f64..2.0, v4 in 0.0f64..0.2, v6 in 0.0f64..0.01, v22 in -0.1f64..0.2,
        ) {
            let a = ActionSpec::one_d(1.0, 0.3, v2, v4, v6).unwrap();
            let g = a.grad(&[x])[0];
            let fd = central_diff(|p| a.eval(p), &[x], 0);
            prop_assert!((g - fd).abs() <= 1e-8 * (1.0 + g.abs()));

            let b = ActionSpec::two_d(1.0, 0.3, v2, v22, v4).unwrap();
            let g = b.grad(&[x, y]);
            for i in 0..2 {
                let fd = central_diff(|p| b.eval(p), &[x, y], i);
                prop_assert!((g[i] - fd).abs() <= 1e-8 * (1.0 + g[i].abs()));
            }
        }

        #[test]
        fn hessian_matches_gradient_differences(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let p = Potential2D::from_coefficients([0.0, 0.5, 0.05, -0.001]);
            let h = p.hessian(&SVector::<f64, 2>::new(x, y));
            let eps = 1e-6;
            let gp = p.grad(x + eps, y);
            let gm = p.grad(x - eps, y);
            prop_assert!(((gp[0] - gm[0]) / (2.0 * eps) - h[(0, 0)]).abs() < 1e-6);
            prop_assert!(((gp[1] - gm[1]) / (2.0 * eps) - h[(1, 0)]).abs() < 1e-6);
        }

        #[test]
        fn potentials_are_symmetric(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let p = Potential2D::from_coefficients([1.29, 0.5154, 0.0497, -0.0008]);
            let v = p.eval(x, y);
            prop_assert_eq!(v, p.eval(-x, y));
            prop_assert_eq!(v, p.eval(x, -y));
            prop_assert_eq!(v, p.eval(y, x));
            let q = Potential1D::from_coefficients([0.8, 1.013, 0.0099, 1e-5]);
            prop_assert_eq!(q.eval(x), q.eval(-x));
        }
    }
}

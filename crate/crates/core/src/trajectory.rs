//! Euclidean boundary-value problems.
//!
//! The action `S = int_0^T (m/2)|x'|^2 + V(x) dt` is discretized with
//! midpoint velocities and trapezoidal potential,
//!
//! ```text
//! S_n = sum_i (m / 2 dt) |x_{i+1} - x_i|^2 + (dt / 2) (V(x_i) + V(x_{i+1}))
//! ```
//!
//! and minimized over the interior nodes by damped Newton relaxation. The
//! Hessian is block tridiagonal; its block Cholesky factorization doubles as
//! the positivity (no conjugate point) certificate.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{ActionSpec, Field, Potential, TimeExtent, N_COEFFS};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const MIN_STEPS: usize = 64;
const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialPath {
    Straight,
    /// Hyperbolic approach to the origin at `T/2` and back out.
    ThroughOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpProblem {
    pub spec: ActionSpec,
    pub x_in: Vec<f64>,
    pub x_fi: Vec<f64>,
    pub t: TimeExtent,
    pub n_steps: usize,
    pub tolerance: f64,
}

impl BvpProblem {
    pub fn new(spec: ActionSpec, x_in: Vec<f64>, x_fi: Vec<f64>, t: TimeExtent, n_steps: usize) -> Result<Self> {
        let p = Self { spec, x_in, x_fi, t, n_steps, tolerance: DEFAULT_TOLERANCE };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        self.tolerance = tolerance;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let d = self.spec.dimension();
        if self.x_in.len() != d || self.x_fi.len() != d {
            return Err(Error::Mismatch(format!("endpoints must have {d} coordinates")));
        }
        if self.n_steps < MIN_STEPS {
            return Err(Error::InvalidParameter(format!("n_steps must be >= {MIN_STEPS}")));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// Discrete extremal path and the quantities read off it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySolution {
    pub dimension: usize,
    pub dt: f64,
    pub path: Vec<Vec<f64>>,
    pub action: f64,
    /// Euclidean energy `V - (m/2)|x'|^2`, time averaged.
    pub energy_const: f64,
    /// Largest deviation of the node energy from `energy_const`, `O(dt^2)`.
    pub energy_spread: f64,
    pub residual: f64,
    pub hessian_positive: bool,
    pub iterations: usize,
    /// `int (1/2)|x'|^2 dt`, the derivative of the action with respect to the mass.
    pub kinetic: f64,
    /// `int f_j(x) dt` for the potential features, the derivatives with
    /// respect to the potential coefficients.
    pub features: [f64; N_COEFFS],
}

impl TrajectorySolution {
    pub fn duration(&self) -> f64 {
        self.dt * (self.path.len() - 1) as f64
    }

    /// `m int |x'|^2 dt` from node `from` to the end.
    pub fn tail_kinetic(&self, mass: f64, from: usize) -> f64 {
        self.path[from..]
            .windows(2)
            .map(|w| dist2(&w[0], &w[1]))
            .sum::<f64>()
            * mass
            / self.dt
    }

    /// Node closest to the origin and its distance.
    pub fn closest_approach(&self) -> (usize, f64) {
        self.path
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.iter().map(|x| x * x).sum::<f64>().sqrt()))
            .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Solve from a straight line; on a conjugate point, retry through the origin.
pub fn solve_bvp(p: &BvpProblem) -> Result<TrajectorySolution> {
    match solve_bvp_from(p, InitialPath::Straight) {
        Err(Error::ConjugatePoint) => solve_bvp_from(p, InitialPath::ThroughOrigin),
        other => other,
    }
}

pub fn solve_bvp_from(p: &BvpProblem, init: InitialPath) -> Result<TrajectorySolution> {
    p.validate()?;
    let guess = initial_path(p, init);
    solve_bvp_warm(p, &guess)
}

/// Solve starting from a full path guess (`n_steps + 1` points, endpoints
/// overwritten by the problem's).
pub fn solve_bvp_warm(p: &BvpProblem, guess: &[Vec<f64>]) -> Result<TrajectorySolution> {
    p.validate()?;
    if guess.len() != p.n_steps + 1 {
        return Err(Error::Mismatch(format!("guess has {} nodes, need {}", guess.len(), p.n_steps + 1)));
    }
    match &p.spec.potential {
        Potential::OneD(f) => relax::<1, _>(p, f, guess),
        Potential::TwoD(f) => relax::<2, _>(p, f, guess),
    }
}

fn initial_path(p: &BvpProblem, init: InitialPath) -> Vec<Vec<f64>> {
    let n = p.n_steps;
    let t = p.t.value();
    let lerp = |s: f64| -> Vec<f64> { p.x_in.iter().zip(&p.x_fi).map(|(a, b)| a + (b - a) * s).collect() };
    match init {
        InitialPath::Straight => (0..=n).map(|i| lerp(i as f64 / n as f64)).collect(),
        InitialPath::ThroughOrigin => {
            let c = p.spec.coefficients();
            let kappa = (2.0 * c[1].abs().max(1e-3) / p.spec.mass).sqrt();
            let half = t / 2.0;
            let denom = (kappa * half).sinh();
            (0..=n)
                .map(|i| {
                    let s = t * i as f64 / n as f64;
                    if s <= half {
                        let w = (kappa * (half - s)).sinh() / denom;
                        p.x_in.iter().map(|a| a * w).collect()
                    } else {
                        let w = (kappa * (s - half)).sinh() / denom;
                        p.x_fi.iter().map(|b| b * w).collect()
                    }
                })
                .collect()
        }
    }
}

type Vec_<const D: usize> = SVector<f64, D>;
type Mat<const D: usize> = SMatrix<f64, D, D>;

struct Discrete<'a, const D: usize, F: Field<D>> {
    mass: f64,
    dt: f64,
    field: &'a F,
}

impl<const D: usize, F: Field<D>> Discrete<'_, D, F> {
    fn action(&self, x: &[Vec_<D>]) -> f64 {
        let k = self.mass / (2.0 * self.dt);
        x.windows(2)
            .map(|w| k * (w[1] - w[0]).norm_squared() + 0.5 * self.dt * (self.field.value(&w[0]) + self.field.value(&w[1])))
            .sum()
    }

    fn gradient(&self, x: &[Vec_<D>], g: &mut [Vec_<D>]) {
        let n = x.len() - 1;
        let k = self.mass / self.dt;
        for i in 1..n {
            g[i] = (x[i] * 2.0 - x[i - 1] - x[i + 1]) * k + self.field.gradient(&x[i]) * self.dt;
        }
    }

    /// Solve `H d = rhs` (interior nodes) with block Cholesky; `shift` is added
    /// to every diagonal block. Returns `None` if a Schur complement is not
    /// positive definite.
    fn newton_step(&self, x: &[Vec_<D>], rhs: &[Vec_<D>], shift: f64) -> Option<Vec<Vec_<D>>> {
        let n = x.len() - 1;
        let k = self.mass / self.dt;
        let id = Mat::<D>::identity();
        // S_i = A_i - k^2 S_{i-1}^{-1}, y_i = r_i + k S_{i-1}^{-1} y_{i-1}
        let mut inv: Vec<Mat<D>> = vec![Mat::<D>::zeros(); n];
        let mut y: Vec<Vec_<D>> = vec![Vec_::<D>::zeros(); n];
        for i in 1..n {
            let mut s = id * (2.0 * k + shift) + self.field.hessian(&x[i]) * self.dt;
            let mut r = rhs[i];
            if i > 1 {
                s -= inv[i - 1] * (k * k);
                r += inv[i - 1] * y[i - 1] * k;
            }
            let chol = s.cholesky()?;
            inv[i] = chol.inverse();
            y[i] = r;
        }
        let mut d = vec![Vec_::<D>::zeros(); n + 1];
        for i in (1..n).rev() {
            let mut r = y[i];
            if i + 1 < n {
                r += d[i + 1] * k;
            }
            d[i] = inv[i] * r;
        }
        Some(d)
    }

    fn positive_definite(&self, x: &[Vec_<D>]) -> bool {
        let zero = vec![Vec_::<D>::zeros(); x.len()];
        self.newton_step(x, &zero, 0.0).is_some()
    }
}

fn relax<const D: usize, F: Field<D>>(p: &BvpProblem, field: &F, guess: &[Vec<f64>]) -> Result<TrajectorySolution> {
    let n = p.n_steps;
    let dt = p.t.value() / n as f64;
    let disc = Discrete { mass: p.spec.mass, dt, field };
    let mut x: Vec<Vec_<D>> = guess.iter().map(|v| Vec_::<D>::from_iterator(v.iter().copied())).collect();
    x[0] = Vec_::<D>::from_iterator(p.x_in.iter().copied());
    x[n] = Vec_::<D>::from_iterator(p.x_fi.iter().copied());

    let mut g = vec![Vec_::<D>::zeros(); n + 1];
    let mut s = disc.action(&x);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        disc.gradient(&x, &mut g);
        residual = g[1..n].iter().map(|v| v.amax()).fold(0.0, f64::max) / dt;
        if !residual.is_finite() {
            break;
        }
        if residual < p.tolerance {
            break;
        }
        iterations += 1;
        let rhs: Vec<Vec_<D>> = g.iter().map(|v| -v).collect();
        let mut shift = 0.0;
        let step = loop {
            if let Some(d) = disc.newton_step(&x, &rhs, shift) {
                break d;
            }
            shift = if shift == 0.0 { 1e-3 * disc.mass / dt } else { shift * 10.0 };
            if shift > 1e12 {
                return Err(Error::BvpNonConvergence { iterations, residual });
            }
        };
        let slope: f64 = (1..n).map(|i| g[i].dot(&step[i])).sum();
        let mut alpha = 1.0;
        let mut trial = x.clone();
        let mut accepted = false;
        for _ in 0..40 {
            for i in 1..n {
                trial[i] = x[i] + step[i] * alpha;
            }
            let st = disc.action(&trial);
            if st <= s + 1e-4 * alpha * slope + 8.0 * f64::EPSILON * s.abs().max(1.0) {
                s = st;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut x, &mut trial);
    }
    if !(residual < p.tolerance) {
        return Err(Error::BvpNonConvergence { iterations, residual });
    }
    let hessian_positive = disc.positive_definite(&x);
    if !hessian_positive {
        return Err(Error::ConjugatePoint);
    }
    Ok(summarize(p, &disc, &x, residual, iterations, hessian_positive))
}

fn summarize<const D: usize, F: Field<D>>(
    p: &BvpProblem,
    disc: &Discrete<'_, D, F>,
    x: &[Vec_<D>],
    residual: f64,
    iterations: usize,
    hessian_positive: bool,
) -> TrajectorySolution {
    let n = x.len() - 1;
    let dt = disc.dt;
    let m = disc.mass;
    let kinetic: f64 = x.windows(2).map(|w| (w[1] - w[0]).norm_squared()).sum::<f64>() / (2.0 * dt);
    let mut features = [0.0; N_COEFFS];
    for w in x.windows(2) {
        let (a, b) = (disc.field.features(&w[0]), disc.field.features(&w[1]));
        for j in 0..N_COEFFS {
            features[j] += 0.5 * dt * (a[j] + b[j]);
        }
    }
    let action = disc.action(x);
    let t = p.t.value();
    let energy_const = (action - 2.0 * m * kinetic) / t;
    let energy_spread = (1..n)
        .map(|i| {
            let v = (x[i + 1] - x[i - 1]) / (2.0 * dt);
            (disc.field.value(&x[i]) - 0.5 * m * v.norm_squared() - energy_const).abs()
        })
        .fold(0.0, f64::max);
    TrajectorySolution {
        dimension: D,
        dt,
        path: x.iter().map(|v| v.iter().copied().collect()).collect(),
        action,
        energy_const,
        energy_spread,
        residual,
        hessian_positive,
        iterations,
        kinetic,
        features,
    }
}

/// Discrete action of a path under `spec` (same quadrature as the solver).
pub fn action_of(spec: &ActionSpec, solution: &TrajectorySolution) -> f64 {
    let dt = solution.dt;
    let m = spec.mass;
    solution
        .path
        .windows(2)
        .map(|w| m / (2.0 * dt) * dist2(&w[0], &w[1]) + 0.5 * dt * (spec.eval(&w[0]) + spec.eval(&w[1])))
        .sum()
}

/// Steps for a time extent at the given resolution, rounded up to even.
pub fn steps_for(t: f64, dt: f64) -> usize {
    let n = ((t / dt).ceil() as usize).max(MIN_STEPS);
    n + n % 2
}

/// Large-`T` line integral `m int_0^x x'.dx` along the extremal path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineIntegral {
    pub value: f64,
    /// Time extent at which the stability certificate passed.
    pub t_large: f64,
    /// `|W(1.5 T) - W(T)|`.
    pub stability_delta: f64,
    /// Distance of the split node from the origin.
    pub approach_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineIntegralOptions {
    pub t_large: f64,
    /// Largest time extent tried before giving up.
    pub t_max: f64,
    pub stability: f64,
    pub dt: f64,
}

impl Default for LineIntegralOptions {
    fn default() -> Self {
        Self { t_large: 10.0, t_max: 60.0, stability: 1e-4, dt: 0.005 }
    }
}

/// Second half of the `-x_fi -> x_fi` extremal over `t`, split at the node
/// closest to the origin; Richardson extrapolated over `dt` and `dt/2`.
fn half_kinetic(spec: &ActionSpec, x_fi: &[f64], t: f64, dt: f64) -> Result<(f64, f64)> {
    let x_in: Vec<f64> = x_fi.iter().map(|x| -x).collect();
    let te = TimeExtent::new(t)?;
    let mut values = [0.0; 2];
    let mut approach = 0.0;
    for (k, n) in [steps_for(t, dt), 2 * steps_for(t, dt)].into_iter().enumerate() {
        let p = BvpProblem::new(*spec, x_in.clone(), x_fi.to_vec(), te, n)?;
        let sol = solve_bvp_from(&p, InitialPath::ThroughOrigin)?;
        let (i, dist) = sol.closest_approach();
        values[k] = sol.tail_kinetic(spec.mass, i);
        approach = dist;
    }
    Ok(((4.0 * values[1] - values[0]) / 3.0, approach))
}

/// `m int_0^{x_fi} dx . dx/dt` along the large-`T` extremal (the exponent of
/// the ground state built from the action). `T` grows by 1.5x until the value
/// changes by less than the stability bound.
pub fn wavefunction_line_integral(spec: &ActionSpec, x_fi: &[f64], opts: LineIntegralOptions) -> Result<LineIntegral> {
    if x_fi.len() != spec.dimension() {
        return Err(Error::Mismatch(format!("target must have {} coordinates", spec.dimension())));
    }
    if x_fi.iter().all(|x| *x == 0.0) {
        return Ok(LineIntegral { value: 0.0, t_large: opts.t_large, stability_delta: 0.0, approach_distance: 0.0 });
    }
    let mut t = opts.t_large;
    let (mut prev, _) = half_kinetic(spec, x_fi, t, opts.dt)?;
    let mut delta = f64::INFINITY;
    while 1.5 * t <= opts.t_max + 1e-12 {
        let (next, approach) = half_kinetic(spec, x_fi, 1.5 * t, opts.dt)?;
        delta = (next - prev).abs();
        if delta < opts.stability {
            return Ok(LineIntegral { value: next, t_large: t, stability_delta: delta, approach_distance: approach });
        }
        prev = next;
        t *= 1.5;
    }
    Err(Error::Unstable { delta, t_large: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn problem(spec: ActionSpec, a: f64, b: f64, t: f64, n: usize) -> BvpProblem {
        BvpProblem::new(spec, vec![a], vec![b], TimeExtent::new(t).unwrap(), n).unwrap()
    }

    fn harmonic_action(a: f64, b: f64, t: f64) -> f64 {
        ((a * a + b * b) * t.cosh() - 2.0 * a * b) / (2.0 * t.sinh())
    }

    #[test]
    fn free_particle_is_a_straight_line() {
        let spec = ActionSpec::one_d(1.0, 0.0, 1e-300, 0.0, 0.0).unwrap();
        let sol = solve_bvp(&problem(spec, 0.0, 1.0, 1.0, 64)).unwrap();
        assert_relative_eq!(sol.action, 0.5, epsilon = 1e-12);
        for (i, p) in sol.path.iter().enumerate() {
            assert_relative_eq!(p[0], i as f64 / 64.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn harmonic_action_matches_closed_form() {
        let spec = ActionSpec::one_d(1.0, 0.0, 0.5, 0.0, 0.0).unwrap();
        let sol = solve_bvp(&problem(spec, 0.0, 1.0, 1.0, 1024)).unwrap();
        assert!((sol.action - harmonic_action(0.0, 1.0, 1.0)).abs() < 1e-6);
        assert!((action_of(&spec, &sol) - sol.action).abs() < 1e-14);
        assert!(sol.hessian_positive);
    }

    #[test]
    fn constant_path_at_the_minimum() {
        let spec = ActionSpec::one_d(1.0, 0.7, 1.0, 0.01, 0.0).unwrap();
        let sol = solve_bvp(&problem(spec, 0.0, 0.0, 3.0, 128)).unwrap();
        assert_relative_eq!(sol.action, 0.7 * 3.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoints_are_exact_and_energy_is_conserved() {
        let sol = solve_bvp(&problem(ActionSpec::quartic_1d(), -1.0, 1.3, 4.5, 1024)).unwrap();
        assert_eq!(sol.path[0], vec![-1.0]);
        assert_eq!(sol.path[1024], vec![1.3]);
        assert!(sol.residual < DEFAULT_TOLERANCE);
        let coarse = solve_bvp(&problem(ActionSpec::quartic_1d(), -1.0, 1.3, 4.5, 512)).unwrap();
        let ratio = coarse.energy_spread / sol.energy_spread;
        assert!(ratio > 3.5 && ratio < 4.5, "energy spread ratio {ratio}");
    }

    #[test]
    fn rejects_bad_problems() {
        let t = TimeExtent::new(1.0).unwrap();
        assert!(BvpProblem::new(ActionSpec::quartic_1d(), vec![0.0], vec![1.0], t, 32).is_err());
        assert!(BvpProblem::new(ActionSpec::quartic_1d(), vec![0.0, 1.0], vec![1.0], t, 64).is_err());
        assert!(problem(ActionSpec::quartic_1d(), 0.0, 1.0, 1.0, 64).with_tolerance(0.0).is_err());
    }

    #[test]
    fn inverted_well_has_a_conjugate_point() {
        // V = -x^2 / 2: Euclidean paths oscillate with period 2 pi
        let spec = ActionSpec::new(1.0, Potential::OneD(crate::Potential1D::from_coefficients([0.0, -0.5, 0.0, 0.0]))).unwrap();
        let p = problem(spec, 0.0, 0.0, 4.0, 256);
        assert!(matches!(solve_bvp(&p), Err(Error::ConjugatePoint)));
    }

    #[test]
    fn line_integral_vanishes_at_origin() {
        let w = wavefunction_line_integral(&ActionSpec::quartic_1d(), &[0.0], LineIntegralOptions::default()).unwrap();
        assert_eq!(w.value, 0.0);
    }

    #[test]
    fn harmonic_line_integral() {
        let spec = ActionSpec::one_d(1.0, 0.5, 0.5, 0.0, 0.0).unwrap();
        let w = wavefunction_line_integral(&spec, &[1.2], LineIntegralOptions::default()).unwrap();
        assert!((w.value - 0.72).abs() < 1e-4, "{w:?}");
        assert!(w.approach_distance < 1e-12);
    }
}

//! Zero-temperature closed forms relating the classical action to the
//! quantum action of a parity-symmetric potential with its minimum at the
//! origin.
//!
//! With `U(x) = 2 m~ (V~(x) - v~0)` the transformation law reads
//!
//! ```text
//! 2 m (V(x) - E_gr) = U(x) - sgn(x) U'(x) / (2 sqrt(U(x)))
//! ```
//!
//! and the ground state is `psi(x) = exp(-int_0^|x| sqrt(U)) / N` with
//! `E_gr = v~0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::{ActionSpec, Potential, Potential1D};
use crate::trajectory::{wavefunction_line_integral, LineIntegralOptions};

/// Inside this radius the quotient of the law is evaluated in factored form.
pub const EXCLUSION_RADIUS: f64 = 0.05;
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;

fn one_d(spec: &ActionSpec) -> Result<(f64, Potential1D)> {
    match spec.potential {
        Potential::OneD(p) => Ok((spec.mass, p)),
        Potential::TwoD(_) => Err(Error::Mismatch("expected a 1-D action".into())),
    }
}

/// Quotient term `sgn(x) U' / (2 sqrt U)` from its definition.
fn quotient_direct(m: f64, p: &Potential1D, x: f64) -> Result<f64> {
    let u = 2.0 * m * (p.eval(x) - p.v0);
    if u <= 0.0 {
        return Err(Error::NegativeRadicand { x, value: u });
    }
    let du = 2.0 * m * p.derivative(x);
    Ok(x.signum() * du / (2.0 * u.sqrt()))
}

/// Same quotient with the `|x|` cancelled: for `U = 2 m s P(s)`, `s = x^2`,
/// it equals `sqrt(2m) (v2 + 2 v4 s + 3 v6 s^2) / sqrt(P(s))`.
fn quotient_factored(m: f64, p: &Potential1D, x: f64) -> Result<f64> {
    let s = x * x;
    let poly = p.v2 + p.v4 * s + p.v6 * s * s;
    if poly <= 0.0 {
        return Err(Error::NegativeRadicand { x, value: poly });
    }
    Ok((2.0 * m).sqrt() * (p.v2 + 2.0 * p.v4 * s + 3.0 * p.v6 * s * s) / poly.sqrt())
}

/// Left minus right side of the transformation law at `x != 0`.
pub fn transform_law_residual(classical: &ActionSpec, quantum: &ActionSpec, e_gr: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::Singular(0.0));
    }
    let (m, v) = one_d(classical)?;
    let (mt, q) = one_d(quantum)?;
    let quotient = if x.abs() < EXCLUSION_RADIUS { quotient_factored(mt, &q, x)? } else { quotient_direct(mt, &q, x)? };
    let lhs = 2.0 * m * (v.eval(x) - e_gr);
    let rhs = 2.0 * mt * (q.eval(x) - q.v0) - quotient;
    Ok(lhs - rhs)
}

/// The law without the factored form; errors inside the exclusion radius.
pub fn transform_law_residual_direct(classical: &ActionSpec, quantum: &ActionSpec, e_gr: f64, x: f64) -> Result<f64> {
    if x.abs() < EXCLUSION_RADIUS {
        return Err(Error::Singular(x.abs()));
    }
    let (m, v) = one_d(classical)?;
    let (mt, q) = one_d(quantum)?;
    Ok(2.0 * m * (v.eval(x) - e_gr) - (2.0 * mt * (q.eval(x) - q.v0) - quotient_direct(mt, &q, x)?))
}

/// Largest `|residual|` over `n` evenly spaced points of `[a, b]`.
pub fn max_law_residual(classical: &ActionSpec, quantum: &ActionSpec, e_gr: f64, a: f64, b: f64, n: usize) -> Result<(f64, f64)> {
    let mut worst = (0.0, a);
    for k in 0..n {
        let x = a + (b - a) * k as f64 / (n - 1).max(1) as f64;
        let r = transform_law_residual(classical, quantum, e_gr, x)?.abs();
        if r > worst.0 {
            worst = (r, x);
        }
    }
    Ok(worst)
}

/// Quartic quantum potential from matching the law order by order in `x^2`
/// (`hbar = 1`): returns `(v2~, v4~, v6~)`.
pub fn derive_quartic_params(m: f64, v2: f64, v4: f64, e_gr: f64, m_tilde: f64) -> Result<(f64, f64, f64)> {
    if !(m_tilde > 0.0) || !(e_gr > 0.0) || !(m > 0.0) {
        return Err(Error::InvalidParameter("m, m~ and E_gr must be > 0".into()));
    }
    let v2t = 2.0 / m_tilde * (m * e_gr).powi(2);
    let k = (2.0 * m_tilde * v2t).sqrt();
    let v4t = 2.0 / 3.0 * k * (v2t - v2 * m / m_tilde);
    let v6t = 0.25 * v4t * v4t / v2t + 0.4 * k * (v4t - v4 * m / m_tilde);
    Ok((v2t, v4t, v6t))
}

/// Ground state sampled from the quantum action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavefunctionProfile {
    pub points: Vec<Vec<f64>>,
    /// Normalized values; `NaN` where a target failed.
    pub values: Vec<f64>,
    /// `psi = exp(-W) / normalization`.
    pub normalization: f64,
    /// `v~0`, the ground-state energy the action predicts.
    pub e_gr: f64,
    /// Indices of targets whose line integral failed.
    pub failed: Vec<usize>,
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `int_0^|x| sqrt(2 m~ (V~ - v~0)) dx'`.
pub fn exponent_1d(quantum: &ActionSpec, x: f64) -> Result<f64> {
    let (mt, q) = one_d(quantum)?;
    radicand_check(mt, &q, x.abs())?;
    let f = |y: f64| (2.0 * mt * (q.eval(y) - q.v0)).max(0.0).sqrt();
    Ok(adaptive_simpson(&f, 0.0, x.abs(), QUADRATURE_TOLERANCE))
}

fn radicand_check(mt: f64, q: &Potential1D, x_max: f64) -> Result<()> {
    // U = 2 m~ s P(s): negative somewhere on (0, x_max] iff P is
    let probe = 64;
    for k in 1..=probe {
        let x = x_max * k as f64 / probe as f64;
        let s = x * x;
        let poly = q.v2 + q.v4 * s + q.v6 * s * s;
        if poly < 0.0 {
            return Err(Error::NegativeRadicand { x, value: 2.0 * mt * s * poly });
        }
    }
    Ok(())
}

/// `psi` on every node of a 1-D grid, normalized so that `h sum psi^2 = 1`.
pub fn reconstruct_wavefunction_1d(quantum: &ActionSpec, grid: &Grid) -> Result<WavefunctionProfile> {
    let (mt, q) = one_d(quantum)?;
    if grid.dimension != 1 {
        return Err(Error::Mismatch("expected a 1-D grid".into()));
    }
    radicand_check(mt, &q, grid.half_extent)?;
    let f = |y: f64| (2.0 * mt * (q.eval(y) - q.v0)).max(0.0).sqrt();
    let c = grid.center();
    let cells = (grid.n - 1) as f64;
    let mut exponent = vec![0.0; grid.n];
    // cumulative integral outward from the origin; even by construction
    for k in 1..=c {
        let (a, b) = (grid.coordinate(c + k - 1), grid.coordinate(c + k));
        exponent[c + k] = exponent[c + k - 1] + adaptive_simpson(&f, a, b, QUADRATURE_TOLERANCE / cells);
        exponent[c - k] = exponent[c + k];
    }
    let raw: Vec<f64> = exponent.iter().map(|w| (-w).exp()).collect();
    let norm = (grid.spacing() * raw.iter().map(|v| v * v).sum::<f64>()).sqrt();
    Ok(WavefunctionProfile {
        points: grid.coordinates().into_iter().map(|x| vec![x]).collect(),
        values: raw.iter().map(|v| v / norm).collect(),
        normalization: norm,
        e_gr: q.v0,
        failed: Vec::new(),
    })
}

/// `psi(target) = exp(-W(target)) / N` with `W` the line integral along the
/// large-`T` extremal; `N` is fixed by `psi(0) = origin_value`.
pub fn reconstruct_wavefunction_2d(
    quantum: &ActionSpec,
    targets: &[Vec<f64>],
    origin_value: f64,
    opts: LineIntegralOptions,
) -> Result<WavefunctionProfile> {
    use rayon::prelude::*;
    if quantum.dimension() != 2 {
        return Err(Error::Mismatch("expected a 2-D action".into()));
    }
    if !(origin_value > 0.0) {
        return Err(Error::InvalidParameter("origin value must be > 0".into()));
    }
    let results: Vec<Result<f64>> =
        targets.par_iter().map(|t| wavefunction_line_integral(quantum, t, opts).map(|w| w.value)).collect();
    let mut failed = Vec::new();
    let values = results
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(w) => origin_value * (-w).exp(),
            Err(_) => {
                failed.push(i);
                f64::NAN
            }
        })
        .collect();
    Ok(WavefunctionProfile {
        points: targets.to_vec(),
        values,
        normalization: 1.0 / origin_value,
        e_gr: quantum.v0(),
        failed,
    })
}

/// Cuts at fixed `x` through the plane, `y` on a uniform set.
pub fn default_cuts() -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for x in [0.0, 0.5, 1.0] {
        for k in -10..=10 {
            out.push(vec![x, 0.25 * k as f64]);
        }
    }
    out
}

/// Row of a profile comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub point: Vec<f64>,
    pub psi_quantum_action: f64,
    pub psi_oracle: f64,
    pub abs_diff: f64,
}

pub fn compare_profiles(profile: &WavefunctionProfile, oracle: &[f64]) -> Result<Vec<ProfileRow>> {
    if oracle.len() != profile.values.len() {
        return Err(Error::Mismatch("profile and oracle lengths differ".into()));
    }
    Ok(profile
        .points
        .iter()
        .zip(&profile.values)
        .zip(oracle)
        .map(|((p, &a), &b)| ProfileRow { point: p.clone(), psi_quantum_action: a, psi_oracle: b, abs_diff: (a - b).abs() })
        .collect())
}

/// Largest `abs_diff` over rows whose coordinates all lie in `[-r, r]`.
pub fn max_deviation(rows: &[ProfileRow], r: f64) -> f64 {
    rows.iter()
        .filter(|row| row.point.iter().all(|x| x.abs() <= r + 1e-12))
        .map(|row| row.abs_diff)
        .fold(0.0, f64::max)
}

/// Relative residual `||(H - v~0) psi|| / ||psi||` of the reconstructed
/// ground state in the classical Hamiltonian on `grid`.
pub fn eigen_residual(classical: &ActionSpec, quantum: &ActionSpec, grid: &Grid) -> Result<f64> {
    let (m, v) = one_d(classical)?;
    let profile = reconstruct_wavefunction_1d(quantum, grid)?;
    let h = crate::oracle::line_hamiltonian(m, &v, grid);
    let psi = &profile.values[1..grid.n - 1];
    let mut out = vec![0.0; psi.len()];
    h.mul_vec(psi, &mut out);
    let num: f64 = out.iter().zip(psi).map(|(a, b)| (a - profile.e_gr * b).powi(2)).sum();
    let den: f64 = psi.iter().map(|b| b * b).sum();
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub estimate: f64,
    pub reference: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `|estimate - E_gr|` against a tolerance.
pub fn check_energy_identity(estimate: f64, e_gr: f64, tolerance: f64) -> EnergyCheck {
    let difference = (estimate - e_gr).abs();
    EnergyCheck { estimate, reference: e_gr, difference, tolerance, pass: difference <= tolerance }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic() -> ActionSpec {
        ActionSpec::one_d(1.0, 0.0, 0.5, 0.0, 0.0).unwrap()
    }

    fn harmonic_quantum() -> ActionSpec {
        ActionSpec::one_d(1.0, 0.5, 0.5, 0.0, 0.0).unwrap()
    }

    #[test]
    fn harmonic_law_is_exact() {
        for k in 1..=60 {
            let x = -3.0 + 0.1 * k as f64;
            if x.abs() < 1e-9 {
                continue;
            }
            let r = transform_law_residual(&harmonic(), &harmonic_quantum(), 0.5, x).unwrap();
            assert!(r.abs() < 1e-13, "{x}: {r}");
        }
        assert!(matches!(transform_law_residual(&harmonic(), &harmonic_quantum(), 0.5, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn factored_and_direct_forms_agree() {
        let q = ActionSpec::one_d(0.999, 0.7, 1.01151, 0.009967, 2.89e-7).unwrap();
        let c = ActionSpec::quartic_1d();
        for x in [0.05, 0.07, 0.3, 1.0, 2.5, -0.8] {
            let (mt, p) = one_d(&q).unwrap();
            let a = quotient_direct(mt, &p, x).unwrap();
            let b = quotient_factored(mt, &p, x).unwrap();
            assert!((a - b).abs() < 1e-12 * a.abs(), "{x}: {a} {b}");
        }
        assert!(transform_law_residual_direct(&c, &q, 0.710811, 0.01).is_err());
        let inside = transform_law_residual(&c, &q, 0.710811, 0.01).unwrap();
        let edge = transform_law_residual(&c, &q, 0.710811, 0.05).unwrap();
        assert!((inside - edge).abs() < 1e-4);
    }

    #[test]
    fn derived_parameters_satisfy_the_law_near_the_origin() {
        let (a, b, c) = derive_quartic_params(1.0, 1.0, 0.01, 0.710811, 0.9990).unwrap();
        let q = ActionSpec::quartic_1d().with_parameters(0.9990, [0.710811, a, b, c]);
        let c = ActionSpec::quartic_1d();
        let (worst, _) = max_law_residual(&c, &q, 0.710811, 0.01, 1.0, 200).unwrap();
        assert!(worst < 1e-5, "{worst}");
        // the constant, x^2 and x^4 orders are matched; x^6 is the first left over
        let r1 = transform_law_residual(&c, &q, 0.710811, 0.6).unwrap();
        let r2 = transform_law_residual(&c, &q, 0.710811, 0.3).unwrap();
        assert!((r1 / r2 - 64.0).abs() < 4.0, "{}", r1 / r2);
        let (h2, h4, h6) = derive_quartic_params(1.0, 0.5, 0.0, 0.5, 1.0).unwrap();
        assert!((h2 - 0.5).abs() < 1e-15 && h4.abs() < 1e-15 && h6.abs() < 1e-15);
    }

    #[test]
    fn wrong_curvature_is_detected() {
        let (a, b, c) = derive_quartic_params(1.0, 1.0, 0.01, 0.710811, 0.9990).unwrap();
        let q = ActionSpec::quartic_1d().with_parameters(0.9990, [0.710811, a + 0.1, b, c]);
        let (worst, _) = max_law_residual(&ActionSpec::quartic_1d(), &q, 0.710811, 0.5, 2.0, 100).unwrap();
        assert!(worst > 0.05);
    }

    #[test]
    fn harmonic_profile_is_gaussian() {
        let grid = Grid::new(1, 6.0, 601).unwrap();
        let p = reconstruct_wavefunction_1d(&harmonic_quantum(), &grid).unwrap();
        let norm = (grid.spacing() * grid.coordinates().iter().map(|x| (-x * x).exp()).sum::<f64>()).sqrt();
        for (pt, v) in p.points.iter().zip(&p.values) {
            let exact = (-pt[0] * pt[0] / 2.0).exp() / norm;
            assert!((v - exact).abs() < 1e-10);
        }
        let s: f64 = p.values.iter().map(|v| v * v).sum::<f64>() * grid.spacing();
        assert!((s - 1.0).abs() < 1e-10);
        assert_eq!(p.e_gr, 0.5);
        let c = grid.center();
        for k in 1..c {
            assert_eq!(p.values[c + k], p.values[c - k]);
            assert!(p.values[c + k] < p.values[c + k - 1]);
        }
    }

    #[test]
    fn eigen_residual_shrinks_under_refinement() {
        let coarse = eigen_residual(&harmonic(), &harmonic_quantum(), &Grid::new(1, 8.0, 161).unwrap()).unwrap();
        let fine = eigen_residual(&harmonic(), &harmonic_quantum(), &Grid::new(1, 8.0, 321).unwrap()).unwrap();
        assert!(fine < coarse / 3.0, "{coarse} {fine}");
    }

    #[test]
    fn rejects_raised_minimum() {
        let q = ActionSpec::one_d(1.0, 0.0, -0.1, 0.1, 0.0);
        assert!(q.is_ok());
        assert!(matches!(exponent_1d(&q.unwrap(), 1.0), Err(Error::NegativeRadicand { .. })));
    }

    #[test]
    fn energy_identity() {
        assert!(check_energy_identity(0.710819, 0.710811, 1e-4).pass);
        assert!(check_energy_identity(1.0127, 1.01207, 2e-3).pass);
        assert_eq!(check_energy_identity(0.3, 0.3, 0.0).difference, 0.0);
    }

    #[test]
    fn two_d_origin_and_axis_reduction() {
        let q = ActionSpec::two_d(1.0, 1.0, 0.5, 0.05, 0.01).unwrap();
        let opts = LineIntegralOptions::default();
        let p = reconstruct_wavefunction_2d(&q, &[vec![0.0, 0.0], vec![0.9, 0.0]], 0.5, opts).unwrap();
        assert_eq!(p.values[0], 0.5);
        let axis = ActionSpec::new(1.0, Potential::OneD(Potential1D::from_coefficients([1.0, 0.5, 0.01, 0.0]))).unwrap();
        let w = exponent_1d(&axis, 0.9).unwrap();
        assert!(((p.values[1] / 0.5).ln() + w).abs() < 1e-4, "{} {}", -(p.values[1] / 0.5).ln(), w);
    }
}

//! Grid quantum mechanics used as ground truth: spectra, Euclidean transition
//! amplitudes `G(x_fi, T; x_in, 0) = <x_fi| exp(-H T) |x_in>` and ground-state
//! moments.
//!
//! The Hamiltonian is `-(1/2m) Laplacian + V` with second-order central
//! differences and Dirichlet end nodes. In 1-D the tridiagonal matrix is
//! diagonalized directly. In 2-D the grid operator is written as
//! `H_x + H_y + v22 x^2 y^2` and represented in the product basis of the
//! lowest 1-D grid eigenvectors of `H_x`; the basis is block diagonal by
//! parity. Amplitudes come from the spectral sum and, independently, from
//! time stepping (Crank-Nicolson in 1-D, Strang splitting in 2-D).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::{ActionSpec, Potential, Potential1D, TimeExtent};
use crate::tridiag::{SymTridiagonal, TridiagonalLu};

pub const DEFAULT_STATES_1D: usize = 64;
pub const DEFAULT_STATES_2D: usize = 128;
pub const DEFAULT_AXIS_MODES: usize = 48;
pub const LEAKAGE_THRESHOLD: f64 = 1e-8;
/// Relative weight below which omitted excited states are ignored.
pub const TRUNCATION_TOLERANCE: f64 = 1e-13;

/// Lowest 1-D eigenvectors of an axis Hamiltonian, tensored into a 2-D basis.
#[derive(Debug, Clone)]
pub struct ProductBasis {
    pub axis_energies: Vec<f64>,
    /// `interior x modes`, scaled so that `sum_i h phi_a(x_i)^2 = 1`.
    pub axis: DMatrix<f64>,
    /// `<a| x^2 |b>` on the grid.
    pub x2: DMatrix<f64>,
    pub coupling: f64,
    pub offset: f64,
}

impl ProductBasis {
    pub fn modes(&self) -> usize {
        self.axis_energies.len()
    }

    fn row(&self, interior_index: usize) -> DVector<f64> {
        self.axis.row(interior_index).transpose()
    }

    /// Coefficients of the grid delta `1/h^2` at the given interior node.
    fn delta(&self, ij: [usize; 2]) -> DMatrix<f64> {
        let u = self.row(ij[0]);
        let w = self.row(ij[1]);
        &u * w.transpose()
    }

    fn eval(&self, c: &DMatrix<f64>, ij: [usize; 2]) -> f64 {
        let u = self.row(ij[0]);
        let w = self.row(ij[1]);
        (u.transpose() * c * w)[(0, 0)]
    }

    /// Strang splitting `e^{-H0 dt/2} e^{-W dt} e^{-H0 dt/2}` with `H0`
    /// diagonal in the basis and `W = v22 X2 (x) X2` diagonal after rotating
    /// both factors into the eigenbasis of `X2`.
    fn strang(&self, start: &DMatrix<f64>, t: f64, steps: usize) -> DMatrix<f64> {
        let nb = self.modes();
        let dt = t / steps as f64;
        let eig = SymmetricEigen::new(self.x2.clone());
        let u = eig.eigenvectors;
        let lam = eig.eigenvalues;
        let half = DMatrix::from_fn(nb, nb, |a, b| {
            (-(self.axis_energies[a] + self.axis_energies[b] + self.offset) * dt / 2.0).exp()
        });
        let kick = DMatrix::from_fn(nb, nb, |a, b| (-dt * self.coupling * lam[a] * lam[b]).exp());
        let mut c = start.component_mul(&half);
        for step in 0..steps {
            let mut r = u.transpose() * &c * &u;
            r.component_mul_assign(&kick);
            c = &u * r * u.transpose();
            c.component_mul_assign(&half);
            if step + 1 < steps {
                c.component_mul_assign(&half);
            }
        }
        c
    }
}

#[derive(Debug, Clone)]
enum StateRepr {
    /// Grid vectors, `interior x k`, `sum h psi^2 = 1`.
    Line(DMatrix<f64>),
    /// Coefficients `modes^2 x k`, index `a * modes + b`.
    Product { basis: ProductBasis, coeffs: DMatrix<f64> },
}

/// Lowest eigenpairs of the grid Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub energies: Vec<f64>,
    pub grid: Grid,
    pub mass: f64,
    repr: StateRepr,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// Upper bound on the relative weight of states beyond the retained set
    /// at time `t`.
    pub fn truncation_bound(&self, t: f64) -> f64 {
        let top = match &self.repr {
            StateRepr::Line(_) => *self.energies.last().unwrap(),
            StateRepr::Product { basis, .. } => {
                (basis.axis_energies[0] + basis.axis_energies[basis.modes() - 1] + basis.offset)
                    .min(*self.energies.last().unwrap())
            }
        };
        (-(top - self.energies[0]) * t).exp()
    }

    fn interior(&self, node: &[usize]) -> Result<Vec<usize>> {
        let n = self.grid.n;
        if node.len() != self.grid.dimension || node.iter().any(|&i| i == 0 || i >= n - 1) {
            return Err(Error::OffGrid(node.iter().map(|&i| i as f64).collect()));
        }
        Ok(node.iter().map(|&i| i - 1).collect())
    }

    /// All retained eigenfunctions at one grid node.
    pub fn states_at(&self, node: &[usize]) -> Result<Vec<f64>> {
        let ij = self.interior(node)?;
        Ok(match &self.repr {
            StateRepr::Line(v) => v.row(ij[0]).iter().copied().collect(),
            StateRepr::Product { basis, coeffs } => {
                let u = basis.row(ij[0]);
                let w = basis.row(ij[1]);
                let nb = basis.modes();
                let kron = DVector::from_fn(nb * nb, |k, _| u[k / nb] * w[k % nb]);
                coeffs.tr_mul(&kron).iter().copied().collect()
            }
        })
    }

    /// Spectral sum `sum_n psi_n(fi) psi_n(in) e^{-E_n T}`.
    pub fn amplitude(&self, node_in: &[usize], node_fi: &[usize], t: f64) -> Result<f64> {
        let a = self.states_at(node_in)?;
        let b = if node_in == node_fi { a.clone() } else { self.states_at(node_fi)? };
        Ok(self.sum_states(&a, &b, t))
    }

    fn sum_states(&self, a: &[f64], b: &[f64], t: f64) -> f64 {
        let e0 = self.energies[0];
        // factor e^{-E0 T} out so the partial sums stay O(1)
        let s: f64 = self
            .energies
            .iter()
            .zip(a.iter().zip(b))
            .map(|(e, (x, y))| x * y * (-(e - e0) * t).exp())
            .sum();
        s * (-e0 * t).exp()
    }

    /// Ground state on the full grid (zeros on the Dirichlet nodes), positive
    /// at the origin. 2-D values are row-major with `x` as the row index.
    pub fn ground_profile(&self) -> Vec<f64> {
        let n = self.grid.n;
        match &self.repr {
            StateRepr::Line(v) => {
                let mut out = vec![0.0; n];
                for i in 0..n - 2 {
                    out[i + 1] = v[(i, 0)];
                }
                out
            }
            StateRepr::Product { basis, coeffs } => {
                let field = product_field(basis, coeffs.column(0).iter().copied().collect::<Vec<_>>().as_slice());
                let mut out = vec![0.0; n * n];
                for i in 0..n - 2 {
                    for j in 0..n - 2 {
                        out[(i + 1) * n + j + 1] = field[(i, j)];
                    }
                }
                out
            }
        }
    }

    /// `max |<m|n> - delta_mn|` with the `h^D` weighted inner product.
    pub fn orthonormality_residual(&self) -> f64 {
        match &self.repr {
            StateRepr::Line(v) => gram_residual(v, self.grid.spacing()),
            StateRepr::Product { basis, coeffs } => {
                gram_residual(&basis.axis, self.grid.spacing()).max(gram_residual(coeffs, 1.0))
            }
        }
    }

    pub fn product_basis(&self) -> Option<&ProductBasis> {
        match &self.repr {
            StateRepr::Product { basis, .. } => Some(basis),
            StateRepr::Line(_) => None,
        }
    }
}

fn gram_residual(v: &DMatrix<f64>, w: f64) -> f64 {
    let g = v.tr_mul(v) * w;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

fn product_field(basis: &ProductBasis, coeff: &[f64]) -> DMatrix<f64> {
    let nb = basis.modes();
    let c = DMatrix::from_fn(nb, nb, |a, b| coeff[a * nb + b]);
    &basis.axis * c * basis.axis.transpose()
}

/// Tridiagonal grid Hamiltonian of a 1-D potential on the interior nodes.
pub fn line_hamiltonian(mass: f64, potential: &Potential1D, grid: &Grid) -> SymTridiagonal {
    let h = grid.spacing();
    let kin = 1.0 / (2.0 * mass * h * h);
    let diag = (1..grid.n - 1).map(|i| 2.0 * kin + potential.eval(grid.coordinate(i))).collect();
    let off = vec![-kin; grid.n - 3];
    SymTridiagonal::new(diag, off)
}

fn line_states(mass: f64, potential: &Potential1D, grid: &Grid, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let ham = line_hamiltonian(mass, potential, grid);
    let (values, vectors) = ham.lowest_eigenpairs(k)?;
    let scale = 1.0 / grid.spacing().sqrt();
    let m = grid.interior();
    let mat = DMatrix::from_fn(m, k, |i, j| vectors[j][i] * scale);
    Ok((values, mat))
}

fn ensure_grid(spec: &ActionSpec, grid: &Grid) -> Result<()> {
    if spec.dimension() != grid.dimension {
        return Err(Error::Mismatch(format!(
            "{}-D action on a {}-D grid",
            spec.dimension(),
            grid.dimension
        )));
    }
    Ok(())
}

/// Lowest `k` eigenpairs (2-D: product basis with the default axis modes).
pub fn ground_state(spec: &ActionSpec, grid: &Grid, k: usize) -> Result<SpectralData> {
    ground_state_with_modes(spec, grid, k, DEFAULT_AXIS_MODES)
}

pub fn ground_state_with_modes(spec: &ActionSpec, grid: &Grid, k: usize, axis_modes: usize) -> Result<SpectralData> {
    ensure_grid(spec, grid)?;
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one state".into()));
    }
    let sd = match &spec.potential {
        Potential::OneD(p) => {
            let (energies, vectors) = line_states(spec.mass, p, grid, k.min(grid.interior()))?;
            SpectralData { energies, grid: *grid, mass: spec.mass, repr: StateRepr::Line(vectors) }
        }
        Potential::TwoD(p) => {
            let basis = product_basis(spec.mass, p.v0, p.v2, p.v4, p.v22, grid, axis_modes)?;
            let (energies, coeffs) = diagonalize_product(&basis, k)?;
            SpectralData { energies, grid: *grid, mass: spec.mass, repr: StateRepr::Product { basis, coeffs } }
        }
    };
    check_ground_state(&sd)?;
    Ok(sd)
}

fn check_ground_state(sd: &SpectralData) -> Result<()> {
    let psi = sd.ground_profile();
    let n = sd.grid.n;
    let edge: f64 = match sd.grid.dimension {
        1 => psi[1].abs().max(psi[n - 2].abs()),
        _ => (1..n - 1)
            .flat_map(|j| [psi[n + j], psi[(n - 2) * n + j], psi[j * n + 1], psi[j * n + n - 2]])
            .fold(0.0, |m: f64, v| m.max(v.abs())),
    };
    if edge > LEAKAGE_THRESHOLD {
        return Err(Error::BoundaryLeakage { magnitude: edge, threshold: LEAKAGE_THRESHOLD });
    }
    let peak = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(bad) = psi.iter().position(|&v| v < 0.0 && v.abs() > 1e-10 * peak) {
        return Err(Error::EigenSolver(format!("ground state changes sign at node {bad}")));
    }
    Ok(())
}

/// Axis eigenvectors of `-(1/2m) d^2 + v2 x^2 + v4 x^4` and the `x^2` matrix.
pub fn product_basis(
    mass: f64,
    v0: f64,
    v2: f64,
    v4: f64,
    v22: f64,
    grid: &Grid,
    modes: usize,
) -> Result<ProductBasis> {
    if modes < 2 || modes > grid.interior() {
        return Err(Error::InvalidParameter(format!("axis modes must be in [2, {}]", grid.interior())));
    }
    let axis_pot = Potential1D::from_coefficients([0.0, v2, v4, 0.0]);
    let (axis_energies, axis) = line_states(mass, &axis_pot, grid, modes)?;
    let h = grid.spacing();
    let xs: Vec<f64> = (1..grid.n - 1).map(|i| grid.coordinate(i)).collect();
    let weighted = DMatrix::from_fn(axis.nrows(), modes, |i, a| axis[(i, a)] * xs[i] * xs[i] * h);
    let x2 = axis.tr_mul(&weighted);
    let x2 = (&x2 + x2.transpose()) * 0.5;
    Ok(ProductBasis { axis_energies, axis, x2, coupling: v22, offset: v0 })
}

/// Diagonalize the coupled Hamiltonian in the four parity blocks and keep the
/// lowest `k` states.
fn diagonalize_product(basis: &ProductBasis, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let nb = basis.modes();
    let e = &basis.axis_energies;
    let mut states: Vec<(f64, Vec<f64>)> = Vec::new();
    for (pa, pb) in [(0usize, 0usize), (1, 1), (0, 1)] {
        let ia: Vec<usize> = (0..nb).filter(|a| a % 2 == pa).collect();
        let ib: Vec<usize> = (0..nb).filter(|b| b % 2 == pb).collect();
        let (na, nbb) = (ia.len(), ib.len());
        let dim = na * nbb;
        let h = DMatrix::from_fn(dim, dim, |r, c| {
            let (a, b) = (ia[r / nbb], ib[r % nbb]);
            let (a2, b2) = (ia[c / nbb], ib[c % nbb]);
            let mut v = basis.coupling * basis.x2[(a, a2)] * basis.x2[(b, b2)];
            if r == c {
                v += e[a] + e[b] + basis.offset;
            }
            v
        });
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::EigenSolver("parity block did not converge".into()))?;
        for s in 0..dim {
            let mut full = vec![0.0; nb * nb];
            let mut swapped = vec![0.0; nb * nb];
            for r in 0..dim {
                let (a, b) = (ia[r / nbb], ib[r % nbb]);
                full[a * nb + b] = eig.eigenvectors[(r, s)];
                swapped[b * nb + a] = eig.eigenvectors[(r, s)];
            }
            states.push((eig.eigenvalues[s], full));
            if pa != pb {
                states.push((eig.eigenvalues[s], swapped));
            }
        }
    }
    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    states.truncate(k.min(states.len()));
    let kept = states.len();
    let mut coeffs = DMatrix::zeros(nb * nb, kept);
    let mut energies = Vec::with_capacity(kept);
    for (s, (en, v)) in states.into_iter().enumerate() {
        // ground state positive at the origin, others by their largest coefficient
        let sign = if s == 0 {
            let c = basis.axis.nrows() / 2;
            let at_origin: f64 = v
                .iter()
                .enumerate()
                .map(|(i, x)| x * basis.axis[(c, i / nb)] * basis.axis[(c, i % nb)])
                .sum();
            at_origin.signum()
        } else {
            v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m }).signum()
        };
        for (i, x) in v.into_iter().enumerate() {
            coeffs[(i, s)] = sign * x;
        }
        energies.push(en);
    }
    Ok((energies, coeffs))
}

/// Ground-state radius: `<|x|>` in 1-D, `<r>` in 2-D.
pub fn bohr_radius(sd: &SpectralData) -> f64 {
    let psi = sd.ground_profile();
    let g = &sd.grid;
    let n = g.n;
    let xs = g.coordinates();
    match g.dimension {
        1 => psi.iter().zip(&xs).map(|(p, x)| p * p * x.abs()).sum::<f64>() * g.spacing(),
        _ => {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let p = psi[i * n + j];
                    s += p * p * xs[i].hypot(xs[j]);
                }
            }
            s * g.cell()
        }
    }
}

/// Richardson-refined 1-D ground state: combines grids `h` and `h/2` on the
/// shared nodes, removing the `O(h^2)` discretization error.
pub fn refined_ground_profile(spec: &ActionSpec, grid: &Grid) -> Result<Vec<f64>> {
    if grid.dimension != 1 {
        return Err(Error::Mismatch("refined profile is 1-D only".into()));
    }
    let coarse = ground_state(spec, grid, 1)?.ground_profile();
    let fine = ground_state(spec, &grid.refined(), 1)?.ground_profile();
    Ok(coarse.iter().enumerate().map(|(i, c)| (4.0 * fine[2 * i] - c) / 3.0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMethod {
    Spectral,
    Propagation,
}

/// `G(., T; x_in, 0)` on the full grid.
#[derive(Debug, Clone)]
pub struct AmplitudeField {
    pub grid: Grid,
    pub t: f64,
    /// Row-major for 2-D.
    pub values: Vec<f64>,
}

impl AmplitudeField {
    pub fn at(&self, node: &[usize]) -> f64 {
        match node.len() {
            1 => self.values[node[0]],
            _ => self.values[node[0] * self.grid.n + node[1]],
        }
    }
}

/// Default number of time steps for the propagators at time `t`.
pub fn default_steps(t: f64) -> usize {
    ((t / 0.01).ceil() as usize).max(64)
}

/// Euclidean kernel from a grid delta `1/h^D` at `x_in`.
pub fn transition_amplitude(
    spec: &ActionSpec,
    grid: &Grid,
    x_in: &[f64],
    t: TimeExtent,
    method: AmplitudeMethod,
) -> Result<AmplitudeField> {
    ensure_grid(spec, grid)?;
    let node = grid.node(x_in)?;
    let t = t.value();
    let values = match method {
        AmplitudeMethod::Spectral => {
            let sd = spectral_for(spec, grid, t, None)?;
            spectral_field(&sd, &node, t)?
        }
        AmplitudeMethod::Propagation => match &spec.potential {
            Potential::OneD(p) => {
                let psi = propagate_line(spec.mass, p, grid, node[0], t, default_steps(t))?;
                let mut out = vec![0.0; grid.n];
                out[1..grid.n - 1].copy_from_slice(&psi);
                out
            }
            Potential::TwoD(p) => {
                let basis = product_basis(spec.mass, p.v0, p.v2, p.v4, p.v22, grid, axis_modes_for(t))?;
                let c = propagate_product(&basis, [node[0] - 1, node[1] - 1], t, default_steps(t));
                let field = &basis.axis * c * basis.axis.transpose();
                let n = grid.n;
                let mut out = vec![0.0; n * n];
                for i in 0..n - 2 {
                    for j in 0..n - 2 {
                        out[(i + 1) * n + j + 1] = field[(i, j)];
                    }
                }
                out
            }
        },
    };
    let peak = values.iter().fold(0.0f64, |m, v| m.max(*v));
    if let Some(bad) = values.iter().position(|&v| v < 0.0 && v.abs() > 1e-12 * peak) {
        return Err(Error::NonPositiveAmplitude { node: bad, value: values[bad] });
    }
    Ok(AmplitudeField { grid: *grid, t, values })
}

fn spectral_field(sd: &SpectralData, node: &[usize], t: f64) -> Result<Vec<f64>> {
    let src = sd.states_at(node)?;
    let e0 = sd.energies[0];
    let w: Vec<f64> = sd
        .energies
        .iter()
        .zip(&src)
        .map(|(e, s)| s * (-(e - e0) * t).exp() * (-e0 * t).exp())
        .collect();
    let n = sd.grid.n;
    Ok(match &sd.repr {
        StateRepr::Line(v) => {
            let f = v * DVector::from_vec(w);
            let mut out = vec![0.0; n];
            for i in 0..n - 2 {
                out[i + 1] = f[i];
            }
            out
        }
        StateRepr::Product { basis, coeffs } => {
            let c = coeffs * DVector::from_vec(w);
            let field = product_field(basis, c.as_slice());
            let mut out = vec![0.0; n * n];
            for i in 0..n - 2 {
                for j in 0..n - 2 {
                    out[(i + 1) * n + j + 1] = field[(i, j)];
                }
            }
            out
        }
    })
}

/// Axis modes needed so that omitted product states are negligible at `t`.
pub fn axis_modes_for(t_min: f64) -> usize {
    let needed = (-TRUNCATION_TOLERANCE.ln() / t_min + 4.0).ceil() as usize;
    needed.clamp(DEFAULT_AXIS_MODES, 128)
}

/// Spectral data with enough states for amplitudes down to `t_min`.
pub fn spectral_for(spec: &ActionSpec, grid: &Grid, t_min: f64, states: Option<usize>) -> Result<SpectralData> {
    match spec.dimension() {
        1 => {
            let mut k = states.unwrap_or(DEFAULT_STATES_1D);
            loop {
                let sd = ground_state(spec, grid, k)?;
                if states.is_some() || sd.truncation_bound(t_min) < TRUNCATION_TOLERANCE || k >= grid.interior() {
                    return Ok(sd);
                }
                k = (2 * k).min(grid.interior());
            }
        }
        _ => {
            let modes = axis_modes_for(t_min);
            ground_state_with_modes(spec, grid, states.unwrap_or(modes * modes), modes)
        }
    }
}

/// Crank-Nicolson for `exp(-H t)` applied to the grid delta at `node`, with
/// four implicit-Euler half steps at the start to damp the stiff modes the
/// delta excites, and Richardson extrapolation over `steps` and `2 steps`.
pub fn propagate_line(
    mass: f64,
    potential: &Potential1D,
    grid: &Grid,
    node: usize,
    t: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    if node == 0 || node >= grid.n - 1 {
        return Err(Error::OffGrid(vec![grid.coordinate(node)]));
    }
    let ham = line_hamiltonian(mass, potential, grid);
    let run = |steps: usize| -> Vec<f64> {
        let dt = t / steps as f64;
        let mut psi = vec![0.0; grid.interior()];
        psi[node - 1] = 1.0 / grid.spacing();
        let euler = TridiagonalLu::factor(&ham.affine(1.0, dt / 2.0), f64::MIN_POSITIVE);
        for _ in 0..4 {
            euler.solve_in_place(&mut psi);
        }
        let implicit = TridiagonalLu::factor(&ham.affine(1.0, dt / 2.0), f64::MIN_POSITIVE);
        let explicit = ham.affine(1.0, -dt / 2.0);
        let mut tmp = vec![0.0; psi.len()];
        for _ in 2..steps {
            explicit.mul_vec(&psi, &mut tmp);
            implicit.solve_in_place(&mut tmp);
            std::mem::swap(&mut psi, &mut tmp);
        }
        psi
    };
    let coarse = run(steps);
    let fine = run(2 * steps);
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

/// Strang-split propagation of the grid delta at the interior node `ij` in
/// the product basis, Richardson extrapolated over `steps` and `2 steps`.
pub fn propagate_product(basis: &ProductBasis, ij: [usize; 2], t: f64, steps: usize) -> DMatrix<f64> {
    let start = basis.delta(ij);
    let coarse = basis.strang(&start, t, steps);
    let fine = basis.strang(&start, t, 2 * steps);
    (fine * 4.0 - coarse) / 3.0
}

/// Propagated amplitude between two nodes (independent of the spectral sum).
pub fn propagated_amplitude(sd: &SpectralData, spec: &ActionSpec, node_in: &[usize], node_fi: &[usize], t: f64) -> Result<f64> {
    match (&spec.potential, &sd.repr) {
        (Potential::OneD(p), _) => {
            let psi = propagate_line(spec.mass, p, &sd.grid, node_in[0], t, default_steps(t))?;
            Ok(psi[node_fi[0] - 1])
        }
        (Potential::TwoD(_), StateRepr::Product { basis, .. }) => {
            let src = [node_in[0] - 1, node_in[1] - 1];
            let c = propagate_product(basis, src, t, default_steps(t));
            Ok(basis.eval(&c, [node_fi[0] - 1, node_fi[1] - 1]))
        }
        _ => Err(Error::Mismatch("spectral data does not match the action".into())),
    }
}

/// One `(x_in, x_fi, T, G)` sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRecord {
    pub x_in: Vec<f64>,
    pub x_fi: Vec<f64>,
    pub t: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub grid: Grid,
    pub method: AmplitudeMethod,
    pub states: usize,
    pub axis_modes: Option<usize>,
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeTable {
    pub dimension: usize,
    pub records: Vec<AmplitudeRecord>,
    pub provenance: Option<Provenance>,
}

impl AmplitudeTable {
    pub fn temperatures(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.records.iter().map(|r| r.t).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    /// Records at one time extent.
    pub fn at_time(&self, t: f64) -> AmplitudeTable {
        AmplitudeTable {
            dimension: self.dimension,
            records: self.records.iter().filter(|r| r.t == t).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Largest relative asymmetry between `(a, b)` and `(b, a)` entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &self.records {
            if let Some(s) = self.records.iter().find(|s| s.t == r.t && s.x_in == r.x_fi && s.x_fi == r.x_in) {
                worst = worst.max((r.g - s.g).abs() / r.g.abs().max(s.g.abs()));
            }
        }
        worst
    }
}

/// Default boundary set: 11 points on `[-1.5, 1.5]` in 1-D, the 5x5 lattice on
/// `[-1.2, 1.2]^2` in 2-D.
pub fn default_boundary_set(dimension: usize) -> Vec<Vec<f64>> {
    if dimension == 1 {
        (-5..=5).map(|k| vec![0.3 * k as f64]).collect()
    } else {
        let axis: Vec<f64> = (-2..=2).map(|k| 0.6 * k as f64).collect();
        axis.iter().flat_map(|&x| axis.iter().map(move |&y| vec![x, y])).collect()
    }
}

/// Amplitudes for every unordered boundary pair at every time extent.
pub fn sample_amplitudes(
    spec: &ActionSpec,
    grid: &Grid,
    boundary: &[Vec<f64>],
    times: &[f64],
    method: AmplitudeMethod,
) -> Result<AmplitudeTable> {
    ensure_grid(spec, grid)?;
    if boundary.is_empty() {
        return Err(Error::InvalidParameter("empty boundary set".into()));
    }
    if times.is_empty() {
        return Err(Error::InvalidParameter("empty time list".into()));
    }
    for &t in times {
        TimeExtent::new(t)?;
    }
    let nodes: Vec<Vec<usize>> = boundary.iter().map(|p| grid.node(p)).collect::<Result<_>>()?;
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let sd = spectral_for(spec, grid, t_min, None)?;

    let mut jobs = Vec::new();
    for &t in times {
        for i in 0..nodes.len() {
            for j in i..nodes.len() {
                jobs.push((i, j, t));
            }
        }
    }
    let states: Vec<Vec<f64>> = nodes.iter().map(|n| sd.states_at(n)).collect::<Result<_>>()?;
    let records = jobs
        .par_iter()
        .map(|&(i, j, t)| {
            let g = match method {
                AmplitudeMethod::Spectral => sd.sum_states(&states[i], &states[j], t),
                AmplitudeMethod::Propagation => propagated_amplitude(&sd, spec, &nodes[i], &nodes[j], t)?,
            };
            if !(g > 0.0) {
                return Err(Error::NonPositiveAmplitude { node: i, value: g });
            }
            Ok(AmplitudeRecord { x_in: boundary[i].clone(), x_fi: boundary[j].clone(), t, g })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AmplitudeTable {
        dimension: spec.dimension(),
        records,
        provenance: Some(Provenance {
            grid: *grid,
            method,
            states: sd.len(),
            axis_modes: sd.product_basis().map(ProductBasis::modes),
            truncation_bound: sd.truncation_bound(t_min),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn harmonic_1d() -> ActionSpec {
        ActionSpec::one_d(1.0, 0.0, 0.5, 0.0, 0.0).unwrap()
    }

    fn mehler(x: f64, y: f64, t: f64) -> f64 {
        let s = t.sinh();
        (1.0 / (2.0 * PI * s)).sqrt() * (-((x * x + y * y) * t.cosh() - 2.0 * x * y) / (2.0 * s)).exp()
    }

    #[test]
    fn harmonic_ground_energy() {
        let g = Grid::new(1, 8.0, 2001).unwrap();
        let sd = ground_state(&harmonic_1d(), &g, 4).unwrap();
        assert!((sd.ground_energy() - 0.5).abs() < 1e-5);
        assert!((sd.energies[1] - 1.5).abs() < 1e-4);
        assert!(sd.orthonormality_residual() < 1e-8);
    }

    #[test]
    fn harmonic_kernel_is_mehler() {
        let g = Grid::new(1, 8.0, 3201).unwrap();
        let spec = harmonic_1d();
        let field = transition_amplitude(&spec, &g, &[0.5], TimeExtent::new(1.5).unwrap(), AmplitudeMethod::Spectral).unwrap();
        for x in [-1.0, 0.0, 0.5, 1.25] {
            let i = g.axis_index(x).unwrap();
            assert_relative_eq!(field.values[i], mehler(x, 0.5, 1.5), max_relative = 1e-5);
        }
    }

    #[test]
    fn free_kernel_at_short_times() {
        // no potential in the bulk; a weak confinement only keeps the grid finite
        let spec = ActionSpec::one_d(1.0, 0.0, 1e-6, 0.0, 0.0).unwrap();
        let g = Grid::new(1, 6.0, 2401).unwrap();
        let t = 0.05;
        let psi = propagate_line(1.0, &Potential1D::from_coefficients(spec.coefficients()), &g, g.center(), t, 400).unwrap();
        for x in [0.0, 0.1, 0.3] {
            let i = g.axis_index(x).unwrap();
            let free = (1.0 / (2.0 * PI * t)).sqrt() * (-x * x / (2.0 * t)).exp();
            assert_relative_eq!(psi[i - 1], free, max_relative = 1e-3);
        }
    }

    #[test]
    fn rejects_leaking_grid_and_mismatched_inputs() {
        let small = Grid::new(1, 2.0, 201).unwrap();
        assert!(matches!(
            ground_state(&ActionSpec::quartic_1d(), &small, 2),
            Err(Error::BoundaryLeakage { .. })
        ));
        let g2 = Grid::default_2d();
        assert!(ground_state(&ActionSpec::quartic_1d(), &g2, 2).is_err());
        assert!(sample_amplitudes(&ActionSpec::quartic_1d(), &Grid::default_1d(), &[], &[1.0], AmplitudeMethod::Spectral).is_err());
        assert!(sample_amplitudes(&ActionSpec::quartic_1d(), &Grid::default_1d(), &[vec![0.01]], &[1.0], AmplitudeMethod::Spectral).is_err());
    }

    #[test]
    fn one_d_moments() {
        let g = Grid::new(1, 8.0, 2001).unwrap();
        let sd = ground_state(&harmonic_1d(), &g, 1).unwrap();
        assert!((bohr_radius(&sd) - 1.0 / PI.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn isotropic_harmonic_2d() {
        let spec = ActionSpec::two_d(1.0, 0.0, 0.5, 0.0, 0.0).unwrap();
        let g = Grid::new(2, 7.0, 281).unwrap();
        let sd = ground_state_with_modes(&spec, &g, 6, 12).unwrap();
        assert!((sd.ground_energy() - 1.0).abs() < 1e-3);
        assert!((sd.energies[1] - 2.0).abs() < 2e-3 && (sd.energies[2] - 2.0).abs() < 2e-3);
        assert!((bohr_radius(&sd) - PI.sqrt() / 2.0).abs() < 1e-3);
        assert!(sd.orthonormality_residual() < 1e-8);
    }

    #[test]
    fn counts_unordered_pairs() {
        let t = sample_amplitudes(
            &ActionSpec::quartic_1d(),
            &Grid::default_1d(),
            &default_boundary_set(1),
            &[4.5],
            AmplitudeMethod::Spectral,
        )
        .unwrap();
        assert_eq!(t.records.len(), 66);
        assert!(t.records.iter().all(|r| r.g > 0.0));
    }
}

//! Real-time flow of `H = (px^2 + py^2) / 2m + V(x, y)` and Poincaré
//! sections on the plane `y = 0, py > 0`.
//!
//! Trajectories are advanced with classical RK4. When `y` changes sign from
//! negative to non-negative, one RK4 step with `y` as the independent
//! variable and step `-y` lands the state on the plane (Henon's trick).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{ActionSpec, Potential, Potential2D};

pub const SECTION_PLANE: &str = "y=0,py>0";
pub const DEFAULT_SEEDS: usize = 24;
pub const DEFAULT_RNG_SEED: u64 = 1998;
pub const DEFAULT_DRIFT_BOUND: f64 = 1e-8;
pub const DEFAULT_MAX_CROSSINGS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
    pub t: f64,
}

impl PhaseState {
    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.px, self.py, self.t].iter().all(|v| v.is_finite())
    }
}

fn planar(spec: &ActionSpec) -> Result<(f64, Potential2D)> {
    match spec.potential {
        Potential::TwoD(p) => Ok((spec.mass, p)),
        Potential::OneD(_) => Err(Error::Mismatch("Poincaré sections need a 2-D action".into())),
    }
}

pub fn hamiltonian(spec: &ActionSpec, s: &PhaseState) -> f64 {
    let (x, y) = (s.x, s.y);
    (s.px * s.px + s.py * s.py) / (2.0 * spec.mass) + spec.eval(&[x, y])
}

/// Energy carried by the x-mode, `px^2 / 2m + V(x, 0)`; conserved when `v22 = 0`.
pub fn mode_energy(spec: &ActionSpec, x: f64, px: f64) -> f64 {
    px * px / (2.0 * spec.mass) + spec.eval(&[x, 0.0])
}

#[inline]
fn rates(m: f64, p: &Potential2D, s: [f64; 4]) -> [f64; 4] {
    let g = p.grad(s[0], s[1]);
    [s[2] / m, s[3] / m, -g[0], -g[1]]
}

#[inline]
fn rk4(m: f64, p: &Potential2D, s: [f64; 4], dt: f64) -> [f64; 4] {
    let add = |a: [f64; 4], k: [f64; 4], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]];
    let k1 = rates(m, p, s);
    let k2 = rates(m, p, add(s, k1, 0.5 * dt));
    let k3 = rates(m, p, add(s, k2, 0.5 * dt));
    let k4 = rates(m, p, add(s, k3, dt));
    let mut out = s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// One RK4 step of Hamilton's equations.
pub fn flow_step(spec: &ActionSpec, s: &PhaseState, dt: f64) -> Result<PhaseState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0 (got {dt})")));
    }
    let (m, p) = planar(spec)?;
    let [x, y, px, py] = rk4(m, &p, [s.x, s.y, s.px, s.py], dt);
    let next = PhaseState { x, y, px, py, t: s.t + dt };
    if !next.is_finite() {
        return Err(Error::BlowUp(next.t));
    }
    Ok(next)
}

/// Henon step: advance `(x, px, py, t)` in `y` by `h`, landing on `y + h`.
fn henon_step(m: f64, p: &Potential2D, s: &PhaseState, h: f64) -> PhaseState {
    // d(x, px, py, t)/dy = (px/m, -dV/dx, -dV/dy, 1) * m / py
    let f = |y: f64, u: [f64; 4]| {
        let g = p.grad(u[0], y);
        let inv = m / u[2];
        [u[1] / m * inv, -g[0] * inv, -g[1] * inv, inv]
    };
    let add = |a: [f64; 4], k: [f64; 4], c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2], a[3] + c * k[3]];
    let u = [s.x, s.px, s.py, s.t];
    let k1 = f(s.y, u);
    let k2 = f(s.y + 0.5 * h, add(u, k1, 0.5 * h));
    let k3 = f(s.y + 0.5 * h, add(u, k2, 0.5 * h));
    let k4 = f(s.y + h, add(u, k3, h));
    let mut v = u;
    for i in 0..4 {
        v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    PhaseState { x: v[0], y: s.y + h, px: v[1], py: v[2], t: v[3] }
}

/// States on the plane with `py = +sqrt(2m(E - V(x, 0)) - px^2)`.
pub fn seed_on_shell(spec: &ActionSpec, energy: f64, xs: &[f64], pxs: &[f64]) -> Result<Vec<PhaseState>> {
    let (m, _) = planar(spec)?;
    if xs.len() != pxs.len() {
        return Err(Error::Mismatch("x and px seed lists differ in length".into()));
    }
    xs.iter()
        .zip(pxs)
        .map(|(&x, &px)| {
            let budget = 2.0 * m * (energy - spec.eval(&[x, 0.0])) - px * px;
            // rounding at a turning point is not a deficit
            if budget < -1e-12 * (2.0 * m * energy.abs()).max(1.0) {
                return Err(Error::OffShell { deficit: -budget / (2.0 * m) });
            }
            Ok(PhaseState { x, y: 0.0, px, py: budget.max(0.0).sqrt(), t: 0.0 })
        })
        .collect()
}

/// Step size `1e-3 sqrt(10 / (E - v0))`, i.e. `1e-3` at a kinetic budget of 10.
pub fn default_dt(spec: &ActionSpec, energy: f64) -> f64 {
    1e-3 * (10.0 / (energy - spec.v0())).sqrt()
}

/// Half-width of the allowed `x` interval on the plane at `px = 0`.
pub fn turning_point(spec: &ActionSpec, energy: f64) -> Result<f64> {
    let (_, p) = planar(spec)?;
    let budget = energy - p.v0;
    if !(budget > 0.0) {
        return Err(Error::InvalidParameter(format!("energy {energy} is below V(0, 0) = {}", p.v0)));
    }
    // v2 s + v4 s^2 = budget on s = x^2
    let s = if p.v4.abs() < 1e-14 {
        budget / p.v2
    } else {
        let disc = p.v2 * p.v2 + 4.0 * p.v4 * budget;
        if disc < 0.0 {
            return Err(Error::NotConfining(format!("no turning point on the x-axis at E = {energy}")));
        }
        2.0 * budget / (p.v2 + disc.sqrt())
    };
    Ok(s.sqrt())
}

/// Half the seeds on the `px = 0` axis at `x_k = x_max k / (n + 1)`, the
/// rest uniform over the allowed oval from a ChaCha8 stream.
pub fn default_seeds(spec: &ActionSpec, energy: f64, count: usize, rng_seed: u64) -> Result<Vec<[f64; 2]>> {
    let x_max = turning_point(spec, energy)?;
    let p_max = (2.0 * spec.mass * (energy - spec.v0())).sqrt();
    let on_axis = count / 2;
    let mut seeds: Vec<[f64; 2]> = (1..=on_axis).map(|k| [x_max * k as f64 / (on_axis + 1) as f64, 0.0]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    while seeds.len() < count {
        let x = rng.gen_range(-x_max..x_max);
        let px = rng.gen_range(-p_max..p_max);
        if px * px / (2.0 * spec.mass) + spec.eval(&[x, 0.0]) < energy {
            seeds.push([x, px]);
        }
    }
    Ok(seeds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionConfig {
    pub spec: ActionSpec,
    pub energy: f64,
    pub seeds: Vec<[f64; 2]>,
    pub dt: f64,
    pub max_crossings: usize,
    pub max_time: f64,
    pub drift_bound: f64,
}

impl SectionConfig {
    /// Default seeding, step size and run length for `energy`.
    pub fn new(spec: ActionSpec, energy: f64, rng_seed: u64) -> Result<Self> {
        let seeds = default_seeds(&spec, energy, DEFAULT_SEEDS, rng_seed)?;
        Ok(Self {
            spec,
            energy,
            seeds,
            dt: default_dt(&spec, energy),
            max_crossings: DEFAULT_MAX_CROSSINGS,
            max_time: 4000.0,
            drift_bound: DEFAULT_DRIFT_BOUND,
        })
    }

    pub fn with_seeds(mut self, seeds: Vec<[f64; 2]>) -> Self {
        self.seeds = seeds;
        self
    }

    /// Every seed shifted by `delta` in both coordinates.
    pub fn perturbed(&self, delta: f64) -> Self {
        let seeds = self.seeds.iter().map(|s| [s[0] + delta, s[1] + delta]).collect();
        Self { seeds, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        planar(&self.spec)?;
        if !(self.energy > self.spec.v0()) {
            return Err(Error::InvalidParameter(format!("energy must exceed V(0, 0) = {}", self.spec.v0())));
        }
        if !(self.dt > 0.0) || !(self.max_time > 0.0) || self.max_crossings == 0 {
            return Err(Error::InvalidParameter("dt, max_time and max_crossings must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("no seeds".into()));
        }
        let (xs, pxs): (Vec<f64>, Vec<f64>) = self.seeds.iter().map(|s| (s[0], s[1])).unzip();
        seed_on_shell(&self.spec, self.energy, &xs, &pxs).map(|_| ())
    }
}

/// A recorded crossing; `py` is the integrated momentum, not a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub x: f64,
    pub px: f64,
    pub py: f64,
    pub y: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed_id: usize,
    pub seed: [f64; 2],
    pub crossings: Vec<Crossing>,
    /// Largest `|H - E| / E` seen at any step.
    pub max_drift: f64,
    pub tangencies: usize,
    pub steps: u64,
    /// Error kind when the run was aborted.
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSection {
    pub plane: String,
    pub config: SectionConfig,
    pub runs: Vec<SeedRun>,
}

impl PoincareSection {
    pub fn energy(&self) -> f64 {
        self.config.energy
    }

    pub fn max_drift(&self) -> f64 {
        self.runs.iter().map(|r| r.max_drift).fold(0.0, f64::max)
    }

    pub fn total_crossings(&self) -> usize {
        self.runs.iter().map(|r| r.crossings.len()).sum()
    }

    pub fn aborted(&self) -> usize {
        self.runs.iter().filter(|r| r.aborted.is_some()).count()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.runs.iter().flat_map(|r| r.crossings.iter().map(|c| [c.x, c.px])).collect()
    }

    /// Largest `(max - min) / E` of the x-mode energy over any seed's crossings.
    pub fn mode_energy_spread(&self) -> f64 {
        let spec = &self.config.spec;
        self.runs
            .iter()
            .filter(|r| !r.crossings.is_empty())
            .map(|r| {
                let (lo, hi) = r.crossings.iter().map(|c| mode_energy(spec, c.x, c.px)).fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), e| (lo.min(e), hi.max(e)),
                );
                (hi - lo) / self.config.energy
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|H - E| / E` over recorded crossings.
    pub fn crossing_shell_defect(&self) -> f64 {
        let spec = &self.config.spec;
        let e = self.config.energy;
        self.runs
            .iter()
            .flat_map(|r| r.crossings.iter())
            .map(|c| (hamiltonian(spec, &PhaseState { x: c.x, y: c.y, px: c.px, py: c.py, t: c.t }) - e).abs() / e)
            .fold(0.0, f64::max)
    }
}

fn run_seed(cfg: &SectionConfig, m: f64, p: &Potential2D, seed_id: usize, start: PhaseState) -> SeedRun {
    let e = cfg.energy;
    let p_scale = (2.0 * m * (e - p.v0)).sqrt();
    let mut run = SeedRun {
        seed_id,
        seed: [start.x, start.px],
        crossings: Vec::new(),
        max_drift: 0.0,
        tangencies: 0,
        steps: 0,
        aborted: None,
    };
    let mut s = [start.x, start.y, start.px, start.py];
    let mut t = 0.0;
    while run.crossings.len() < cfg.max_crossings && t < cfg.max_time {
        let next = rk4(m, p, s, cfg.dt);
        t += cfg.dt;
        run.steps += 1;
        let state = PhaseState { x: next[0], y: next[1], px: next[2], py: next[3], t };
        if !state.is_finite() {
            run.aborted = Some(Error::BlowUp(t).kind().to_string());
            break;
        }
        let drift = ((next[2] * next[2] + next[3] * next[3]) / (2.0 * m) + p.eval(next[0], next[1]) - e).abs() / e;
        run.max_drift = run.max_drift.max(drift);
        if drift > cfg.drift_bound {
            run.aborted = Some(Error::EnergyDrift { drift, bound: cfg.drift_bound }.kind().to_string());
            break;
        }
        if s[1] < 0.0 && next[1] >= 0.0 {
            if next[3] <= 1e-8 * p_scale {
                run.tangencies += 1;
            } else {
                let landed = if next[1] == 0.0 { state } else { henon_step(m, p, &state, -next[1]) };
                if landed.py > 0.0 && landed.is_finite() {
                    run.crossings.push(Crossing { x: landed.x, px: landed.px, py: landed.py, y: landed.y, t: landed.t });
                } else {
                    run.tangencies += 1;
                }
            }
        }
        s = next;
    }
    run
}

/// Integrates every seed (in parallel, merged in seed order).
pub fn compute_section(cfg: &SectionConfig) -> Result<PoincareSection> {
    cfg.validate()?;
    let (m, p) = planar(&cfg.spec)?;
    let (xs, pxs): (Vec<f64>, Vec<f64>) = cfg.seeds.iter().map(|s| (s[0], s[1])).unzip();
    let starts = seed_on_shell(&cfg.spec, cfg.energy, &xs, &pxs)?;
    let runs = starts.into_par_iter().enumerate().map(|(i, s)| run_seed(cfg, m, &p, i, s)).collect();
    Ok(PoincareSection { plane: SECTION_PLANE.to_string(), config: cfg.clone(), runs })
}

/// Local dimensionality of one seed's crossing cloud: for each point, the
/// ratio of the small to the large eigenvalue of the covariance of its
/// `k` nearest neighbours. Points on a smooth invariant curve give ratios
/// near zero; area-filling (chaotic) clouds give ratios of order one.
pub fn local_flatness(points: &[[f64; 2]], scale: [f64; 2], k: usize) -> Vec<f64> {
    let n = points.len();
    if n <= k {
        return Vec::new();
    }
    let q: Vec<[f64; 2]> = points.iter().map(|p| [p[0] / scale[0], p[1] / scale[1]]).collect();
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .map(|j| ((q[i][0] - q[j][0]).powi(2) + (q[i][1] - q[j][1]).powi(2), j))
                .collect();
            d.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0));
            let nb = &d[..=k];
            let (mut mx, mut my) = (0.0, 0.0);
            for &(_, j) in nb {
                mx += q[j][0];
                my += q[j][1];
            }
            let c = nb.len() as f64;
            mx /= c;
            my /= c;
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for &(_, j) in nb {
                let (a, b) = (q[j][0] - mx, q[j][1] - my);
                sxx += a * a;
                sxy += a * b;
                syy += b * b;
            }
            let tr = sxx + syy;
            let det = sxx * syy - sxy * sxy;
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            let (hi, lo) = (0.5 * tr + disc, 0.5 * tr - disc);
            // coincident crossings (a periodic orbit) carry no area
            if hi > 1e-18 * c {
                lo.max(0.0) / hi
            } else {
                0.0
            }
        })
        .collect()
}

pub const FLATNESS_THRESHOLD: f64 = 0.1;
pub const FLATNESS_NEIGHBOURS: usize = 10;

/// Fraction of crossings in area-filling neighbourhoods; neighbours are
/// taken within each seed's own crossings.
pub fn chaos_indicator(section: &PoincareSection) -> f64 {
    let e = section.config.energy;
    let spec = &section.config.spec;
    let scale = [
        turning_point(spec, e).unwrap_or(1.0),
        (2.0 * spec.mass * (e - spec.v0())).max(f64::MIN_POSITIVE).sqrt(),
    ];
    let ratios: Vec<Vec<f64>> = section
        .runs
        .par_iter()
        .map(|r| {
            let pts: Vec<[f64; 2]> = r.crossings.iter().map(|c| [c.x, c.px]).collect();
            local_flatness(&pts, scale, FLATNESS_NEIGHBOURS)
        })
        .collect();
    let total: usize = ratios.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    let scattered = ratios.iter().flatten().filter(|&&r| r > FLATNESS_THRESHOLD).count();
    scattered as f64 / total as f64
}

pub const OCCUPANCY_BINS: usize = 64;
pub const INTEGRABLE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionComparison {
    pub energy: f64,
    pub plane: String,
    /// Symmetric mean nearest-neighbour distance between the two clouds.
    pub distance: f64,
    pub counts_a: Vec<usize>,
    pub counts_b: Vec<usize>,
    /// `[x_min, x_max, px_min, px_max]` shared by both grids.
    pub bounds: [f64; 4],
    pub occupancy_a: Vec<Vec<u32>>,
    pub occupancy_b: Vec<Vec<u32>>,
    pub mode_energy_spread_a: f64,
    pub mode_energy_spread_b: f64,
    pub chaos_a: f64,
    pub chaos_b: f64,
    /// Both sections lie on per-seed closed curves of constant x-mode energy.
    pub integrable: bool,
}

fn mean_nearest(from: &[[f64; 2]], to: &[[f64; 2]]) -> f64 {
    let sum: f64 = from
        .par_iter()
        .map(|a| to.iter().map(|b| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).fold(f64::INFINITY, f64::min).sqrt())
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    sum / from.len() as f64
}

pub fn section_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    0.5 * (mean_nearest(a, b) + mean_nearest(b, a))
}

fn occupancy(points: &[[f64; 2]], bounds: [f64; 4], bins: usize) -> Vec<Vec<u32>> {
    let mut grid = vec![vec![0u32; bins]; bins];
    let wx = (bounds[1] - bounds[0]).max(f64::MIN_POSITIVE);
    let wp = (bounds[3] - bounds[2]).max(f64::MIN_POSITIVE);
    for p in points {
        let i = (((p[0] - bounds[0]) / wx * bins as f64) as usize).min(bins - 1);
        let j = (((p[1] - bounds[2]) / wp * bins as f64) as usize).min(bins - 1);
        grid[j][i] += 1;
    }
    grid
}

pub fn compare_sections(a: &PoincareSection, b: &PoincareSection) -> Result<SectionComparison> {
    if (a.energy() - b.energy()).abs() > 1e-12 * a.energy().abs().max(1.0) || a.plane != b.plane {
        return Err(Error::Mismatch("sections differ in energy or plane".into()));
    }
    let (pa, pb) = (a.points(), b.points());
    let mut bounds = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in pa.iter().chain(&pb) {
        bounds = [bounds[0].min(p[0]), bounds[1].max(p[0]), bounds[2].min(p[1]), bounds[3].max(p[1])];
    }
    if pa.is_empty() && pb.is_empty() {
        bounds = [0.0; 4];
    }
    let (sa, sb) = (a.mode_energy_spread(), b.mode_energy_spread());
    Ok(SectionComparison {
        energy: a.energy(),
        plane: a.plane.clone(),
        distance: section_distance(&pa, &pb),
        counts_a: a.runs.iter().map(|r| r.crossings.len()).collect(),
        counts_b: b.runs.iter().map(|r| r.crossings.len()).collect(),
        bounds,
        occupancy_a: occupancy(&pa, bounds, OCCUPANCY_BINS),
        occupancy_b: occupancy(&pb, bounds, OCCUPANCY_BINS),
        mode_energy_spread_a: sa,
        mode_energy_spread_b: sb,
        chaos_a: chaos_indicator(a),
        chaos_b: chaos_indicator(b),
        integrable: sa < INTEGRABLE_TOLERANCE && sb < INTEGRABLE_TOLERANCE && !pa.is_empty() && !pb.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decoupled() -> ActionSpec {
        ActionSpec::two_d(1.0, 0.0, 0.5, 0.0, 0.0).unwrap()
    }

    #[test]
    fn rk4_step_matches_harmonic_solution() {
        let s = PhaseState { x: 0.7, y: -0.2, px: 0.3, py: 1.1, t: 0.0 };
        for dt in [0.1, 0.05] {
            let n = flow_step(&decoupled(), &s, dt).unwrap();
            let ex = 0.7 * dt.cos() + 0.3 * dt.sin();
            let ey = -0.2 * dt.cos() + 1.1 * dt.sin();
            assert!((n.x - ex).abs() < dt.powi(5) && (n.y - ey).abs() < dt.powi(5));
        }
        assert!(flow_step(&decoupled(), &s, 0.0).is_err());
        assert!(flow_step(&ActionSpec::quartic_1d(), &s, 0.1).is_err());
    }

    #[test]
    fn step_level_time_reversal() {
        let spec = ActionSpec::pullen_edmonds();
        let s = PhaseState { x: 1.3, y: -0.4, px: 2.0, py: -1.0, t: 0.0 };
        let dt = 0.01;
        let f = flow_step(&spec, &s, dt).unwrap();
        let back = flow_step(&spec, &PhaseState { px: -f.px, py: -f.py, ..f }, dt).unwrap();
        assert!((back.x - s.x).abs() < 1e-8 && (back.y - s.y).abs() < 1e-8);
    }

    #[test]
    fn seeds_sit_on_the_shell() {
        let spec = ActionSpec::pullen_edmonds();
        let s = seed_on_shell(&spec, 10.0, &[0.0], &[0.0]).unwrap();
        assert_eq!(s[0].py, 20f64.sqrt());
        let edge = turning_point(&spec, 10.0).unwrap();
        let s = seed_on_shell(&spec, 10.0, &[edge], &[0.0]).unwrap();
        assert!(s[0].py.abs() < 1e-7);
        assert!(matches!(seed_on_shell(&spec, 10.0, &[5.0], &[0.0]), Err(Error::OffShell { .. })));
        let seeds = default_seeds(&spec, 50.0, 20, 3).unwrap();
        let (xs, ps): (Vec<f64>, Vec<f64>) = seeds.iter().map(|s| (s[0], s[1])).unzip();
        for st in seed_on_shell(&spec, 50.0, &xs, &ps).unwrap() {
            assert!((hamiltonian(&spec, &st) - 50.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_sections_are_closed_curves() {
        let mut cfg = SectionConfig::new(decoupled(), 10.0, 5).unwrap();
        cfg.max_crossings = 60;
        cfg.seeds.truncate(6);
        let sec = compute_section(&cfg).unwrap();
        assert_eq!(sec.aborted(), 0);
        assert!(sec.runs.iter().all(|r| r.crossings.len() == 60));
        assert!(sec.mode_energy_spread() < 1e-8, "{}", sec.mode_energy_spread());
        assert!(sec.max_drift() < 1e-8);
        for r in &sec.runs {
            for c in &r.crossings {
                assert!(c.y.abs() < 1e-10 && c.py > 0.0);
            }
        }
        assert!(sec.crossing_shell_defect() < 1e-8);
        let cmp = compare_sections(&sec, &sec).unwrap();
        assert_eq!(cmp.distance, 0.0);
        assert!(cmp.integrable);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut cfg = SectionConfig::new(ActionSpec::pullen_edmonds(), 20.0, 9).unwrap();
        cfg.max_crossings = 30;
        let a = compute_section(&cfg).unwrap();
        let b = compute_section(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.energy = 21.0;
        other.seeds = vec![[0.0, 0.0]];
        assert!(compare_sections(&a, &compute_section(&other).unwrap()).is_err());
    }

    #[test]
    fn flatness_separates_curves_from_clouds() {
        let circle: Vec<[f64; 2]> = (0..300).map(|k| {
            let a = k as f64 * 2.399963;
            [a.cos(), a.sin()]
        }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cloud: Vec<[f64; 2]> = (0..300).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let c = local_flatness(&circle, [1.0, 1.0], 10);
        let d = local_flatness(&cloud, [1.0, 1.0], 10);
        assert!(c.iter().all(|&r| r < 0.05));
        let filled = d.iter().filter(|&&r| r > FLATNESS_THRESHOLD).count();
        assert!(filled > 200, "{filled}");
        let fixed = vec![[0.3, -0.2]; 40];
        assert!(local_flatness(&fixed, [1.0, 1.0], 10).iter().all(|&r| r == 0.0));
    }
}

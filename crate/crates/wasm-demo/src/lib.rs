//! Browser demo: three library operations behind `wasm-bindgen`. Every
//! export returns a flat `Float64Array`; the page in `www/` draws it.

use qaction::analytic::reconstruct_wavefunction_1d;
use qaction::chaos::{compute_section, default_seeds, SectionConfig};
use qaction::trajectory::{solve_bvp, BvpProblem};
use qaction::{ActionSpec, Grid, TimeExtent};
use wasm_bindgen::prelude::*;

fn js_err(e: qaction::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Crossings `[x0, px0, x1, px1, ...]` of `V = v2 (x^2 + y^2) + v22 x^2 y^2 + v4 (x^4 + y^4)`.
pub fn section_points(v2: f64, v22: f64, v4: f64, energy: f64, seeds: usize, crossings: usize) -> qaction::Result<Vec<f64>> {
    let spec = ActionSpec::two_d(1.0, 0.0, v2, v22, v4)?;
    let mut cfg = SectionConfig::new(spec, energy, qaction::chaos::DEFAULT_RNG_SEED)?;
    cfg.seeds = default_seeds(&spec, energy, seeds.max(1), qaction::chaos::DEFAULT_RNG_SEED)?;
    cfg.max_crossings = crossings.max(1);
    Ok(compute_section(&cfg)?.points().into_iter().flatten().collect())
}

/// `[x0, psi0, x1, psi1, ...]` of the ground state built from a 1-D quantum action.
pub fn wavefunction_points(mass: f64, v2: f64, v4: f64, v6: f64, half_extent: f64, n: usize) -> qaction::Result<Vec<f64>> {
    let spec = ActionSpec::quartic_1d().with_parameters(mass, [0.0, v2, v4, v6]);
    let grid = Grid::new(1, half_extent, n | 1)?;
    let p = reconstruct_wavefunction_1d(&spec, &grid)?;
    Ok(p.points.iter().zip(&p.values).flat_map(|(x, v)| [x[0], *v]).collect())
}

/// `[t0, x0, t1, x1, ...]` of the Euclidean extremal from `x_in` to `x_fi` over `t`.
pub fn path_points(mass: f64, v2: f64, v4: f64, x_in: f64, x_fi: f64, t: f64, n: usize) -> qaction::Result<Vec<f64>> {
    let spec = ActionSpec::one_d(mass, 0.0, v2, v4, 0.0)?;
    let p = BvpProblem::new(spec, vec![x_in], vec![x_fi], TimeExtent::new(t)?, n.max(qaction::trajectory::MIN_STEPS))?;
    let sol = solve_bvp(&p)?;
    Ok(sol.path.iter().enumerate().flat_map(|(i, x)| [i as f64 * sol.dt, x[0]]).collect())
}

#[wasm_bindgen]
pub fn poincare_section(v2: f64, v22: f64, v4: f64, energy: f64, seeds: usize, crossings: usize) -> Result<Vec<f64>, JsValue> {
    section_points(v2, v22, v4, energy, seeds, crossings).map_err(js_err)
}

#[wasm_bindgen]
pub fn ground_state(mass: f64, v2: f64, v4: f64, v6: f64, half_extent: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    wavefunction_points(mass, v2, v4, v6, half_extent, n).map_err(js_err)
}

#[wasm_bindgen]
pub fn euclidean_path(mass: f64, v2: f64, v4: f64, x_in: f64, x_fi: f64, t: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    path_points(mass, v2, v4, x_in, x_fi, t, n).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exports_produce_pairs() {
        let s = section_points(0.5, 0.05, 0.0, 20.0, 3, 10).unwrap();
        assert_eq!(s.len(), 2 * 3 * 10);
        let w = wavefunction_points(1.0, 0.5, 0.0, 0.0, 6.0, 201).unwrap();
        assert_eq!(w.len(), 2 * 201);
        let p = path_points(1.0, 0.5, 0.0, -1.0, 1.0, 2.0, 64).unwrap();
        assert_eq!((p[1], p[p.len() - 1]), (-1.0, 1.0));
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(section_points(-0.5, 0.05, 0.0, 20.0, 3, 10).is_err());
        assert!(wavefunction_points(1.0, 0.5, 0.0, 0.0, 6.0, 10).is_err());
        assert!(path_points(1.0, 0.5, 0.0, 0.0, 1.0, -2.0, 64).is_err());
    }
}

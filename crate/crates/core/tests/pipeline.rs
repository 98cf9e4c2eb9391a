use qaction::analytic::{compare_profiles, max_deviation, max_law_residual, reconstruct_wavefunction_1d};
use qaction::fit::{extrapolate_v0, sweep_fits, v0_series};
use qaction::io::{read_amplitude_csv, write_amplitude_csv};
use qaction::oracle::{default_boundary_set, sample_amplitudes, AmplitudeMethod};
use qaction::{ActionSpec, Grid};

fn harmonic() -> ActionSpec {
    ActionSpec::one_d(1.0, 0.0, 0.5, 0.0, 0.0).unwrap()
}

/// Oracle table through its CSV form, then sweep, extrapolation and the
/// zero-temperature checks, all against the Mehler closed forms.
#[test]
fn harmonic_pipeline_matches_closed_forms() {
    let spec = harmonic();
    let grid = Grid::default_1d();
    let times: Vec<f64> = (4..=10).map(f64::from).collect();
    let table = sample_amplitudes(&spec, &grid, &default_boundary_set(1), &times, AmplitudeMethod::Spectral).unwrap();
    let table = read_amplitude_csv(&write_amplitude_csv(&table, "0000000000000000")).unwrap();

    let entries = sweep_fits(&table, &spec, &Default::default());
    for e in &entries {
        let r = e.result.as_ref().unwrap();
        let v0 = (2.0 * std::f64::consts::PI * e.t.sinh()).ln() / (2.0 * e.t);
        assert!((r.v0() - v0).abs() < 1e-4, "T={} v0={} expected {v0}", e.t, r.v0());
        assert!((r.spec.mass - 1.0).abs() < 1e-4);
    }

    // v0(T) = 1/2 + ln(pi) / (2T) up to exponentially small terms
    let x = extrapolate_v0(&v0_series(&entries), 4.0, 10.0).unwrap();
    assert!((x.a - 0.5).abs() < 1e-4, "A = {}", x.a);
    assert!((x.b - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-3, "B = {}", x.b);

    let last = entries.last().unwrap().result.as_ref().unwrap();
    let profile = reconstruct_wavefunction_1d(&last.spec, &grid).unwrap();
    let exact: Vec<f64> = grid.coordinates().iter().map(|x| (-x * x / 2.0).exp() / std::f64::consts::PI.powf(0.25)).collect();
    assert!(max_deviation(&compare_profiles(&profile, &exact).unwrap(), f64::INFINITY) < 1e-4);

    let (r, _) = max_law_residual(&spec, &last.spec, 0.5, 0.1, 3.0, 59).unwrap();
    assert!(r < 1e-3, "law residual {r}");
}

#[test]
fn quartic_fit_is_stable_across_adjacent_temperatures() {
    let spec = ActionSpec::quartic_1d();
    let table = sample_amplitudes(&spec, &Grid::default_1d(), &default_boundary_set(1), &[4.0, 5.0], AmplitudeMethod::Spectral)
        .unwrap();
    let entries = sweep_fits(&table, &spec, &Default::default());
    let a = entries[0].result.as_ref().unwrap();
    let b = entries[1].result.as_ref().unwrap();
    // ground-state dominance: the fitted action changes slowly once T >> 1
    assert!((a.spec.mass - b.spec.mass).abs() < 5e-3);
    assert!(b.v0() < a.v0() && a.v0() - b.v0() < 0.05);
}

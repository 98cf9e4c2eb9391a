use std::fs;
use std::path::{Path, PathBuf};

use qaction::analytic::{self, compare_profiles, max_deviation, reconstruct_wavefunction_1d, reconstruct_wavefunction_2d};
use qaction::chaos::{self, compare_sections, compute_section, PoincareSection, SectionConfig};
use qaction::config::{format_action, parse_action, parse_quantum_action};
use qaction::fit::{extrapolate_v0, fit_quantum_action, sweep_fits, FitProblem, FitResult, SweepEntry};
use qaction::io;
use qaction::oracle::{self, AmplitudeMethod, AmplitudeTable};
use qaction::trajectory::{solve_bvp, steps_for, BvpProblem, LineIntegralOptions};
use qaction::{ActionSpec, Grid, TimeExtent};
use serde_json::json;

use crate::{Cli, Command, Failure, GridArgs, SectionArgs};

struct Ctx {
    spec: ActionSpec,
    hash: String,
    out: PathBuf,
    seed: u64,
}

impl Ctx {
    fn write(&self, name: &str, content: &str) -> Result<PathBuf, Failure> {
        let path = self.out.join(name);
        fs::write(&path, content).map_err(|e| Failure::usage("output_not_writable", format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    fn dimension(&self) -> usize {
        self.spec.dimension()
    }
}

fn read(path: &Path, missing: &str) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(missing, format!("{}: {e}", path.display())))
}

fn prepare_out(cli: &Cli) -> Result<(), Failure> {
    fs::create_dir_all(&cli.out).map_err(|e| Failure::usage("output_not_writable", format!("{}: {e}", cli.out.display())))
}

fn context(cli: &Cli) -> Result<Ctx, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::usage("config_missing", "--config is required"))?;
    let text = read(path, "config_not_found")?;
    let spec = parse_action(&text)?;
    prepare_out(cli)?;
    let args = format!("{:?}", cli.command);
    let hash = io::config_hash(&[text.as_bytes(), args.as_bytes(), &cli.seed.to_le_bytes()]);
    Ok(Ctx { spec, hash, out: cli.out.clone(), seed: cli.seed })
}

fn grid_for(args: &GridArgs, dimension: usize) -> Result<Grid, Failure> {
    let d = Grid::default_for(dimension);
    Ok(Grid::new(dimension, args.half_extent.unwrap_or(d.half_extent), args.grid_points.unwrap_or(d.n))?)
}

fn default_times(dimension: usize) -> Vec<f64> {
    if dimension == 1 {
        (1..=20).map(|k| 0.5 * k as f64).collect()
    } else {
        (1..=10).map(f64::from).collect()
    }
}

fn default_fit_time(dimension: usize) -> f64 {
    if dimension == 1 {
        4.5
    } else {
        4.0
    }
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Oracle { grid, times, states } => cmd_oracle(&context(cli)?, grid, times.as_deref(), *states),
        Command::Fit { grid, t, table } => cmd_fit(&context(cli)?, grid, *t, table.as_deref()),
        Command::Sweep { grid, times, table } => cmd_sweep(&context(cli)?, grid, times.as_deref(), table.as_deref()),
        Command::Extrapolate { sweep, window } => cmd_extrapolate(cli, sweep.as_deref(), window.as_deref()),
        Command::Analytic { grid, params, t, e_gr } => cmd_analytic(&context(cli)?, grid, params.as_deref(), *t, *e_gr),
        Command::Poincare { section, tau } => cmd_poincare(&context(cli)?, section, tau),
        Command::Compare { section, tau, perturb } => cmd_compare(&context(cli)?, section, tau, *perturb),
    }
}

fn cmd_oracle(ctx: &Ctx, grid: &GridArgs, times: Option<&[f64]>, states: usize) -> Result<(), Failure> {
    let dim = ctx.dimension();
    let grid = grid_for(grid, dim)?;
    let sd = oracle::ground_state(&ctx.spec, &grid, states.max(1))?;
    let e_gr = sd.ground_energy();
    let r0 = oracle::bohr_radius(&sd);
    ctx.write("spectrum.csv", &io::write_spectrum_csv(&sd.energies, &ctx.hash))?;

    let psi = sd.ground_profile();
    let (points, values): (Vec<Vec<f64>>, Vec<f64>) = if dim == 1 {
        grid.coordinates().into_iter().map(|x| vec![x]).zip(psi).unzip()
    } else {
        // nodes within [-3, 3]^2, every 0.05
        let stride = ((0.05 / grid.spacing()).round() as usize).max(1);
        let c = grid.center();
        let reach = ((3.0 / grid.spacing()) as usize).min(c - 1) / stride * stride;
        let idx: Vec<usize> = (c - reach..=c + reach).step_by(stride).collect();
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        for &i in &idx {
            for &j in &idx {
                pts.push(vec![grid.coordinate(i), grid.coordinate(j)]);
                vals.push(psi[i * grid.n + j]);
            }
        }
        (pts, vals)
    };
    ctx.write("psi0.csv", &io::write_field_csv(&points, &values, &ctx.hash))?;

    let times = times.map(<[f64]>::to_vec).unwrap_or_else(|| vec![default_fit_time(dim)]);
    let table = oracle::sample_amplitudes(&ctx.spec, &grid, &oracle::default_boundary_set(dim), &times, AmplitudeMethod::Spectral)?;
    ctx.write("amplitudes.csv", &io::write_amplitude_csv(&table, &ctx.hash))?;
    println!("E_gr={e_gr:.10}");
    println!("r0={r0:.6}");
    println!("records={}", table.records.len());
    Ok(())
}

fn load_or_sample(ctx: &Ctx, grid: &GridArgs, times: &[f64], table: Option<&Path>) -> Result<AmplitudeTable, Failure> {
    match table {
        Some(path) => {
            let t = io::read_amplitude_csv(&read(path, "table_not_found")?)?;
            if t.dimension != ctx.dimension() {
                return Err(Failure::usage("mismatch", "table and config dimensions differ"));
            }
            Ok(t)
        }
        None => {
            let grid = grid_for(grid, ctx.dimension())?;
            let boundary = oracle::default_boundary_set(ctx.dimension());
            Ok(oracle::sample_amplitudes(&ctx.spec, &grid, &boundary, times, AmplitudeMethod::Spectral)?)
        }
    }
}

fn print_fit(r: &FitResult) {
    let params: Vec<String> = r.names.iter().zip(&r.parameters).map(|(n, v)| format!("{n}={v:.8}")).collect();
    println!("T={} {} residual={:.3e} cond={:.1}", r.t, params.join(" "), r.residual, r.condition_number);
}

fn cmd_fit(ctx: &Ctx, grid: &GridArgs, t: f64, table: Option<&Path>) -> Result<(), Failure> {
    TimeExtent::new(t)?;
    let table = load_or_sample(ctx, grid, &[t], table)?.at_time(t);
    if table.records.is_empty() {
        return Err(Failure::usage("no_records", format!("no amplitude records at T = {t}")));
    }
    let first = table.records[0].clone();
    let result = fit_quantum_action(&FitProblem::new(table, ctx.spec))?;
    print_fit(&result);
    ctx.write(&format!("fit_T{t}.json"), &io::tagged_json(&result, &ctx.hash))?;
    let entries = [SweepEntry { t, result: Ok(result.clone()) }];
    ctx.write(&format!("fit_T{t}.csv"), &io::write_sweep_csv(&entries, &ctx.hash))?;
    ctx.write(&format!("fit_T{t}.action"), &format_action(&result.spec))?;
    // extremal path of the fitted action for the first record
    let problem = BvpProblem::new(result.spec, first.x_in, first.x_fi, TimeExtent::new(t)?, steps_for(t, 0.005))?;
    let path = solve_bvp(&problem)?;
    ctx.write(&format!("trajectory_T{t}.csv"), &io::write_trajectory_csv(&path, &ctx.hash))?;
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, grid: &GridArgs, times: Option<&[f64]>, table: Option<&Path>) -> Result<(), Failure> {
    let mut times = times.map(<[f64]>::to_vec).unwrap_or_else(|| default_times(ctx.dimension()));
    times.sort_by(f64::total_cmp);
    times.dedup();
    for &t in &times {
        TimeExtent::new(t)?;
    }
    let mut table = load_or_sample(ctx, grid, &times, table)?;
    if table.records.is_empty() {
        return Err(Failure::usage("no_records", "amplitude table is empty"));
    }
    // an explicit --times list restricts a loaded table
    let wanted: Vec<f64> = table.temperatures().into_iter().filter(|t| times.contains(t)).collect();
    if !wanted.is_empty() {
        table.records.retain(|r| wanted.contains(&r.t));
    }
    let entries = sweep_fits(&table, &ctx.spec, &Default::default());
    for e in &entries {
        match &e.result {
            Ok(r) => print_fit(r),
            Err(err) => println!("T={} failed: {err}", e.t),
        }
    }
    ctx.write("sweep.csv", &io::write_sweep_csv(&entries, &ctx.hash))?;
    ctx.write("sweep.json", &io::sweep_json(&entries, None, &ctx.hash))?;
    let failed = entries.iter().filter(|e| e.result.is_err()).count();
    if failed > 0 {
        return Err(Failure::numerical("sweep_partial_failure", format!("{failed} of {} temperatures failed", entries.len())));
    }
    Ok(())
}

fn read_v0_series(text: &str) -> Result<Vec<(f64, f64)>, Failure> {
    let mut out = Vec::new();
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("T,tau,param_name,value,stderr") {
        return Err(Failure::usage("config_invalid", "not a sweep CSV"));
    }
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Failure::usage("config_invalid", format!("malformed sweep row `{line}`")));
        }
        if f[2] == "v0" {
            let t = f[0].parse().map_err(|_| Failure::usage("config_invalid", "bad T"))?;
            let v = f[3].parse().map_err(|_| Failure::usage("config_invalid", "bad value"))?;
            out.push((t, v));
        }
    }
    Ok(out)
}

fn cmd_extrapolate(cli: &Cli, sweep: Option<&Path>, window: Option<&[f64]>) -> Result<(), Failure> {
    let ctx = if cli.config.is_some() { Some(context(cli)?) } else { None };
    prepare_out(cli)?;
    let path = sweep.map(Path::to_path_buf).unwrap_or_else(|| cli.out.join("sweep.csv"));
    let text = read(&path, "sweep_not_found")?;
    let series = read_v0_series(&text)?;
    let (t_min, t_max) = match window {
        Some([a, b]) => (*a, *b),
        _ => (4.0, 10.0),
    };
    let fit = extrapolate_v0(&series, t_min, t_max)?;
    let mut doc = json!({
        "A": fit.a, "B": fit.b, "C": fit.c,
        "t_min": fit.t_min, "t_max": fit.t_max, "points": fit.points, "residual": fit.residual,
    });
    println!("A={:.8} B={:.6} C={:.6}", fit.a, fit.b, fit.c);
    let hash = match &ctx {
        Some(ctx) => {
            let dim = ctx.dimension();
            let sd = oracle::ground_state(&ctx.spec, &Grid::default_for(dim), 1)?;
            let tol = if dim == 1 { 1e-3 } else { 2e-3 };
            let check = analytic::check_energy_identity(fit.a, sd.ground_energy(), tol);
            println!("E_gr={:.8} |A-E_gr|={:.3e}", check.reference, check.difference);
            doc["energy_check"] = serde_json::to_value(check).expect("serializable");
            ctx.hash.clone()
        }
        None => io::config_hash(&[text.as_bytes()]),
    };
    let out = cli.out.join("extrapolation.json");
    fs::write(&out, io::tagged_json(&doc, &hash)).map_err(|e| Failure::usage("output_not_writable", e.to_string()))?;
    Ok(())
}

fn quantum_spec(ctx: &Ctx, grid: &GridArgs, params: Option<&Path>, t: f64) -> Result<ActionSpec, Failure> {
    match params {
        Some(p) => {
            let q = parse_quantum_action(&read(p, "params_not_found")?)?;
            if q.dimension() != ctx.dimension() {
                return Err(Failure::usage("mismatch", "params and config dimensions differ"));
            }
            Ok(q)
        }
        None => {
            let table = load_or_sample(ctx, grid, &[t], None)?;
            let r = fit_quantum_action(&FitProblem::new(table, ctx.spec))?;
            print_fit(&r);
            Ok(r.spec)
        }
    }
}

fn cmd_analytic(ctx: &Ctx, grid: &GridArgs, params: Option<&Path>, t: Option<f64>, e_gr: Option<f64>) -> Result<(), Failure> {
    let dim = ctx.dimension();
    let g = grid_for(grid, dim)?;
    let q = quantum_spec(ctx, grid, params, t.unwrap_or(default_fit_time(dim)))?;
    let sd = oracle::ground_state(&ctx.spec, &g, 1)?;
    let e_oracle = sd.ground_energy();
    let mut report = json!({ "quantum_action": q, "e_gr_oracle": e_oracle });
    if dim == 1 {
        let reference = oracle::refined_ground_profile(&ctx.spec, &g)?;
        let profile = reconstruct_wavefunction_1d(&q, &g)?;
        let rows = compare_profiles(&profile, &reference)?;
        let dev = max_deviation(&rows, f64::INFINITY);
        ctx.write("wavefunction_1d.csv", &io::write_profile_csv(&rows, &ctx.hash))?;
        let e = e_gr.unwrap_or(e_oracle);
        let (wide, at) = analytic::max_law_residual(&ctx.spec, &q, e, 0.1, 3.0, 291)?;
        let (narrow, _) = analytic::max_law_residual(&ctx.spec, &q, e, 0.1, 1.5, 141)?;
        let c = ctx.spec.coefficients();
        let (v2, v4, v6) = analytic::derive_quartic_params(ctx.spec.mass, c[1], c[2], e, q.mass)?;
        println!("max_abs_diff={dev:.3e}");
        println!("law_residual[0.1,3]={wide:.3e} at x={at:.2}");
        println!("closed_forms v2={v2:.7} v4={v4:.7} v6={v6:.4e} (m~={}, E_gr={e})", q.mass);
        report["max_abs_diff"] = dev.into();
        report["law_residual"] = json!({ "range": [0.1, 3.0], "max": wide, "at": at, "max_within_1_5": narrow, "e_gr": e });
        report["closed_forms"] = json!({ "m_tilde": q.mass, "e_gr": e, "v2": v2, "v4": v4, "v6": v6 });
    } else {
        let psi = sd.ground_profile();
        let targets = analytic::default_cuts();
        let reference: Vec<f64> = targets
            .iter()
            .map(|p| g.node(p).map(|ij| psi[ij[0] * g.n + ij[1]]))
            .collect::<Result<_, _>>()?;
        let c = g.center();
        let profile = reconstruct_wavefunction_2d(&q, &targets, psi[c * g.n + c], LineIntegralOptions::default())?;
        let rows = compare_profiles(&profile, &reference)?;
        let dev = rows.iter().filter(|r| r.abs_diff.is_finite()).map(|r| r.abs_diff).fold(0.0, f64::max);
        ctx.write("wavefunction_2d_cuts.csv", &io::write_profile_csv(&rows, &ctx.hash))?;
        println!("max_abs_diff={dev:.3e} failed_targets={}", profile.failed.len());
        report["max_abs_diff"] = dev.into();
        report["failed_targets"] = json!(profile.failed);
    }
    ctx.write("analytic.json", &io::tagged_json(&report, &ctx.hash))?;
    Ok(())
}

fn parse_tau(tau: &str) -> Result<Option<f64>, Failure> {
    if matches!(tau, "inf" | "infinity" | "classical") {
        return Ok(None);
    }
    match tau.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
        _ => Err(Failure::usage("invalid_parameter", format!("tau must be > 0 or `inf` (got {tau})"))),
    }
}

fn section_spec(ctx: &Ctx, args: &SectionArgs, tau: Option<f64>) -> Result<ActionSpec, Failure> {
    match (tau, &args.params) {
        (None, _) => Ok(ctx.spec),
        (Some(tau), params) => quantum_spec(ctx, &GridArgs { grid_points: None, half_extent: None }, params.as_deref(), 1.0 / tau),
    }
}

fn section_config(ctx: &Ctx, args: &SectionArgs, spec: ActionSpec, energy: f64) -> Result<SectionConfig, Failure> {
    let mut cfg = SectionConfig::new(spec, energy, ctx.seed)?;
    cfg.seeds = chaos::default_seeds(&spec, energy, args.seeds, ctx.seed)?;
    cfg.max_crossings = args.max_crossings;
    if let Some(t) = args.max_time {
        cfg.max_time = t;
    }
    Ok(cfg)
}

fn label(tau: Option<f64>) -> String {
    tau.map_or_else(|| "inf".to_string(), |t| t.to_string())
}

fn summarize(name: &str, s: &PoincareSection) {
    println!(
        "{name}: E={} crossings={} max_drift={:.3e} chaos={:.4} aborted={}",
        s.energy(),
        s.total_crossings(),
        s.max_drift(),
        chaos::chaos_indicator(s),
        s.aborted()
    );
}

fn check_runs(sections: &[&PoincareSection]) -> Result<(), Failure> {
    let aborted: usize = sections.iter().map(|s| s.aborted()).sum();
    if aborted > 0 {
        return Err(Failure::numerical("energy_drift", format!("{aborted} seed runs aborted")));
    }
    Ok(())
}

fn cmd_poincare(ctx: &Ctx, args: &SectionArgs, tau: &str) -> Result<(), Failure> {
    if ctx.dimension() != 2 {
        return Err(Failure::usage("mismatch", "Poincaré sections need a 2-D action"));
    }
    let tau = parse_tau(tau)?;
    let spec = section_spec(ctx, args, tau)?;
    let mut sections = Vec::new();
    for &e in &args.energy {
        let s = compute_section(&section_config(ctx, args, spec, e)?)?;
        summarize(&format!("tau={}", label(tau)), &s);
        ctx.write(&format!("section_E{e}_tau{}.csv", label(tau)), &io::write_section_csv(&s, &ctx.hash))?;
        sections.push(s);
    }
    check_runs(&sections.iter().collect::<Vec<_>>())
}

fn cmd_compare(ctx: &Ctx, args: &SectionArgs, tau: &str, perturb: Option<f64>) -> Result<(), Failure> {
    if ctx.dimension() != 2 {
        return Err(Failure::usage("mismatch", "Poincaré sections need a 2-D action"));
    }
    let tau = if perturb.is_some() { None } else { parse_tau(tau)? };
    let other = section_spec(ctx, args, tau)?;
    let tag = match perturb {
        Some(d) => format!("perturbed{d}"),
        None => format!("tau{}", label(tau)),
    };
    let mut all = Vec::new();
    for &e in &args.energy {
        let base = section_config(ctx, args, ctx.spec, e)?;
        let a = compute_section(&base)?;
        let b = match perturb {
            Some(d) => compute_section(&base.perturbed(d))?,
            None => compute_section(&section_config(ctx, args, other, e)?)?,
        };
        summarize("classical", &a);
        summarize(&tag, &b);
        let cmp = compare_sections(&a, &b)?;
        println!("E={e} distance={:.6e} integrable={}", cmp.distance, cmp.integrable);
        ctx.write(&format!("section_E{e}_tauinf.csv"), &io::write_section_csv(&a, &ctx.hash))?;
        ctx.write(&format!("section_E{e}_{tag}.csv"), &io::write_section_csv(&b, &ctx.hash))?;
        ctx.write(&format!("comparison_E{e}_{tag}.json"), &io::comparison_json(&cmp, &ctx.hash))?;
        ctx.write(&format!("occupancy_E{e}_tauinf.csv"), &io::write_matrix_csv(&cmp.occupancy_a, cmp.bounds, &ctx.hash))?;
        ctx.write(&format!("occupancy_E{e}_{tag}.csv"), &io::write_matrix_csv(&cmp.occupancy_b, cmp.bounds, &ctx.hash))?;
        all.push(a);
        all.push(b);
    }
    check_runs(&all.iter().collect::<Vec<_>>())
}

//! CSV and JSON artifacts.
//!
//! Every CSV starts with `# qaction <version> config=<hash>`; numbers are
//! written as `{:.16e}` (17 significant digits) so files round-trip exactly
//! and identical inputs give byte-identical output.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analytic::ProfileRow;
use crate::chaos::{PoincareSection, SectionComparison};
use crate::error::{Error, Result};
use crate::fit::{SweepEntry, V0Extrapolation};
use crate::oracle::{AmplitudeRecord, AmplitudeTable};
use crate::trajectory::TrajectorySolution;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// First 16 hex digits of the SHA-256 of the concatenated parts.
pub fn config_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn header(hash: &str) -> String {
    format!("# qaction {VERSION} config={hash}\n")
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(num).collect::<Vec<_>>().join(",")
}

fn axis_names(dimension: usize) -> &'static [&'static str] {
    if dimension == 1 {
        &["x"]
    } else {
        &["x", "y"]
    }
}

pub fn amplitude_columns(dimension: usize) -> String {
    let mut cols = vec!["dim".to_string()];
    for side in ["in", "fi"] {
        for a in axis_names(dimension) {
            cols.push(format!("{a}_{side}"));
        }
    }
    cols.push("T".into());
    cols.push("G".into());
    cols.join(",")
}

pub fn write_amplitude_csv(table: &AmplitudeTable, hash: &str) -> String {
    let mut out = header(hash);
    let _ = writeln!(out, "{}", amplitude_columns(table.dimension));
    for r in &table.records {
        let values = r.x_in.iter().chain(&r.x_fi).copied().chain([r.t, r.g]);
        let _ = writeln!(out, "{},{}", table.dimension, join(values));
    }
    out
}

pub fn read_amplitude_csv(text: &str) -> Result<AmplitudeTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, head) = lines.next().ok_or_else(|| Error::Config("empty amplitude table".into()))?;
    let dimension = match head.trim() {
        h if h == amplitude_columns(1) => 1,
        h if h == amplitude_columns(2) => 2,
        h => return Err(Error::Config(format!("unexpected amplitude header `{h}`"))),
    };
    let mut records = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("line {}: not a number", lineno + 1)))?;
        if fields.len() != 2 * dimension + 3 || fields[0] != dimension as f64 {
            return Err(Error::Config(format!("line {}: expected {} fields for dim {dimension}", lineno + 1, 2 * dimension + 3)));
        }
        records.push(AmplitudeRecord {
            x_in: fields[1..1 + dimension].to_vec(),
            x_fi: fields[1 + dimension..1 + 2 * dimension].to_vec(),
            t: fields[1 + 2 * dimension],
            g: fields[2 + 2 * dimension],
        });
    }
    Ok(AmplitudeTable { dimension, records, provenance: None })
}

pub fn write_spectrum_csv(energies: &[f64], hash: &str) -> String {
    let mut out = header(hash);
    out.push_str("n,E_n\n");
    for (n, e) in energies.iter().enumerate() {
        let _ = writeln!(out, "{n},{}", num(*e));
    }
    out
}

/// Sampled field `x[,y],psi`.
pub fn write_field_csv(points: &[Vec<f64>], values: &[f64], hash: &str) -> String {
    let dim = points.first().map_or(1, Vec::len);
    let mut out = header(hash);
    let _ = writeln!(out, "{},psi", axis_names(dim).join(","));
    for (p, v) in points.iter().zip(values) {
        let _ = writeln!(out, "{},{}", join(p.iter().copied()), num(*v));
    }
    out
}

pub fn write_profile_csv(rows: &[ProfileRow], hash: &str) -> String {
    let dim = rows.first().map_or(1, |r| r.point.len());
    let mut out = header(hash);
    let _ = writeln!(out, "{},psi_quantum_action,psi_oracle,abs_diff", axis_names(dim).join(","));
    for r in rows {
        let vals = r.point.iter().copied().chain([r.psi_quantum_action, r.psi_oracle, r.abs_diff]);
        let _ = writeln!(out, "{}", join(vals));
    }
    out
}

/// Sweep rows `T,tau,param_name,value,stderr`; failed temperatures are
/// left out here and listed in the JSON summary.
pub fn write_sweep_csv(entries: &[SweepEntry], hash: &str) -> String {
    let mut out = header(hash);
    out.push_str("T,tau,param_name,value,stderr\n");
    for e in entries {
        if let Ok(r) = &e.result {
            for i in 0..r.parameters.len() {
                let _ = writeln!(out, "{},{},{},{},{}", num(e.t), num(1.0 / e.t), r.names[i], num(r.parameters[i]), num(r.uncertainties[i]));
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct EntryJson<'a> {
    #[serde(rename = "T")]
    t: f64,
    tau: f64,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_kind: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<&'a crate::fit::FitResult>,
}

#[derive(Debug, Serialize)]
struct SweepJson<'a> {
    tool: String,
    config_hash: &'a str,
    entries: Vec<EntryJson<'a>>,
    failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    extrapolation: Option<ExtrapolationJson>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExtrapolationJson {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub residual: f64,
}

impl From<V0Extrapolation> for ExtrapolationJson {
    fn from(e: V0Extrapolation) -> Self {
        Self { a: e.a, b: e.b, c: e.c, t_min: e.t_min, t_max: e.t_max, points: e.points, residual: e.residual }
    }
}

pub fn sweep_json(entries: &[SweepEntry], extrapolation: Option<V0Extrapolation>, hash: &str) -> String {
    let doc = SweepJson {
        tool: format!("qaction {VERSION}"),
        config_hash: hash,
        entries: entries
            .iter()
            .map(|e| EntryJson {
                t: e.t,
                tau: 1.0 / e.t,
                ok: e.result.is_ok(),
                error: e.result.as_ref().err().map(|x| x.to_string()),
                error_kind: e.result.as_ref().err().map(|x| x.kind()),
                fit: e.result.as_ref().ok(),
            })
            .collect(),
        failures: entries.iter().filter(|e| e.result.is_err()).count(),
        extrapolation: extrapolation.map(Into::into),
    };
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

/// Any serializable value, tagged with tool version and config hash.
pub fn tagged_json<T: Serialize>(value: &T, hash: &str) -> String {
    let mut v = serde_json::to_value(value).expect("serializable");
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("tool".into(), format!("qaction {VERSION}").into());
        map.insert("config_hash".into(), hash.into());
    }
    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
}

pub fn write_section_csv(section: &PoincareSection, hash: &str) -> String {
    let mut out = header(hash);
    let _ = writeln!(out, "# E={} plane={}", num(section.energy()), section.plane);
    out.push_str("seed_id,crossing_index,x,px\n");
    for r in &section.runs {
        for (k, c) in r.crossings.iter().enumerate() {
            let _ = writeln!(out, "{},{k},{},{}", r.seed_id, num(c.x), num(c.px));
        }
    }
    out
}

/// Comparison report without the occupancy grids (written separately).
pub fn comparison_json(cmp: &SectionComparison, hash: &str) -> String {
    #[derive(Serialize)]
    struct Report<'a> {
        energy: f64,
        plane: &'a str,
        distance: f64,
        counts_a: &'a [usize],
        counts_b: &'a [usize],
        bounds: [f64; 4],
        mode_energy_spread_a: f64,
        mode_energy_spread_b: f64,
        chaos_a: f64,
        chaos_b: f64,
        integrable: bool,
    }
    let r = Report {
        energy: cmp.energy,
        plane: &cmp.plane,
        distance: cmp.distance,
        counts_a: &cmp.counts_a,
        counts_b: &cmp.counts_b,
        bounds: cmp.bounds,
        mode_energy_spread_a: cmp.mode_energy_spread_a,
        mode_energy_spread_b: cmp.mode_energy_spread_b,
        chaos_a: cmp.chaos_a,
        chaos_b: cmp.chaos_b,
        integrable: cmp.integrable,
    };
    tagged_json(&r, hash)
}

/// Occupancy grid as a CSV matrix; rows run over `px`, columns over `x`.
pub fn write_matrix_csv(grid: &[Vec<u32>], bounds: [f64; 4], hash: &str) -> String {
    let mut out = header(hash);
    let _ = writeln!(out, "# bounds x=[{},{}] px=[{},{}]", num(bounds[0]), num(bounds[1]), num(bounds[2]), num(bounds[3]));
    for row in grid {
        let _ = writeln!(out, "{}", row.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
    }
    out
}

/// `t,x[,y],v[,vy]` with central-difference velocities.
pub fn write_trajectory_csv(sol: &TrajectorySolution, hash: &str) -> String {
    let mut out = header(hash);
    out.push_str(if sol.dimension == 1 { "t,x,v\n" } else { "t,x,y,v,vy\n" });
    let n = sol.path.len();
    for (i, p) in sol.path.iter().enumerate() {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let span = (b - a) as f64 * sol.dt;
        let v = (0..sol.dimension).map(|d| (sol.path[b][d] - sol.path[a][d]) / span);
        let _ = writeln!(out, "{},{}", num(i as f64 * sol.dt), join(p.iter().copied().chain(v)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AmplitudeRecord;

    #[test]
    fn amplitude_csv_roundtrip() {
        let table = AmplitudeTable {
            dimension: 2,
            records: vec![
                AmplitudeRecord { x_in: vec![0.6, -1.2], x_fi: vec![0.0, 0.1], t: 4.0, g: 1.234567890123456e-3 },
                AmplitudeRecord { x_in: vec![0.0, 0.0], x_fi: vec![0.0, 0.0], t: 0.5, g: 0.1 + 0.2 },
            ],
            provenance: None,
        };
        let text = write_amplitude_csv(&table, "abc");
        assert!(text.starts_with("# qaction "));
        assert!(text.contains("dim,x_in,y_in,x_fi,y_fi,T,G\n"));
        assert_eq!(read_amplitude_csv(&text).unwrap(), table);
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(read_amplitude_csv("").is_err());
        assert!(read_amplitude_csv("dim,a,b\n").is_err());
        assert!(read_amplitude_csv("dim,x_in,x_fi,T,G\n1,0,0,1\n").is_err());
        assert!(read_amplitude_csv("dim,x_in,x_fi,T,G\n2,0,0,1,1\n").is_err());
        assert!(read_amplitude_csv("dim,x_in,x_fi,T,G\n1,0,zero,1,1\n").is_err());
    }

    #[test]
    fn hash_is_stable_and_separates_parts() {
        assert_eq!(config_hash(&[b"ab"]), config_hash(&[b"ab"]));
        assert_ne!(config_hash(&[b"a", b"b"]), config_hash(&[b"ab"]));
        assert_eq!(config_hash(&[b""]).len(), 16);
    }
}

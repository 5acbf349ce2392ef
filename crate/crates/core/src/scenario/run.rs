//! Executes scenarios and writes their artifacts. CSVs are the contract;
//! SVG plots are optional conveniences.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{evolve, initial_state, Trajectory};
use crate::emission::{
    analyzer_wavepackets, emission_efficiency, emission_flux, integrate_samples, oscillation_frequency,
    routing_from_trajectory, without_birefringence, DetectionPolarization, RoutingPoint,
};
use crate::error::{Error, Result};
use crate::MHZ;

use super::{AnalysisBasis, Scenario};

/// Provenance record written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub config_hash: String,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub efficiency: f64,
    pub fraction_plus: f64,
    pub fraction_minus: f64,
    pub fraction_h: f64,
    pub fraction_v: f64,
    /// Oscillation frequency in MHz, when requested and resolvable.
    pub oscillation_mhz: Option<f64>,
    /// `(angle, port1, port2)` fractions for each configured QWP angle.
    pub port_fractions: Vec<(f64, f64, f64)>,
    pub routing_on: Vec<RoutingPoint>,
    pub routing_off: Vec<RoutingPoint>,
}

impl RunSummary {
    /// Dominant circular component and its share.
    pub fn dominant(&self) -> (&'static str, f64) {
        if self.fraction_plus >= self.fraction_minus {
            ("plus", self.fraction_plus)
        } else {
            ("minus", self.fraction_minus)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub summary: RunSummary,
    pub out_dir: PathBuf,
}

/// One line of the sweep summary; `error` is set when that run failed.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub manifest: RunManifest,
    pub rows: Vec<SweepRow>,
}

fn num(v: f64) -> String {
    format!("{v:.9e}")
}

fn angle_tag(a: f64) -> String {
    format!("{a}").replace('-', "m").replace('.', "p")
}

fn basis_pair(basis: AnalysisBasis, scenario: &Scenario) -> Result<[(DetectionPolarization, &'static str); 2]> {
    Ok(match basis {
        AnalysisBasis::Linear => [(DetectionPolarization::horizontal(), "h"), (DetectionPolarization::vertical(), "v")],
        AnalysisBasis::Circular => [(DetectionPolarization::plus(), "plus"), (DetectionPolarization::minus(), "minus")],
        AnalysisBasis::Diagonal => [
            (DetectionPolarization::diagonal(), "d"),
            (DetectionPolarization::antidiagonal(), "a"),
        ],
        AnalysisBasis::Cavity => {
            let o = scenario.orientation()?;
            [
                (DetectionPolarization::eigenmode(&o, true), "x"),
                (DetectionPolarization::eigenmode(&o, false), "y"),
            ]
        }
    })
}

fn basis_name(b: AnalysisBasis) -> &'static str {
    match b {
        AnalysisBasis::Linear => "linear",
        AnalysisBasis::Circular => "circular",
        AnalysisBasis::Diagonal => "diagonal",
        AnalysisBasis::Cavity => "cavity",
    }
}

/// Writes a header plus rows; every cell is already formatted.
fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn fraction_pair(traj: &Trajectory, a: &DetectionPolarization, b: &DetectionPolarization) -> Result<(f64, f64)> {
    let pa = integrate_samples(traj.times(), &emission_flux(traj, a)?);
    let pb = integrate_samples(traj.times(), &emission_flux(traj, b)?);
    let total = pa + pb;
    if !(total > 1e-12) {
        return Err(Error::UndefinedFraction("no photon emitted".into()));
    }
    Ok((pa / total, pb / total))
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        write_table(&self.dir.join(name), header, rows)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Runs `scenario`, writing artifacts under `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path, plots: bool) -> Result<RunOutcome> {
    run_inner(scenario, out_dir, plots).map_err(|e| e.in_scenario(&scenario.name))
}

fn run_inner(scenario: &Scenario, out_dir: &Path, plots: bool) -> Result<RunOutcome> {
    let started = chrono::Utc::now().to_rfc3339();
    scenario.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut art = Artifacts {
        dir: out_dir.to_path_buf(),
        written: Vec::new(),
    };
    art.text("config.toml", &scenario.to_toml()?)?;

    let cfg = scenario.system_config()?;
    let opts = scenario.solver_options();
    let times = scenario.time_grid();
    log::info!("{}: evolving {} samples", scenario.name, times.len());
    let traj = evolve(&cfg, &initial_state(&cfg)?, &times, &opts)?;
    let t_ns: Vec<String> = traj.times().iter().map(|t| num(t * 1e9)).collect();
    let efficiency = emission_efficiency(&traj);
    let (fraction_plus, fraction_minus) =
        fraction_pair(&traj, &DetectionPolarization::plus(), &DetectionPolarization::minus())?;
    let (fraction_h, fraction_v) =
        fraction_pair(&traj, &DetectionPolarization::horizontal(), &DetectionPolarization::vertical())?;

    let mut svg_series: Vec<(String, Vec<(String, Vec<f64>)>)> = Vec::new();
    for &basis in &scenario.outputs.bases {
        let [(pa, la), (pb, lb)] = basis_pair(basis, scenario)?;
        let fa = emission_flux(&traj, &pa)?;
        let fb = emission_flux(&traj, &pb)?;
        let ha = format!("flux_{la}_per_ns");
        let hb = format!("flux_{lb}_per_ns");
        let rows: Vec<Vec<String>> = (0..traj.len())
            .map(|i| vec![t_ns[i].clone(), num(fa[i] * 1e-9), num(fb[i] * 1e-9)])
            .collect();
        let name = format!("basis_{}.csv", basis_name(basis));
        art.table(&name, &["time_ns", &ha, &hb], &rows)?;
        svg_series.push((name.replace(".csv", ".svg"), vec![(la.into(), fa), (lb.into(), fb)]));
    }

    let oscillation_mhz = match scenario.outputs.oscillation_basis {
        Some(basis) => {
            let [(pa, _), (pb, _)] = basis_pair(basis, scenario)?;
            let fa = emission_flux(&traj, &pa)?;
            let fb = emission_flux(&traj, &pb)?;
            match oscillation_frequency(traj.times(), &fa, &fb) {
                Ok(w) => Some(w / MHZ),
                Err(e) => {
                    log::warn!("{}: oscillation not resolved: {e}", scenario.name);
                    None
                }
            }
        }
        None => None,
    };

    let mut port_fractions = Vec::new();
    for &angle in &scenario.outputs.qwp_angles_deg {
        let rec = analyzer_wavepackets(&traj, angle)?;
        let (f1, f2) = rec.fractions()?;
        port_fractions.push((angle, f1, f2));
        let rows: Vec<Vec<String>> = (0..traj.len())
            .map(|i| vec![t_ns[i].clone(), num(rec.flux_port1[i] * 1e-9), num(rec.flux_port2[i] * 1e-9)])
            .collect();
        let name = format!("wavepacket_qwp_{}deg.csv", angle_tag(angle));
        art.table(&name, &["time_ns", "flux_port1_per_ns", "flux_port2_per_ns"], &rows)?;
        svg_series.push((
            name.replace(".csv", ".svg"),
            vec![("port1".into(), rec.flux_port1), ("port2".into(), rec.flux_port2)],
        ));
    }

    let mut routing_on = Vec::new();
    let mut routing_off = Vec::new();
    if let Some(spec) = &scenario.outputs.routing {
        let angles = spec.angles();
        routing_on = routing_from_trajectory(&traj, &angles)?;
        write_routing(&mut art, "routing_birefringence_on.csv", &routing_on)?;
        if spec.compare_without_birefringence {
            let plain = without_birefringence(&cfg);
            let traj_off = evolve(&plain, &initial_state(&plain)?, &times, &opts)?;
            routing_off = routing_from_trajectory(&traj_off, &angles)?;
            write_routing(&mut art, "routing_birefringence_off.csv", &routing_off)?;
        }
    }

    let summary = RunSummary {
        efficiency,
        fraction_plus,
        fraction_minus,
        fraction_h,
        fraction_v,
        oscillation_mhz,
        port_fractions,
        routing_on,
        routing_off,
    };
    let mut rows = vec![
        vec!["efficiency".to_string(), num(summary.efficiency)],
        vec!["fraction_plus".into(), num(summary.fraction_plus)],
        vec!["fraction_minus".into(), num(summary.fraction_minus)],
        vec!["fraction_h".into(), num(summary.fraction_h)],
        vec!["fraction_v".into(), num(summary.fraction_v)],
    ];
    if scenario.outputs.oscillation_basis.is_some() {
        rows.push(vec![
            "oscillation_mhz".into(),
            summary.oscillation_mhz.map(num).unwrap_or_else(|| "n/a".into()),
        ]);
    }
    for (a, f1, _) in &summary.port_fractions {
        rows.push(vec![format!("fraction_port1_qwp_{a}deg"), num(*f1)]);
    }
    for (tag, curve) in [("on", &summary.routing_on), ("off", &summary.routing_off)] {
        if let Some(best) = curve.iter().max_by(|a, b| a.fraction_port1.total_cmp(&b.fraction_port1)) {
            rows.push(vec![format!("best_routing_{tag}"), num(best.fraction_port1)]);
            rows.push(vec![format!("best_routing_{tag}_qwp_deg"), num(best.qwp_angle)]);
        }
    }
    art.table("summary.csv", &["quantity", "value"], &rows)?;

    if plots {
        let t_us: Vec<f64> = traj.times().iter().map(|t| t * 1e6).collect();
        for (name, series) in &svg_series {
            let scaled: Vec<(String, Vec<f64>)> =
                series.iter().map(|(l, v)| (l.clone(), v.iter().map(|x| x * 1e-6).collect())).collect();
            art.text(name, &svg_plot(name, "time (us)", "flux (1/us)", &t_us, &scaled))?;
        }
        for (tag, curve) in [("on", &summary.routing_on), ("off", &summary.routing_off)] {
            if curve.is_empty() {
                continue;
            }
            let x: Vec<f64> = curve.iter().map(|p| p.qwp_angle).collect();
            let series = vec![
                ("port1".to_string(), curve.iter().map(|p| p.fraction_port1).collect()),
                ("port2".to_string(), curve.iter().map(|p| p.fraction_port2).collect()),
            ];
            let name = format!("routing_birefringence_{tag}.svg");
            art.text(&name, &svg_plot(&name, "QWP angle (deg)", "fraction", &x, &series))?;
        }
    }

    let manifest = RunManifest {
        scenario: scenario.name.clone(),
        config_hash: scenario.config_hash()?,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        outputs: {
            let mut o = art.written.clone();
            o.push("manifest.json".into());
            o
        },
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidSeries(e.to_string()))?;
    art.text("manifest.json", &json)?;
    Ok(RunOutcome {
        manifest,
        summary,
        out_dir: out_dir.to_path_buf(),
    })
}

fn write_routing(art: &mut Artifacts, name: &str, curve: &[RoutingPoint]) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|p| vec![num(p.qwp_angle), num(p.fraction_port1), num(p.fraction_port2)])
        .collect();
    art.table(name, &["qwp_angle_deg", "fraction_port1", "fraction_port2"], &rows)
}

/// Minimal line chart. Output depends only on the inputs.
fn svg_plot(title: &str, xlabel: &str, ylabel: &str, x: &[f64], series: &[(String, Vec<f64>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let (x0, x1) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (y0, y1) = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .fold((0.0f64, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let xs = if x1 > x0 { (W - 2.0 * M) / (x1 - x0) } else { 1.0 };
    let ys = if y1 > y0 { (H - 2.0 * M) / (y1 - y0) } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(s, r#"<text x="{M}" y="{}">{x0:.3}</text>"#, H - M + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#, W - M, H - M + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y0:.3}</text>"#, M - 4.0, H - M);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.3}</text>"#, M - 4.0, M + 10.0);
    for (k, (label, v)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(v)
            .map(|(&a, &b)| format!("{:.2},{:.2}", M + (a - x0) * xs, H - M - (b - y0) * ys))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{label}</text>"#,
            W - M - 60.0,
            M + 15.0 * (k + 1) as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

fn value_dir(index: usize, parameter: &str, value: f64) -> String {
    let leaf = parameter.rsplit('.').next().unwrap_or(parameter);
    format!("{index:03}_{leaf}_{}", angle_tag(value))
}

/// Runs every sweep value independently on `workers` threads. A failing value
/// is recorded in the summary and does not stop the others.
pub fn run_sweep(scenario: &Scenario, out_dir: &Path, workers: usize, plots: bool) -> Result<SweepOutcome> {
    use rayon::prelude::*;

    let started = chrono::Utc::now().to_rfc3339();
    scenario.validate().map_err(|e| e.in_scenario(&scenario.name))?;
    let spec = scenario
        .sweep
        .clone()
        .ok_or_else(|| Error::config("sweep", "scenario has no sweep section").in_scenario(&scenario.name))?;
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        spec.values
            .par_iter()
            .enumerate()
            .map(|(i, &value)| {
                let dir = out_dir.join(value_dir(i, &spec.parameter, value));
                let result = scenario
                    .with_parameter(&spec.parameter, value)
                    .and_then(|mut s| {
                        s.name = format!("{}[{}={value}]", scenario.name, spec.parameter);
                        run(&s, &dir, plots)
                    });
                match result {
                    Ok(out) => SweepRow {
                        value,
                        summary: Some(out.summary),
                        error: None,
                    },
                    Err(e) => {
                        log::error!("sweep value {value} failed: {e}");
                        SweepRow {
                            value,
                            summary: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            })
            .collect()
    });

    let mut table = Vec::new();
    for r in &rows {
        let mut cells = vec![num(r.value)];
        match (&r.summary, &r.error) {
            (Some(s), _) => {
                let (dominant, share) = s.dominant();
                let port = s.port_fractions.first();
                cells.extend([
                    "ok".to_string(),
                    num(s.efficiency),
                    num(s.fraction_plus),
                    num(s.fraction_minus),
                    dominant.to_string(),
                    num(share),
                    port.map(|p| num(p.0)).unwrap_or_default(),
                    port.map(|p| num(p.1)).unwrap_or_default(),
                    port.map(|p| num(p.2)).unwrap_or_default(),
                    String::new(),
                ]);
            }
            (None, err) => {
                cells.extend(["failed".to_string()]);
                cells.extend(std::iter::repeat_n(String::new(), 8));
                cells.push(err.clone().unwrap_or_default());
            }
        }
        table.push(cells);
    }
    let header = [
        "value",
        "status",
        "efficiency",
        "fraction_plus",
        "fraction_minus",
        "dominant",
        "dominant_fraction",
        "qwp_angle_deg",
        "fraction_port1",
        "fraction_port2",
        "message",
    ];
    write_table(&out_dir.join("sweep_summary.csv"), &header, &table)?;
    fs::write(out_dir.join("config.toml"), scenario.to_toml()?)?;
    let mut outputs = vec!["config.toml".to_string(), "sweep_summary.csv".to_string()];
    for (i, &v) in spec.values.iter().enumerate() {
        outputs.push(format!("{}/", value_dir(i, &spec.parameter, v)));
    }
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        scenario: scenario.name.clone(),
        config_hash: scenario.config_hash()?,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidSeries(e.to_string()))?;
    fs::write(out_dir.join("manifest.json"), json)?;
    Ok(SweepOutcome { manifest, rows })
}

//! Classical cavity characterisation: double-Lorentzian transmission model,
//! Levenberg–Marquardt fit and scan ingestion.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Model parameters. Frequencies in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleLorentzian {
    pub baseline: f64,
    pub amplitudes: [f64; 2],
    pub centers: [f64; 2],
    pub fwhms: [f64; 2],
}

impl DoubleLorentzian {
    pub fn shared(baseline: f64, amplitudes: [f64; 2], centers: [f64; 2], fwhm: f64) -> Self {
        Self {
            baseline,
            amplitudes,
            centers,
            fwhms: [fwhm, fwhm],
        }
    }

    /// Two peaks of equal height `amplitude` at `±splitting/2`, no baseline.
    pub fn symmetric(splitting: f64, fwhm: f64, amplitude: f64) -> Self {
        Self::shared(0.0, [amplitude, amplitude], [-splitting / 2.0, splitting / 2.0], fwhm)
    }
}

fn lorentzian(x: f64, center: f64, fwhm: f64) -> f64 {
    let hw = fwhm / 2.0;
    hw * hw / ((x - center).powi(2) + hw * hw)
}

/// `baseline + Σ A_i (Γ_i/2)² / ((Δ − c_i)² + (Γ_i/2)²)`.
pub fn double_lorentzian(p: &DoubleLorentzian, detuning: f64) -> f64 {
    p.baseline
        + (0..2)
            .map(|i| p.amplitudes[i] * lorentzian(detuning, p.centers[i], p.fwhms[i]))
            .sum::<f64>()
}

/// A transmission scan with strictly increasing detuning (MHz).
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionScan {
    detuning: Vec<f64>,
    signal: Vec<f64>,
}

impl TransmissionScan {
    pub fn new(detuning: Vec<f64>, signal: Vec<f64>) -> Result<Self> {
        if detuning.len() != signal.len() {
            return Err(Error::DegenerateData(format!(
                "{} detunings but {} signal values",
                detuning.len(),
                signal.len()
            )));
        }
        if detuning.is_empty() {
            return Err(Error::EmptyScan);
        }
        if detuning.iter().chain(&signal).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateData("non-finite sample".into()));
        }
        if signal.iter().any(|&s| s < 0.0) {
            return Err(Error::DegenerateData("negative transmission".into()));
        }
        if detuning.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DegenerateData("detuning must be strictly increasing".into()));
        }
        Ok(Self { detuning, signal })
    }

    /// Samples `model` on `n` evenly spaced detunings over `[start, end]`.
    pub fn synthesize(model: &DoubleLorentzian, start: f64, end: f64, n: usize) -> Result<Self> {
        let n = n.max(2);
        let x: Vec<f64> = (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect();
        let y = x.iter().map(|&d| double_lorentzian(model, d)).collect();
        Self::new(x, y)
    }

    pub fn detuning(&self) -> &[f64] {
        &self.detuning
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn len(&self) -> usize {
        self.detuning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detuning.is_empty()
    }

    /// Same detunings, signal replaced by `f(index, value)` and clamped at 0.
    pub fn map_signal(&self, mut f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let y = self
            .signal
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i, v).max(0.0))
            .collect();
        Self::new(self.detuning.clone(), y)
    }
}

/// A row the ingester skipped, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanDiagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedScan {
    pub scan: TransmissionScan,
    pub rejected: Vec<ScanDiagnostic>,
    pub warnings: Vec<String>,
}

pub const SCAN_HEADER: [&str; 2] = ["detuning_mhz", "transmission"];

/// Reads a `detuning_mhz,transmission` CSV. Rows with NaN or negative
/// transmission are rejected with their line number; unparsable rows are
/// errors. Rows are sorted by detuning.
pub fn ingest_scan<R: Read>(reader: R) -> Result<IngestedScan> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != SCAN_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                SCAN_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    let mut warnings = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let parse = |i: usize, name: &str| -> Result<f64> {
            record[i].parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("{name} `{}`: {e}", &record[i]),
            })
        };
        let x = parse(0, "detuning_mhz")?;
        let y = parse(1, "transmission")?;
        if !x.is_finite() {
            rejected.push(ScanDiagnostic {
                line,
                message: format!("non-finite detuning {x}"),
            });
        } else if y.is_nan() {
            rejected.push(ScanDiagnostic {
                line,
                message: "transmission is NaN".into(),
            });
        } else if y < 0.0 || !y.is_finite() {
            rejected.push(ScanDiagnostic {
                line,
                message: format!("transmission {y} is not a finite non-negative value"),
            });
        } else {
            rows.push((line, x, y));
        }
    }
    for d in &rejected {
        log::warn!("scan line {}: rejected, {}", d.line, d.message);
    }
    if rows.is_empty() {
        return Err(Error::EmptyScan);
    }
    if rows.windows(2).any(|w| w[1].1 < w[0].1) {
        let msg = "scan rows were not sorted by detuning; sorted on ingest".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
        rows.sort_by(|a, b| a.1.total_cmp(&b.1));
    }
    if let Some(w) = rows.windows(2).find(|w| w[1].1 == w[0].1) {
        return Err(Error::Parse {
            line: w[1].0,
            message: format!("duplicate detuning {} (also on line {})", w[1].1, w[0].0),
        });
    }
    let scan = TransmissionScan::new(rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect())?;
    Ok(IngestedScan {
        scan,
        rejected,
        warnings,
    })
}

/// Unreadable files are reported as input errors naming the path.
pub fn ingest_scan_file(path: &Path) -> Result<IngestedScan> {
    let file = std::fs::File::open(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    ingest_scan(file)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Infinity-norm of the normalised gradient at which the fit stops.
    pub gradient_tolerance: f64,
    /// Relative parameter step at which the fit stops.
    pub step_tolerance: f64,
    /// Fit one width per peak instead of a shared width.
    pub independent_widths: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            independent_widths: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleLorentzianFit {
    /// Ordered so that `centers[0] ≤ centers[1]`.
    pub centers: [f64; 2],
    pub fwhm: f64,
    pub fwhms: [f64; 2],
    pub amplitudes: [f64; 2],
    pub baseline: f64,
    pub splitting: f64,
    /// Parameter covariance in the order of `parameter_names`.
    pub covariance: DMatrix<f64>,
    pub parameter_names: Vec<&'static str>,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
    /// Sum of squared residuals after each accepted step, in signal units².
    pub cost_history: Vec<f64>,
}

impl DoubleLorentzianFit {
    pub fn model(&self) -> DoubleLorentzian {
        DoubleLorentzian {
            baseline: self.baseline,
            amplitudes: self.amplitudes,
            centers: self.centers,
            fwhms: self.fwhms,
        }
    }

    pub fn standard_error(&self, name: &str) -> Option<f64> {
        let i = self.parameter_names.iter().position(|n| *n == name)?;
        Some(self.covariance[(i, i)].max(0.0).sqrt())
    }

    /// Standard error of `|c2 − c1|`.
    pub fn splitting_error(&self) -> f64 {
        let i = self.parameter_names.iter().position(|n| *n == "center1");
        let j = self.parameter_names.iter().position(|n| *n == "center2");
        match (i, j) {
            (Some(i), Some(j)) => {
                let c = &self.covariance;
                (c[(i, i)] + c[(j, j)] - 2.0 * c[(i, j)]).max(0.0).sqrt()
            }
            _ => f64::NAN,
        }
    }

    /// `key = value` lines.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let se = |n: &str| self.standard_error(n).unwrap_or(f64::NAN);
        let _ = writeln!(s, "splitting_mhz = {:.6}", self.splitting);
        let _ = writeln!(s, "splitting_err_mhz = {:.6}", self.splitting_error());
        let _ = writeln!(s, "fwhm_mhz = {:.6}", self.fwhm);
        if self.fwhms[0] != self.fwhms[1] {
            let _ = writeln!(s, "fwhm1_mhz = {:.6}", self.fwhms[0]);
            let _ = writeln!(s, "fwhm2_mhz = {:.6}", self.fwhms[1]);
        } else {
            let _ = writeln!(s, "fwhm_err_mhz = {:.6}", se("fwhm"));
        }
        let _ = writeln!(s, "center1_mhz = {:.6}", self.centers[0]);
        let _ = writeln!(s, "center2_mhz = {:.6}", self.centers[1]);
        let _ = writeln!(s, "amplitude1 = {:.6e}", self.amplitudes[0]);
        let _ = writeln!(s, "amplitude2 = {:.6e}", self.amplitudes[1]);
        let _ = writeln!(s, "baseline = {:.6e}", self.baseline);
        let _ = writeln!(s, "residual_norm = {:.6e}", self.residual_norm);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "converged = {}", self.converged);
        s
    }

    pub const CSV_HEADER: &'static str =
        "splitting_mhz,splitting_err_mhz,fwhm_mhz,center1_mhz,center2_mhz,amplitude1,amplitude2,baseline,residual_norm,iterations,converged";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{},{}",
            self.splitting,
            self.splitting_error(),
            self.fwhm,
            self.centers[0],
            self.centers[1],
            self.amplitudes[0],
            self.amplitudes[1],
            self.baseline,
            self.residual_norm,
            self.iterations,
            self.converged
        )
    }
}

/// Affine normalisation of the problem: `x = x0 + xs·u`, `y = ys·v`.
struct Scaling {
    x0: f64,
    xs: f64,
    ys: f64,
}

// Parameter layout (normalised): [baseline, A1, c1, w1, A2, c2, (w2)]
fn model_norm(p: &[f64], u: f64, independent: bool) -> f64 {
    let w2 = if independent { p[6] } else { p[3] };
    p[0] + p[1] * lorentzian(u, p[2], p[3].abs()) + p[4] * lorentzian(u, p[5], w2.abs())
}

fn jacobian_row(p: &[f64], u: f64, independent: bool, row: &mut [f64]) {
    // L = h²/(d² + h²), h = |w|/2: ∂L/∂c = 2 d h² / D², ∂L/∂w = sign(w) · d² h / D²
    let peak = |a: f64, c: f64, w: f64| {
        let h = w.abs() / 2.0;
        let d = u - c;
        let den = d * d + h * h;
        let l = h * h / den;
        let dc = a * 2.0 * d * h * h / (den * den);
        let dw = a * w.signum() * d * d * h / (den * den);
        (l, dc, dw)
    };
    row[0] = 1.0;
    let (l1, dc1, dw1) = peak(p[1], p[2], p[3]);
    let w2 = if independent { p[6] } else { p[3] };
    let (l2, dc2, dw2) = peak(p[4], p[5], w2);
    row[1] = l1;
    row[2] = dc1;
    row[4] = l2;
    row[5] = dc2;
    if independent {
        row[3] = dw1;
        row[6] = dw2;
    } else {
        row[3] = dw1 + dw2;
    }
}

/// Automatic start: tallest local maximum, then the tallest local maximum
/// clear of it, with widths from the half-maximum envelope.
pub fn initial_guess(scan: &TransmissionScan) -> Result<DoubleLorentzian> {
    let x = scan.detuning();
    let n = x.len();
    // three-point smoothing keeps single-sample noise from posing as peaks
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            scan.signal()[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(ymax - ymin > 0.0) {
        return Err(Error::DegenerateData("signal is constant".into()));
    }
    let half = ymin + 0.5 * (ymax - ymin);
    let first_above = y.iter().position(|&v| v >= half).unwrap_or(0);
    let last_above = y.iter().rposition(|&v| v >= half).unwrap_or(n - 1);
    let envelope = (x[last_above] - x[first_above]).max(x[1.min(n - 1)] - x[0]);

    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || y[i] >= y[i - 1]) && (i + 1 == n || y[i] >= y[i + 1]))
        .collect();
    maxima.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
    let i1 = maxima[0];
    let clear = 0.25 * envelope;
    let second = maxima
        .iter()
        .copied()
        .find(|&i| (x[i] - x[i1]).abs() > clear && y[i] - ymin > 0.2 * (y[i1] - ymin));
    let (c1, c2, a1, a2, fwhm) = match second {
        Some(i2) => {
            let sep = (x[i2] - x[i1]).abs();
            let fwhm = (envelope - sep).max(0.5 * envelope).max(sep * 0.5);
            (x[i1], x[i2], y[i1] - ymin, y[i2] - ymin, fwhm)
        }
        None => {
            // unresolved pair: straddle the single maximum
            let w = envelope / 2.0;
            let c = x[i1];
            (c - w / 2.0, c + w / 2.0, (y[i1] - ymin) * 0.6, (y[i1] - ymin) * 0.6, w)
        }
    };
    let (c1, c2, a1, a2) = if c1 <= c2 { (c1, c2, a1, a2) } else { (c2, c1, a2, a1) };
    Ok(DoubleLorentzian::shared(ymin, [a1, a2], [c1, c2], fwhm))
}

/// Levenberg–Marquardt least-squares fit of a double Lorentzian.
pub fn fit_transmission(
    scan: &TransmissionScan,
    initial: Option<&DoubleLorentzian>,
    opts: &FitOptions,
) -> Result<DoubleLorentzianFit> {
    let m = scan.len();
    if m < 8 {
        return Err(Error::DegenerateData(format!("need at least 8 samples, got {m}")));
    }
    let ymax = scan.signal().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymin = scan.signal().iter().copied().fold(f64::INFINITY, f64::min);
    if !(ymax - ymin > 0.0) {
        return Err(Error::DegenerateData("signal is constant".into()));
    }
    let guess = match initial {
        Some(g) => *g,
        None => initial_guess(scan)?,
    };
    let x = scan.detuning();
    let sc = Scaling {
        x0: 0.5 * (x[0] + x[m - 1]),
        xs: 0.5 * (x[m - 1] - x[0]),
        ys: ymax,
    };
    let u: Vec<f64> = x.iter().map(|&v| (v - sc.x0) / sc.xs).collect();
    let v: Vec<f64> = scan.signal().iter().map(|&s| s / sc.ys).collect();

    let ind = opts.independent_widths;
    let np = if ind { 7 } else { 6 };
    let mut p = vec![
        guess.baseline / sc.ys,
        guess.amplitudes[0] / sc.ys,
        (guess.centers[0] - sc.x0) / sc.xs,
        guess.fwhms[0] / sc.xs,
        guess.amplitudes[1] / sc.ys,
        (guess.centers[1] - sc.x0) / sc.xs,
    ];
    if ind {
        p.push(guess.fwhms[1] / sc.xs);
    }

    let residuals = |p: &[f64]| -> DVector<f64> { DVector::from_fn(m, |i, _| model_norm(p, u[i], ind) - v[i]) };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(m, np);
        let mut row = vec![0.0; np];
        for i in 0..m {
            jacobian_row(p, u[i], ind, &mut row);
            for k in 0..np {
                j[(i, k)] = row[k];
            }
        }
        j
    };

    let mut r = residuals(&p);
    let mut cost = 0.5 * r.norm_squared();
    let mut history = vec![2.0 * cost * sc.ys * sc.ys];
    let mut j = jacobian(&p);
    let mut jtj = j.transpose() * &j;
    let mut g = j.transpose() * &r;
    let mut lambda = 1e-3 * (0..np).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
    let mut nu = 2.0;
    let mut converged = g.amax() < opts.gradient_tolerance;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let mut a = jtj.clone();
        for k in 0..np {
            a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
        }
        let Some(chol) = a.cholesky() else {
            lambda *= nu;
            nu *= 2.0;
            continue;
        };
        let delta = chol.solve(&(-&g));
        let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
        // project onto the feasible set: non-negative amplitudes
        for k in [1usize, 4] {
            trial[k] = trial[k].max(0.0);
        }
        let step: DVector<f64> = DVector::from_fn(np, |k, _| trial[k] - p[k]);
        let r_trial = residuals(&trial);
        let cost_trial = 0.5 * r_trial.norm_squared();
        let predicted = -(step.dot(&g) + 0.5 * step.dot(&(&jtj * &step)));
        let rho = if predicted > 0.0 { (cost - cost_trial) / predicted } else { -1.0 };
        if cost_trial < cost && rho > 0.0 {
            let pnorm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            let small_step = step.norm() <= opts.step_tolerance * (pnorm + opts.step_tolerance);
            let small_gain = (cost - cost_trial) <= 1e-15 * cost;
            p = trial;
            r = r_trial;
            cost = cost_trial;
            history.push(2.0 * cost * sc.ys * sc.ys);
            j = jacobian(&p);
            jtj = j.transpose() * &j;
            g = j.transpose() * &r;
            lambda *= (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            converged = g.amax() < opts.gradient_tolerance || small_step || small_gain;
        } else {
            let pnorm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if step.norm() <= opts.step_tolerance * (pnorm + opts.step_tolerance) {
                // no representable improvement left
                converged = true;
                break;
            }
            lambda *= nu;
            nu *= 2.0;
        }
    }
    if !converged {
        return Err(Error::FitNonConvergence { iterations });
    }

    // back to physical units
    let mut w1 = p[3].abs() * sc.xs;
    let mut w2 = if ind { p[6].abs() * sc.xs } else { w1 };
    let mut c = [sc.x0 + sc.xs * p[2], sc.x0 + sc.xs * p[5]];
    let mut amp = [p[1] * sc.ys, p[4] * sc.ys];
    let swapped = c[0] > c[1];
    if swapped {
        c.swap(0, 1);
        amp.swap(0, 1);
        std::mem::swap(&mut w1, &mut w2);
    }
    let dof = (m as f64 - np as f64).max(1.0);
    let s2 = 2.0 * cost / dof;
    let cov_norm = jtj
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(np, np, f64::NAN))
        * s2;
    // physical parameter order: baseline, amplitude1, center1, fwhm(1), amplitude2, center2, (fwhm2)
    let mut order: Vec<usize> = (0..np).collect();
    if swapped {
        order = if ind { vec![0, 4, 5, 6, 1, 2, 3] } else { vec![0, 4, 5, 3, 1, 2] };
    }
    let scale: Vec<f64> = (0..np)
        .map(|k| match k {
            0 | 1 | 4 => sc.ys,
            _ => sc.xs,
        })
        .collect();
    let covariance = DMatrix::from_fn(np, np, |a, b| {
        let (ia, ib) = (order[a], order[b]);
        cov_norm[(ia, ib)] * scale[ia] * scale[ib]
    });
    let parameter_names = if ind {
        vec!["baseline", "amplitude1", "center1", "fwhm1", "amplitude2", "center2", "fwhm2"]
    } else {
        vec!["baseline", "amplitude1", "center1", "fwhm", "amplitude2", "center2"]
    };
    Ok(DoubleLorentzianFit {
        centers: c,
        fwhm: 0.5 * (w1 + w2),
        fwhms: [w1, w2],
        amplitudes: amp,
        baseline: p[0] * sc.ys,
        splitting: (c[1] - c[0]).abs(),
        covariance,
        parameter_names,
        converged,
        iterations,
        residual_norm: (2.0 * cost).sqrt() * sc.ys,
        cost_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn model_examples() {
        let p = DoubleLorentzian::shared(0.1, [2.0, 1.0], [-50.0, 50.0], 3.0);
        // the far peak adds its Lorentzian tail
        let tail = |d: f64| 2.25 / (d * d + 2.25);
        assert_relative_eq!(double_lorentzian(&p, -50.0), 2.1 + tail(100.0), epsilon = 1e-12);
        assert_relative_eq!(double_lorentzian(&p, -48.5), 1.1 + tail(98.5), epsilon = 1e-12);
        let merged = DoubleLorentzian::shared(0.0, [2.0, 1.0], [0.0, 0.0], 3.0);
        let single = DoubleLorentzian::shared(0.0, [3.0, 0.0], [0.0, 0.0], 3.0);
        for d in [-4.0, -1.0, 0.0, 2.5] {
            assert_relative_eq!(double_lorentzian(&merged, d), double_lorentzian(&single, d), epsilon = 1e-15);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for ind in [false, true] {
            let p = if ind {
                vec![0.05, 0.9, -0.1, 0.2, 0.7, 0.12, 0.25]
            } else {
                vec![0.05, 0.9, -0.1, 0.2, 0.7, 0.12]
            };
            let mut row = vec![0.0; p.len()];
            for u in [-0.3, -0.05, 0.0, 0.11, 0.4] {
                jacobian_row(&p, u, ind, &mut row);
                for k in 0..p.len() {
                    let h = 1e-6;
                    let mut hi = p.clone();
                    let mut lo = p.clone();
                    hi[k] += h;
                    lo[k] -= h;
                    let fd = (model_norm(&hi, u, ind) - model_norm(&lo, u, ind)) / (2.0 * h);
                    assert!((fd - row[k]).abs() < 1e-7, "param {k} at {u}: {fd} vs {}", row[k]);
                }
            }
        }
    }

    #[test]
    fn rejects_constant_and_short_scans() {
        let flat = TransmissionScan::new((0..20).map(f64::from).collect(), vec![1.0; 20]).unwrap();
        assert!(matches!(
            fit_transmission(&flat, None, &FitOptions::default()),
            Err(Error::DegenerateData(_))
        ));
        let short = TransmissionScan::synthesize(&DoubleLorentzian::symmetric(3.0, 3.0, 1.0), -5.0, 5.0, 5).unwrap();
        assert!(fit_transmission(&short, None, &FitOptions::default()).is_err());
    }

    #[test]
    fn ingest_examples() {
        let ok = "detuning_mhz,transmission\n-1.0,0.1\n0.0,0.9\n1.0,0.2\n";
        assert_eq!(ingest_scan(ok.as_bytes()).unwrap().scan.len(), 3);

        let unsorted = "detuning_mhz,transmission\n1.0,0.2\n-1.0,0.1\n0.0,0.9\n";
        let got = ingest_scan(unsorted.as_bytes()).unwrap();
        assert_eq!(got.scan.detuning(), &[-1.0, 0.0, 1.0]);
        assert_eq!(got.scan.signal(), &[0.1, 0.9, 0.2]);
        assert_eq!(got.warnings.len(), 1);

        let negative = "detuning_mhz,transmission\n-1.0,0.1\n0.0,-0.1\n1.0,NaN\n2.0,0.3\n";
        let got = ingest_scan(negative.as_bytes()).unwrap();
        assert_eq!(got.scan.len(), 2);
        assert_eq!(got.rejected.len(), 2);
        assert_eq!(got.rejected[0].line, 3);
        assert_eq!(got.rejected[1].line, 4);

        let bad = "detuning_mhz,transmission\n-1.0,0.1\nabc,0.2\n";
        assert!(matches!(ingest_scan(bad.as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(
            ingest_scan("detuning_mhz,transmission\n".as_bytes()),
            Err(Error::EmptyScan)
        ));
        assert!(matches!(ingest_scan("a,b\n1,2\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}

//! Adaptive Dormand–Prince 5(4) integration of the master equation.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, C64};

use super::config::SystemConfig;
use super::hamiltonian::Model;
use super::lindblad::LindbladGenerator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step (s); `None` leaves it to error control.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: None,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (fifth minus embedded fourth order)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lincomb(out: &mut DMatrix<C64>, y: &DMatrix<C64>, h: f64, terms: &[(f64, &DMatrix<C64>)]) {
    out.copy_from(y);
    for (c, k) in terms {
        if *c != 0.0 {
            axpy(out, h * c, k);
        }
    }
}

/// `y += a·x`
fn axpy(y: &mut DMatrix<C64>, a: f64, x: &DMatrix<C64>) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += xi * a;
    }
}

fn error_norm(err: &DMatrix<C64>, y0: &DMatrix<C64>, y1: &DMatrix<C64>, opts: &SolverOptions) -> f64 {
    let mut worst = 0.0f64;
    for ((e, a), b) in err.iter().zip(y0.iter()).zip(y1.iter()) {
        let scale = opts.atol + opts.rtol * a.norm().max(b.norm());
        worst = worst.max(e.norm() / scale);
    }
    worst
}

/// Integrates `dρ/dt = L(t)ρ` from `times[0]` and returns `ρ` at each entry of
/// `times` (the first being `rho0`). Steps never straddle a sample time or a
/// pulse edge.
pub fn integrate(
    generator: &LindbladGenerator,
    rho0: &DMatrix<C64>,
    times: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<DMatrix<C64>>, SolverStats)> {
    let n = generator.dim();
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.nrows(),
        });
    }
    if times.is_empty() {
        return Ok((Vec::new(), SolverStats::default()));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("sample times must be finite and non-decreasing".into()));
    }
    if !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(Error::InvalidConfig("tolerances must be positive".into()));
    }

    let mut stats = SolverStats::default();
    let mut out = Vec::with_capacity(times.len());
    let mut y = rho0.clone();
    let mut t = times[0];
    out.push(y.clone());

    let zero = || DMatrix::<C64>::zeros(n, n);
    let (mut k1, mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (zero(), zero(), zero(), zero(), zero(), zero(), zero());
    let mut tmp = zero();
    let mut y_new = zero();
    let mut err = zero();

    generator.rhs(t, &y, &mut k1);
    stats.rhs_evaluations += 1;
    let span = times[times.len() - 1] - times[0];
    let mut h = initial_step(generator, t, &y, &k1, opts, span, &mut stats);
    let breaks = generator.breakpoints();

    for &target in &times[1..] {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::ToleranceNotMet {
                    t,
                    steps: stats.accepted + stats.rejected,
                });
            }
            let mut stop = target;
            for &b in &breaks {
                if b > t && b < stop {
                    stop = b;
                }
            }
            if let Some(m) = opts.max_step {
                h = h.min(m);
            }
            let mut h_try = h;
            let mut clipped = false;
            if t + h_try >= stop || (stop - t - h_try) < 1e-12 * (stop - t) {
                h_try = stop - t;
                clipped = true;
            }
            if h_try <= 16.0 * f64::EPSILON * t.abs().max(span.abs()).max(f64::MIN_POSITIVE) {
                if clipped {
                    t = stop;
                    continue;
                }
                return Err(Error::StepSizeUnderflow { t, h: h_try });
            }

            lincomb(&mut tmp, &y, h_try, &[(A21, &k1)]);
            generator.rhs(t + C2 * h_try, &tmp, &mut k2);
            lincomb(&mut tmp, &y, h_try, &[(A31, &k1), (A32, &k2)]);
            generator.rhs(t + C3 * h_try, &tmp, &mut k3);
            lincomb(&mut tmp, &y, h_try, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            generator.rhs(t + C4 * h_try, &tmp, &mut k4);
            lincomb(&mut tmp, &y, h_try, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            generator.rhs(t + C5 * h_try, &tmp, &mut k5);
            lincomb(&mut tmp, &y, h_try, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            generator.rhs(t + h_try, &tmp, &mut k6);
            lincomb(&mut y_new, &y, h_try, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            generator.rhs(t + h_try, &y_new, &mut k7);
            stats.rhs_evaluations += 6;

            err.fill(C64::new(0.0, 0.0));
            for (c, k) in [(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)] {
                axpy(&mut err, h_try * c, k);
            }
            let e = error_norm(&err, &y, &y_new, opts);
            if !e.is_finite() {
                stats.rejected += 1;
                h = h_try * 0.1;
                continue;
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            if e <= 1.0 {
                stats.accepted += 1;
                t = if clipped { stop } else { t + h_try };
                std::mem::swap(&mut y, &mut y_new);
                // FSAL, except at a pulse edge: restart from the right-hand limit
                if breaks.contains(&t) {
                    generator.rhs(t.next_up(), &y, &mut k1);
                    stats.rhs_evaluations += 1;
                } else {
                    std::mem::swap(&mut k1, &mut k7);
                }
                // a clipped step says nothing about the natural step size
                h = if clipped { h.max(h_try * factor) } else { h_try * factor };
            } else {
                stats.rejected += 1;
                h = h_try * factor.min(1.0);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn initial_step(
    generator: &LindbladGenerator,
    t: f64,
    y: &DMatrix<C64>,
    f0: &DMatrix<C64>,
    opts: &SolverOptions,
    span: f64,
    stats: &mut SolverStats,
) -> f64 {
    let scale = |m: &DMatrix<C64>, y: &DMatrix<C64>| {
        m.iter()
            .zip(y.iter())
            .map(|(a, b)| a.norm() / (opts.atol + opts.rtol * b.norm()))
            .fold(0.0f64, f64::max)
    };
    let d0 = scale(y, y);
    let d1 = scale(f0, y);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span.max(1e-12) } else { 0.01 * d0 / d1 };
    if span > 0.0 {
        h0 = h0.min(span);
    }
    let mut y1 = y.clone();
    axpy(&mut y1, h0, f0);
    let mut f1 = DMatrix::zeros(y.nrows(), y.ncols());
    generator.rhs(t + h0, &y1, &mut f1);
    stats.rhs_evaluations += 1;
    let d2 = scale(&(&f1 - f0), y) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6 * h0)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1);
    if let Some(m) = opts.max_step {
        h.min(m)
    } else {
        h
    }
}

/// Sampled solution of one configured run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    model: Arc<Model>,
    stats: SolverStats,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn config(&self) -> &SystemConfig {
        self.model.config()
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Population of each atomic level at every sample.
    pub fn level_population(&self, label: &str) -> Result<Vec<f64>> {
        let scheme = &self.config().scheme;
        let idx = scheme.index_of(label)?;
        let space = self.model.space();
        let flat: Vec<usize> = (0..space.total_dim())
            .filter(|&f| space.factor_indices(f)[0] == idx)
            .collect();
        Ok(self
            .states
            .iter()
            .map(|s| flat.iter().map(|&f| s.matrix()[(f, f)].re).sum())
            .collect())
    }
}

/// Evolves `rho0` under the configured master equation and samples it at `times`.
pub fn evolve(cfg: &SystemConfig, rho0: &DensityMatrix, times: &[f64], opts: &SolverOptions) -> Result<Trajectory> {
    let model = Arc::new(Model::new(cfg)?);
    evolve_model(model, rho0, times, opts)
}

pub fn evolve_model(model: Arc<Model>, rho0: &DensityMatrix, times: &[f64], opts: &SolverOptions) -> Result<Trajectory> {
    if rho0.space() != model.space() {
        return Err(Error::SpaceMismatch);
    }
    rho0.validate(1e-6)?;
    let generator = model.generator();
    let (raw, stats) = integrate(&generator, rho0.matrix(), times, opts)?;
    let states = raw
        .into_iter()
        .map(|m| DensityMatrix::new_unchecked(model.space().clone(), m))
        .collect::<Result<Vec<_>>>()?;
    log::debug!(
        "evolve: {} samples, {} accepted, {} rejected steps",
        times.len(),
        stats.accepted,
        stats.rejected
    );
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        model,
        stats,
    })
}

/// Atom in the scheme's initial level, both cavity modes empty.
pub fn initial_state(cfg: &SystemConfig) -> Result<DensityMatrix> {
    let space = crate::quantum::HilbertSpace::atom_cavity(cfg.scheme.len(), cfg.fock_truncation)?;
    let idx = cfg.scheme.index_of(cfg.scheme.initial_level())?;
    DensityMatrix::basis_state(&space, &[idx, 0, 0])
}

/// `n ≥ 2` evenly spaced samples on `[start, end]`.
pub fn sample_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let step = (end - start) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { end } else { start + step * i as f64 })
        .collect()
}

/// Sample count on `[0, span]` resolving the Δ_P beat with at least
/// `per_period` points and never fewer than `minimum`.
pub fn samples_for(span: f64, delta_p: f64, per_period: usize, minimum: usize) -> usize {
    let periods = span * delta_p.abs() / (2.0 * std::f64::consts::PI);
    // odd count keeps composite Simpson exact on the whole grid
    let n = ((periods * per_period as f64).ceil() as usize + 1).max(minimum);
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

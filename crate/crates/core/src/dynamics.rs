//! Piecewise-Markovian evolution of the cavity moments `(n, <a>, <a^dag>)`.
//!
//! Within each interval the TLS bath is frozen at the state set by the
//! photon number at the start of the interval, which makes the moment system
//! linear and solvable in closed form.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CavityParams, TlsClass};
use crate::tls::{Bath, BathRates};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMoments {
    pub n: f64,
    /// `<a>`; `<a^dag>` is its conjugate.
    pub a_mean: Complex64,
}

impl CavityMoments {
    pub const VACUUM: CavityMoments = CavityMoments {
        n: 0.0,
        a_mean: Complex64::new(0.0, 0.0),
    };

    /// Coherent state with real, non-negative amplitude.
    pub fn coherent(n: f64) -> Self {
        CavityMoments {
            n,
            a_mean: Complex64::new(n.max(0.0).sqrt(), 0.0),
        }
    }

    pub fn phase(&self) -> f64 {
        if self.a_mean == Complex64::new(0.0, 0.0) {
            0.0
        } else {
            self.a_mean.arg()
        }
    }
}

/// Linear system `d/dt (n, <a>, <a^dag>) = A x + v` for one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSystem {
    pub a_matrix: [[Complex64; 3]; 3],
    pub v_vector: [Complex64; 3],
    pub kappa_tilde: f64,
}

impl DriftSystem {
    pub fn apply(&self, x: [Complex64; 3]) -> [Complex64; 3] {
        let mut out = self.v_vector;
        for (row, o) in self.a_matrix.iter().zip(out.iter_mut()) {
            for (a, xi) in row.iter().zip(x.iter()) {
                *o += a * xi;
            }
        }
        out
    }
}

fn effective_linewidth(rates: &BathRates, kappa0: f64) -> Result<f64> {
    let kappa_tilde = kappa0 + rates.kappa_minus - rates.kappa_plus;
    if kappa_tilde > 0.0 && kappa_tilde.is_finite() {
        Ok(kappa_tilde)
    } else {
        Err(Error::SaturationOverflow { kappa_tilde })
    }
}

pub fn build_drift(rates: &BathRates, cavity: &CavityParams) -> Result<DriftSystem> {
    let kt = effective_linewidth(rates, cavity.kappa0)?;
    let zero = Complex64::new(0.0, 0.0);
    let i = Complex64::i();
    let w = rates.omega_prime;
    let feed = rates.kappa_plus + cavity.kappa0 * cavity.thermal_occupation();
    Ok(DriftSystem {
        a_matrix: [
            [Complex64::new(-kt, 0.0), i * w, -i * w.conj()],
            [zero, Complex64::new(-kt / 2.0, 0.0), zero],
            [zero, zero, Complex64::new(-kt / 2.0, 0.0)],
        ],
        v_vector: [Complex64::new(feed, 0.0), -i * w.conj(), i * w],
        kappa_tilde: kt,
    })
}

/// Exact solution of the frozen-rate linear system over `dt`.
pub fn step_closed_form(
    prev: &CavityMoments,
    rates: &BathRates,
    cavity: &CavityParams,
    dt: f64,
) -> Result<CavityMoments> {
    let feed = cavity.kappa0 * cavity.thermal_occupation();
    advance(prev, rates, cavity.kappa0, feed, dt)
}

fn advance(
    prev: &CavityMoments,
    rates: &BathRates,
    kappa0: f64,
    thermal_feed: f64,
    dt: f64,
) -> Result<CavityMoments> {
    let kt = effective_linewidth(rates, kappa0)?;
    let w = rates.omega_prime;
    let w2 = w.norm_sqr();
    let i = Complex64::i();

    let a = (rates.kappa_plus + thermal_feed) / kt + 4.0 * w2 / (kt * kt);
    let c = 4.0 / kt * (i * prev.a_mean * w).re - 8.0 * w2 / (kt * kt);
    let b = prev.n - a - c;
    let decay = (-kt * dt).exp();
    let half = (-0.5 * kt * dt).exp();
    let n = a + b * decay + c * half;

    let a_ss = -2.0 * i * w.conj() / kt;
    let a_mean = a_ss + (prev.a_mean - a_ss) * half;
    Ok(CavityMoments {
        n: n.max(0.0),
        a_mean,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Number of grid points; `None` picks `max(10 T2*, t_final / 1e5)` spacing.
    pub m_steps: Option<usize>,
    /// Required separation factor in `T2* << dt << 1/kappa0`.
    pub window_margin: f64,
    pub check_window: bool,
    /// Re-run at half spacing and require agreement to `convergence_tol`.
    pub verify_convergence: bool,
    pub convergence_tol: f64,
    /// Doublings attempted when the automatic grid fails verification.
    pub max_refinements: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            m_steps: None,
            window_margin: 10.0,
            check_window: true,
            verify_convergence: true,
            convergence_tol: 1e-3,
            max_refinements: 3,
        }
    }
}

impl SolverOptions {
    /// Fixed grid, no window or refinement checks. Used inside fits.
    pub fn unchecked(m_steps: usize) -> Self {
        SolverOptions {
            m_steps: Some(m_steps),
            check_window: false,
            verify_convergence: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub moments: Vec<CavityMoments>,
    /// Bath rates evaluated at each stored point.
    pub rates: Vec<BathRates>,
    pub kappa0: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn photon_numbers(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.n).collect()
    }

    pub fn kappa_tilde(&self, index: usize) -> f64 {
        let r = &self.rates[index];
        self.kappa0 + r.kappa_minus - r.kappa_plus
    }

    /// Log-ratio linewidth relative to the first point.
    pub fn kappa_series(&self) -> Result<KappaSeries> {
        kappa_of_time(&self.times, &self.photon_numbers(), 0)
    }
}

fn markov_window(
    bath_t2_max: f64,
    kappa0: f64,
    dt: f64,
    margin: f64,
) -> Result<()> {
    let lower = margin * bath_t2_max;
    let upper = 1.0 / (margin * kappa0);
    if dt < lower || dt > upper {
        return Err(Error::MarkovWindow { dt, lower, upper });
    }
    Ok(())
}

fn max_t2(classes: &[TlsClass], temperature: f64) -> Result<f64> {
    classes
        .iter()
        .filter(|c| c.count > 0.0 && c.g > 0.0)
        .map(|c| c.t2_star(temperature))
        .try_fold(0.0f64, |acc, t| Ok(acc.max(t?)))
}

fn default_steps(t2_max: f64, t_final: f64) -> usize {
    let dt = (10.0 * t2_max).max(t_final / 1e5);
    // round the step count down so the spacing never falls below `dt`
    ((t_final / dt).floor() as usize + 1).max(2)
}

fn integrate(
    bath: &Bath,
    cavity: &CavityParams,
    omega_ext: Complex64,
    initial: CavityMoments,
    t_final: f64,
    m: usize,
) -> Result<Trajectory> {
    let feed = cavity.kappa0 * cavity.thermal_occupation();
    let denom = (m - 1) as f64;
    let dt = t_final / denom;
    let mut times = Vec::with_capacity(m);
    let mut moments = Vec::with_capacity(m);
    let mut rates = Vec::with_capacity(m);
    let mut state = initial;
    for i in 0..m {
        let r = bath.rates(state.n, state.phase(), omega_ext);
        times.push(t_final * i as f64 / denom);
        moments.push(state);
        rates.push(r);
        if i + 1 < m {
            state = advance(&state, &r, cavity.kappa0, feed, dt)?;
        }
    }
    Ok(Trajectory {
        times,
        moments,
        rates,
        kappa0: cavity.kappa0,
    })
}

fn max_relative_gap(coarse: &Trajectory, fine: &Trajectory) -> f64 {
    coarse
        .moments
        .iter()
        .zip(fine.moments.iter().step_by(2))
        .map(|(c, f)| {
            let scale = c.n.abs().max(f.n.abs());
            if scale == 0.0 {
                0.0
            } else {
                (c.n - f.n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

fn evolve(
    initial: CavityMoments,
    classes: &[TlsClass],
    cavity: &CavityParams,
    omega_ext: Complex64,
    t_final: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    cavity.validate()?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::invalid("t_final must be positive and finite"));
    }
    let bath = Bath::new(classes, cavity.omega0(), cavity.temperature)?;
    let t2_max = max_t2(classes, cavity.temperature)?;
    let mut m = opts.m_steps.unwrap_or_else(|| default_steps(t2_max, t_final));
    if m < 2 {
        return Err(Error::invalid("at least two grid points are required"));
    }
    if opts.check_window {
        markov_window(t2_max, cavity.kappa0, t_final / (m - 1) as f64, opts.window_margin)?;
    }
    let mut coarse = integrate(&bath, cavity, omega_ext, initial, t_final, m)?;
    if !opts.verify_convergence {
        return Ok(coarse);
    }
    let refinements = if opts.m_steps.is_some() { 0 } else { opts.max_refinements };
    for attempt in 0..=refinements {
        let fine_m = 2 * m - 1;
        let fine = integrate(&bath, cavity, omega_ext, initial, t_final, fine_m)?;
        let gap = max_relative_gap(&coarse, &fine);
        if gap < opts.convergence_tol {
            return Ok(coarse);
        }
        if attempt == refinements {
            return Err(Error::StepRefinement {
                coarse_steps: m,
                fine_steps: fine_m,
                max_rel_diff: gap,
                tolerance: opts.convergence_tol,
            });
        }
        log::debug!("refining grid from {m} to {fine_m} points (gap {gap:e})");
        m = fine_m;
        coarse = fine;
    }
    unreachable!("refinement loop always returns")
}

/// Free decay from `initial` with the drive switched off.
pub fn evolve_ringdown(
    initial: CavityMoments,
    classes: &[TlsClass],
    cavity: &CavityParams,
    t_final: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if !(initial.n > 0.0) {
        return Err(Error::invalid("ring-down needs a positive initial photon number"));
    }
    evolve(initial, classes, cavity, Complex64::new(0.0, 0.0), t_final, opts)
}

/// Driven build-up from the vacuum.
pub fn evolve_ringup(
    classes: &[TlsClass],
    cavity: &CavityParams,
    omega_ext: Complex64,
    t_final: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if !(omega_ext.norm() > 0.0) {
        return Err(Error::invalid("ring-up needs a non-zero drive"));
    }
    evolve(CavityMoments::VACUUM, classes, cavity, omega_ext, t_final, opts)
}

const STEADY_DAMPING: f64 = 0.5;
const STEADY_TOL: f64 = 1e-10;
const STEADY_MAX_ITER: usize = 10_000;
const HISTORY_KEPT: usize = 100;

/// Self-consistent stationary moments under the drive `omega_ext`.
pub fn steady_state(
    classes: &[TlsClass],
    cavity: &CavityParams,
    omega_ext: Complex64,
) -> Result<CavityMoments> {
    cavity.validate()?;
    let bath = Bath::new(classes, cavity.omega0(), cavity.temperature)?;
    let feed = cavity.kappa0 * cavity.thermal_occupation();
    // the mean field settles on the phase of -i conj(omega_ext)
    let phase = if omega_ext.norm() > 0.0 {
        (-Complex64::i() * omega_ext.conj()).arg()
    } else {
        0.0
    };
    let bare = feed / cavity.kappa0 + 4.0 * omega_ext.norm_sqr() / cavity.kappa0.powi(2);

    let image = |n: f64| -> Result<(f64, Complex64)> {
        let r = bath.rates(n, phase, omega_ext);
        let kt = effective_linewidth(&r, cavity.kappa0)?;
        let w = r.omega_prime;
        let n_new = (r.kappa_plus + feed) / kt + 4.0 * w.norm_sqr() / (kt * kt);
        Ok((n_new, -2.0 * Complex64::i() * w.conj() / kt))
    };

    let solve = |start: f64| -> Result<CavityMoments> {
        let mut n = start;
        let mut history = Vec::new();
        for _ in 0..STEADY_MAX_ITER {
            let (target, a_mean) = image(n)?;
            let residual = (target - n).abs() / target.abs().max(f64::MIN_POSITIVE);
            if history.len() == HISTORY_KEPT {
                history.remove(0);
            }
            history.push(residual);
            if residual <= STEADY_TOL || target == n {
                return Ok(CavityMoments { n: target, a_mean });
            }
            n = (1.0 - STEADY_DAMPING) * n + STEADY_DAMPING * target;
        }
        Err(Error::FixedPointDivergence {
            iterations: STEADY_MAX_ITER,
            last_residual: history.last().copied().unwrap_or(f64::NAN),
            residual_history: history,
        })
    };

    let low = solve(0.0)?;
    if bath.is_empty() {
        return Ok(low);
    }
    let high = solve(bare)?;
    let scale = low.n.abs().max(high.n.abs());
    if scale > 0.0 && (low.n - high.n).abs() / scale > 1e-6 {
        return Err(Error::MultipleSteadyStates {
            first: low.n,
            second: high.n,
        });
    }
    Ok(high)
}

/// `kappa(t) = -ln(v(t)/v_ref) / (t - t_ref)` for points after the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaSeries {
    pub times: Vec<f64>,
    pub kappa: Vec<f64>,
}

pub fn kappa_of_time(times: &[f64], values: &[f64], reference_index: usize) -> Result<KappaSeries> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch {
            what: "times and values",
            left: times.len(),
            right: values.len(),
        });
    }
    if reference_index >= times.len() {
        return Err(Error::invalid("reference index out of range"));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::invalid(format!("value {v} at index {i} is not strictly positive")));
    }
    let t0 = times[reference_index];
    let ln0 = values[reference_index].ln();
    let mut out = KappaSeries {
        times: Vec::new(),
        kappa: Vec::new(),
    };
    for (&t, &v) in times.iter().zip(values).skip(reference_index + 1) {
        let elapsed = t - t0;
        if elapsed == 0.0 {
            continue;
        }
        out.times.push(t);
        out.kappa.push(-(v.ln() - ln0) / elapsed);
    }
    Ok(out)
}

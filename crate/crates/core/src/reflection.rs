//! Reflected-power transients of a resonator in reflection, quality-factor
//! extraction from ring-downs, and the complex-plane circle fit.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::KappaSeries;
use crate::error::{Error, Result};
use crate::fitting::{minimize, FitOptions, FitProblem, FitResult, Parameter};
use crate::numeric::rolling_mean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionParams {
    pub q_int: f64,
    pub q_c: f64,
    pub f0: f64,
    /// Drive detuning in Hz.
    pub delta: f64,
    /// Forward power in W.
    pub p_f: f64,
}

impl ReflectionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q_int", self.q_int), ("q_c", self.q_c), ("f0", self.f0), ("p_f", self.p_f)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("delta must be finite"));
        }
        Ok(())
    }

    pub fn q_loaded(&self) -> f64 {
        1.0 / (1.0 / self.q_c + 1.0 / self.q_int)
    }

    /// Field amplitude decay rate `pi f0 / Q_l`.
    pub fn amplitude_decay(&self) -> f64 {
        PI * self.f0 / self.q_loaded()
    }
}

/// Reflected power after a drive switched on at t = 0.
pub fn ringup_power(t: f64, p: &ReflectionParams) -> f64 {
    let (qc, qi, f0, d) = (p.q_c, p.q_int, p.f0, p.delta);
    let det = 2.0 * qc * qi * d;
    let denom = (qc + qi).powi(2) * f0 * f0 + det * det;
    let rate = (qc + qi) * PI * f0 / (qc * qi);
    let e1 = (-rate * t).exp();
    let phase = 2.0 * PI * d * t;
    let bracket = det * det
        + 4.0 * e1 * e1 * qi * qi * f0 * f0
        + (qc - qi).powi(2) * f0 * f0
        + 4.0 * qi * f0 * e1 * ((qc - qi) * f0 * phase.cos() - det * phase.sin());
    p.p_f / denom * bracket
}

/// Steady-state coupling factor `K = (2 Q_l / Q_c) / (1 + 2 i Q_l delta / f0)`.
fn coupling_factor(p: &ReflectionParams) -> Complex64 {
    let ql = p.q_loaded();
    Complex64::new(2.0 * ql / p.q_c, 0.0) / Complex64::new(1.0, 2.0 * ql * p.delta / p.f0)
}

/// Complex reflected amplitude `V_r / V_f` during the drive.
pub fn reflected_amplitude(t: f64, p: &ReflectionParams) -> Complex64 {
    let k = coupling_factor(p);
    let decay = Complex64::new(-p.amplitude_decay(), -2.0 * PI * p.delta) * t;
    (k - 1.0) - k * decay.exp()
}

/// Reflected power `t_after` seconds after a drive of length `t_on` is
/// switched off: only the cavity emission remains.
pub fn ringdown_power(t_after: f64, t_on: f64, p: &ReflectionParams) -> f64 {
    let k = coupling_factor(p);
    let filled = 1.0 - (Complex64::new(-p.amplitude_decay(), -2.0 * PI * p.delta) * t_on).exp();
    p.p_f * (k * filled).norm_sqr() * (-2.0 * p.amplitude_decay() * t_after).exp()
}

/// `|Gamma|^2` in the driven steady state.
pub fn steady_state_reflection(p: &ReflectionParams) -> f64 {
    let det = 2.0 * p.q_c * p.q_int * p.delta;
    let f0 = p.f0;
    (det * det + (p.q_c - p.q_int).powi(2) * f0 * f0)
        / ((p.q_c + p.q_int).powi(2) * f0 * f0 + det * det)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingupFitOptions {
    /// Relative 1-sigma of each power sample.
    pub relative_noise: f64,
    /// Absolute sigma floor as a fraction of the largest sample.
    pub floor_fraction: f64,
    pub solver: FitOptions,
}

impl Default for RingupFitOptions {
    fn default() -> Self {
        RingupFitOptions {
            relative_noise: 0.01,
            floor_fraction: 1e-4,
            solver: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingupFit {
    pub params: ReflectionParams,
    pub sigma_q_int: f64,
    pub sigma_q_c: f64,
    pub sigma_delta: f64,
    pub sigma_p_f: f64,
    pub fit: FitResult,
}

/// Rejects traces that carry no information on the two quality factors:
/// neither a dip followed by a rise nor a settled tail.
fn check_ringup_identifiable(powers: &[f64], rel_noise: f64) -> Result<()> {
    let n = powers.len();
    if n < 10 {
        return Err(Error::Unidentifiable("fewer than 10 samples".into()));
    }
    let smooth = rolling_mean(powers, 5);
    let (i_min, p_min) = smooth
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let p_max = smooth.iter().copied().fold(0.0, f64::max);
    let last = smooth[n - 1];
    let margin = 5.0 * rel_noise.max(1e-6);
    let dip = i_min + n / 20 < n && last > p_min * (1.0 + margin) + 1e-3 * p_max;
    let tail = &smooth[n - n / 5..];
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let tail_span = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().copied().fold(f64::INFINITY, f64::min);
    let settled = tail_span <= margin * tail_mean.abs() && smooth[0] > tail_mean * (1.0 + margin);
    if dip || settled {
        Ok(())
    } else {
        Err(Error::Unidentifiable(
            "trace shows neither a reflection dip with recovery nor a settled steady state".into(),
        ))
    }
}

/// Least-squares fit of `ringup_power` to a measured trace starting at switch-on.
pub fn fit_ringup(
    times: &[f64],
    powers: &[f64],
    init: &ReflectionParams,
    opts: &RingupFitOptions,
) -> Result<RingupFit> {
    init.validate()?;
    if times.len() != powers.len() {
        return Err(Error::LengthMismatch {
            what: "times and powers",
            left: times.len(),
            right: powers.len(),
        });
    }
    if powers.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("powers must be finite"));
    }
    check_ringup_identifiable(powers, opts.relative_noise)?;
    let p_max = powers.iter().copied().fold(0.0, f64::max);
    let sigma: Vec<f64> = powers
        .iter()
        .map(|p| opts.relative_noise * p.abs() + opts.floor_fraction * p_max)
        .collect();
    let f0 = init.f0;
    let problem = FitProblem::new(
        vec![
            Parameter::log("q_int", init.q_int, 1.0, 1e15),
            Parameter::log("q_c", init.q_c, 1.0, 1e15),
            Parameter::linear("delta", init.delta.abs().max(1e-3), 0.0, 1e6).with_typical(1.0),
            Parameter::log("p_f", init.p_f, 1e-30, 1e10),
        ],
        sigma,
        move |x| {
            let p = ReflectionParams {
                q_int: x[0],
                q_c: x[1],
                f0,
                delta: x[2],
                p_f: x[3],
            };
            Ok(times.iter().zip(powers).map(|(&t, &y)| ringup_power(t, &p) - y).collect())
        },
    );
    let fit = minimize(&problem, &opts.solver)?;
    let params = ReflectionParams {
        q_int: fit.values[0],
        q_c: fit.values[1],
        f0,
        delta: fit.values[2],
        p_f: fit.values[3],
    };
    Ok(RingupFit {
        params,
        sigma_q_int: fit.sigma[0],
        sigma_q_c: fit.sigma[1],
        sigma_delta: fit.sigma[2],
        sigma_p_f: fit.sigma[3],
        fit,
    })
}

/// `Q_int(t) = omega0 / (kappa(t) - kappa_c)`. With `window`, kappa is first
/// smoothed by a centered rolling mean of that many points.
pub fn ringdown_q(
    series: &KappaSeries,
    kappa_c: f64,
    omega0: f64,
    window: Option<usize>,
) -> Result<Vec<f64>> {
    let kappa = match window {
        Some(w) => rolling_mean(&series.kappa, w),
        None => series.kappa.clone(),
    };
    kappa
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            if k > kappa_c {
                Ok(omega0 / (k - kappa_c))
            } else {
                Err(Error::invalid(format!(
                    "kappa {k} at index {i} does not exceed the coupling rate {kappa_c}"
                )))
            }
        })
        .collect()
}

/// Complex reflection sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSweep {
    pub frequencies: Vec<f64>,
    pub s11: Vec<Complex64>,
}

/// Environment-dressed reflection of a single resonance:
/// `a e^{i alpha} e^{-2 pi i f tau} [1 - (2 Q_l / |Q_c|) e^{i phi} / (1 + 2 i Q_l (f/f_r - 1))]`,
/// with `1/Q_l = 1/Q_int + cos(phi)/|Q_c|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionResonator {
    pub f_r: f64,
    pub q_int: f64,
    pub q_c: f64,
    pub phi: f64,
    pub amplitude: f64,
    pub alpha: f64,
    pub delay: f64,
}

impl ReflectionResonator {
    pub fn q_loaded(&self) -> f64 {
        1.0 / (1.0 / self.q_int + self.phi.cos() / self.q_c)
    }

    pub fn s11(&self, f: f64) -> Complex64 {
        let ql = self.q_loaded();
        let env = Complex64::from_polar(self.amplitude, self.alpha - 2.0 * PI * f * self.delay);
        let res = Complex64::from_polar(2.0 * ql / self.q_c, self.phi)
            / Complex64::new(1.0, 2.0 * ql * (f / self.f_r - 1.0));
        env * (1.0 - res)
    }

    pub fn sweep(&self, frequencies: &[f64]) -> ComplexSweep {
        ComplexSweep {
            frequencies: frequencies.to_vec(),
            s11: frequencies.iter().map(|&f| self.s11(f)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleFit {
    pub resonator: ReflectionResonator,
    pub q_loaded: f64,
    /// Circle radius after removing the environment.
    pub radius: f64,
    pub sigma_f_r: f64,
    pub sigma_q_int: f64,
    pub sigma_q_c: f64,
    pub sigma_phi: f64,
    pub fit: FitResult,
}

/// Algebraic circle fit (Taubin, Newton-solved). Returns center and radius.
pub fn taubin_circle(points: &[Complex64]) -> Result<(Complex64, f64)> {
    let n = points.len() as f64;
    if points.len() < 3 {
        return Err(Error::NonCircular("fewer than three points".into()));
    }
    let mean = points.iter().sum::<Complex64>() / n;
    let (mut mxx, mut myy, mut mxy, mut mxz, mut myz, mut mzz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let (x, y) = (p.re - mean.re, p.im - mean.im);
        let z = x * x + y * y;
        mxx += x * x;
        myy += y * y;
        mxy += x * y;
        mxz += x * z;
        myz += y * z;
        mzz += z * z;
    }
    let (mxx, myy, mxy, mxz, myz, mzz) = (mxx / n, myy / n, mxy / n, mxz / n, myz / n, mzz / n);
    let mz = mxx + myy;
    if !(mz > 0.0) {
        return Err(Error::NonCircular("all points coincide".into()));
    }
    let cov_xy = mxx * myy - mxy * mxy;
    let var_z = mzz - mz * mz;
    let a3 = 4.0 * mz;
    let a2 = -3.0 * mz * mz - mzz;
    let a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
    let a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
    let (a22, a33) = (a2 + a2, a3 + a3 + a3);
    let mut x = 0.0;
    let mut y = a0;
    for _ in 0..100 {
        let dy = a1 + x * (a22 + a33 * x);
        let x_new = x - y / dy;
        if x_new == x || !x_new.is_finite() {
            break;
        }
        let y_new = a0 + x_new * (a1 + x_new * (a2 + x_new * a3));
        if y_new.abs() >= y.abs() {
            break;
        }
        x = x_new;
        y = y_new;
    }
    let det = x * x - x * mz + cov_xy;
    let cx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
    let cy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
    let radius = (cx * cx + cy * cy + mz).sqrt();
    if !(radius.is_finite() && cx.is_finite() && cy.is_finite()) {
        return Err(Error::NonCircular("algebraic circle fit is degenerate".into()));
    }
    Ok((mean + Complex64::new(cx, cy), radius))
}

fn circle_rms(points: &[Complex64], center: Complex64, radius: f64) -> f64 {
    (points.iter().map(|p| ((p - center).norm() - radius).powi(2)).sum::<f64>() / points.len() as f64).sqrt()
}

fn remove_delay(sweep: &ComplexSweep, tau: f64) -> Vec<Complex64> {
    sweep
        .frequencies
        .iter()
        .zip(&sweep.s11)
        .map(|(&f, &s)| s * Complex64::from_polar(1.0, 2.0 * PI * f * tau))
        .collect()
}

fn unwrap(phases: &mut [f64]) {
    for i in 1..phases.len() {
        let mut d = phases[i] - phases[i - 1];
        while d > PI {
            phases[i] -= 2.0 * PI;
            d -= 2.0 * PI;
        }
        while d < -PI {
            phases[i] += 2.0 * PI;
            d += 2.0 * PI;
        }
    }
}

fn edge_slope(f: &[f64], phase: &[f64]) -> f64 {
    let n = f.len();
    let m = (n / 10).max(2);
    let slope = |xs: &[f64], ys: &[f64]| {
        let k = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    };
    0.5 * (slope(&f[..m], &phase[..m]) + slope(&f[n - m..], &phase[n - m..]))
}

/// Golden-section search for the delay that makes the data most circular.
fn refine_delay(sweep: &ComplexSweep, guess: f64, width: f64) -> f64 {
    let cost = |tau: f64| {
        let z = remove_delay(sweep, tau);
        match taubin_circle(&z) {
            Ok((c, r)) => circle_rms(&z, c, r) / r,
            Err(_) => f64::INFINITY,
        }
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (guess - width, guess + width);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    0.5 * (a + b)
}

const MIN_SPAN_LINEWIDTHS: f64 = 3.0;
const MAX_CIRCLE_RESIDUAL: f64 = 0.1;

/// Circle fit of a reflection sweep followed by a full complex refinement.
pub fn circle_fit(sweep: &ComplexSweep) -> Result<CircleFit> {
    let n = sweep.frequencies.len();
    if n != sweep.s11.len() {
        return Err(Error::LengthMismatch {
            what: "frequencies and s11",
            left: n,
            right: sweep.s11.len(),
        });
    }
    if n < 10 {
        return Err(Error::invalid("a circle fit needs at least 10 points"));
    }
    if sweep.frequencies.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("frequencies must be strictly increasing"));
    }
    let f = &sweep.frequencies;
    let span = f[n - 1] - f[0];
    let f_mid = 0.5 * (f[0] + f[n - 1]);

    let mean = sweep.s11.iter().sum::<Complex64>() / n as f64;
    let spread = sweep.s11.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
    if !(spread > 1e-9 * mean.norm()) {
        return Err(Error::NonCircular("sweep has no resonance response".into()));
    }

    // 1. cable delay
    let mut raw_phase: Vec<f64> = sweep.s11.iter().map(|s| s.arg()).collect();
    unwrap(&mut raw_phase);
    let tau0 = -edge_slope(f, &raw_phase) / (2.0 * PI);
    let tau = refine_delay(sweep, tau0, 0.5 / span.max(f64::MIN_POSITIVE));
    let z = remove_delay(sweep, tau);

    // 2. circle
    let (center, radius) = taubin_circle(&z)?;
    let rel_rms = circle_rms(&z, center, radius) / radius;
    let scale = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(rel_rms < MAX_CIRCLE_RESIDUAL) || radius < 1e-9 * scale {
        return Err(Error::NonCircular(format!(
            "relative circle residual {rel_rms:.3e}, radius {radius:.3e}"
        )));
    }

    // 3. phase response around the center
    let mut theta: Vec<f64> = z.iter().map(|v| (v - center).arg()).collect();
    unwrap(&mut theta);
    let i_res = (1..n)
        .max_by(|&a, &b| {
            let da = (theta[a] - theta[a - 1]).abs() / (f[a] - f[a - 1]);
            let db = (theta[b] - theta[b - 1]).abs() / (f[b] - f[b - 1]);
            da.total_cmp(&db)
        })
        .unwrap_or(n / 2);
    let fr_guess = 0.5 * (f[i_res] + f[i_res - 1]);
    let theta_res = 0.5 * (theta[i_res] + theta[i_res - 1]);
    // the half-turn points sit one half linewidth from resonance
    let width_guess = {
        let lo = theta.iter().position(|&t| (t - theta_res).abs() < PI / 2.0).unwrap_or(0);
        let hi = theta.iter().rposition(|&t| (t - theta_res).abs() < PI / 2.0).unwrap_or(n - 1);
        (f[hi] - f[lo]).max(f[1] - f[0])
    };
    let ql_guess = fr_guess / width_guess;
    let phase_problem = FitProblem::new(
        vec![
            Parameter::linear("theta0", theta_res, theta_res - 2.0 * PI, theta_res + 2.0 * PI),
            Parameter::log("q_l", ql_guess, ql_guess * 1e-3, ql_guess * 1e3),
            Parameter::linear("offset", 0.0, -1e4, 1e4).with_typical(1.0),
        ],
        vec![1.0; n],
        |p| {
            let fr = fr_guess + p[2] * fr_guess / ql_guess;
            Ok(f.iter()
                .zip(&theta)
                .map(|(&fi, &t)| p[0] + 2.0 * (2.0 * p[1] * (1.0 - fi / fr)).atan() - t)
                .collect())
        },
    );
    let phase_fit = minimize(&phase_problem, &FitOptions::default())?;
    let theta0 = phase_fit.values[0];
    let ql = phase_fit.values[1];
    let fr = fr_guess + phase_fit.values[2] * fr_guess / ql_guess;
    let linewidth = fr / ql;
    let span_linewidths = span / linewidth;
    if span_linewidths < MIN_SPAN_LINEWIDTHS {
        return Err(Error::InsufficientSpan {
            span_linewidths,
            required: MIN_SPAN_LINEWIDTHS,
        });
    }

    // 4. environment from the off-resonant point, 5. normalized circle
    let off = center + Complex64::from_polar(radius, theta0 + PI);
    let zc = center / off;
    let r_norm = radius / off.norm();
    let qc = ql / r_norm;
    let phi = (1.0 - zc).arg();
    let inv_qi = 1.0 / ql - phi.cos() / qc;
    let qi = if inv_qi > 0.0 { 1.0 / inv_qi } else { 1e3 * ql };

    // 6. full complex refinement
    // band-center phase, wrapped so finite-difference steps stay small
    let alpha_mid = (off.arg() - 2.0 * PI * f_mid * tau + PI).rem_euclid(2.0 * PI) - PI;
    let start = ReflectionResonator {
        f_r: fr,
        q_int: qi,
        q_c: qc,
        phi,
        amplitude: off.norm(),
        alpha: alpha_mid,
        delay: tau,
    };
    let s = &sweep.s11;
    let refine = FitProblem::new(
        vec![
            Parameter::linear("f_r_offset", 0.0, -1e3, 1e3).with_typical(1.0),
            Parameter::log("q_int", qi, qi * 1e-3, qi * 1e3),
            Parameter::log("q_c", qc, qc * 1e-3, qc * 1e3),
            Parameter::linear("phi", phi, -PI, PI).with_typical(1.0),
            Parameter::log("amplitude", start.amplitude, start.amplitude * 1e-3, start.amplitude * 1e3),
            Parameter::linear("alpha", start.alpha, start.alpha - 4.0 * PI, start.alpha + 4.0 * PI).with_typical(1.0),
            Parameter::linear("delay_offset", 0.0, -10.0, 10.0).with_typical(1.0),
        ],
        vec![1.0; 2 * n],
        |p| {
            let model = ReflectionResonator {
                f_r: fr + p[0] * linewidth,
                q_int: p[1],
                q_c: p[2],
                phi: p[3],
                amplitude: p[4],
                // alpha is referenced to the band center to decouple it from the delay
                alpha: p[5] + 2.0 * PI * f_mid * (tau + p[6] / span),
                delay: tau + p[6] / span,
            };
            let mut out = Vec::with_capacity(2 * n);
            for (&fi, &si) in f.iter().zip(s) {
                let d = model.s11(fi) - si;
                out.push(d.re);
                out.push(d.im);
            }
            Ok(out)
        },
    );
    let fit = minimize(&refine, &FitOptions::default())?;
    let v = &fit.values;
    let delay = tau + v[6] / span;
    let resonator = ReflectionResonator {
        f_r: fr + v[0] * linewidth,
        q_int: v[1],
        q_c: v[2],
        phi: v[3],
        amplitude: v[4],
        alpha: v[5] + 2.0 * PI * f_mid * delay,
        delay,
    };
    Ok(CircleFit {
        q_loaded: resonator.q_loaded(),
        radius: resonator.q_loaded() / resonator.q_c,
        sigma_f_r: fit.sigma[0] * linewidth,
        sigma_q_int: fit.sigma[1],
        sigma_q_c: fit.sigma[2],
        sigma_phi: fit.sigma[3],
        resonator,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn paper_like(delta: f64) -> ReflectionParams {
        ReflectionParams {
            q_int: 5.3e8,
            q_c: 1e8,
            f0: 7.9e9,
            delta,
            p_f: 1e-9,
        }
    }

    #[test]
    fn full_reflection_at_switch_on() {
        let p = paper_like(0.0);
        assert_relative_eq!(ringup_power(0.0, &p), p.p_f, max_relative = 1e-15);
    }

    #[test]
    fn critical_coupling_reflects_nothing() {
        let p = ReflectionParams { q_int: 3e8, q_c: 3e8, ..paper_like(0.0) };
        assert!(ringup_power(1.0, &p) < 1e-20 * p.p_f);
        assert_eq!(steady_state_reflection(&p), 0.0);
    }

    #[test]
    fn long_time_limit() {
        let p = paper_like(0.0);
        let expected = p.p_f * ((p.q_c - p.q_int) / (p.q_c + p.q_int)).powi(2);
        assert_relative_eq!(ringup_power(0.5, &p), expected, max_relative = 1e-12);
        assert_relative_eq!(steady_state_reflection(&p) * p.p_f, expected, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_matches_field_picture() {
        for delta in [0.0, 0.8, -1.1, 25.0] {
            let p = paper_like(delta);
            for i in 0..200 {
                let t = f64::from(i) * 1e-4;
                let a = ringup_power(t, &p);
                let b = p.p_f * reflected_amplitude(t, &p).norm_sqr();
                assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-14 * p.p_f);
            }
        }
    }

    #[test]
    fn detuning_lifts_steady_state() {
        let resonant = steady_state_reflection(&ReflectionParams { q_int: 1e8, ..paper_like(0.0) });
        let detuned = steady_state_reflection(&ReflectionParams { q_int: 1e8, ..paper_like(1.0) });
        assert!(detuned > resonant);
        let over = steady_state_reflection(&ReflectionParams { q_c: 1e3, ..paper_like(0.0) });
        assert!(over > 0.9999);
    }

    #[test]
    fn decay_branch_starts_from_cavity_emission() {
        let p = paper_like(0.0);
        let t_on = 0.05;
        let k = 2.0 * p.q_loaded() / p.q_c;
        assert_relative_eq!(ringdown_power(0.0, t_on, &p), p.p_f * k * k, max_relative = 1e-6);
        let later = ringdown_power(1e-3, t_on, &p);
        assert_relative_eq!(later / ringdown_power(0.0, t_on, &p), (-2.0 * p.amplitude_decay() * 1e-3).exp(), max_relative = 1e-12);
    }

    #[test]
    fn ringdown_q_examples() {
        let series = KappaSeries { times: vec![1.0, 2.0, 3.0], kappa: vec![200.0; 3] };
        let q = ringdown_q(&series, 100.0, 5e10, None).unwrap();
        assert!(q.iter().all(|&v| v == 5e8));
        assert!(ringdown_q(&series, 250.0, 5e10, None).is_err());
        let two_rate = KappaSeries { times: vec![1.0, 2.0], kappa: vec![300.0, 500.0] };
        let q = ringdown_q(&two_rate, 100.0, 1e10, None).unwrap();
        assert_relative_eq!(q[0], 1e10 / 200.0);
        assert_relative_eq!(q[1], 1e10 / 400.0);
    }

    #[test]
    fn truncated_ringup_is_unidentifiable() {
        let p = paper_like(0.8);
        let times: Vec<f64> = (0..200).map(|i| f64::from(i) * 5e-6).collect();
        let powers: Vec<f64> = times.iter().map(|&t| ringup_power(t, &p)).collect();
        let err = fit_ringup(&times, &powers, &p, &RingupFitOptions::default());
        assert!(matches!(err, Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn ringup_fit_round_trip_with_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let truth = paper_like(0.8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let times: Vec<f64> = (0..3000).map(|i| f64::from(i) * 1e-5).collect();
        let powers: Vec<f64> = times
            .iter()
            .map(|&t| ringup_power(t, &truth) * (1.0 + noise.sample(&mut rng)))
            .collect();
        let init = ReflectionParams { q_int: 4e8, q_c: 1.3e8, delta: 0.5, p_f: 1.1e-9, ..truth };
        let fit = fit_ringup(&times, &powers, &init, &RingupFitOptions::default()).unwrap();
        assert_relative_eq!(fit.params.q_int, truth.q_int, max_relative = 0.01);
        assert_relative_eq!(fit.params.q_c, truth.q_c, max_relative = 0.01);
        // 3000 samples only pin the detuning to about 0.1 Hz
        assert!((fit.params.delta - truth.delta).abs() < 3.0 * fit.sigma_delta);
        assert!(fit.sigma_delta < 0.2);
    }

    #[test]
    fn radius_grows_with_internal_q() {
        let low = circle_fit(&sweep_for(5.3e8, 401, 10.0)).unwrap();
        let high = circle_fit(&sweep_for(9.4e8, 401, 10.0)).unwrap();
        assert!(high.radius > low.radius);
    }

    fn sweep_for(q_int: f64, points: usize, half_span_lw: f64) -> ComplexSweep {
        let r = ReflectionResonator {
            f_r: 7.9e9,
            q_int,
            q_c: 1e8,
            phi: 0.0,
            amplitude: 1.0,
            alpha: 0.0,
            delay: 0.0,
        };
        let lw = r.f_r / r.q_loaded();
        let f: Vec<f64> = (0..points)
            .map(|i| r.f_r + lw * half_span_lw * (2.0 * i as f64 / (points - 1) as f64 - 1.0))
            .collect();
        r.sweep(&f)
    }

    #[test]
    fn taubin_recovers_exact_circle() {
        let pts: Vec<Complex64> = (0..50)
            .map(|i| Complex64::new(0.3, -0.2) + Complex64::from_polar(0.7, f64::from(i) * 0.1))
            .collect();
        let (c, r) = taubin_circle(&pts).unwrap();
        assert_relative_eq!(r, 0.7, max_relative = 1e-12);
        assert!((c - Complex64::new(0.3, -0.2)).norm() < 1e-12);
    }

    #[test]
    fn circle_fit_round_trip() {
        let fit = circle_fit(&sweep_for(5.3e8, 401, 10.0)).unwrap();
        assert_relative_eq!(fit.resonator.q_int, 5.3e8, max_relative = 1e-6);
        assert_relative_eq!(fit.resonator.q_c, 1e8, max_relative = 1e-6);
        assert_relative_eq!(fit.resonator.f_r, 7.9e9, max_relative = 1e-12);
    }

    #[test]
    fn round_trip_with_cable_delay_and_asymmetry() {
        let r = ReflectionResonator {
            f_r: 7.9e9,
            q_int: 5.3e8,
            q_c: 1e8,
            phi: 0.15,
            amplitude: 0.3,
            alpha: 1.2,
            delay: 40e-9,
        };
        let lw = r.f_r / r.q_loaded();
        let f: Vec<f64> = (0..401).map(|i| r.f_r + lw * 10.0 * (f64::from(i) / 200.0 - 1.0)).collect();
        let fit = circle_fit(&r.sweep(&f)).unwrap();
        assert_relative_eq!(fit.resonator.q_int, r.q_int, max_relative = 1e-6);
        assert_relative_eq!(fit.resonator.q_c, r.q_c, max_relative = 1e-6);
        assert!((fit.resonator.phi - r.phi).abs() < 1e-6);
        assert_relative_eq!(fit.resonator.delay, r.delay, max_relative = 1e-4);
    }

    #[test]
    fn noisy_sweep_errors_match_reported_sigma() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let clean = sweep_for(5.3e8, 401, 10.0);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sweep = ComplexSweep {
            frequencies: clean.frequencies.clone(),
            s11: clean
                .s11
                .iter()
                .map(|z| z + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng)))
                .collect(),
        };
        let fit = circle_fit(&sweep).unwrap();
        let chi2_red = fit.fit.chi2 / (2.0 * 401.0 - 7.0) / 1e-4;
        assert!((0.8..1.2).contains(&chi2_red), "{chi2_red}");
        assert!((fit.resonator.q_int - 5.3e8).abs() < 3.0 * fit.sigma_q_int);
        assert!((fit.resonator.q_c - 1e8).abs() < 3.0 * fit.sigma_q_c);
    }

    #[test]
    fn constant_sweep_is_not_circular() {
        let sweep = ComplexSweep {
            frequencies: (0..100).map(|i| 7.9e9 + f64::from(i)).collect(),
            s11: vec![Complex64::new(0.4, 0.1); 100],
        };
        assert!(matches!(circle_fit(&sweep), Err(Error::NonCircular(_))));
    }

    #[test]
    fn narrow_sweep_rejected() {
        let err = circle_fit(&sweep_for(5.3e8, 201, 1.0));
        assert!(matches!(err, Err(Error::InsufficientSpan { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn switch_on_identity(qi in 1e6f64..1e10, qc in 1e6f64..1e10) {
            let p = ReflectionParams { q_int: qi, q_c: qc, ..paper_like(0.0) };
            prop_assert!((ringup_power(0.0, &p) / p.p_f - 1.0).abs() < 1e-14);
        }

        #[test]
        fn ringup_bounded(qi in 1e6f64..1e10, qc in 1e6f64..1e10, t in 0.0f64..0.1, d in -2.0f64..2.0) {
            let p = ReflectionParams { q_int: qi, q_c: qc, ..paper_like(d) };
            let v = ringup_power(t, &p);
            prop_assert!(v >= -1e-15 * p.p_f && v <= p.p_f * (1.0 + 1e-12));
        }

        #[test]
        fn circle_fit_invariant_under_rotation_and_scale(angle in -3.0f64..3.0, gain in 0.01f64..100.0) {
            let base = sweep_for(5.3e8, 301, 8.0);
            let rotated = ComplexSweep {
                frequencies: base.frequencies.clone(),
                s11: base.s11.iter().map(|s| s * Complex64::from_polar(gain, angle)).collect(),
            };
            let a = circle_fit(&base).unwrap();
            let b = circle_fit(&rotated).unwrap();
            prop_assert!((a.resonator.q_int / b.resonator.q_int - 1.0).abs() < 1e-6);
            prop_assert!((a.resonator.q_c / b.resonator.q_c - 1.0).abs() < 1e-6);
            prop_assert!((a.resonator.f_r / b.resonator.f_r - 1.0).abs() < 1e-6);
        }
    }
}

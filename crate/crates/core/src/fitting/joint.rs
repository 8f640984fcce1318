//! Joint fit of several ring-down traces.
//!
//! All traces share the TLS coherence time and the coupling distribution
//! shape; each trace has its own TLS number. Residuals are formed on the
//! log-derived linewidth `kappa(t) = -ln(P(t)/P(t0)) / (t - t0)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{minimize, FitOptions, FitProblem, FitResult, Parameter};
use crate::distribution::{sample_classes, DistributionParams, TlsTimes};
use crate::dynamics::{evolve_ringdown, CavityMoments, SolverOptions};
use crate::error::{Error, Result};
use crate::model::CavityParams;
use crate::numeric::{interp_log, rolling_mean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingdownTrace {
    pub times: Vec<f64>,
    /// Detected power in any fixed unit; only ratios enter.
    pub powers: Vec<f64>,
    /// Cavity population at the first sample.
    pub initial_photons: f64,
}

impl RingdownTrace {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.powers.len() {
            return Err(Error::LengthMismatch {
                what: "trace times and powers",
                left: self.times.len(),
                right: self.powers.len(),
            });
        }
        if self.times.len() < 3 {
            return Err(Error::invalid("a trace needs at least three samples"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("trace times must be strictly increasing"));
        }
        if self.powers.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::invalid("trace powers must be positive and finite"));
        }
        crate::error::require_finite("initial_photons", self.initial_photons)?;
        if !(self.initial_photons > 0.0) {
            return Err(Error::invalid("initial photon number must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualSpace {
    Kappa,
    /// Normalized power `P(t)/P(t0)`, for comparison.
    Power,
}

/// Fixed inputs of the joint fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSetup {
    pub cavity: CavityParams,
    /// Coupling range and class count; `n_tot`, `beta` and `epsilon_s` are
    /// taken from the fit parameters.
    pub shape: DistributionParams,
    pub t1: f64,
    /// Model grid spacing in seconds.
    pub model_dt: f64,
    /// Window of the rolling noise estimate.
    pub noise_window: usize,
    pub residual_space: ResidualSpace,
}

impl JointSetup {
    pub fn new(cavity: CavityParams, shape: DistributionParams, t1: f64) -> Self {
        JointSetup {
            cavity,
            shape,
            t1,
            model_dt: 20e-6,
            noise_window: 50,
            residual_space: ResidualSpace::Kappa,
        }
    }
}

/// Model parameters of one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceModel {
    pub t2: f64,
    pub beta: f64,
    pub epsilon_s: f64,
    pub n_tot: f64,
}

/// Photon numbers predicted at `times` for a ring-down starting at
/// `times[0]` from `initial_photons`.
pub fn model_photon_numbers(
    setup: &JointSetup,
    model: &TraceModel,
    initial_photons: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    let span = times[times.len() - 1] - t0;
    if !(span > 0.0) {
        return Err(Error::invalid("times must span a positive interval"));
    }
    let dist = DistributionParams {
        n_tot: model.n_tot,
        beta: model.beta,
        epsilon_s: model.epsilon_s,
        ..setup.shape
    };
    let tls_times = TlsTimes {
        t1: setup.t1,
        t_phi: f64::INFINITY,
        t2_override: Some(model.t2),
    };
    let classes = if model.n_tot > 0.0 {
        sample_classes(&dist, &tls_times, setup.cavity.omega0())?
    } else {
        Vec::new()
    };
    let steps = ((span / setup.model_dt).ceil() as usize + 1).max(2);
    let traj = evolve_ringdown(
        CavityMoments::coherent(initial_photons),
        &classes,
        &setup.cavity,
        span,
        &SolverOptions::unchecked(steps),
    )?;
    let n = traj.photon_numbers();
    if n.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("model photon number reached zero inside the trace"));
    }
    Ok(times.iter().map(|&t| interp_log(&traj.times, &n, t - t0)).collect())
}

/// Per-sample 1-sigma of `ln P`, from a rolling mean of squared second
/// differences. For white noise of width s the second difference has
/// variance 6 s^2.
pub fn log_power_noise(powers: &[f64], window: usize) -> Vec<f64> {
    let n = powers.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let y: Vec<f64> = powers.iter().map(|p| p.ln()).collect();
    let mut d2: Vec<f64> = (1..n - 1)
        .map(|i| (y[i + 1] - 2.0 * y[i] + y[i - 1]).powi(2) / 6.0)
        .collect();
    d2.insert(0, d2[0]);
    d2.push(d2[d2.len() - 1]);
    rolling_mean(&d2, window).into_iter().map(f64::sqrt).collect()
}

/// Data and model linewidth of one trace at the fitted point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceOverlay {
    pub times: Vec<f64>,
    pub data_kappa: Vec<f64>,
    pub model_kappa: Vec<f64>,
    pub sigma_kappa: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointFit {
    pub t2: f64,
    pub beta: f64,
    pub epsilon_s: f64,
    pub n_tot: Vec<f64>,
    pub fit: FitResult,
    pub overlays: Vec<TraceOverlay>,
}

/// Starting point and bounds. Parameters may be frozen with `Parameter::fixed`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointInit {
    pub t2: Parameter,
    pub beta: Parameter,
    pub epsilon_s: Parameter,
    pub n_tot: Vec<Parameter>,
}

impl JointInit {
    pub fn new(t2: f64, beta: f64, epsilon_s: f64, n_tot: &[f64]) -> Self {
        JointInit {
            t2: Parameter::log("t2", t2, 1e-9, 1e-5),
            beta: Parameter::linear("beta", beta, 1.5, 6.0),
            epsilon_s: Parameter::log("epsilon_s", epsilon_s, 1e-6, 1e3),
            n_tot: n_tot
                .iter()
                .enumerate()
                .map(|(i, &n)| Parameter::log(&format!("n_tot_{i}"), n, 0.0, 1e14))
                .collect(),
        }
    }

    fn into_params(self) -> Vec<Parameter> {
        let mut p = vec![self.t2, self.beta, self.epsilon_s];
        p.extend(self.n_tot);
        p
    }
}

struct Prepared {
    offset: usize,
    /// Linewidth or power ratio at every sample after the reference.
    data: Vec<f64>,
    /// Sigma of each residual; in linewidth space one extra entry for the
    /// reference offset.
    sigma: Vec<f64>,
    times: Vec<f64>,
    /// Sigma of `ln P` at each sample after the reference.
    log_sigma: Vec<f64>,
    reference_sigma: f64,
}

impl Prepared {
    fn residual_count(&self) -> usize {
        self.sigma.len()
    }

    fn elapsed(&self) -> impl Iterator<Item = f64> + '_ {
        self.times[1..].iter().map(|t| t - self.times[0])
    }

    /// Linewidth residuals with the noise of the reference sample profiled
    /// out as an offset `c / (t - t0)`. The offset carries its own prior of
    /// width `reference_sigma`, so the weighted sum of squares equals the
    /// generalized chi-square of the correlated linewidth samples.
    fn kappa_residuals(&self, model: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = model.iter().zip(&self.data).map(|(m, d)| m - d).collect();
        let s0 = self.reference_sigma;
        let (mut num, mut den) = (0.0, 1.0 / (s0 * s0));
        for ((d, dt), sj) in diff.iter().zip(self.elapsed()).zip(&self.log_sigma) {
            num += d * dt / (sj * sj);
            den += 1.0 / (sj * sj);
        }
        let c = num / den;
        let mut out: Vec<f64> = diff.iter().zip(self.elapsed()).map(|(d, dt)| d - c / dt).collect();
        out.push(c);
        out
    }
}

fn prepare(trace: &RingdownTrace, space: ResidualSpace, window: usize, offset: usize) -> Result<Prepared> {
    let s = log_power_noise(&trace.powers, window);
    let t0 = trace.times[0];
    let p0 = trace.powers[0];
    let log_sigma = s[1..].to_vec();
    let (data, mut sigma): (Vec<f64>, Vec<f64>) = match space {
        // noisy early samples may give kappa <= 0, which is still valid data
        ResidualSpace::Kappa => trace.powers[1..]
            .iter()
            .zip(&log_sigma)
            .zip(&trace.times[1..])
            .map(|((&p, &sj), &t)| (-(p / p0).ln() / (t - t0), sj / (t - t0)))
            .unzip(),
        ResidualSpace::Power => trace.powers[1..]
            .iter()
            .zip(&log_sigma)
            .map(|(&p, &sj)| (p / p0, p / p0 * (sj * sj + s[0] * s[0]).sqrt()))
            .unzip(),
    };
    if space == ResidualSpace::Kappa {
        sigma.push(s[0]);
    }
    if sigma.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(
            "noise estimate vanished; traces need sample-to-sample scatter",
        ));
    }
    Ok(Prepared {
        offset,
        data,
        sigma,
        times: trace.times.clone(),
        log_sigma,
        reference_sigma: s[0],
    })
}

fn model_values(
    setup: &JointSetup,
    model: &TraceModel,
    trace: &RingdownTrace,
) -> Result<Vec<f64>> {
    let n = model_photon_numbers(setup, model, trace.initial_photons, &trace.times)?;
    let t0 = trace.times[0];
    Ok(match setup.residual_space {
        ResidualSpace::Kappa => trace.times[1..]
            .iter()
            .zip(&n[1..])
            .map(|(&t, &v)| -(v / n[0]).ln() / (t - t0))
            .collect(),
        ResidualSpace::Power => n[1..].iter().map(|&v| v / n[0]).collect(),
    })
}

fn trace_model(x: &[f64], i: usize) -> TraceModel {
    TraceModel {
        t2: x[0],
        beta: x[1],
        epsilon_s: x[2],
        n_tot: x[3 + i],
    }
}

pub fn joint_tls_fit(
    traces: &[RingdownTrace],
    setup: &JointSetup,
    init: JointInit,
    opts: &FitOptions,
) -> Result<JointFit> {
    if traces.is_empty() {
        return Err(Error::invalid("at least one trace is required"));
    }
    if init.n_tot.len() != traces.len() {
        return Err(Error::LengthMismatch {
            what: "traces and initial TLS numbers",
            left: traces.len(),
            right: init.n_tot.len(),
        });
    }
    setup.cavity.validate()?;
    let mut prepared = Vec::with_capacity(traces.len());
    let mut offset = 0;
    for (i, trace) in traces.iter().enumerate() {
        let p = trace
            .validate()
            .and_then(|_| prepare(trace, setup.residual_space, setup.noise_window, offset))
            .map_err(|e| e.in_trace(i))?;
        offset += p.residual_count();
        prepared.push(p);
    }
    let sigma: Vec<f64> = prepared.iter().flat_map(|p| p.sigma.iter().copied()).collect();
    let total = sigma.len();

    let residuals = |x: &[f64]| -> Result<Vec<f64>> {
        let parts: Vec<Result<Vec<f64>>> = traces
            .par_iter()
            .enumerate()
            .map(|(i, trace)| {
                let model = model_values(setup, &trace_model(x, i), trace).map_err(|e| e.in_trace(i))?;
                let p = &prepared[i];
                Ok(match setup.residual_space {
                    ResidualSpace::Kappa => p.kappa_residuals(&model),
                    ResidualSpace::Power => model.iter().zip(&p.data).map(|(m, d)| m - d).collect(),
                })
            })
            .collect();
        let mut out = vec![0.0; total];
        for (p, part) in prepared.iter().zip(parts) {
            let part = part?;
            out[p.offset..p.offset + part.len()].copy_from_slice(&part);
        }
        Ok(out)
    };
    let problem = FitProblem::new(init.into_params(), sigma, residuals);
    let fit = minimize(&problem, opts)?;

    let overlays = traces
        .iter()
        .enumerate()
        .map(|(i, trace)| {
            let p = &prepared[i];
            let model = model_values(setup, &trace_model(&fit.values, i), trace).map_err(|e| e.in_trace(i))?;
            let to_kappa = |v: &[f64]| -> Vec<f64> {
                match setup.residual_space {
                    ResidualSpace::Kappa => v.to_vec(),
                    ResidualSpace::Power => v
                        .iter()
                        .zip(&p.times[1..])
                        .map(|(&r, &t)| -r.ln() / (t - p.times[0]))
                        .collect(),
                }
            };
            let s0 = p.reference_sigma;
            let sigma_kappa = p
                .log_sigma
                .iter()
                .zip(p.elapsed())
                .map(|(sj, dt)| (sj * sj + s0 * s0).sqrt() / dt)
                .collect();
            Ok(TraceOverlay {
                times: p.times[1..].to_vec(),
                data_kappa: to_kappa(&p.data),
                model_kappa: to_kappa(&model),
                sigma_kappa,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(JointFit {
        t2: fit.values[0],
        beta: fit.values[1],
        epsilon_s: fit.values[2],
        n_tot: fit.values[3..].to_vec(),
        fit,
        overlays,
    })
}

//! Two-stage fit of temperature sweeps.
//!
//! Stage one fits the kinetic inductance ratio and the zero-temperature gap
//! to the fractional frequency shift. Stage two keeps the gap and fits the
//! normal-state conductivity and the TLS times to the internal quality factor.

use serde::{Deserialize, Serialize};

use nalgebra::DVector;

use super::{minimize, numerical_jacobian, FitOptions, FitProblem, FitResult, Parameter, Scale};
use crate::distribution::{sample_classes, DistributionParams, TlsTimes};
use crate::error::{Error, Result};
use crate::mattis_bardeen::{freq_shift, q_int_temperature, SuperconductorParams};
use crate::model::{t2_star, CavityParams, K_B};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSweep {
    pub temperatures: Vec<f64>,
    pub values: Vec<f64>,
}

impl TemperatureSweep {
    fn validate(&self, what: &'static str) -> Result<()> {
        if self.temperatures.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                what,
                left: self.temperatures.len(),
                right: self.values.len(),
            });
        }
        if self.temperatures.is_empty() {
            return Err(Error::invalid(format!("{what}: sweep is empty")));
        }
        if self.temperatures.iter().chain(&self.values).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("{what}: non-finite entry")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSetup {
    pub cavity: CavityParams,
    /// TLS distribution from the ring-down fit; held fixed.
    pub distribution: DistributionParams,
    pub g_factor: f64,
    /// Absolute 1-sigma of the frequency shift; defaults to 1% of the
    /// largest shift magnitude.
    pub shift_sigma: Option<f64>,
    /// Relative 1-sigma of the quality factor.
    pub q_relative_sigma: f64,
}

impl TemperatureSetup {
    pub fn new(cavity: CavityParams, distribution: DistributionParams, g_factor: f64) -> Self {
        TemperatureSetup {
            cavity,
            distribution,
            g_factor,
            shift_sigma: None,
            q_relative_sigma: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureInit {
    pub alpha: Parameter,
    /// Gap in joule.
    pub delta0: Parameter,
    pub sigma_n: Parameter,
    pub t1: Parameter,
    pub t_phi: Parameter,
}

impl TemperatureInit {
    pub fn new(alpha: f64, delta0: f64, sigma_n: f64, t1: f64, t_phi: f64) -> Self {
        TemperatureInit {
            alpha: Parameter::linear("alpha", alpha, -1.0, 1.0).with_typical(1e-5),
            delta0: Parameter::log("delta0", delta0, 1e-25, 1e-20),
            sigma_n: Parameter::log("sigma_n", sigma_n, 1e3, 1e12),
            t1: Parameter::log("t1", t1, 1e-10, 1e-3),
            t_phi: Parameter::log("t_phi", t_phi, 1e-10, 1e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureFit {
    pub superconductor: SuperconductorParams,
    pub t1: f64,
    pub t_phi: f64,
    pub sigma_alpha: f64,
    pub sigma_delta0: f64,
    pub sigma_sigma_n: f64,
    pub sigma_t1: f64,
    pub sigma_t_phi: f64,
    pub shift_fit: FitResult,
    pub q_fit: FitResult,
}

impl TemperatureFit {
    /// Coherence time implied by the fitted TLS times.
    pub fn t2_star(&self, omega: f64, temperature: f64) -> Result<f64> {
        t2_star(self.t1, self.t_phi, omega, temperature)
    }
}

fn check_validity(sweep: &TemperatureSweep, delta0: f64) -> Result<()> {
    let limit = delta0 / (4.0 * K_B);
    match sweep.temperatures.iter().find(|&&t| !(t >= 0.0 && t <= limit)) {
        Some(t) => Err(Error::invalid(format!(
            "temperature {t} K lies outside [0, {limit:.3}] K where the gap expansion holds"
        ))),
        None => Ok(()),
    }
}

pub fn temperature_fit(
    shift: &TemperatureSweep,
    quality: &TemperatureSweep,
    setup: &TemperatureSetup,
    init: TemperatureInit,
    opts: &FitOptions,
) -> Result<TemperatureFit> {
    shift.validate("frequency sweep")?;
    quality.validate("quality-factor sweep")?;
    setup.cavity.validate()?;
    setup.distribution.validate()?;
    check_validity(shift, init.delta0.initial)?;
    check_validity(quality, init.delta0.initial)?;
    if quality.values.iter().any(|q| !(*q > 0.0)) {
        return Err(Error::invalid("quality factors must be positive"));
    }
    let omega0 = setup.cavity.omega0();
    let g_factor = setup.g_factor;

    let shift_sigma = match setup.shift_sigma {
        Some(s) => s,
        None => 0.01 * shift.values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    };
    if !(shift_sigma > 0.0) {
        return Err(Error::invalid("frequency-shift sigma must be positive; give it explicitly for flat data"));
    }
    let sigma_n_start = init.sigma_n.initial;
    let stage1 = FitProblem::new(
        vec![init.alpha.clone(), init.delta0.clone()],
        vec![shift_sigma; shift.values.len()],
        |x| {
            let sc = SuperconductorParams { delta0: x[1], sigma_n: sigma_n_start, alpha: x[0], g_factor };
            shift
                .temperatures
                .iter()
                .zip(&shift.values)
                .map(|(&t, &y)| Ok(freq_shift(t, &sc, omega0)? - y))
                .collect()
        },
    );
    let shift_fit = minimize(&stage1, opts)?;
    let (alpha, delta0) = (shift_fit.values[0], shift_fit.values[1]);

    let stage2 = |delta0: f64| {
        let dist = setup.distribution;
        FitProblem::new(
            vec![init.sigma_n.clone(), init.t1.clone(), init.t_phi.clone()],
            quality.values.iter().map(|q| setup.q_relative_sigma * q).collect(),
            move |x| {
                let sc = SuperconductorParams { delta0, sigma_n: x[0], alpha, g_factor };
                let times = TlsTimes { t1: x[1], t_phi: x[2], t2_override: None };
                let classes = sample_classes(&dist, &times, omega0)?;
                quality
                    .temperatures
                    .iter()
                    .zip(&quality.values)
                    .map(|(&t, &y)| Ok(q_int_temperature(t, &sc, &classes, &setup.cavity)? - y))
                    .collect()
            },
        )
    };
    let mut q_fit = minimize(&stage2(delta0), opts)?;
    propagate_fixed_parameter(&mut q_fit, &stage2, delta0, shift_fit.sigma[1], opts)?;

    Ok(TemperatureFit {
        superconductor: SuperconductorParams {
            delta0,
            sigma_n: q_fit.values[0],
            alpha,
            g_factor,
        },
        t1: q_fit.values[1],
        t_phi: q_fit.values[2],
        sigma_alpha: shift_fit.sigma[0],
        sigma_delta0: shift_fit.sigma[1],
        sigma_sigma_n: q_fit.sigma[0],
        sigma_t1: q_fit.sigma[1],
        sigma_t_phi: q_fit.sigma[2],
        shift_fit,
        q_fit,
    })
}

/// Adds the variance that a parameter held fixed at `value` (with 1-sigma
/// `sigma`) induces in the free parameters of `fit`. The shift of the optimum
/// per unit change of the fixed value follows from the normal equations:
/// `dy = -(J^T J)^-1 J^T dr`.
fn propagate_fixed_parameter<'a>(
    fit: &mut FitResult,
    build: &impl Fn(f64) -> FitProblem<'a>,
    value: f64,
    sigma: f64,
    opts: &FitOptions,
) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Ok(());
    }
    let problem = build(value);
    let j = numerical_jacobian(&problem, &fit.values, 1.0, opts)?;
    let h = value * 1e-6;
    let up = build(value + h).weighted(&fit.values)?;
    let down = build(value - h).weighted(&fit.values)?;
    let dr = DVector::from_iterator(up.len(), up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h)));
    let jtj = j.transpose() * &j;
    let Some(dy) = jtj.lu().solve(&(-(j.transpose() * dr))) else {
        return Ok(());
    };
    let free: Vec<usize> = (0..problem.params.len()).filter(|&i| !problem.params[i].fixed).collect();
    let shift: Vec<f64> = free
        .iter()
        .enumerate()
        .map(|(k, &i)| match problem.params[i].scale {
            Scale::Linear => dy[k],
            Scale::Log => dy[k] * fit.values[i],
        } * sigma)
        .collect();
    for (a, &i) in free.iter().enumerate() {
        for (b, &k) in free.iter().enumerate() {
            fit.covariance[i][k] += shift[a] * shift[b];
        }
        fit.sigma[i] = fit.covariance[i][i].max(0.0).sqrt();
    }
    Ok(())
}

/// Synthetic sweeps from the forward model, without noise.
pub fn synthesize(
    temperatures: &[f64],
    sc: &SuperconductorParams,
    times: &TlsTimes,
    setup: &TemperatureSetup,
) -> Result<(TemperatureSweep, TemperatureSweep)> {
    let omega0 = setup.cavity.omega0();
    let classes = sample_classes(&setup.distribution, times, omega0)?;
    let shifts = temperatures
        .iter()
        .map(|&t| freq_shift(t, sc, omega0))
        .collect::<Result<Vec<_>>>()?;
    let qs = temperatures
        .iter()
        .map(|&t| q_int_temperature(t, sc, &classes, &setup.cavity))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        TemperatureSweep { temperatures: temperatures.to_vec(), values: shifts },
        TemperatureSweep { temperatures: temperatures.to_vec(), values: qs },
    ))
}

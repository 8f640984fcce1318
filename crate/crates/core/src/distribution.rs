//! Power-law distribution of TLS coupling strengths, its discretization into
//! classes, and the loss-tangent and density estimates derived from it.

use std::f64::consts::PI;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, Error, Result};
use crate::model::{TlsClass, E_CHARGE, EPSILON_0, HBAR};
use crate::numeric::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionParams {
    pub n_tot: f64,
    pub beta: f64,
    pub epsilon_s: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub n_classes: usize,
}

impl DistributionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_tot", self.n_tot),
            ("beta", self.beta),
            ("epsilon_s", self.epsilon_s),
            ("g_min", self.g_min),
            ("g_max", self.g_max),
        ] {
            require_finite(name, v)?;
        }
        if self.n_tot < 0.0 {
            return Err(Error::invalid("n_tot must be non-negative"));
        }
        if self.beta <= 1.0 {
            return Err(Error::invalid(format!("beta must exceed 1, got {}", self.beta)));
        }
        if self.epsilon_s <= 0.0 {
            return Err(Error::invalid("epsilon_s must be positive"));
        }
        if !(self.g_min > 0.0 && self.g_min < self.g_max) {
            return Err(Error::invalid(format!(
                "need 0 < g_min < g_max, got [{}, {}]",
                self.g_min, self.g_max
            )));
        }
        if self.n_classes == 0 {
            return Err(Error::invalid("n_classes must be at least 1"));
        }
        Ok(())
    }

    /// Knee of the distribution, chosen so that the full integral equals `n_tot`.
    pub fn epsilon_prime(&self) -> f64 {
        self.epsilon_s * self.beta * (PI / self.beta).sin() / PI
    }
}

/// `dN/dg` at coupling `g`.
pub fn density(g: f64, params: &DistributionParams) -> f64 {
    let x = g / params.epsilon_prime();
    params.n_tot / params.epsilon_s / (1.0 + x.powf(params.beta))
}

const QUAD_ORDER: usize = 24;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(QUAD_ORDER).expect("valid quadrature order"))
}

/// Number of TLS with coupling in `[lo, hi]`, integrated in log-space with a
/// fixed composite Gauss-Legendre rule so the result is smooth in the parameters.
pub fn bin_integral(lo: f64, hi: f64, params: &DistributionParams) -> f64 {
    if !(hi > lo) || lo <= 0.0 {
        return 0.0;
    }
    let (a, b) = (lo.ln(), hi.ln());
    let panels = ((b - a) / 0.5).ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let parts: Vec<f64> = (0..panels)
        .map(|k| {
            let u0 = a + width * k as f64;
            rule().integrate(u0, u0 + width, |u| {
                let g = u.exp();
                density(g, params) * g
            })
        })
        .collect();
    pairwise_sum(&parts)
}

/// Integral of the density over `[g_min, g_max]`.
pub fn truncated_integral(params: &DistributionParams) -> f64 {
    bin_integral(params.g_min, params.g_max, params)
}

/// One logarithmic bin of the discretized distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassRow {
    pub g_low: f64,
    pub g_high: f64,
    /// Geometric midpoint, the coupling assigned to the class.
    pub g: f64,
    /// Integral of the density over the bin.
    pub count: f64,
    /// Density evaluated at the midpoint.
    pub point_density: f64,
}

pub fn class_table(params: &DistributionParams) -> Result<Vec<ClassRow>> {
    params.validate()?;
    let ratio = (params.g_max / params.g_min).ln() / params.n_classes as f64;
    Ok((0..params.n_classes)
        .map(|i| {
            let g_low = params.g_min * (ratio * i as f64).exp();
            let g_high = if i + 1 == params.n_classes {
                params.g_max
            } else {
                params.g_min * (ratio * (i + 1) as f64).exp()
            };
            let g = (g_low * g_high).sqrt();
            ClassRow {
                g_low,
                g_high,
                g,
                count: bin_integral(g_low, g_high, params),
                point_density: density(g, params),
            }
        })
        .collect())
}

/// Relaxation and dephasing shared by every sampled class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsTimes {
    pub t1: f64,
    pub t_phi: f64,
    #[serde(default)]
    pub t2_override: Option<f64>,
}

/// Discretizes the distribution into resonant TLS classes.
pub fn sample_classes(
    params: &DistributionParams,
    times: &TlsTimes,
    omega_tls: f64,
) -> Result<Vec<TlsClass>> {
    class_table(params)?
        .into_iter()
        .map(|row| {
            let mut class = TlsClass::new(row.g, row.count, omega_tls, times.t1, times.t_phi)?;
            if let Some(t2) = times.t2_override {
                class = class.with_t2_override(t2);
            }
            class.validate()?;
            Ok(class)
        })
        .collect()
}

/// TLS number for a cavity of linewidth `kappa` at constant spectral density.
pub fn ntot_from_linewidth(kappa: f64, spectral_density: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::invalid("linewidth must be positive"));
    }
    Ok(kappa * spectral_density)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dipole {
    pub coulomb_metre: f64,
    pub e_angstrom: f64,
}

/// Dipole moment for which `hbar g = d E_max`.
pub fn dipole_from_coupling(g: f64, e_max: f64) -> Result<Dipole> {
    if !(e_max > 0.0) {
        return Err(Error::invalid("e_max must be positive"));
    }
    let d = HBAR * g / e_max;
    Ok(Dipole {
        coulomb_metre: d,
        e_angstrom: d / (E_CHARGE * 1e-10),
    })
}

/// Coupling rate of a dipole `d` (C m) in the field `e_max`.
pub fn coupling_from_dipole(d: f64, e_max: f64) -> f64 {
    d * e_max / HBAR
}

/// `sum_i pi P_i d_i^2 / (3 eps0 eps_r)` with `P_i = N_i / (hbar kappa V_ox)`
/// and `d_i = hbar g_i / E_max`.
pub fn loss_tangent(
    classes: &[TlsClass],
    e_max: f64,
    v_ox: f64,
    kappa: f64,
    eps_r: f64,
) -> Result<f64> {
    for (name, v) in [("e_max", e_max), ("v_ox", v_ox), ("kappa", kappa), ("eps_r", eps_r)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
    }
    let terms: Vec<f64> = classes
        .iter()
        .map(|c| {
            let p = c.count / (HBAR * kappa * v_ox);
            let d = HBAR * c.g / e_max;
            PI * p * d * d / (3.0 * EPSILON_0 * eps_r)
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Number of TLS in classes with `g >= g_threshold` per unit angular
/// bandwidth and oxide volume.
pub fn tls_volume_density(
    classes: &[TlsClass],
    g_threshold: f64,
    bandwidth: f64,
    v_ox: f64,
) -> Result<f64> {
    if !(bandwidth > 0.0 && v_ox > 0.0) {
        return Err(Error::invalid("bandwidth and v_ox must be positive"));
    }
    let counts: Vec<f64> = classes
        .iter()
        .filter(|c| c.g >= g_threshold)
        .map(|c| c.count)
        .collect();
    Ok(pairwise_sum(&counts) / (bandwidth * v_ox))
}

/// Converts a density per (rad/s) m^3 to per GHz um^3, reading the bandwidth
/// either as cyclic (GHz = 2 pi 1e9 rad/s) or as angular (GHz = 1e9 rad/s).
pub fn density_per_ghz_um3(per_rad_s_m3: f64, cyclic: bool) -> f64 {
    let per_ghz = if cyclic {
        per_rad_s_m3 * 2.0 * PI * 1e9
    } else {
        per_rad_s_m3 * 1e9
    };
    per_ghz * 1e-18
}

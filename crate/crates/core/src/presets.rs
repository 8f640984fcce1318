//! Parameter sets of the measured niobium coaxial cavity.

use num_complex::Complex64;

use crate::distribution::{sample_classes, DistributionParams, TlsTimes};
use crate::error::Result;
use crate::mattis_bardeen::{mev_to_joule, SuperconductorParams};
use crate::model::{angular, CavityParams};
use crate::numeric::logspace;
use crate::tls::Bath;

pub const F0: f64 = 7.9e9;
pub const BASE_TEMPERATURE: f64 = 0.020;
pub const Q_COUPLING: f64 = 1e8;
/// Internal quality factor with all TLS saturated.
pub const Q_SATURATED: f64 = 1.2e9;
/// Internal quality factor at the single-photon level.
pub const Q_SINGLE_PHOTON: f64 = 5e8;

pub const T1: f64 = 723e-9;
pub const T_PHI: f64 = 484e-9;
/// Coherence time returned by the joint ring-down fit.
pub const T2_RINGDOWN: f64 = 286e-9;

pub const BETA: f64 = 3.26;
pub const EPSILON_S: f64 = 0.25;
pub const G_MIN: f64 = 1e-3;
pub const G_MAX: f64 = 1e3;
pub const N_CLASSES: usize = 7;

pub const DELTA0_MEV: f64 = 1.53;
pub const SIGMA_N: f64 = 4e7;
pub const KINETIC_RATIO: f64 = 3.3e-5;
pub const GEOMETRY_FACTOR: f64 = 74.4;

/// Surface-field maximum per photon in V/m; maps 1 e Å onto 110 Hz.
pub const E_MAX_SINGLE_PHOTON: f64 = 7.2403e-4;
/// Inner wall area of the quarter-wave coaxial geometry in m^2.
pub const CAVITY_SURFACE: f64 = 1.9254e-3;
pub const OXIDE_THICKNESS: f64 = 3e-9;
pub const OXIDE_VOLUME: f64 = CAVITY_SURFACE * OXIDE_THICKNESS;

pub fn cavity() -> CavityParams {
    let omega0 = angular(F0);
    CavityParams {
        f0: F0,
        kappa0: omega0 / Q_COUPLING + omega0 / Q_SATURATED,
        kappa_c: omega0 / Q_COUPLING,
        temperature: BASE_TEMPERATURE,
    }
}

pub fn ringdown_times() -> TlsTimes {
    TlsTimes {
        t1: T1,
        t_phi: T_PHI,
        t2_override: Some(T2_RINGDOWN),
    }
}

pub fn temperature_times() -> TlsTimes {
    TlsTimes {
        t1: T1,
        t_phi: T_PHI,
        t2_override: None,
    }
}

pub fn superconductor() -> SuperconductorParams {
    SuperconductorParams {
        delta0: mev_to_joule(DELTA0_MEV),
        sigma_n: SIGMA_N,
        alpha: KINETIC_RATIO,
        g_factor: GEOMETRY_FACTOR,
    }
}

/// Distribution shape with `n_tot` set by [`calibrated_n_tot`].
pub fn distribution() -> Result<DistributionParams> {
    let mut params = DistributionParams {
        n_tot: 1.0,
        beta: BETA,
        epsilon_s: EPSILON_S,
        g_min: G_MIN,
        g_max: G_MAX,
        n_classes: N_CLASSES,
    };
    params.n_tot = calibrated_n_tot(&params, &ringdown_times(), &cavity(), Q_SINGLE_PHOTON)?;
    Ok(params)
}

/// Unsaturated TLS loss rate per unit TLS number.
pub fn unit_tls_loss(shape: &DistributionParams, times: &TlsTimes, cavity: &CavityParams) -> Result<f64> {
    let unit = DistributionParams { n_tot: 1.0, ..*shape };
    let classes = sample_classes(&unit, times, cavity.omega0())?;
    Ok(Bath::new(&classes, cavity.omega0(), cavity.temperature)?.unsaturated_loss())
}

/// TLS number that brings the low-power internal quality factor to `q_low`
/// on top of the non-TLS loss already in `cavity.kappa0`.
pub fn calibrated_n_tot(
    shape: &DistributionParams,
    times: &TlsTimes,
    cavity: &CavityParams,
    q_low: f64,
) -> Result<f64> {
    let omega0 = cavity.omega0();
    let target = omega0 / q_low - (cavity.kappa0 - cavity.kappa_c);
    if !(target > 0.0) {
        return Err(crate::Error::invalid(
            "target quality factor is above the non-TLS limit",
        ));
    }
    Ok(target / unit_tls_loss(shape, times, cavity)?)
}

/// Initial photon numbers of the ten ring-down traces.
pub fn ringdown_photon_numbers() -> Vec<f64> {
    logspace(1e8, 1e17, 10)
}

/// Smallest cavity population the detection chain resolves.
pub const DETECTION_FLOOR_PHOTONS: f64 = 1e6;

/// Time for the bare cavity to decay from `n0` photons to `n_end`.
pub fn bare_decay_time(n0: f64, n_end: f64, cavity: &CavityParams) -> f64 {
    (n0 / n_end).ln() / cavity.kappa0
}

/// TLS number per trace for a constant spectral density: each `N_tot` is
/// proportional to the cavity linewidth at the trace's initial photon number.
/// `base.n_tot` is the value at vanishing power.
pub fn linewidth_scaled_n_tot(
    base: &DistributionParams,
    times: &TlsTimes,
    cavity: &CavityParams,
    photon_numbers: &[f64],
) -> Result<Vec<f64>> {
    let unit = DistributionParams { n_tot: 1.0, ..*base };
    let classes = sample_classes(&unit, times, cavity.omega0())?;
    let bath = Bath::new(&classes, cavity.omega0(), cavity.temperature)?;
    let density = base.n_tot / (cavity.kappa0 + base.n_tot * bath.unsaturated_loss());
    Ok(photon_numbers
        .iter()
        .map(|&n| {
            let per_tls = bath.rates(n, 0.0, Complex64::new(0.0, 0.0)).net_loss();
            density * cavity.kappa0 / (1.0 - density * per_tls)
        })
        .collect())
}

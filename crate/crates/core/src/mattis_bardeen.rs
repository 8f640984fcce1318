//! Dirty-limit Mattis-Bardeen response and the temperature dependence of the
//! internal quality factor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bessel::bessel_k0;
use crate::error::{Error, Result};
use crate::model::{bose_einstein, CavityParams, TlsClass, HBAR, K_B, MU_0};
use crate::tls::Bath;

/// Ratio between zero-temperature gap and `k_B T_c` in weak-coupling BCS.
pub const BCS_RATIO: f64 = 1.764;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperconductorParams {
    /// Zero-temperature half gap in J.
    pub delta0: f64,
    pub sigma_n: f64,
    /// Kinetic inductance fraction.
    pub alpha: f64,
    /// Geometric factor in Ohm.
    pub g_factor: f64,
}

impl SuperconductorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::invalid("delta0 must be positive"));
        }
        if !(self.sigma_n > 0.0 && self.sigma_n.is_finite()) {
            return Err(Error::invalid("sigma_n must be positive"));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in [0, 1)"));
        }
        if !(self.g_factor > 0.0 && self.g_factor.is_finite()) {
            return Err(Error::invalid("g_factor must be positive"));
        }
        Ok(())
    }

    pub fn critical_temperature(&self) -> f64 {
        critical_temperature(self.delta0)
    }
}

pub fn critical_temperature(delta0: f64) -> f64 {
    delta0 / (BCS_RATIO * K_B)
}

pub fn delta_from_critical_temperature(tc: f64) -> f64 {
    BCS_RATIO * K_B * tc
}

pub fn mev_to_joule(mev: f64) -> f64 {
    mev * 1e-3 * crate::model::E_CHARGE
}

/// Low-temperature gap `Delta0 (1 - sqrt(2 pi kT / Delta0) exp(-Delta0 / kT))`.
pub fn gap(temperature: f64, delta0: f64) -> f64 {
    if temperature <= 0.0 {
        return delta0;
    }
    let kt = K_B * temperature;
    if kt > 0.25 * delta0 {
        log::warn!("T = {temperature} K is outside the low-temperature gap approximation");
    }
    delta0 * (1.0 - (2.0 * PI * kt / delta0).sqrt() * (-delta0 / kt).exp())
}

/// `(sigma1, sigma2)` in S/m.
pub fn conductivity(
    temperature: f64,
    omega: f64,
    sc: &SuperconductorParams,
) -> Result<(f64, f64)> {
    if !(temperature >= 0.0) {
        return Err(Error::invalid("temperature must be non-negative"));
    }
    let delta = gap(temperature, sc.delta0);
    let hw = HBAR * omega;
    if hw >= 2.0 * delta {
        return Err(Error::PairBreaking {
            hbar_omega: hw,
            two_delta: 2.0 * delta,
        });
    }
    if temperature == 0.0 {
        return Ok((0.0, sc.sigma_n * PI * delta / hw));
    }
    let kt = K_B * temperature;
    let x = hw / (2.0 * kt);
    // exp(-Delta/kT) sinh(x) written to avoid overflow of sinh at tiny T
    let damped_sinh = 0.5 * ((x - delta / kt).exp() - (-x - delta / kt).exp());
    let sigma1 = sc.sigma_n * 4.0 * delta / hw * damped_sinh * bessel_k0(x)?;
    let sigma2 = sc.sigma_n * PI * delta / hw * (delta / (2.0 * kt)).tanh();
    Ok((sigma1, sigma2))
}

/// Fractional resonance shift `alpha (sigma2(T) - sigma2(0)) / (2 sigma2(T))`.
pub fn freq_shift(temperature: f64, sc: &SuperconductorParams, omega: f64) -> Result<f64> {
    let (_, s2) = conductivity(temperature, omega, sc)?;
    let s2_zero = sc.sigma_n * PI * sc.delta0 / (HBAR * omega);
    Ok(sc.alpha * (s2 - s2_zero) / (2.0 * s2))
}

/// Quasiparticle-limited quality factor; infinite at T = 0.
pub fn q_qp(temperature: f64, sc: &SuperconductorParams, omega: f64) -> Result<f64> {
    let (s1, s2) = conductivity(temperature, omega, sc)?;
    if s1 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mag = s1.hypot(s2);
    Ok(sc.g_factor * mag * mag / (s1 * ((mag + s2) * omega * MU_0 / 2.0).sqrt()))
}

/// TLS-limited quality factor at vanishing photon number.
pub fn q_tls(temperature: f64, classes: &[TlsClass], omega0: f64) -> Result<f64> {
    let rates = Bath::new(classes, omega0, temperature)?.rates(0.0, 0.0, Default::default());
    let loss = rates.net_loss();
    Ok(if loss > 0.0 { omega0 / loss } else { f64::INFINITY })
}

/// TLS-limited quality factor from the untruncated distribution, using
/// `int_0^inf g^2 dN/dg dg = n_tot e'^3 / e_s * (pi / beta) / sin(3 pi / beta)`.
/// Finite only for `beta > 3`.
pub fn q_tls_continuous(
    temperature: f64,
    dist: &crate::distribution::DistributionParams,
    t1: f64,
    t_phi: f64,
    omega0: f64,
) -> Result<f64> {
    if dist.beta <= 3.0 {
        return Err(Error::invalid("the second moment of the distribution diverges for beta <= 3"));
    }
    let b = dist.beta;
    let ep = dist.epsilon_prime();
    let second_moment = dist.n_tot * ep.powi(3) / dist.epsilon_s * (PI / b) / (3.0 * PI / b).sin();
    let t2 = crate::model::t2_star(t1, t_phi, omega0, temperature)?;
    let f = bose_einstein(omega0, temperature)?;
    let loss = 2.0 * second_moment * t2 / (1.0 + 2.0 * f);
    Ok(omega0 / loss)
}

/// `1/Q_int = 1/Q_TLS + 1/Q_QP`.
pub fn q_int_temperature(
    temperature: f64,
    sc: &SuperconductorParams,
    classes: &[TlsClass],
    cavity: &CavityParams,
) -> Result<f64> {
    let omega0 = cavity.omega0();
    let qp = q_qp(temperature, sc, omega0)?;
    if classes.is_empty() {
        return Ok(qp);
    }
    let tls = q_tls(temperature, classes, omega0)?;
    Ok(1.0 / (1.0 / tls + 1.0 / qp))
}

pub fn skin_depth(alpha: f64, g_factor: f64, omega0: f64) -> Result<f64> {
    if !(alpha >= 0.0 && g_factor > 0.0 && omega0 > 0.0) {
        return Err(Error::invalid("skin depth needs alpha >= 0 and positive g_factor, omega0"));
    }
    Ok(g_factor * alpha / (MU_0 * omega0))
}

/// One row of a temperature sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemperaturePoint {
    pub temperature: f64,
    pub delta: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub freq_shift: f64,
    pub q_qp: f64,
    pub q_tls: f64,
    pub q_int: f64,
}

pub fn temperature_point(
    temperature: f64,
    sc: &SuperconductorParams,
    classes: &[TlsClass],
    cavity: &CavityParams,
) -> Result<TemperaturePoint> {
    let omega0 = cavity.omega0();
    let (sigma1, sigma2) = conductivity(temperature, omega0, sc)?;
    let qp = q_qp(temperature, sc, omega0)?;
    let tls = if classes.is_empty() {
        f64::INFINITY
    } else {
        q_tls(temperature, classes, omega0)?
    };
    Ok(TemperaturePoint {
        temperature,
        delta: gap(temperature, sc.delta0),
        sigma1,
        sigma2,
        freq_shift: freq_shift(temperature, sc, omega0)?,
        q_qp: qp,
        q_tls: tls,
        q_int: 1.0 / (1.0 / tls + 1.0 / qp),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const OMEGA: f64 = 2.0 * PI * 7.9e9;

    fn niobium() -> SuperconductorParams {
        SuperconductorParams {
            delta0: mev_to_joule(1.53),
            sigma_n: 4.0e7,
            alpha: 3.3e-5,
            g_factor: 74.4,
        }
    }

    #[test]
    fn gap_reference_values() {
        let sc = niobium();
        assert_eq!(gap(0.0, sc.delta0), sc.delta0);
        assert_relative_eq!(gap(1.0, sc.delta0), 2.451_330_221_642_648_2e-22, max_relative = 1e-12);
        assert_relative_eq!(critical_temperature(mev_to_joule(1.53)), 10.065, max_relative = 1e-3);
        assert_relative_eq!(delta_from_critical_temperature(sc.critical_temperature()), sc.delta0, max_relative = 1e-14);
    }

    #[test]
    fn conductivity_reference_values() {
        let (s1, s2) = conductivity(1.5, OMEGA, &niobium()).unwrap();
        assert_relative_eq!(s1, 15_093.089_806_806_084, max_relative = 1e-9);
        assert_relative_eq!(s2, 5_884_641_286.428_907, max_relative = 1e-9);
    }

    #[test]
    fn zero_temperature_limits() {
        let sc = niobium();
        let (s1, s2) = conductivity(0.0, OMEGA, &sc).unwrap();
        assert_eq!(s1, 0.0);
        let limit = PI * sc.delta0 / (HBAR * OMEGA);
        assert_eq!(s2 / sc.sigma_n, limit);
        let (s1, s2) = conductivity(0.05, OMEGA, &sc).unwrap();
        assert!(s1 < 1e-60);
        assert_relative_eq!(s2 / sc.sigma_n, limit, max_relative = 1e-6);
        assert_eq!(freq_shift(0.0, &sc, OMEGA).unwrap(), 0.0);
        assert_eq!(q_qp(0.0, &sc, OMEGA).unwrap(), f64::INFINITY);
    }

    #[test]
    fn pair_breaking_rejected() {
        let sc = niobium();
        let omega = 2.1 * sc.delta0 / HBAR;
        assert!(matches!(conductivity(1.0, omega, &sc), Err(Error::PairBreaking { .. })));
    }

    #[test]
    fn shift_linear_in_alpha() {
        let sc = niobium();
        let double = SuperconductorParams { alpha: 2.0 * sc.alpha, ..sc };
        for t in [0.5, 1.0, 2.0, 3.0, 4.5] {
            assert_relative_eq!(
                freq_shift(t, &double, OMEGA).unwrap(),
                2.0 * freq_shift(t, &sc, OMEGA).unwrap(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn skin_depth_examples() {
        let d = skin_depth(3.3e-5, 74.4, OMEGA).unwrap();
        assert_relative_eq!(d, 39.6e-9, max_relative = 0.02);
        assert_eq!(skin_depth(0.0, 74.4, OMEGA).unwrap(), 0.0);
        assert_relative_eq!(skin_depth(3.3e-5, 74.4, 2.0 * OMEGA).unwrap(), d / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn empty_bath_is_pure_quasiparticle() {
        let cav = CavityParams::new(7.9e9, 500.0, 400.0, 0.02).unwrap();
        let sc = niobium();
        for t in [0.5, 2.0, 4.0] {
            assert_eq!(q_int_temperature(t, &sc, &[], &cav).unwrap(), q_qp(t, &sc, OMEGA).unwrap());
        }
    }

    #[test]
    fn continuous_and_discrete_tls_agree_roughly() {
        let dist = crate::distribution::DistributionParams {
            n_tot: 4.3e8,
            beta: 3.26,
            epsilon_s: 0.25,
            g_min: 1e-3,
            g_max: 1e3,
            n_classes: 28,
        };
        let times = crate::distribution::TlsTimes { t1: 723e-9, t_phi: 484e-9, t2_override: None };
        let classes = crate::distribution::sample_classes(&dist, &times, OMEGA).unwrap();
        let discrete = q_tls(0.02, &classes, OMEGA).unwrap();
        let continuous = q_tls_continuous(0.02, &dist, 723e-9, 484e-9, OMEGA).unwrap();
        // truncation at g_max removes part of the heavy g^2 tail
        assert!(continuous < discrete);
        assert!(discrete / continuous < 3.0);
    }

    proptest! {
        #[test]
        fn sigma1_increases(t in 0.1f64..4.0, dt in 1e-3f64..0.5) {
            let sc = niobium();
            let a = conductivity(t, OMEGA, &sc).unwrap().0;
            let b = conductivity(t + dt, OMEGA, &sc).unwrap().0;
            prop_assert!(b > a);
        }

        // below ~0.8 K the change is smaller than f64 resolution
        #[test]
        fn sigma2_and_shift_decrease(t in 0.8f64..4.5, dt in 1e-2f64..0.5) {
            let sc = niobium();
            let a = conductivity(t, OMEGA, &sc).unwrap().1;
            let b = conductivity(t + dt, OMEGA, &sc).unwrap().1;
            prop_assert!(b < a);
            prop_assert!(freq_shift(t + dt, &sc, OMEGA).unwrap() < freq_shift(t, &sc, OMEGA).unwrap());
        }

        #[test]
        fn q_qp_decreases_at_high_temperature(t in 2.0f64..4.0, dt in 1e-3f64..0.5) {
            let sc = niobium();
            prop_assert!(q_qp(t + dt, &sc, OMEGA).unwrap() < q_qp(t, &sc, OMEGA).unwrap());
        }
    }
}

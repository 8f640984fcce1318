//! Physical constants, cavity and TLS parameter types, and the thermal
//! primitives shared by the rest of the crate.
//!
//! All rates are angular (1/s). Anything quoted in Hz is converted with an
//! explicit factor of 2π at the boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, Error, Result};

/// CODATA 2018 values in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub k_b: f64,
    pub mu_0: f64,
    pub e_charge: f64,
    pub epsilon_0: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    k_b: 1.380_649e-23,
    mu_0: 1.256_637_062_12e-6,
    e_charge: 1.602_176_634e-19,
    epsilon_0: 8.854_187_812_8e-12,
};

pub const HBAR: f64 = CODATA.hbar;
pub const K_B: f64 = CODATA.k_b;
pub const MU_0: f64 = CODATA.mu_0;
pub const E_CHARGE: f64 = CODATA.e_charge;
pub const EPSILON_0: f64 = CODATA.epsilon_0;

/// Converts a frequency in Hz to an angular frequency.
pub fn angular(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

/// Single-mode cavity. `kappa0` is the full bare linewidth, coupling included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub f0: f64,
    pub kappa0: f64,
    pub kappa_c: f64,
    pub temperature: f64,
}

impl CavityParams {
    pub fn new(f0: f64, kappa0: f64, kappa_c: f64, temperature: f64) -> Result<Self> {
        let cavity = CavityParams {
            f0,
            kappa0,
            kappa_c,
            temperature,
        };
        cavity.validate()?;
        Ok(cavity)
    }

    /// Builds the cavity from coupling and non-TLS internal quality factors.
    pub fn from_quality_factors(f0: f64, q_c: f64, q_other: f64, temperature: f64) -> Result<Self> {
        if !(q_c > 0.0 && q_other > 0.0) {
            return Err(Error::invalid("quality factors must be positive"));
        }
        let omega0 = angular(f0);
        Self::new(f0, omega0 / q_c + omega0 / q_other, omega0 / q_c, temperature)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f0", self.f0),
            ("kappa0", self.kappa0),
            ("kappa_c", self.kappa_c),
            ("temperature", self.temperature),
        ] {
            require_finite(name, v)?;
        }
        if self.f0 <= 0.0 {
            return Err(Error::invalid("cavity f0 must be positive"));
        }
        if self.kappa0 <= 0.0 {
            return Err(Error::invalid("cavity kappa0 must be positive"));
        }
        if self.kappa_c < 0.0 {
            return Err(Error::invalid("cavity kappa_c must be non-negative"));
        }
        if self.kappa_c > self.kappa0 {
            return Err(Error::invalid(format!(
                "kappa_c ({}) exceeds the total bare linewidth kappa0 ({})",
                self.kappa_c, self.kappa0
            )));
        }
        if self.temperature < 0.0 {
            return Err(Error::invalid("temperature must be non-negative"));
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        angular(self.f0)
    }

    /// Thermal occupation of the cavity mode.
    pub fn thermal_occupation(&self) -> f64 {
        bose_einstein(self.omega0(), self.temperature).unwrap_or(0.0)
    }
}

/// A family of identical two-level systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsClass {
    pub g: f64,
    pub count: f64,
    pub omega_tls: f64,
    pub t1: f64,
    pub t_phi: f64,
    /// Fixes T2* directly instead of composing it from `t1`, `t_phi` and temperature.
    #[serde(default)]
    pub t2_override: Option<f64>,
}

impl TlsClass {
    pub fn new(g: f64, count: f64, omega_tls: f64, t1: f64, t_phi: f64) -> Result<Self> {
        let class = TlsClass {
            g,
            count,
            omega_tls,
            t1,
            t_phi,
            t2_override: None,
        };
        class.validate()?;
        Ok(class)
    }

    pub fn with_t2_override(mut self, t2: f64) -> Self {
        self.t2_override = Some(t2);
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("g", self.g)?;
        require_finite("count", self.count)?;
        require_finite("omega_tls", self.omega_tls)?;
        if self.g < 0.0 {
            return Err(Error::invalid("TLS coupling g must be non-negative"));
        }
        if self.count < 0.0 {
            return Err(Error::invalid("TLS count must be non-negative"));
        }
        if !(self.t1 > 0.0) {
            return Err(Error::invalid("TLS T1 must be positive"));
        }
        if !(self.t_phi > 0.0) {
            return Err(Error::invalid("TLS T_phi must be positive or infinite"));
        }
        if let Some(t2) = self.t2_override {
            if !(t2 > 0.0 && t2.is_finite()) {
                return Err(Error::invalid("T2* override must be positive and finite"));
            }
        }
        Ok(())
    }

    pub fn t2_star(&self, temperature: f64) -> Result<f64> {
        match self.t2_override {
            Some(t2) => Ok(t2),
            None => t2_star(self.t1, self.t_phi, self.omega_tls, temperature),
        }
    }
}

/// Bose-Einstein occupation `1/(exp(ħω/kT) - 1)`, exactly zero at T = 0.
pub fn bose_einstein(omega: f64, temperature: f64) -> Result<f64> {
    require_finite("omega", omega)?;
    require_finite("temperature", temperature)?;
    if omega <= 0.0 {
        return Err(Error::invalid("omega must be positive"));
    }
    if temperature < 0.0 {
        return Err(Error::invalid("temperature must be non-negative"));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Total coherence time from energy relaxation, pure dephasing and the
/// thermal occupation at `omega`.
pub fn t2_star(t1: f64, t_phi: f64, omega: f64, temperature: f64) -> Result<f64> {
    if !(t1 > 0.0) {
        return Err(Error::invalid("T1 must be positive"));
    }
    if !(t_phi > 0.0) {
        return Err(Error::invalid("T_phi must be positive or infinite"));
    }
    let f = bose_einstein(omega, temperature)?;
    if t1.is_infinite() {
        return Ok(t_phi);
    }
    // written as a ratio so that T_phi = inf, T = 0 gives exactly 2*T1
    Ok(t1 / (0.5 + f + t1 / t_phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const OMEGA_79: f64 = 2.0 * PI * 7.9e9;

    #[test]
    fn bose_zero_temperature_is_exactly_zero() {
        assert_eq!(bose_einstein(OMEGA_79, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bose_unity_at_ln2() {
        let t = 0.3;
        let omega = K_B * t * 2f64.ln() / HBAR;
        assert_relative_eq!(bose_einstein(omega, t).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn bose_matches_high_precision_value() {
        assert_relative_eq!(
            bose_einstein(OMEGA_79, 1.0).unwrap(),
            2.169_066_306_141_486_4,
            max_relative = 1e-13
        );
    }

    #[test]
    fn bose_rejects_bad_input() {
        assert!(bose_einstein(f64::NAN, 1.0).is_err());
        assert!(bose_einstein(OMEGA_79, f64::INFINITY).is_err());
        assert!(bose_einstein(-1.0, 1.0).is_err());
    }

    #[test]
    fn t2_star_base_temperature() {
        let t2 = t2_star(723e-9, 484e-9, OMEGA_79, 0.02).unwrap();
        assert_relative_eq!(t2, 3.626_238_331_331_168_7e-7, max_relative = 1e-12);
    }

    #[test]
    fn t2_star_limits() {
        assert_eq!(t2_star(1e-6, f64::INFINITY, OMEGA_79, 0.0).unwrap(), 2e-6);
        assert_relative_eq!(
            t2_star(f64::INFINITY, 3e-7, OMEGA_79, 0.0).unwrap(),
            3e-7,
            max_relative = 1e-15
        );
    }

    #[test]
    fn cavity_rejects_coupling_above_total() {
        assert!(CavityParams::new(7.9e9, 10.0, 20.0, 0.02).is_err());
        assert!(CavityParams::new(7.9e9, 10.0, 5.0, -1.0).is_err());
        assert!(CavityParams::new(7.9e9, 10.0, 5.0, 0.02).is_ok());
    }

    #[test]
    fn override_wins() {
        let c = TlsClass::new(1.0, 1.0, OMEGA_79, 1e-6, 1e-6)
            .unwrap()
            .with_t2_override(2.86e-7);
        assert_eq!(c.t2_star(4.0).unwrap(), 2.86e-7);
    }

    proptest! {
        #[test]
        fn bose_monotone_in_temperature(t in 1e-3f64..10.0, dt in 1e-4f64..1.0) {
            let a = bose_einstein(OMEGA_79, t).unwrap();
            let b = bose_einstein(OMEGA_79, t + dt).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn bose_monotone_in_frequency(f in 1e8f64..1e11, scale in 1.001f64..3.0, t in 0.01f64..5.0) {
            let a = bose_einstein(2.0 * PI * f, t).unwrap();
            let b = bose_einstein(2.0 * PI * f * scale, t).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn t2_star_decreases_with_temperature(t in 1e-3f64..5.0, dt in 1e-3f64..1.0) {
            let a = t2_star(723e-9, 484e-9, OMEGA_79, t).unwrap();
            let b = t2_star(723e-9, 484e-9, OMEGA_79, t + dt).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn t2_star_twice_t1_without_dephasing(t1 in 1e-9f64..1e-3) {
            prop_assert_eq!(t2_star(t1, f64::INFINITY, OMEGA_79, 0.0).unwrap(), 2.0 * t1);
        }
    }
}

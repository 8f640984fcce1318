//! TOML run configuration. Every field has a default, so an empty file
//! reproduces the reference parameter set.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tls_resonator::distribution::{DistributionParams, TlsTimes};
use tls_resonator::dynamics::SolverOptions;
use tls_resonator::mattis_bardeen::{mev_to_joule, SuperconductorParams};
use tls_resonator::model::CavityParams;
use tls_resonator::{presets, Error as ModelError};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cavity: CavitySection,
    pub distribution: DistributionSection,
    pub tls: TlsSection,
    pub superconductor: SuperconductorSection,
    pub solver: SolverSection,
    pub ringdown: RingdownSection,
    pub ringup: RingupSection,
    pub temperature_sweep: TemperatureSection,
    pub report: ReportSection,
    pub noise: NoiseSection,
    pub fit: FitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavitySection {
    pub f0_hz: f64,
    pub q_c: f64,
    /// Quality factor of all non-TLS internal loss.
    pub q_other: f64,
    pub temperature_k: f64,
}

impl Default for CavitySection {
    fn default() -> Self {
        CavitySection {
            f0_hz: presets::F0,
            q_c: presets::Q_COUPLING,
            q_other: presets::Q_SATURATED,
            temperature_k: presets::BASE_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributionSection {
    /// When absent, chosen so the single-photon quality factor equals `q_single_photon`.
    pub n_tot: Option<f64>,
    pub q_single_photon: f64,
    pub beta: f64,
    pub epsilon_s: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub n_classes: usize,
}

impl Default for DistributionSection {
    fn default() -> Self {
        DistributionSection {
            n_tot: None,
            q_single_photon: presets::Q_SINGLE_PHOTON,
            beta: presets::BETA,
            epsilon_s: presets::EPSILON_S,
            g_min: presets::G_MIN,
            g_max: presets::G_MAX,
            n_classes: presets::N_CLASSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TlsSection {
    pub t1_s: f64,
    pub t_phi_s: f64,
    /// Coherence time used by ring-down and ring-up runs in place of the
    /// value composed from `t1_s` and `t_phi_s`.
    pub t2_override_s: Option<f64>,
}

impl Default for TlsSection {
    fn default() -> Self {
        TlsSection {
            t1_s: presets::T1,
            t_phi_s: presets::T_PHI,
            t2_override_s: Some(presets::T2_RINGDOWN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperconductorSection {
    pub delta0_mev: f64,
    pub sigma_n: f64,
    pub alpha: f64,
    pub g_factor: f64,
}

impl Default for SuperconductorSection {
    fn default() -> Self {
        SuperconductorSection {
            delta0_mev: presets::DELTA0_MEV,
            sigma_n: presets::SIGMA_N,
            alpha: presets::KINETIC_RATIO,
            g_factor: presets::GEOMETRY_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Grid points per trajectory; automatic when absent.
    pub m_steps: Option<usize>,
    pub window_margin: f64,
    pub check_window: bool,
    pub verify_convergence: bool,
    pub convergence_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSection {
            m_steps: d.m_steps,
            window_margin: d.window_margin,
            check_window: d.check_window,
            verify_convergence: d.verify_convergence,
            convergence_tol: d.convergence_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingdownSection {
    pub photon_numbers: Vec<f64>,
    /// Scale the TLS number of each trace with its initial linewidth.
    pub scale_n_tot: bool,
    /// Each trace runs until the bare cavity would hold this many photons.
    pub end_photons: f64,
    /// Rows written per trace; the solver grid is decimated to this.
    pub output_points: usize,
}

impl Default for RingdownSection {
    fn default() -> Self {
        RingdownSection {
            photon_numbers: presets::ringdown_photon_numbers(),
            scale_n_tot: true,
            end_photons: 1.0,
            output_points: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingupSection {
    pub q_int: f64,
    pub detuning_hz: f64,
    pub forward_power_w: f64,
    pub duration_s: f64,
    pub points: usize,
    pub sweep_points: usize,
    /// Half-width of the reflection sweep in loaded linewidths.
    pub sweep_half_span: f64,
    pub cable_delay_s: f64,
}

impl Default for RingupSection {
    fn default() -> Self {
        RingupSection {
            q_int: 5.3e8,
            detuning_hz: 0.8,
            forward_power_w: 1e-9,
            duration_s: 0.04,
            points: 4000,
            sweep_points: 401,
            sweep_half_span: 10.0,
            cable_delay_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperatureSection {
    pub t_min_k: f64,
    pub t_max_k: f64,
    pub points: usize,
    pub log_spacing: bool,
}

impl Default for TemperatureSection {
    fn default() -> Self {
        TemperatureSection {
            t_min_k: 0.02,
            t_max_k: 4.0,
            points: 60,
            log_spacing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub e_max_v_per_m: f64,
    pub oxide_volume_m3: f64,
    pub eps_r: f64,
    /// Classes whose point density exceeds this count as populated.
    pub count_threshold: f64,
    /// Coupling rate (1/s) above which TLS enter the volume density.
    pub density_g_threshold: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            e_max_v_per_m: presets::E_MAX_SINGLE_PHOTON,
            oxide_volume_m3: presets::OXIDE_VOLUME,
            eps_r: 10.0,
            count_threshold: 1.0,
            density_g_threshold: 110.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Relative Gaussian noise added to synthetic power and quality data.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub max_iterations: usize,
    pub t2_s: f64,
    pub beta: f64,
    pub epsilon_s: f64,
    /// Initial TLS numbers relative to the configured value.
    pub n_tot_factor: f64,
    pub ringup_q_int: f64,
    pub ringup_q_c: f64,
    pub ringup_detuning_hz: f64,
    pub ringup_noise: f64,
    pub temperature_alpha: f64,
    pub temperature_delta0_mev: f64,
    pub temperature_sigma_n: f64,
    pub temperature_t1_s: f64,
    pub temperature_t_phi_s: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            max_iterations: 200,
            t2_s: 350e-9,
            beta: 3.0,
            epsilon_s: 0.3,
            n_tot_factor: 1.3,
            ringup_q_int: 3e8,
            ringup_q_c: 1.5e8,
            ringup_detuning_hz: 0.5,
            ringup_noise: 0.01,
            temperature_alpha: 2e-5,
            temperature_delta0_mev: 1.4,
            temperature_sigma_n: 2e7,
            temperature_t1_s: 1e-6,
            temperature_t_phi_s: 1e-6,
        }
    }
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field} must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> CliResult<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field} must be non-negative and finite, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> CliResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field} must be at least {min}, got {v}")))
    }
}

fn in_field(field: &str, e: ModelError) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let c = &self.cavity;
        positive("cavity.f0_hz", c.f0_hz)?;
        positive("cavity.q_c", c.q_c)?;
        positive("cavity.q_other", c.q_other)?;
        non_negative("cavity.temperature_k", c.temperature_k)?;
        self.cavity_params().map_err(|e| in_field("cavity", e))?;

        let d = &self.distribution;
        if let Some(n) = d.n_tot {
            non_negative("distribution.n_tot", n)?;
        }
        positive("distribution.q_single_photon", d.q_single_photon)?;
        positive("distribution.beta", d.beta)?;
        positive("distribution.epsilon_s", d.epsilon_s)?;
        positive("distribution.g_min", d.g_min)?;
        positive("distribution.g_max", d.g_max)?;
        at_least("distribution.n_classes", d.n_classes, 1)?;
        self.distribution_shape()
            .validate()
            .map_err(|e| in_field("distribution", e))?;

        positive("tls.t1_s", self.tls.t1_s)?;
        positive("tls.t_phi_s", self.tls.t_phi_s)?;
        if let Some(t2) = self.tls.t2_override_s {
            positive("tls.t2_override_s", t2)?;
        }

        let s = &self.superconductor;
        positive("superconductor.delta0_mev", s.delta0_mev)?;
        positive("superconductor.sigma_n", s.sigma_n)?;
        non_negative("superconductor.alpha", s.alpha)?;
        positive("superconductor.g_factor", s.g_factor)?;

        if let Some(m) = self.solver.m_steps {
            at_least("solver.m_steps", m, 2)?;
        }
        positive("solver.window_margin", self.solver.window_margin)?;
        positive("solver.convergence_tol", self.solver.convergence_tol)?;

        let r = &self.ringdown;
        if r.photon_numbers.is_empty() {
            return Err(CliError::Config("ringdown.photon_numbers must not be empty".into()));
        }
        for (i, &n) in r.photon_numbers.iter().enumerate() {
            positive(&format!("ringdown.photon_numbers[{i}]"), n)?;
            if n <= r.end_photons {
                return Err(CliError::Config(format!(
                    "ringdown.photon_numbers[{i}] = {n} must exceed ringdown.end_photons = {}",
                    r.end_photons
                )));
            }
        }
        positive("ringdown.end_photons", r.end_photons)?;
        at_least("ringdown.output_points", r.output_points, 2)?;

        let u = &self.ringup;
        positive("ringup.q_int", u.q_int)?;
        non_negative("ringup.detuning_hz", u.detuning_hz.abs())?;
        positive("ringup.forward_power_w", u.forward_power_w)?;
        positive("ringup.duration_s", u.duration_s)?;
        at_least("ringup.points", u.points, 2)?;
        at_least("ringup.sweep_points", u.sweep_points, 8)?;
        positive("ringup.sweep_half_span", u.sweep_half_span)?;
        non_negative("ringup.cable_delay_s", u.cable_delay_s)?;

        let t = &self.temperature_sweep;
        non_negative("temperature_sweep.t_min_k", t.t_min_k)?;
        positive("temperature_sweep.t_max_k", t.t_max_k)?;
        at_least("temperature_sweep.points", t.points, 1)?;
        if t.t_min_k > t.t_max_k {
            return Err(CliError::Config(
                "temperature_sweep.t_min_k must not exceed temperature_sweep.t_max_k".into(),
            ));
        }
        if t.log_spacing && t.t_min_k == 0.0 {
            return Err(CliError::Config(
                "temperature_sweep.t_min_k must be positive with log_spacing".into(),
            ));
        }

        let rep = &self.report;
        positive("report.e_max_v_per_m", rep.e_max_v_per_m)?;
        positive("report.oxide_volume_m3", rep.oxide_volume_m3)?;
        positive("report.eps_r", rep.eps_r)?;
        non_negative("report.count_threshold", rep.count_threshold)?;
        non_negative("report.density_g_threshold", rep.density_g_threshold)?;

        non_negative("noise.relative", self.noise.relative)?;

        let f = &self.fit;
        at_least("fit.max_iterations", f.max_iterations, 1)?;
        for (name, v) in [
            ("fit.t2_s", f.t2_s),
            ("fit.beta", f.beta),
            ("fit.epsilon_s", f.epsilon_s),
            ("fit.n_tot_factor", f.n_tot_factor),
            ("fit.ringup_q_int", f.ringup_q_int),
            ("fit.ringup_q_c", f.ringup_q_c),
            ("fit.ringup_noise", f.ringup_noise),
            ("fit.temperature_delta0_mev", f.temperature_delta0_mev),
            ("fit.temperature_sigma_n", f.temperature_sigma_n),
            ("fit.temperature_t1_s", f.temperature_t1_s),
            ("fit.temperature_t_phi_s", f.temperature_t_phi_s),
        ] {
            positive(name, v)?;
        }
        Ok(())
    }

    pub fn cavity_params(&self) -> tls_resonator::Result<CavityParams> {
        let c = &self.cavity;
        CavityParams::from_quality_factors(c.f0_hz, c.q_c, c.q_other, c.temperature_k)
    }

    /// Distribution with a placeholder `n_tot` of one.
    pub fn distribution_shape(&self) -> DistributionParams {
        let d = &self.distribution;
        DistributionParams {
            n_tot: d.n_tot.unwrap_or(1.0),
            beta: d.beta,
            epsilon_s: d.epsilon_s,
            g_min: d.g_min,
            g_max: d.g_max,
            n_classes: d.n_classes,
        }
    }

    /// Times for ring-down and ring-up runs.
    pub fn dynamic_times(&self) -> TlsTimes {
        TlsTimes {
            t1: self.tls.t1_s,
            t_phi: self.tls.t_phi_s,
            t2_override: self.tls.t2_override_s,
        }
    }

    /// Times for temperature sweeps, which always compose the coherence time.
    pub fn composed_times(&self) -> TlsTimes {
        TlsTimes {
            t2_override: None,
            ..self.dynamic_times()
        }
    }

    /// Distribution with `n_tot` resolved, calibrating it when not given.
    pub fn distribution_params(&self) -> CliResult<DistributionParams> {
        let mut shape = self.distribution_shape();
        if self.distribution.n_tot.is_none() {
            let cavity = self.cavity_params().map_err(|e| in_field("cavity", e))?;
            shape.n_tot = presets::calibrated_n_tot(
                &shape,
                &self.dynamic_times(),
                &cavity,
                self.distribution.q_single_photon,
            )
            .map_err(|e| in_field("distribution.q_single_photon", e))?;
        }
        Ok(shape)
    }

    pub fn superconductor_params(&self) -> SuperconductorParams {
        let s = &self.superconductor;
        SuperconductorParams {
            delta0: mev_to_joule(s.delta0_mev),
            sigma_n: s.sigma_n,
            alpha: s.alpha,
            g_factor: s.g_factor,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            m_steps: s.m_steps,
            window_margin: s.window_margin,
            check_window: s.check_window,
            verify_convergence: s.verify_convergence,
            convergence_tol: s.convergence_tol,
            ..SolverOptions::default()
        }
    }

    pub fn temperatures(&self) -> Vec<f64> {
        let t = &self.temperature_sweep;
        if t.points == 1 {
            return vec![t.t_min_k];
        }
        if t.log_spacing {
            tls_resonator::numeric::logspace(t.t_min_k, t.t_max_k, t.points)
        } else {
            let step = (t.t_max_k - t.t_min_k) / (t.points - 1) as f64;
            (0..t.points).map(|i| t.t_min_k + step * i as f64).collect()
        }
    }
}

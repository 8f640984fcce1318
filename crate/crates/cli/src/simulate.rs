use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use tls_resonator::distribution::sample_classes;
use tls_resonator::dynamics::{evolve_ringdown, evolve_ringup, CavityMoments, Trajectory};
use tls_resonator::mattis_bardeen::{skin_depth, temperature_point};
use tls_resonator::model::{t2_star, HBAR};
use tls_resonator::presets::{bare_decay_time, linewidth_scaled_n_tot};
use tls_resonator::reflection::{ringup_power, ReflectionParams, ReflectionResonator};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::io::{CsvOut, OutputDir};

pub struct Noise {
    relative: f64,
    rng: ChaCha8Rng,
}

impl Noise {
    pub fn new(relative: f64, seed: u64) -> Self {
        Noise {
            relative,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn gauss(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// `v (1 + r xi)`; returns `v` unchanged and draws nothing when `r = 0`.
    pub fn scale(&mut self, v: f64) -> f64 {
        if self.relative == 0.0 {
            v
        } else {
            v * (1.0 + self.relative * self.gauss())
        }
    }

    pub fn add(&mut self, v: f64, width: f64) -> f64 {
        if self.relative == 0.0 {
            v
        } else {
            v + self.relative * width * self.gauss()
        }
    }
}

/// Indices of `len` points thinned to at most `keep`, always keeping both ends.
fn decimate(len: usize, keep: usize) -> Vec<usize> {
    if len <= keep {
        return (0..len).collect();
    }
    let stride = (len - 1).div_ceil(keep - 1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if *idx.last().unwrap() != len - 1 {
        idx.push(len - 1);
    }
    idx
}

#[derive(Serialize)]
struct TraceSummary {
    file: String,
    initial_photons: f64,
    n_tot: f64,
    duration_s: f64,
    grid_points: usize,
    kappa_initial: f64,
    kappa_final: f64,
    kappa_tilde_final: f64,
}

pub fn ringdown(cfg: &RunConfig, seed: u64, out: &mut OutputDir) -> CliResult<BTreeMap<String, serde_json::Value>> {
    let cavity = cfg.cavity_params()?;
    let omega0 = cavity.omega0();
    let base = cfg.distribution_params()?;
    let times = cfg.dynamic_times();
    let photons = &cfg.ringdown.photon_numbers;
    let n_tots = if cfg.ringdown.scale_n_tot {
        linewidth_scaled_n_tot(&base, &times, &cavity, photons)?
    } else {
        vec![base.n_tot; photons.len()]
    };
    let mut noise = Noise::new(cfg.noise.relative, seed);
    let opts = cfg.solver_options();
    let mut summary = Vec::with_capacity(photons.len());

    for (i, (&n0, &n_tot)) in photons.iter().zip(&n_tots).enumerate() {
        let dist = tls_resonator::distribution::DistributionParams { n_tot, ..base };
        let classes = if n_tot > 0.0 {
            sample_classes(&dist, &times, omega0)?
        } else {
            Vec::new()
        };
        let duration = bare_decay_time(n0, cfg.ringdown.end_photons, &cavity);
        let traj = evolve_ringdown(CavityMoments::coherent(n0), &classes, &cavity, duration, &opts)?;
        let n = traj.photon_numbers();
        let kappa_at = |j: usize| {
            if j == 0 {
                traj.kappa_tilde(0)
            } else {
                -(n[j] / n[0]).ln() / traj.times[j]
            }
        };

        let mut csv = CsvOut::new(&["time_s", "photons", "kappa", "kappa_tilde", "q_int", "power_w"]);
        for j in decimate(traj.len(), cfg.ringdown.output_points) {
            let kappa = kappa_at(j);
            let power = noise.scale(HBAR * omega0 * cavity.kappa_c * n[j]);
            csv.row(&[
                traj.times[j],
                n[j],
                kappa,
                traj.kappa_tilde(j),
                omega0 / (kappa - cavity.kappa_c),
                power,
            ]);
        }
        let name = format!("ringdown_{i:02}.csv");
        out.write(&name, &csv.into_string())?;
        let last = traj.len() - 1;
        summary.push(TraceSummary {
            file: name,
            initial_photons: n0,
            n_tot,
            duration_s: duration,
            grid_points: traj.len(),
            kappa_initial: kappa_at(1),
            kappa_final: kappa_at(last),
            kappa_tilde_final: traj.kappa_tilde(last),
        });
    }
    out.write_json("ringdown_summary.json", &summary)?;

    let mut extra = BTreeMap::new();
    extra.insert("kappa0".into(), cavity.kappa0.into());
    extra.insert("kappa_c".into(), cavity.kappa_c.into());
    extra.insert("n_tot_low_power".into(), base.n_tot.into());
    Ok(extra)
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let j = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    ys[j - 1] + w * (ys[j] - ys[j - 1])
}

pub fn ringup(cfg: &RunConfig, seed: u64, out: &mut OutputDir) -> CliResult<BTreeMap<String, serde_json::Value>> {
    let cavity = cfg.cavity_params()?;
    let omega0 = cavity.omega0();
    let u = &cfg.ringup;
    let params = ReflectionParams {
        q_int: u.q_int,
        q_c: cfg.cavity.q_c,
        f0: cfg.cavity.f0_hz,
        delta: u.detuning_hz,
        p_f: u.forward_power_w,
    };
    params.validate()?;
    let mut noise = Noise::new(cfg.noise.relative, seed);

    let step = u.duration_s / (u.points - 1) as f64;
    let times: Vec<f64> = (0..u.points).map(|i| step * i as f64).collect();
    let mut csv = CsvOut::new(&["time_s", "power_w", "model_power_w"]);
    for &t in &times {
        let p = ringup_power(t, &params);
        csv.row(&[t, noise.scale(p), p]);
    }
    out.write("ringup.csv", &csv.into_string())?;

    // Cavity population under a resonant drive of the same forward power,
    // including the TLS bath.
    let dist = cfg.distribution_params()?;
    let classes = sample_classes(&dist, &cfg.dynamic_times(), omega0)?;
    let drive = (cavity.kappa_c * u.forward_power_w / (HBAR * omega0)).sqrt();
    let traj: Trajectory = evolve_ringup(
        &classes,
        &cavity,
        Complex64::new(drive, 0.0),
        u.duration_s,
        &cfg.solver_options(),
    )?;
    let n = traj.photon_numbers();
    let kt: Vec<f64> = (0..traj.len()).map(|j| traj.kappa_tilde(j)).collect();
    let mut csv = CsvOut::new(&["time_s", "photons", "kappa_tilde"]);
    for &t in &times {
        csv.row(&[t, interp_linear(&traj.times, &n, t), interp_linear(&traj.times, &kt, t)]);
    }
    out.write("ringup_photons.csv", &csv.into_string())?;

    let resonator = ReflectionResonator {
        f_r: cfg.cavity.f0_hz,
        q_int: u.q_int,
        q_c: cfg.cavity.q_c,
        phi: 0.0,
        amplitude: 1.0,
        alpha: 0.0,
        delay: u.cable_delay_s,
    };
    let half = u.sweep_half_span * resonator.f_r / resonator.q_loaded();
    let df = 2.0 * half / (u.sweep_points - 1) as f64;
    let freqs: Vec<f64> = (0..u.sweep_points)
        .map(|i| resonator.f_r - half + df * i as f64)
        .collect();
    let sweep = resonator.sweep(&freqs);
    let mut csv = CsvOut::new(&["frequency_hz", "s11_re", "s11_im"]);
    for (&f, z) in sweep.frequencies.iter().zip(&sweep.s11) {
        let re = noise.add(z.re, resonator.amplitude);
        let im = noise.add(z.im, resonator.amplitude);
        csv.row(&[f, re, im]);
    }
    out.write("s11_sweep.csv", &csv.into_string())?;

    let mut extra = BTreeMap::new();
    extra.insert("q_loaded".into(), params.q_loaded().into());
    extra.insert("drive_rate".into(), drive.into());
    Ok(extra)
}

pub fn temperature_sweep(
    cfg: &RunConfig,
    seed: u64,
    out: &mut OutputDir,
) -> CliResult<BTreeMap<String, serde_json::Value>> {
    let cavity = cfg.cavity_params()?;
    let omega0 = cavity.omega0();
    let sc = cfg.superconductor_params();
    sc.validate()?;
    let dist = cfg.distribution_params()?;
    let classes = sample_classes(&dist, &cfg.composed_times(), omega0)?;
    let temps = cfg.temperatures();
    let points = temps
        .iter()
        .map(|&t| temperature_point(t, &sc, &classes, &cavity))
        .collect::<tls_resonator::Result<Vec<_>>>()?;
    let shift_scale = points.iter().map(|p| p.freq_shift.abs()).fold(0.0, f64::max);
    let mut noise = Noise::new(cfg.noise.relative, seed);

    let mut csv = CsvOut::new(&[
        "temperature_k",
        "gap_j",
        "sigma1",
        "sigma2",
        "freq_shift",
        "q_qp",
        "q_tls",
        "q_int",
    ]);
    for p in &points {
        let shift = noise.add(p.freq_shift, shift_scale);
        let q = noise.scale(p.q_int);
        csv.row(&[p.temperature, p.delta, p.sigma1, p.sigma2, shift, p.q_qp, p.q_tls, q]);
    }
    out.write("temperature_sweep.csv", &csv.into_string())?;

    let mut extra = BTreeMap::new();
    extra.insert("critical_temperature_k".into(), sc.critical_temperature().into());
    extra.insert("skin_depth_m".into(), skin_depth(sc.alpha, sc.g_factor, omega0)?.into());
    extra.insert(
        "t2_star_base_s".into(),
        t2_star(cfg.tls.t1_s, cfg.tls.t_phi_s, omega0, cavity.temperature)?.into(),
    );
    Ok(extra)
}

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::Serialize;
use tls_resonator::fitting::joint::{joint_tls_fit, JointInit, JointSetup, RingdownTrace};
use tls_resonator::fitting::temperature::{
    synthesize, temperature_fit, TemperatureInit, TemperatureSetup, TemperatureSweep,
};
use tls_resonator::fitting::{FitOptions, FitResult};
use tls_resonator::mattis_bardeen::mev_to_joule;
use tls_resonator::distribution::TlsTimes;
use tls_resonator::presets::linewidth_scaled_n_tot;
use tls_resonator::reflection::{
    circle_fit, fit_ringup, ringup_power, ComplexSweep, ReflectionParams, RingupFitOptions,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{CsvOut, OutputDir, Table};

pub struct FitArgs<'a> {
    pub data: &'a [PathBuf],
    pub dbm: bool,
    pub photons: Option<&'a [f64]>,
}

type Extra = BTreeMap<String, serde_json::Value>;

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    estimates: T,
    fit: &'a FitResult,
}

fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions {
        max_iterations: cfg.fit.max_iterations,
        ..FitOptions::default()
    }
}

fn check_converged(fits: &[&FitResult]) -> CliResult<()> {
    match fits.iter().find(|f| !f.converged) {
        Some(f) => Err(CliError::NotConverged {
            iterations: f.iterations,
            chi2: f.chi2,
        }),
        None => Ok(()),
    }
}

fn single(args: &FitArgs<'_>, what: &str) -> CliResult<Table> {
    match args.data {
        [one] => Table::read(one),
        _ => Err(CliError::Config(format!(
            "fit {what} takes exactly one --data file, got {}",
            args.data.len()
        ))),
    }
}

#[derive(Serialize)]
struct RingdownEstimates {
    t2_s: f64,
    beta: f64,
    epsilon_s: f64,
    n_tot: Vec<f64>,
    initial_photons: Vec<f64>,
}

pub fn ringdown(cfg: &RunConfig, args: &FitArgs<'_>, out: &mut OutputDir) -> CliResult<Extra> {
    if args.data.is_empty() {
        return Err(CliError::Config("fit ringdown needs at least one --data file".into()));
    }
    if let Some(p) = args.photons {
        if p.len() != args.data.len() {
            return Err(CliError::Config(format!(
                "--photons lists {} values for {} data files",
                p.len(),
                args.data.len()
            )));
        }
    }
    let mut traces = Vec::with_capacity(args.data.len());
    for (i, path) in args.data.iter().enumerate() {
        let table = Table::read(path)?;
        let times = table.column("time_s")?.to_vec();
        let powers = table.power_w(args.dbm)?;
        let initial_photons = match args.photons {
            Some(p) => p[i],
            None if table.has("photons") => table.column("photons")?[0],
            None => *cfg.ringdown.photon_numbers.get(i).ok_or_else(|| {
                CliError::Config(format!(
                    "no initial photon number for trace {i}: pass --photons or list it in ringdown.photon_numbers"
                ))
            })?,
        };
        let trace = RingdownTrace {
            times,
            powers,
            initial_photons,
        };
        trace.validate().map_err(|e| CliError::data(path, e.to_string()))?;
        traces.push(trace);
    }

    let cavity = cfg.cavity_params()?;
    let base = cfg.distribution_params()?;
    let photons: Vec<f64> = traces.iter().map(|t| t.initial_photons).collect();
    let expected = if cfg.ringdown.scale_n_tot {
        let times = TlsTimes {
            t1: cfg.tls.t1_s,
            t_phi: cfg.tls.t_phi_s,
            t2_override: Some(cfg.fit.t2_s),
        };
        let shape = tls_resonator::distribution::DistributionParams {
            beta: cfg.fit.beta,
            epsilon_s: cfg.fit.epsilon_s,
            ..base
        };
        linewidth_scaled_n_tot(&shape, &times, &cavity, &photons)?
    } else {
        vec![base.n_tot; photons.len()]
    };
    let n_init: Vec<f64> = expected.iter().map(|n| n * cfg.fit.n_tot_factor).collect();
    let setup = JointSetup::new(cavity, base, cfg.tls.t1_s);
    let init = JointInit::new(cfg.fit.t2_s, cfg.fit.beta, cfg.fit.epsilon_s, &n_init);
    let fit = joint_tls_fit(&traces, &setup, init, &fit_options(cfg)).map_err(|e| match e {
        tls_resonator::Error::Trace { index, source } => {
            CliError::data(&args.data[index], source.to_string())
        }
        other => other.into(),
    })?;

    for (i, ov) in fit.overlays.iter().enumerate() {
        let mut csv = CsvOut::new(&["time_s", "data_kappa", "model_kappa", "sigma_kappa", "residual"]);
        for j in 0..ov.times.len() {
            csv.row(&[
                ov.times[j],
                ov.data_kappa[j],
                ov.model_kappa[j],
                ov.sigma_kappa[j],
                (ov.data_kappa[j] - ov.model_kappa[j]) / ov.sigma_kappa[j],
            ]);
        }
        out.write(&format!("overlay_{i:02}.csv"), &csv.into_string())?;
    }
    out.write_json(
        "fit.json",
        &Report {
            estimates: RingdownEstimates {
                t2_s: fit.t2,
                beta: fit.beta,
                epsilon_s: fit.epsilon_s,
                n_tot: fit.n_tot.clone(),
                initial_photons: photons,
            },
            fit: &fit.fit,
        },
    )?;
    check_converged(&[&fit.fit])?;
    Ok(Extra::new())
}

#[derive(Serialize)]
struct RingupEstimates {
    q_int: f64,
    q_c: f64,
    detuning_hz: f64,
    forward_power_w: f64,
    sigma_q_int: f64,
    sigma_q_c: f64,
    sigma_detuning_hz: f64,
    sigma_forward_power_w: f64,
}

pub fn ringup(cfg: &RunConfig, args: &FitArgs<'_>, out: &mut OutputDir) -> CliResult<Extra> {
    let table = single(args, "ringup")?;
    let times = table.column("time_s")?.to_vec();
    let powers = table.power_w(args.dbm)?;
    let init = ReflectionParams {
        q_int: cfg.fit.ringup_q_int,
        q_c: cfg.fit.ringup_q_c,
        f0: cfg.cavity.f0_hz,
        delta: cfg.fit.ringup_detuning_hz,
        p_f: powers[0].abs().max(f64::MIN_POSITIVE),
    };
    let opts = RingupFitOptions {
        relative_noise: cfg.fit.ringup_noise,
        solver: fit_options(cfg),
        ..RingupFitOptions::default()
    };
    let fit = fit_ringup(&times, &powers, &init, &opts).map_err(|e| match e {
        tls_resonator::Error::Unidentifiable(_) => CliError::data(&table.path, e.to_string()),
        other => other.into(),
    })?;

    let mut csv = CsvOut::new(&["time_s", "power_w", "model_power_w", "residual_w"]);
    for (&t, &p) in times.iter().zip(&powers) {
        let m = ringup_power(t, &fit.params);
        csv.row(&[t, p, m, p - m]);
    }
    out.write("residuals.csv", &csv.into_string())?;
    out.write_json(
        "fit.json",
        &Report {
            estimates: RingupEstimates {
                q_int: fit.params.q_int,
                q_c: fit.params.q_c,
                detuning_hz: fit.params.delta,
                forward_power_w: fit.params.p_f,
                sigma_q_int: fit.sigma_q_int,
                sigma_q_c: fit.sigma_q_c,
                sigma_detuning_hz: fit.sigma_delta,
                sigma_forward_power_w: fit.sigma_p_f,
            },
            fit: &fit.fit,
        },
    )?;
    check_converged(&[&fit.fit])?;
    Ok(Extra::new())
}

#[derive(Serialize)]
struct TemperatureEstimates {
    alpha: f64,
    delta0_j: f64,
    sigma_n: f64,
    t1_s: f64,
    t_phi_s: f64,
    sigma_alpha: f64,
    sigma_delta0_j: f64,
    sigma_sigma_n: f64,
    sigma_t1_s: f64,
    sigma_t_phi_s: f64,
    critical_temperature_k: f64,
}

#[derive(Serialize)]
struct TemperatureReport<'a> {
    estimates: TemperatureEstimates,
    shift_fit: &'a FitResult,
    q_fit: &'a FitResult,
}

pub fn temperature(cfg: &RunConfig, args: &FitArgs<'_>, out: &mut OutputDir) -> CliResult<Extra> {
    let table = single(args, "temperature")?;
    let temps = table.column("temperature_k")?.to_vec();
    let shift = TemperatureSweep {
        temperatures: temps.clone(),
        values: table.column("freq_shift")?.to_vec(),
    };
    let quality = TemperatureSweep {
        temperatures: temps.clone(),
        values: table.column("q_int")?.to_vec(),
    };
    let setup = TemperatureSetup::new(
        cfg.cavity_params()?,
        cfg.distribution_params()?,
        cfg.superconductor.g_factor,
    );
    let f = &cfg.fit;
    let init = TemperatureInit::new(
        f.temperature_alpha,
        mev_to_joule(f.temperature_delta0_mev),
        f.temperature_sigma_n,
        f.temperature_t1_s,
        f.temperature_t_phi_s,
    );
    let fit = temperature_fit(&shift, &quality, &setup, init, &fit_options(cfg))?;

    let times = TlsTimes {
        t1: fit.t1,
        t_phi: fit.t_phi,
        t2_override: None,
    };
    let (model_shift, model_q) = synthesize(&temps, &fit.superconductor, &times, &setup)?;
    let mut csv = CsvOut::new(&[
        "temperature_k",
        "freq_shift",
        "model_freq_shift",
        "q_int",
        "model_q_int",
    ]);
    for i in 0..temps.len() {
        csv.row(&[
            temps[i],
            shift.values[i],
            model_shift.values[i],
            quality.values[i],
            model_q.values[i],
        ]);
    }
    out.write("residuals.csv", &csv.into_string())?;
    out.write_json(
        "fit.json",
        &TemperatureReport {
            estimates: TemperatureEstimates {
                alpha: fit.superconductor.alpha,
                delta0_j: fit.superconductor.delta0,
                sigma_n: fit.superconductor.sigma_n,
                t1_s: fit.t1,
                t_phi_s: fit.t_phi,
                sigma_alpha: fit.sigma_alpha,
                sigma_delta0_j: fit.sigma_delta0,
                sigma_sigma_n: fit.sigma_sigma_n,
                sigma_t1_s: fit.sigma_t1,
                sigma_t_phi_s: fit.sigma_t_phi,
                critical_temperature_k: fit.superconductor.critical_temperature(),
            },
            shift_fit: &fit.shift_fit,
            q_fit: &fit.q_fit,
        },
    )?;
    check_converged(&[&fit.shift_fit, &fit.q_fit])?;
    Ok(Extra::new())
}

#[derive(Serialize)]
struct CircleEstimates {
    f_r_hz: f64,
    q_int: f64,
    q_c: f64,
    q_loaded: f64,
    phi: f64,
    amplitude: f64,
    alpha: f64,
    delay_s: f64,
    radius: f64,
    sigma_f_r_hz: f64,
    sigma_q_int: f64,
    sigma_q_c: f64,
    sigma_phi: f64,
}

pub fn circle(_cfg: &RunConfig, args: &FitArgs<'_>, out: &mut OutputDir) -> CliResult<Extra> {
    let table = single(args, "circle")?;
    let frequencies = table.column("frequency_hz")?.to_vec();
    let re = table.column("s11_re")?;
    let im = table.column("s11_im")?;
    let sweep = ComplexSweep {
        s11: re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        frequencies,
    };
    let fit = circle_fit(&sweep).map_err(|e| match e {
        tls_resonator::Error::NonCircular(_) | tls_resonator::Error::InsufficientSpan { .. } => {
            CliError::data(&table.path, e.to_string())
        }
        other => other.into(),
    })?;

    let r = &fit.resonator;
    let mut csv = CsvOut::new(&["frequency_hz", "s11_re", "s11_im", "model_re", "model_im"]);
    for (&f, z) in sweep.frequencies.iter().zip(&sweep.s11) {
        let m = r.s11(f);
        csv.row(&[f, z.re, z.im, m.re, m.im]);
    }
    out.write("residuals.csv", &csv.into_string())?;
    out.write_json(
        "fit.json",
        &Report {
            estimates: CircleEstimates {
                f_r_hz: r.f_r,
                q_int: r.q_int,
                q_c: r.q_c,
                q_loaded: fit.q_loaded,
                phi: r.phi,
                amplitude: r.amplitude,
                alpha: r.alpha,
                delay_s: r.delay,
                radius: fit.radius,
                sigma_f_r_hz: fit.sigma_f_r,
                sigma_q_int: fit.sigma_q_int,
                sigma_q_c: fit.sigma_q_c,
                sigma_phi: fit.sigma_phi,
            },
            fit: &fit.fit,
        },
    )?;
    check_converged(&[&fit.fit])?;
    Ok(Extra::new())
}

use std::collections::BTreeMap;

use serde::Serialize;
use tls_resonator::distribution::{
    bin_integral, class_table, density_per_ghz_um3, dipole_from_coupling, loss_tangent,
    sample_classes, tls_volume_density, truncated_integral, Dipole, DistributionParams,
};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::io::{CsvOut, OutputDir};

const NORMALIZATION_TOLERANCE: f64 = 1e-3;

#[derive(Serialize)]
struct Normalization {
    n_tot: f64,
    full_integral: f64,
    relative_error: f64,
    passes: bool,
    truncated_integral: f64,
    class_sum: f64,
    class_sum_relative_error: f64,
}

#[derive(Serialize)]
struct DistributionReport {
    params: DistributionParams,
    epsilon_prime: f64,
    normalization: Normalization,
    /// Classes whose point density exceeds the count threshold.
    populated_classes: usize,
    strongest_populated_coupling: Option<f64>,
    strongest_populated_bin_edge: Option<f64>,
    dipole_bound: Option<Dipole>,
    loss_tangent: f64,
    /// TLS per unit angular bandwidth and oxide volume, 1/((rad/s) m^3).
    density: f64,
    density_per_ghz_um3_cyclic: f64,
    density_per_ghz_um3_angular: f64,
}

/// Integral over the whole positive axis: quadrature across the bulk plus
/// the analytic tails.
fn full_integral(p: &DistributionParams) -> f64 {
    let ep = p.epsilon_prime();
    let lo = ep * 1e-12;
    let hi = ep * 1e12;
    let head = p.n_tot / p.epsilon_s * lo;
    let tail = p.n_tot / p.epsilon_s * ep.powf(p.beta) * hi.powf(1.0 - p.beta) / (p.beta - 1.0);
    head + bin_integral(lo, hi, p) + tail
}

pub fn distribution(cfg: &RunConfig, out: &mut OutputDir) -> CliResult<BTreeMap<String, serde_json::Value>> {
    let params = cfg.distribution_params()?;
    let cavity = cfg.cavity_params()?;
    let rep = &cfg.report;
    let rows = class_table(&params)?;

    let mut csv = CsvOut::new(&["g_low", "g_high", "g", "count", "point_density", "dipole_e_angstrom"]);
    for r in &rows {
        let d = dipole_from_coupling(r.g, rep.e_max_v_per_m)?;
        csv.row(&[r.g_low, r.g_high, r.g, r.count, r.point_density, d.e_angstrom]);
    }
    out.write("classes.csv", &csv.into_string())?;

    let full = full_integral(&params);
    let truncated = truncated_integral(&params);
    let class_sum: f64 = rows.iter().map(|r| r.count).sum();
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { (a / b - 1.0).abs() };
    let populated: Vec<_> = rows.iter().filter(|r| r.point_density > rep.count_threshold).collect();
    let strongest = populated.iter().map(|r| r.g).reduce(f64::max);

    let classes = sample_classes(&params, &cfg.dynamic_times(), cavity.omega0())?;
    let density = tls_volume_density(&classes, rep.density_g_threshold, cavity.kappa0, rep.oxide_volume_m3)?;
    let report = DistributionReport {
        params,
        epsilon_prime: params.epsilon_prime(),
        normalization: Normalization {
            n_tot: params.n_tot,
            full_integral: full,
            relative_error: rel(full, params.n_tot),
            passes: rel(full, params.n_tot) < NORMALIZATION_TOLERANCE,
            truncated_integral: truncated,
            class_sum,
            class_sum_relative_error: rel(class_sum, truncated),
        },
        populated_classes: populated.len(),
        strongest_populated_coupling: strongest,
        strongest_populated_bin_edge: populated.last().map(|r| r.g_high),
        dipole_bound: strongest.map(|g| dipole_from_coupling(g, rep.e_max_v_per_m)).transpose()?,
        loss_tangent: loss_tangent(&classes, rep.e_max_v_per_m, rep.oxide_volume_m3, cavity.kappa0, rep.eps_r)?,
        density,
        density_per_ghz_um3_cyclic: density_per_ghz_um3(density, true),
        density_per_ghz_um3_angular: density_per_ghz_um3(density, false),
    };
    out.write_json("report.json", &report)?;
    Ok(BTreeMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_integral_matches_n_tot() {
        for beta in [1.5, 2.0, 3.26, 5.0] {
            let p = DistributionParams {
                n_tot: 1e5,
                beta,
                epsilon_s: 0.25,
                g_min: 1e-3,
                g_max: 1e3,
                n_classes: 7,
            };
            assert!((full_integral(&p) / p.n_tot - 1.0).abs() < 1e-6, "beta {beta}");
        }
    }
}

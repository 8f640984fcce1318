use proptest::prelude::*;
use tls_resonator::distribution::{class_table, sample_classes, truncated_integral, DistributionParams, TlsTimes};
use tls_resonator::dynamics::{evolve_ringdown, CavityMoments, SolverOptions};
use tls_resonator::mattis_bardeen::{freq_shift, q_int_temperature};
use tls_resonator::model::CavityParams;
use tls_resonator::presets;
use tls_resonator::reflection::{steady_state_reflection, ReflectionParams};
use tls_resonator::tls::Bath;

fn times() -> TlsTimes {
    presets::ringdown_times()
}

#[test]
fn calibrated_bath_sets_low_power_quality_factor() {
    let cav = presets::cavity();
    let dist = presets::distribution().unwrap();
    let classes = sample_classes(&dist, &times(), cav.omega0()).unwrap();
    let loss = Bath::new(&classes, cav.omega0(), cav.temperature).unwrap().unsaturated_loss();
    let q_int = cav.omega0() / (cav.kappa0 - cav.kappa_c + loss);
    assert!((q_int / presets::Q_SINGLE_PHOTON - 1.0).abs() < 1e-9, "{q_int}");
}

#[test]
fn stronger_pulses_start_closer_to_bare_linewidth() {
    let cav = presets::cavity();
    let classes = sample_classes(&presets::distribution().unwrap(), &times(), cav.omega0()).unwrap();
    let mut previous = f64::INFINITY;
    for n0 in [1e9, 1e12, 1e15] {
        let traj = evolve_ringdown(
            CavityMoments::coherent(n0),
            &classes,
            &cav,
            presets::bare_decay_time(n0, 1e6, &cav),
            &SolverOptions::default(),
        )
        .unwrap();
        let first = traj.kappa_series().unwrap().kappa[0];
        assert!(first < previous, "{n0}: {first}");
        assert!(first >= cav.kappa0 * (1.0 - 1e-9));
        previous = first;
    }
}

#[test]
fn warm_cavity_loses_quality() {
    let cav = presets::cavity();
    let sc = presets::superconductor();
    let classes = sample_classes(&presets::distribution().unwrap(), &presets::temperature_times(), cav.omega0()).unwrap();
    let cold = q_int_temperature(3.0, &sc, &classes, &cav).unwrap();
    let warm = q_int_temperature(4.0, &sc, &classes, &cav).unwrap();
    assert!(warm < cold);
    assert!(freq_shift(4.0, &sc, cav.omega0()).unwrap() < freq_shift(3.0, &sc, cav.omega0()).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn classes_partition_truncated_integral(
        beta in 1.2f64..6.0,
        eps in 1e-2f64..10.0,
        n_classes in 1usize..40,
    ) {
        let p = DistributionParams { n_tot: 1e6, beta, epsilon_s: eps, g_min: 1e-3, g_max: 1e3, n_classes };
        let sum: f64 = class_table(&p).unwrap().iter().map(|r| r.count).sum();
        prop_assert!((sum / truncated_integral(&p) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ringdown_population_decays(scale in 1e-3f64..3.0, log_n0 in 4.0f64..16.0) {
        let cav = CavityParams::new(7.9e9, 537.7, 496.4, 0.02).unwrap();
        let base = presets::distribution().unwrap();
        let dist = DistributionParams { n_tot: base.n_tot * scale, ..base };
        let classes = sample_classes(&dist, &times(), cav.omega0()).unwrap();
        let n0 = 10f64.powf(log_n0);
        let opts = SolverOptions { verify_convergence: false, ..SolverOptions::default() };
        let traj = evolve_ringdown(CavityMoments::coherent(n0), &classes, &cav, 5e-3, &opts).unwrap();
        for w in traj.moments.windows(2) {
            prop_assert!(w[1].n < w[0].n);
            prop_assert!(w[1].n >= w[1].a_mean.norm_sqr() * (1.0 - 1e-9));
        }
    }

    #[test]
    fn steady_reflection_is_passive(
        q_int in 1e6f64..1e10,
        q_c in 1e6f64..1e10,
        delta in -50.0f64..50.0,
    ) {
        let p = ReflectionParams { q_int, q_c, f0: 7.9e9, delta, p_f: 1e-9 };
        let r = steady_state_reflection(&p);
        prop_assert!((0.0..=1.0).contains(&r));
    }
}

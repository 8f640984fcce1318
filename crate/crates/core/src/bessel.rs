//! Modified Bessel function of the second kind, order zero.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;
const MAX_TERMS: usize = 500;

/// `K0(x)` for `x > 0`: ascending series up to x = 2, Steed's continued
/// fraction (Temme's CF2) above.
pub fn bessel_k0(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::invalid(format!("K0 requires x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(if x <= SERIES_LIMIT { series(x) } else { continued_fraction(x) })
}

fn series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let log_term = -((0.5 * x).ln() + EULER_GAMMA);
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = log_term;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        let add = term * (log_term + harmonic);
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn continued_fraction(x: f64) -> f64 {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_TERMS {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() * (-x).exp() / s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> Vec<(f64, f64)> {
        include_str!("../tests/data/k0_reference.csv")
            .lines()
            .skip(1)
            .map(|l| {
                let (x, k) = l.split_once(',').unwrap();
                (x.parse().unwrap(), k.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn matches_reference_table() {
        let table = reference();
        assert_eq!(table.len(), 50);
        for (x, k) in table {
            assert_relative_eq!(bessel_k0(x).unwrap(), k, max_relative = 1e-9);
        }
    }

    #[test]
    fn known_values() {
        assert_relative_eq!(bessel_k0(1.0).unwrap(), 0.421_024_438_240_708_33, max_relative = 1e-12);
        assert_relative_eq!(bessel_k0(0.1).unwrap(), 2.427_069_024_702_016_6, max_relative = 1e-12);
        assert_relative_eq!(bessel_k0(2.0).unwrap(), 0.113_893_872_749_533_44, max_relative = 1e-12);
    }

    #[test]
    fn small_argument_leading_terms() {
        let x: f64 = 0.1;
        let leading = -(x / 2.0).ln() - EULER_GAMMA;
        // next correction is of order x^2/4 (ln + 1)
        assert!((bessel_k0(x).unwrap() - leading).abs() < 0.25 * x * x * (leading + 1.0) * 1.01);
    }

    #[test]
    fn large_argument_asymptotic_series() {
        let x: f64 = 20.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..12 {
            let m = (2 * k - 1) as f64;
            term *= -(m * m) / (k as f64 * 8.0 * x);
            sum += term;
        }
        let asym = (PI / (2.0 * x)).sqrt() * (-x).exp() * sum;
        assert_relative_eq!(bessel_k0(x).unwrap(), asym, max_relative = 1e-6);
    }

    #[test]
    fn integral_representation() {
        // K0(x) = int_0^inf exp(-x cosh t) dt, trapezoid rule converges fast here
        for x in [0.05, 0.7, 1.9, 2.1, 5.0, 17.0] {
            let h = 1e-3;
            let mut s = 0.5 * (-x as f64).exp();
            let mut t = h;
            loop {
                let v = (-x * f64::cosh(t)).exp();
                s += v;
                if v < 1e-300 || t > 40.0 {
                    break;
                }
                t += h;
            }
            assert_relative_eq!(bessel_k0(x).unwrap(), s * h, max_relative = 1e-10);
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k0(-1.0).is_err());
        assert!(bessel_k0(f64::NAN).is_err());
    }

    #[test]
    fn branches_join_continuously() {
        let below = bessel_k0(2.0).unwrap();
        let above = bessel_k0(2.0 + 1e-12).unwrap();
        assert_relative_eq!(below, above, max_relative = 1e-10);
    }

    proptest! {
        #[test]
        fn strictly_decreasing(x in 1e-3f64..40.0, step in 1.0001f64..3.0) {
            prop_assert!(bessel_k0(x * step).unwrap() < bessel_k0(x).unwrap());
        }
    }
}

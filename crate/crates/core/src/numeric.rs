//! Small numeric helpers shared across modules.

/// Pairwise summation; the result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `count` points logarithmically spaced from `start` to `stop` inclusive.
pub fn logspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (a, b) = (start.ln(), stop.ln());
            let step = (b - a) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == 0 {
                        start
                    } else if i == count - 1 {
                        stop
                    } else {
                        (a + step * i as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Centered rolling mean. Near the edges the window shrinks to what is available.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    if window <= 1 || n == 0 {
        return values.to_vec();
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    let half_lo = (window - 1) / 2;
    let half_hi = window / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_lo);
            let hi = (i + half_hi + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Linear interpolation of `ys(xs)` in log-space of `ys`, clamped at the ends.
/// `xs` must be increasing and `ys` strictly positive.
pub fn interp_log(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let j = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let w = (x - x0) / (x1 - x0);
    (ys[j - 1].ln() * (1.0 - w) + ys[j].ln() * w).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
    }

    #[test]
    fn logspace_endpoints_exact() {
        let v = logspace(1e-3, 1e3, 7);
        assert_eq!(v[0], 1e-3);
        assert_eq!(v[6], 1e3);
        assert!((v[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rolling_mean_constant() {
        let v = vec![2.0; 20];
        assert!(rolling_mean(&v, 5).iter().all(|&x| (x - 2.0).abs() < 1e-15));
        let r = rolling_mean(&[1.0, 2.0, 3.0, 4.0, 5.0], 3);
        assert_eq!(r, vec![1.5, 2.0, 3.0, 4.0, 4.5]);
    }

    #[test]
    fn interp_log_is_exact_for_exponentials() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (-0.3 * x).exp()).collect();
        let y = interp_log(&xs, &ys, 4.37);
        assert!((y / (-0.3f64 * 4.37).exp() - 1.0).abs() < 1e-13);
    }
}

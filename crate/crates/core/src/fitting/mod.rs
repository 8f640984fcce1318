//! Bounded weighted nonlinear least squares.
//!
//! Parameters are optimized in an internal space where logarithmic
//! parameters appear as their natural log. Bounds are enforced by projection.

pub mod joint;
pub mod temperature;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
    pub fixed: bool,
    /// Magnitude used for the finite-difference step when the value is near zero.
    pub typical: Option<f64>,
}

impl Parameter {
    pub fn linear(name: &str, initial: f64, lower: f64, upper: f64) -> Self {
        Parameter {
            name: name.to_string(),
            initial,
            lower,
            upper,
            scale: Scale::Linear,
            fixed: false,
            typical: None,
        }
    }

    pub fn log(name: &str, initial: f64, lower: f64, upper: f64) -> Self {
        Parameter {
            scale: Scale::Log,
            ..Self::linear(name, initial, lower, upper)
        }
    }

    pub fn fixed(mut self) -> Self {
        self.fixed = true;
        self
    }

    pub fn with_typical(mut self, typical: f64) -> Self {
        self.typical = Some(typical);
        self
    }

    fn to_internal(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Linear => x,
            Scale::Log => x.ln(),
        }
    }

    fn to_external(&self, y: f64) -> f64 {
        match self.scale {
            Scale::Linear => y,
            Scale::Log => y.exp(),
        }
    }

    fn internal_bounds(&self) -> (f64, f64) {
        match self.scale {
            Scale::Linear => (self.lower, self.upper),
            Scale::Log => (
                if self.lower > 0.0 { self.lower.ln() } else { f64::NEG_INFINITY },
                self.upper.ln(),
            ),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower < self.upper) {
            return Err(Error::invalid(format!("parameter {}: lower bound not below upper", self.name)));
        }
        if !(self.initial >= self.lower && self.initial <= self.upper) || !self.initial.is_finite() {
            return Err(Error::invalid(format!(
                "parameter {}: initial value {} outside [{}, {}]",
                self.name, self.initial, self.lower, self.upper
            )));
        }
        if self.scale == Scale::Log && !(self.lower >= 0.0 && self.initial > 0.0) {
            return Err(Error::invalid(format!(
                "parameter {}: logarithmic scale needs a positive value and non-negative lower bound",
                self.name
            )));
        }
        Ok(())
    }
}

pub type ResidualFn<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a;

/// `residuals(x)` returns model minus data; `sigma` holds the 1-sigma of each point.
pub struct FitProblem<'a> {
    pub params: Vec<Parameter>,
    pub residuals: Box<ResidualFn<'a>>,
    pub sigma: Vec<f64>,
}

impl<'a> FitProblem<'a> {
    pub fn new(
        params: Vec<Parameter>,
        sigma: Vec<f64>,
        residuals: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a,
    ) -> Self {
        FitProblem {
            params,
            residuals: Box::new(residuals),
            sigma,
        }
    }

    fn free(&self) -> Vec<usize> {
        (0..self.params.len()).filter(|&i| !self.params[i].fixed).collect()
    }

    /// Weighted residuals at external point `x`.
    pub fn weighted(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = (self.residuals)(x)?;
        if r.len() != self.sigma.len() {
            return Err(Error::LengthMismatch {
                what: "residuals and sigma",
                left: r.len(),
                right: self.sigma.len(),
            });
        }
        Ok(r.iter().zip(&self.sigma).map(|(r, s)| r / s).collect())
    }

    pub fn chi2(&self, x: &[f64]) -> Result<f64> {
        Ok(self.weighted(x)?.iter().map(|v| v * v).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub lambda_initial: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Relative chi-square decrease below which an accepted step counts as converged.
    pub ftol: f64,
    /// Internal-space step size below which the fit counts as converged.
    pub xtol: f64,
    pub relative_step: f64,
    pub absolute_step_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            lambda_initial: 1e-3,
            lambda_min: 1e-8,
            lambda_max: 1e8,
            ftol: 1e-10,
            xtol: 1e-10,
            relative_step: 1e-6,
            absolute_step_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub chi2: f64,
    pub lambda: f64,
    pub accepted: bool,
    pub method: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub sigma: Vec<f64>,
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub n_points: usize,
    pub n_free: usize,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip)]
    pub covariance: Vec<Vec<f64>>,
    pub convergence_log: Vec<IterationRecord>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn sigma_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.sigma[i])
    }
}

struct Space<'p, 'a> {
    problem: &'p FitProblem<'a>,
    free: Vec<usize>,
    base: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Space<'_, '_> {
    fn external(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            let p = &self.problem.params[i];
            x[i] = p.to_external(y[k]).clamp(p.lower, p.upper);
        }
        x
    }

    fn project(&self, y: &mut [f64]) {
        for (k, v) in y.iter_mut().enumerate() {
            *v = v.clamp(self.lo[k], self.hi[k]);
        }
    }

    fn weighted(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.problem.weighted(&self.external(y))
    }

    fn step(&self, k: usize, y: f64, opts: &FitOptions) -> f64 {
        let p = &self.problem.params[self.free[k]];
        match p.scale {
            Scale::Log => opts.relative_step,
            Scale::Linear => {
                let typical = p.typical.unwrap_or(0.0).abs();
                (opts.relative_step * y.abs().max(typical)).max(opts.absolute_step_floor)
            }
        }
    }
}

/// Central-difference Jacobian of the weighted residuals in internal space.
/// Columns are evaluated in parallel; each column is deterministic.
fn jacobian(space: &Space, y: &[f64], opts: &FitOptions, step_scale: f64) -> Result<DMatrix<f64>> {
    let columns: Vec<Result<Vec<f64>>> = (0..y.len())
        .into_par_iter()
        .map(|k| {
            let h = space.step(k, y[k], opts) * step_scale;
            let mut up = y.to_vec();
            let mut down = y.to_vec();
            up[k] = (y[k] + h).min(space.hi[k]);
            down[k] = (y[k] - h).max(space.lo[k]);
            let span = up[k] - down[k];
            if span <= 0.0 {
                return Err(Error::Fit(format!("zero-width difference step for parameter {k}")));
            }
            let ru = space.weighted(&up)?;
            let rd = space.weighted(&down)?;
            Ok(ru.iter().zip(&rd).map(|(a, b)| (a - b) / span).collect())
        })
        .collect();
    let m = space.problem.sigma.len();
    let mut j = DMatrix::zeros(m, y.len());
    for (k, col) in columns.into_iter().enumerate() {
        for (i, v) in col?.into_iter().enumerate() {
            j[(i, k)] = v;
        }
    }
    Ok(j)
}

/// Jacobian of the weighted residuals with respect to the free parameters in
/// internal coordinates at the external point `x`. `step_scale` multiplies the
/// default difference step.
pub fn numerical_jacobian(
    problem: &FitProblem,
    x: &[f64],
    step_scale: f64,
    opts: &FitOptions,
) -> Result<DMatrix<f64>> {
    let space = make_space(problem, x)?;
    let y: Vec<f64> = space
        .free
        .iter()
        .map(|&i| problem.params[i].to_internal(x[i]))
        .collect();
    jacobian(&space, &y, opts, step_scale)
}

fn make_space<'p, 'a>(problem: &'p FitProblem<'a>, base: &[f64]) -> Result<Space<'p, 'a>> {
    let free = problem.free();
    let (lo, hi) = free
        .iter()
        .map(|&i| problem.params[i].internal_bounds())
        .unzip();
    Ok(Space {
        problem,
        free,
        base: base.to_vec(),
        lo,
        hi,
    })
}

fn degenerate(jtj: &DMatrix<f64>) -> bool {
    if jtj.iter().any(|v| !v.is_finite()) {
        return true;
    }
    let max_diag = (0..jtj.nrows()).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
    (0..jtj.nrows()).any(|i| jtj[(i, i)] <= 1e-300 || jtj[(i, i)] < 1e-28 * max_diag)
}

fn solve_damped(jtj: &DMatrix<f64>, grad: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let mut a = jtj.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
    }
    let rhs = -grad;
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    a.lu().solve(&rhs)
}

/// Inverse of `J^T J`, falling back to an SVD pseudo-inverse; directions in
/// the null space get infinite variance.
fn inverse_normal(jtj: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = jtj.clone().cholesky() {
        return ch.inverse();
    }
    let n = jtj.nrows();
    let svd = jtj.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let mut inv = svd
        .pseudo_inverse(max_sv * 1e-14)
        .unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN));
    for i in 0..n {
        if jtj[(i, i)] <= max_sv * 1e-14 {
            inv[(i, i)] = f64::INFINITY;
        }
    }
    inv
}

pub fn minimize(problem: &FitProblem, opts: &FitOptions) -> Result<FitResult> {
    for p in &problem.params {
        p.validate()?;
    }
    let x0: Vec<f64> = problem.params.iter().map(|p| p.initial).collect();
    let space = make_space(problem, &x0)?;
    let n_free = space.free.len();
    let n_points = problem.sigma.len();
    if n_points <= n_free {
        return Err(Error::invalid(format!(
            "{n_points} points cannot constrain {n_free} free parameters"
        )));
    }
    if problem.sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("every data sigma must be positive and finite"));
    }
    let mut y: Vec<f64> = space
        .free
        .iter()
        .map(|&i| problem.params[i].to_internal(x0[i]))
        .collect();
    let mut r = space.weighted(&y)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("residuals are not finite at the initial point"));
    }
    let mut chi2: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = opts.lambda_initial;
    let mut log = Vec::new();
    let mut converged = n_free == 0;
    let mut iterations = 0;
    let mut used_simplex = false;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let j = match jacobian(&space, &y, opts, 1.0) {
            Ok(j) => j,
            Err(e) => {
                log::debug!("jacobian failed ({e}); switching to simplex");
                used_simplex = true;
                break;
            }
        };
        let jtj = j.transpose() * &j;
        if degenerate(&jtj) {
            log::debug!("degenerate jacobian; switching to simplex");
            used_simplex = true;
            break;
        }
        let grad = j.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda <= opts.lambda_max {
            let Some(delta) = solve_damped(&jtj, &grad, lambda) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = y.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            space.project(&mut trial);
            let moved = trial
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                .fold(0.0, f64::max);
            let candidate = space.weighted(&trial).ok().filter(|v| v.iter().all(|x| x.is_finite()));
            let trial_chi2 = candidate.as_ref().map(|v| v.iter().map(|x| x * x).sum::<f64>());
            match (candidate, trial_chi2) {
                (Some(rt), Some(c)) if c <= chi2 => {
                    let drop = (chi2 - c) / chi2.max(f64::MIN_POSITIVE);
                    y = trial;
                    r = rt;
                    chi2 = c;
                    lambda = (lambda / 10.0).max(opts.lambda_min);
                    accepted = true;
                    if drop < opts.ftol || moved < opts.xtol || chi2 == 0.0 {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    if moved < opts.xtol {
                        // no further progress possible at this resolution
                        converged = true;
                        break;
                    }
                    lambda *= 10.0;
                }
            }
        }
        log.push(IterationRecord {
            iteration: iterations,
            chi2,
            lambda,
            accepted,
            method: "levenberg-marquardt",
        });
        if !accepted && !converged {
            // damping exhausted: the current point is a local minimum to working precision
            converged = lambda > opts.lambda_max;
            break;
        }
    }

    if used_simplex {
        let (best, best_chi2, ok) = nelder_mead(&space, &y, chi2, opts, &mut log)?;
        y = best;
        chi2 = best_chi2;
        converged = ok;
    }

    finish(problem, &space, &y, chi2, converged, iterations, log, opts)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &FitProblem,
    space: &Space,
    y: &[f64],
    chi2: f64,
    converged: bool,
    iterations: usize,
    log: Vec<IterationRecord>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let x = space.external(y);
    let n_free = space.free.len();
    let n_points = problem.sigma.len();
    let dof = (n_points - n_free) as f64;
    let chi2_reduced = chi2 / dof;
    let p = problem.params.len();
    let mut covariance = vec![vec![0.0; p]; p];
    if n_free > 0 {
        let j = jacobian(space, y, opts, 1.0)?;
        let cov_y = inverse_normal(&(j.transpose() * &j)) * chi2_reduced;
        let d: Vec<f64> = space
            .free
            .iter()
            .map(|&i| match problem.params[i].scale {
                Scale::Linear => 1.0,
                Scale::Log => x[i],
            })
            .collect();
        for (a, &ia) in space.free.iter().enumerate() {
            for (b, &ib) in space.free.iter().enumerate() {
                covariance[ia][ib] = cov_y[(a, b)] * d[a] * d[b];
            }
        }
    }
    let sigma = (0..p).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
    Ok(FitResult {
        names: problem.params.iter().map(|p| p.name.clone()).collect(),
        values: x,
        sigma,
        chi2,
        chi2_reduced,
        n_points,
        n_free,
        converged,
        iterations,
        covariance,
        convergence_log: log,
    })
}

fn nelder_mead(
    space: &Space,
    start: &[f64],
    start_chi2: f64,
    opts: &FitOptions,
    log: &mut Vec<IterationRecord>,
) -> Result<(Vec<f64>, f64, bool)> {
    let n = start.len();
    let eval = |y: &[f64]| -> f64 {
        space
            .weighted(y)
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .ok()
            .filter(|c| c.is_finite())
            .unwrap_or(f64::INFINITY)
    };
    let mut simplex = vec![(start.to_vec(), start_chi2)];
    for k in 0..n {
        let mut v = start.to_vec();
        let h = (0.05 * v[k].abs()).max(1e-3);
        v[k] += if v[k] + h <= space.hi[k] { h } else { -h };
        space.project(&mut v);
        let c = eval(&v);
        simplex.push((v, c));
    }
    let max_evals = 2000 * n.max(1);
    let mut evals = 0;
    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= 1e-12 * best.abs().max(1e-300) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p.0[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n)
                .map(|k| centroid[k] + t * (simplex[n].0[k] - centroid[k]))
                .collect();
            space.project(&mut v);
            v
        };
        let reflected = along(-1.0);
        let fr = eval(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            evals += 1;
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < worst { along(-0.5) } else { along(0.5) };
            let fc = eval(&contracted);
            evals += 1;
            if fc < worst.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    for k in 0..n {
                        p.0[k] = anchor[k] + 0.5 * (p.0[k] - anchor[k]);
                    }
                    p.1 = eval(&p.0);
                    evals += 1;
                }
            }
        }
        if evals % (50 * n.max(1)) == 0 {
            log.push(IterationRecord {
                iteration: log.len() + 1,
                chi2: simplex[0].1,
                lambda: f64::NAN,
                accepted: true,
                method: "nelder-mead",
            });
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (y, c) = simplex.swap_remove(0);
    log.push(IterationRecord {
        iteration: log.len() + 1,
        chi2: c,
        lambda: f64::NAN,
        accepted: true,
        method: "nelder-mead",
    });
    let _ = opts;
    Ok((y, c, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn linear_model_exact_data() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x).collect();
        let problem = FitProblem::new(vec![Parameter::linear("a", 1.0, -10.0, 10.0)], vec![1.0; 10], |p| {
            Ok(xs.iter().zip(&ys).map(|(x, y)| p[0] * x - y).collect())
        });
        let fit = minimize(&problem, &FitOptions::default()).unwrap();
        assert_relative_eq!(fit.values[0], 2.5, max_relative = 1e-12);
        assert!(fit.chi2_reduced < 1e-20);
        assert!(fit.converged);
    }

    #[test]
    fn quadratic_bowl() {
        let problem = FitProblem::new(
            vec![Parameter::linear("u", 0.0, -5.0, 5.0), Parameter::linear("v", 0.0, -5.0, 5.0)],
            vec![1.0; 3],
            |p| Ok(vec![p[0] - 1.25, 2.0 * (p[1] + 0.75), 0.1]),
        );
        let fit = minimize(&problem, &FitOptions::default()).unwrap();
        assert!((fit.values[0] - 1.25).abs() < 1e-8);
        assert!((fit.values[1] + 0.75).abs() < 1e-8);
    }

    #[test]
    fn rosenbrock_valley() {
        let problem = FitProblem::new(
            vec![Parameter::linear("x", -1.2, -5.0, 5.0), Parameter::linear("y", 1.0, -5.0, 5.0)],
            vec![1.0; 3],
            |p| Ok(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0], 0.0]),
        );
        let fit = minimize(&problem, &FitOptions::default()).unwrap();
        assert!((fit.values[0] - 1.0).abs() < 1e-6);
        assert!((fit.values[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fixed_parameters_are_untouched() {
        let problem = FitProblem::new(
            vec![Parameter::linear("a", 3.0, 0.0, 10.0).fixed(), Parameter::linear("b", 0.0, -5.0, 5.0)],
            vec![1.0; 4],
            |p| Ok((0..4).map(|i| p[0] * f64::from(i) + p[1] - 1.0 - 2.0 * f64::from(i)).collect()),
        );
        let fit = minimize(&problem, &FitOptions::default()).unwrap();
        assert_eq!(fit.values[0], 3.0);
        assert_eq!(fit.sigma[0], 0.0);
    }

    #[test]
    fn bounds_are_respected() {
        let problem = FitProblem::new(vec![Parameter::linear("a", 0.5, 0.0, 1.0)], vec![1.0; 2], |p| {
            Ok(vec![p[0] - 3.0, 0.0])
        });
        let fit = minimize(&problem, &FitOptions::default()).unwrap();
        assert_eq!(fit.values[0], 1.0);
    }

    #[test]
    fn flat_direction_falls_back_to_simplex() {
        let problem = FitProblem::new(
            vec![Parameter::linear("a", 0.3, -5.0, 5.0), Parameter::linear("unused", 1.0, -5.0, 5.0)],
            vec![1.0; 3],
            |p| Ok(vec![p[0] - 2.0, 0.5 * (p[0] - 2.0), 0.1]),
        );
        let fit = minimize(&problem, &FitOptions::default()).unwrap();
        assert!(fit.convergence_log.iter().any(|r| r.method == "nelder-mead"));
        assert!((fit.values[0] - 2.0).abs() < 1e-4);
        assert!(fit.sigma[1].is_infinite() || fit.sigma[1].is_nan() || fit.sigma[1] > 1e3);
    }

    #[test]
    fn invalid_problems_rejected() {
        let bad_bounds = FitProblem::new(vec![Parameter::linear("a", 5.0, 0.0, 1.0)], vec![1.0; 2], |_| Ok(vec![0.0; 2]));
        assert!(minimize(&bad_bounds, &FitOptions::default()).is_err());
        let no_dof = FitProblem::new(vec![Parameter::linear("a", 0.5, 0.0, 1.0)], vec![1.0], |_| Ok(vec![0.0]));
        assert!(minimize(&no_dof, &FitOptions::default()).is_err());
        let nan = FitProblem::new(vec![Parameter::linear("a", 0.5, 0.0, 1.0)], vec![1.0; 2], |_| Ok(vec![f64::NAN; 2]));
        assert!(minimize(&nan, &FitOptions::default()).is_err());
    }

    fn exponential_problem<'a>(t: &'a [f64], y: &'a [f64], scale: Scale, sigma: f64) -> FitProblem<'a> {
        let k = match scale {
            Scale::Linear => Parameter::linear("k", 1.0, 1e-3, 100.0),
            Scale::Log => Parameter::log("k", 1.0, 1e-3, 100.0),
        };
        FitProblem::new(
            vec![Parameter::linear("amp", 1.0, 0.0, 10.0), k],
            vec![sigma; t.len()],
            move |p| Ok(t.iter().zip(y).map(|(t, y)| p[0] * (-p[1] * t).exp() - y).collect()),
        )
    }

    fn noisy_exponential() -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..40).map(|i| f64::from(i) * 0.05).collect();
        let y = t
            .iter()
            .enumerate()
            .map(|(i, t)| 2.0 * (-1.7 * t).exp() + 0.01 * ((i * 7919 % 13) as f64 - 6.0) / 6.0)
            .collect();
        (t, y)
    }

    #[test]
    fn log_and_linear_scales_agree() {
        let (t, y) = noisy_exponential();
        let lin = minimize(&exponential_problem(&t, &y, Scale::Linear, 0.01), &FitOptions::default()).unwrap();
        let log = minimize(&exponential_problem(&t, &y, Scale::Log, 0.01), &FitOptions::default()).unwrap();
        assert_relative_eq!(lin.values[1], log.values[1], max_relative = 1e-4);
        assert_relative_eq!(lin.values[0], log.values[0], max_relative = 1e-4);
    }

    #[test]
    fn covariance_invariant_under_sigma_rescaling() {
        let (t, y) = noisy_exponential();
        let a = minimize(&exponential_problem(&t, &y, Scale::Log, 0.01), &FitOptions::default()).unwrap();
        let b = minimize(&exponential_problem(&t, &y, Scale::Log, 0.02), &FitOptions::default()).unwrap();
        for i in 0..2 {
            assert_relative_eq!(a.sigma[i], b.sigma[i], max_relative = 0.05);
        }
    }

    #[test]
    fn jacobian_stable_under_half_step() {
        let (t, y) = noisy_exponential();
        let problem = exponential_problem(&t, &y, Scale::Log, 0.01);
        let fit = minimize(&problem, &FitOptions::default()).unwrap();
        let opts = FitOptions::default();
        let full = numerical_jacobian(&problem, &fit.values, 1.0, &opts).unwrap();
        let half = numerical_jacobian(&problem, &fit.values, 0.5, &opts).unwrap();
        let scale = full.amax();
        for (a, b) in full.iter().zip(half.iter()) {
            assert!((a - b).abs() <= 1e-4 * scale);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn never_worse_than_start(a0 in 0.1f64..9.0, k0 in 0.01f64..50.0) {
            let (t, y) = noisy_exponential();
            let mut problem = exponential_problem(&t, &y, Scale::Log, 0.01);
            problem.params[0].initial = a0;
            problem.params[1].initial = k0;
            let start = problem.chi2(&[a0, k0]).unwrap();
            let fit = minimize(&problem, &FitOptions::default()).unwrap();
            prop_assert!(fit.chi2 <= start);
        }
    }
}

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::heat::{semidiscrete_sine_mode, solve_heat_1d, HeatBc};
use super::poisson::solve_poisson_2d;
use super::SolverError;
use crate::opgraph::{SchemeDescriptor, TimeScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceProblem {
    /// `u = sin(pi x) sin(pi y)` on the unit square; sizes are intervals per
    /// side, error in the max norm.
    Poisson,
    /// Implicit Euler on the first sine mode; sizes are step counts to
    /// `t = 0.1`, error against the semi-discrete solution so only the
    /// time error is measured.
    HeatImplicitTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    pub order: f64,
    pub hs: Vec<f64>,
    pub errors: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn fit_order(hs: &[f64], errors: &[f64]) -> Result<ConvergenceFit, SolverError> {
    if hs.len() < 3 || hs.len() != errors.len() {
        return Err(SolverError::InvalidInput("order fit needs at least 3 (h, error) pairs".into()));
    }
    if hs.iter().chain(errors).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(SolverError::InvalidInput("order fit needs positive finite h and errors".into()));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SolverError::InvalidInput("order fit needs distinct h values".into()));
    }
    let order = sxy / sxx;
    let warning = (order.abs() < 0.1).then(|| format!("errors do not decrease under refinement (fitted order {order:.3})"));
    Ok(ConvergenceFit { order, hs: hs.to_vec(), errors: errors.to_vec(), warning })
}

pub fn measure_convergence_order(problem: ConvergenceProblem, sizes: &[usize]) -> Result<ConvergenceFit, SolverError> {
    if sizes.len() < 3 {
        return Err(SolverError::InvalidInput("need at least 3 grid sizes".into()));
    }
    let mut hs = Vec::new();
    let mut errors = Vec::new();
    for &n in sizes {
        match problem {
            ConvergenceProblem::Poisson => {
                let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
                let sol = solve_poisson_2d(&|x, y| 2.0 * PI * PI * exact(x, y), &|_, _| 0.0, n)?;
                let h = 1.0 / n as f64;
                let w = n + 1;
                let e = (0..w * w)
                    .map(|k| (sol.field.values[k] - exact((k / w) as f64 * h, (k % w) as f64 * h)).abs())
                    .fold(0.0, f64::max);
                hs.push(h);
                errors.push(e);
            }
            ConvergenceProblem::HeatImplicitTime => {
                let (h, t_end) = (1.0 / 32.0, 0.1);
                let dt = t_end / n as f64;
                let scheme = SchemeDescriptor { dt: Some(dt), h: Some(h), ..SchemeDescriptor::new(TimeScheme::ImplicitEuler) };
                let run = solve_heat_1d(&|x| (PI * x).sin(), HeatBc::Dirichlet { left: 0.0, right: 0.0 }, 1.0, 1.0, &scheme, t_end)?;
                let exact = semidiscrete_sine_mode(1, 1.0, 1.0, h, t_end);
                let e = run.series.last().values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                hs.push(dt);
                errors.push(e);
            }
        }
    }
    fit_order(&hs, &errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_is_second_order() {
        let fit = measure_convergence_order(ConvergenceProblem::Poisson, &[16, 32, 64, 128]).unwrap();
        assert!((1.9..=2.1).contains(&fit.order), "{}", fit.order);
        assert!(fit.warning.is_none());
    }

    #[test]
    fn implicit_euler_is_first_order_in_time() {
        let fit = measure_convergence_order(ConvergenceProblem::HeatImplicitTime, &[20, 40, 80, 160]).unwrap();
        assert!((0.9..=1.1).contains(&fit.order), "{}", fit.order);
    }

    #[test]
    fn flat_errors_warn() {
        let fit = fit_order(&[0.1, 0.05, 0.025], &[1e-3; 3]).unwrap();
        assert!(fit.order.abs() < 1e-12);
        assert!(fit.warning.is_some());
        assert!(fit_order(&[0.1, 0.05], &[1.0, 0.5]).is_err());
        assert!(fit_order(&[0.1, 0.05, 0.02], &[1.0, 0.0, 0.5]).is_err());
    }
}

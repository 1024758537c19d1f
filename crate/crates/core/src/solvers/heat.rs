use serde::{Deserialize, Serialize};

use super::linalg::{solve_cyclic_constant, solve_tridiagonal};
use super::SolverError;
use crate::audit::{SolutionField, SolutionSeries};
use crate::opgraph::{SchemeDescriptor, TimeScheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum HeatBc {
    /// Fixed values at `x = 0` and `x = length`.
    Dirichlet { left: f64, right: f64 },
    Periodic,
}

/// A heat run with the evidence the well-posedness gate consumes.
#[derive(Debug, Clone)]
pub struct HeatRun {
    pub series: SolutionSeries,
    /// `kappa dt / h^2`.
    pub diffusion_number: f64,
    pub steps: usize,
    /// The series ended on a non-finite frame.
    pub diverged: bool,
}

/// Node coordinates: `n+1` nodes including both ends for Dirichlet data,
/// `n` nodes `x_i = i h` for periodic data.
pub fn heat_grid(bc: &HeatBc, length: f64, h: f64) -> Result<Vec<f64>, SolverError> {
    if !(h > 0.0 && length > 0.0) {
        return Err(SolverError::InvalidInput("length and h must be positive".into()));
    }
    let n = (length / h).round() as usize;
    if n < 3 || ((n as f64) * h - length).abs() > 1e-9 * length {
        return Err(SolverError::InvalidInput(format!(
            "h = {h} does not divide the length {length} into at least 3 cells"
        )));
    }
    let count = match bc {
        HeatBc::Dirichlet { .. } => n + 1,
        HeatBc::Periodic => n,
    };
    Ok((0..count).map(|i| i as f64 * h).collect())
}

pub(crate) fn step_count(dt: f64, t_end: f64) -> Result<usize, SolverError> {
    if !(dt > 0.0 && t_end > 0.0 && dt.is_finite()) {
        return Err(SolverError::InvalidInput("dt and t_end must be positive".into()));
    }
    Ok(((t_end / dt).round() as usize).max(1))
}

/// Finite-difference heat equation `u_t = kappa u_xx` on `[0, length]`.
/// Every step is recorded; a non-finite frame ends the series and sets
/// `diverged`.
pub fn solve_heat_1d(
    ic: &dyn Fn(f64) -> f64,
    bc: HeatBc,
    kappa: f64,
    length: f64,
    scheme: &SchemeDescriptor,
    t_end: f64,
) -> Result<HeatRun, SolverError> {
    let theta = match scheme.time_scheme {
        TimeScheme::FtcsExplicit => 0.0,
        TimeScheme::ImplicitEuler => 1.0,
        TimeScheme::CrankNicolson => 0.5,
        other => return Err(SolverError::UnsupportedScheme(other)),
    };
    let (Some(dt), Some(h)) = (scheme.dt, scheme.h) else {
        return Err(SolverError::InvalidInput("heat scheme needs dt and h".into()));
    };
    if !(kappa > 0.0) {
        return Err(SolverError::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    let xs = heat_grid(&bc, length, h)?;
    let steps = step_count(dt, t_end)?;
    let r = kappa * dt / (h * h);
    let mut u: Vec<f64> = xs.iter().map(|&x| ic(x)).collect();
    if let HeatBc::Dirichlet { left, right } = bc {
        u[0] = left;
        *u.last_mut().expect("grid is non-empty") = right;
    }
    let frame = |u: &Vec<f64>| SolutionField::new(vec![u.len()], vec![h], u.clone()).expect("1d shape");
    let mut times = vec![0.0];
    let mut frames = vec![frame(&u)];
    let mut diverged = false;
    let n = u.len();

    for k in 1..=steps {
        // Explicit part: v = u + r (1 - theta) D u.
        let e = r * (1.0 - theta);
        let mut v = u.clone();
        match bc {
            HeatBc::Periodic => {
                for i in 0..n {
                    let (l, rr) = (u[(i + n - 1) % n], u[(i + 1) % n]);
                    v[i] = u[i] + e * (l - 2.0 * u[i] + rr);
                }
            }
            HeatBc::Dirichlet { .. } => {
                for i in 1..n - 1 {
                    v[i] = u[i] + e * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
                }
            }
        }
        if theta > 0.0 {
            let a = -r * theta;
            let d = 1.0 + 2.0 * r * theta;
            match bc {
                HeatBc::Periodic => v = solve_cyclic_constant(a, d, a, &v),
                HeatBc::Dirichlet { left, right } => {
                    let m = n - 2;
                    let mut rhs = v[1..n - 1].to_vec();
                    rhs[0] -= a * left;
                    rhs[m - 1] -= a * right;
                    let inner = solve_tridiagonal(&vec![a; m], &vec![d; m], &vec![a; m], &rhs);
                    v[1..n - 1].copy_from_slice(&inner);
                }
            }
        }
        u = v;
        times.push(k as f64 * dt);
        frames.push(frame(&u));
        if !u.iter().all(|x| x.is_finite()) {
            diverged = true;
            break;
        }
    }
    let steps_done = frames.len() - 1;
    let series = SolutionSeries::new(times, frames).expect("times increase by dt");
    Ok(HeatRun { series, diffusion_number: r, steps: steps_done, diverged })
}

/// Semi-discrete exact solution for the sine mode `sin(k pi x / L)` with
/// zero Dirichlet data: each grid value decays with the discrete
/// Laplacian eigenvalue.
pub fn semidiscrete_sine_mode(k: u32, kappa: f64, length: f64, h: f64, t: f64) -> Vec<f64> {
    let n = (length / h).round() as usize;
    let w = k as f64 * std::f64::consts::PI / length;
    let mu = 4.0 / (h * h) * (w * h / 2.0).sin().powi(2);
    (0..=n).map(|i| (w * i as f64 * h).sin() * (-kappa * mu * t).exp()).collect()
}

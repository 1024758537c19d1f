use super::heat::step_count;
use super::SolverError;
use crate::audit::{SolutionField, SolutionSeries};

fn periodic_grid(length: f64, h: f64) -> Result<usize, SolverError> {
    let n = (length / h).round() as usize;
    if !(h > 0.0) || n < 3 || ((n as f64) * h - length).abs() > 1e-9 * length {
        return Err(SolverError::InvalidInput(format!("h = {h} does not divide {length} into at least 3 cells")));
    }
    Ok(n)
}

fn flux(u: f64) -> f64 {
    0.5 * u * u
}

fn run(
    ic: &dyn Fn(f64) -> f64,
    length: f64,
    h: f64,
    dt: f64,
    t_end: f64,
    step: impl Fn(&[f64], usize) -> f64,
) -> Result<SolutionSeries, SolverError> {
    let n = periodic_grid(length, h)?;
    let steps = step_count(dt, t_end)?;
    let mut u: Vec<f64> = (0..n).map(|i| ic(i as f64 * h)).collect();
    let frame = |u: &[f64]| SolutionField::new(vec![n], vec![h], u.to_vec()).expect("1d shape");
    let mut times = vec![0.0];
    let mut frames = vec![frame(&u)];
    for k in 1..=steps {
        u = (0..n).map(|i| step(&u, i)).collect();
        times.push(k as f64 * dt);
        frames.push(frame(&u));
        if !u.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Ok(SolutionSeries::new(times, frames).expect("times increase by dt"))
}

/// Lax–Friedrichs for `u_t + (u^2/2)_x = 0` on a periodic grid. The CFL
/// number `max|u| dt / h` is checked on the initial data; the scheme is
/// monotone under it, so the bound persists.
pub fn solve_burgers_lf(ic: &dyn Fn(f64) -> f64, length: f64, h: f64, dt: f64, t_end: f64) -> Result<SolutionSeries, SolverError> {
    let n = periodic_grid(length, h)?;
    let umax = (0..n).map(|i| ic(i as f64 * h).abs()).fold(0.0, f64::max);
    let courant = umax * dt / h;
    if courant > 1.0 {
        return Err(SolverError::CflViolation { courant });
    }
    let nu = dt / h;
    run(ic, length, h, dt, t_end, |u, i| {
        let (l, r) = (u[(i + n - 1) % n], u[(i + 1) % n]);
        0.5 * (l + r) - 0.5 * nu * (flux(r) - flux(l))
    })
}

/// Forward-time centred differences for the same equation. Not entropy
/// stable; used to generate qualitative-fault fixtures.
pub fn solve_burgers_central(ic: &dyn Fn(f64) -> f64, length: f64, h: f64, dt: f64, t_end: f64) -> Result<SolutionSeries, SolverError> {
    let n = periodic_grid(length, h)?;
    let nu = dt / h;
    run(ic, length, h, dt, t_end, |u, i| {
        let (l, r) = (u[(i + n - 1) % n], u[(i + 1) % n]);
        u[i] - 0.5 * nu * (flux(r) - flux(l))
    })
}

/// Discrete square entropy `sum(u^2/2) h` of one frame.
pub fn square_entropy(f: &SolutionField) -> f64 {
    let h: f64 = f.spacing.iter().product();
    f.values.iter().map(|u| 0.5 * u * u).sum::<f64>() * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(x: f64) -> f64 {
        0.5 + (2.0 * PI * x).sin()
    }

    #[test]
    fn constant_state_is_steady() {
        let s = solve_burgers_lf(&|_| 0.7, 1.0, 0.01, 0.005, 0.5).unwrap();
        assert!(s.frames.iter().all(|f| f.values.iter().all(|&v| (v - 0.7).abs() < 1e-15)));
    }

    #[test]
    fn lf_entropy_never_increases_through_the_shock() {
        let s = solve_burgers_lf(&sine, 1.0, 0.005, 0.002, 0.5).unwrap();
        let e: Vec<f64> = s.frames.iter().map(square_entropy).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)));
        assert!(e.last().unwrap() < &(0.9 * e[0]));
    }

    #[test]
    fn cfl_violation_is_refused() {
        assert!(matches!(
            solve_burgers_lf(&sine, 1.0, 0.01, 0.02, 0.1),
            Err(SolverError::CflViolation { courant }) if (courant - 3.0).abs() < 1e-9
        ));
    }

    #[test]
    fn central_scheme_gains_entropy() {
        let s = solve_burgers_central(&sine, 1.0, 0.005, 0.002, 0.3).unwrap();
        let e0 = square_entropy(&s.frames[0]);
        let emax = s.frames.iter().map(square_entropy).fold(f64::NEG_INFINITY, f64::max);
        assert!(!(emax <= e0), "{emax} vs {e0}");
    }
}

use super::heat::step_count;
use super::SolverError;
use crate::audit::{SolutionField, SolutionSeries};
use crate::opgraph::TimeScheme;

#[derive(Debug, Clone)]
pub struct StiffRun {
    pub series: SolutionSeries,
    /// `|lambda_fast / lambda_slow|`, the evidence the stiffness gate reads.
    pub stiffness_ratio: f64,
    pub diverged: bool,
}

/// Integrates `x' = diag(lambda_fast, lambda_slow) x`.
pub fn solve_stiff_linear(
    lambda_fast: f64,
    lambda_slow: f64,
    x0: [f64; 2],
    scheme: TimeScheme,
    dt: f64,
    t_end: f64,
) -> Result<StiffRun, SolverError> {
    if !(lambda_fast < 0.0 && lambda_slow < 0.0) {
        return Err(SolverError::InvalidInput("both rates must be negative".into()));
    }
    let steps = step_count(dt, t_end)?;
    let lambdas = [lambda_fast, lambda_slow];
    let rk4 = |z: f64| 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
    let frame = |x: [f64; 2]| SolutionField::new(vec![2], vec![1.0], x.to_vec()).expect("two components");

    let mut prev = x0;
    let mut x = x0;
    let mut times = vec![0.0];
    let mut frames = vec![frame(x0)];
    let mut diverged = false;
    for k in 1..=steps {
        let mut next = [0.0; 2];
        for c in 0..2 {
            let z = lambdas[c] * dt;
            next[c] = match scheme {
                TimeScheme::FtcsExplicit => (1.0 + z) * x[c],
                TimeScheme::Rk4Explicit => rk4(z) * x[c],
                TimeScheme::ImplicitEuler => x[c] / (1.0 - z),
                // BDF2 started with one implicit Euler step.
                TimeScheme::Bdf2 if k == 1 => x[c] / (1.0 - z),
                TimeScheme::Bdf2 => (2.0 * x[c] - 0.5 * prev[c]) / (1.5 - z),
                other => return Err(SolverError::UnsupportedScheme(other)),
            };
        }
        prev = x;
        x = next;
        times.push(k as f64 * dt);
        frames.push(frame(x));
        if !x.iter().all(|v| v.is_finite()) {
            diverged = true;
            break;
        }
    }
    Ok(StiffRun {
        series: SolutionSeries::new(times, frames).expect("times increase by dt"),
        stiffness_ratio: (lambda_fast / lambda_slow).abs(),
        diverged,
    })
}

/// Largest admissible step for [`solve_pitchfork`].
pub fn pitchfork_max_dt(theta: f64) -> f64 {
    0.1 / theta.abs().max(1.0)
}

/// Classical RK4 on the normal form `x' = theta x - x^3`; returns the
/// state at `t_end`.
pub fn solve_pitchfork(theta: f64, x0: f64, dt: f64, t_end: f64) -> Result<f64, SolverError> {
    if dt > pitchfork_max_dt(theta) {
        return Err(SolverError::InvalidInput(format!(
            "dt = {dt} exceeds the stability limit {} for theta = {theta}",
            pitchfork_max_dt(theta)
        )));
    }
    let steps = step_count(dt, t_end)?;
    let f = |x: f64| theta * x - x * x * x;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(x + 0.5 * dt * k1);
        let k3 = f(x + 0.5 * dt * k2);
        let k4 = f(x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_rk4_blows_up_on_the_stiff_pair() {
        let run = solve_stiff_linear(-1e7, -1.0, [1.0, 1.0], TimeScheme::Rk4Explicit, 1e-2, 1.0).unwrap();
        assert_eq!(run.stiffness_ratio, 1e7);
        assert!(run.diverged || run.series.last().max_abs() > 1e100);
    }

    #[test]
    fn implicit_schemes_decay_and_track_the_exponential() {
        for (ts, tol) in [(TimeScheme::ImplicitEuler, 1e-2), (TimeScheme::Bdf2, 1e-4)] {
            let run = solve_stiff_linear(-1e7, -1.0, [1.0, 1.0], ts, 1e-2, 1.0).unwrap();
            assert!(!run.diverged);
            let last = run.series.last();
            assert!(last.values[0].abs() < 1e-10);
            let err = (last.values[1] - (-1.0f64).exp()).abs();
            assert!(err < tol, "{ts}: {err}");
        }
        // Halving dt halves the implicit Euler error.
        let e = |dt: f64| {
            let r = solve_stiff_linear(-1e7, -1.0, [1.0, 1.0], TimeScheme::ImplicitEuler, dt, 1.0).unwrap();
            (r.series.last().values[1] - (-1.0f64).exp()).abs()
        };
        let ratio = e(1e-2) / e(5e-3);
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn forward_euler_is_stable_only_below_two_over_rate() {
        let fine = solve_stiff_linear(-10.0, -1.0, [1.0, 1.0], TimeScheme::FtcsExplicit, 0.05, 1.0).unwrap();
        assert!(fine.series.last().max_abs() < 1.0);
        let coarse = solve_stiff_linear(-10.0, -1.0, [1.0, 1.0], TimeScheme::FtcsExplicit, 0.3, 3.0).unwrap();
        assert!(coarse.series.last().values[0].abs() > 1.0);
    }

    #[test]
    fn zero_state_stays_zero() {
        let run = solve_stiff_linear(-2.0, -1.0, [0.0, 0.0], TimeScheme::Rk4Explicit, 0.1, 1.0).unwrap();
        assert!(run.series.frames.iter().all(|f| f.values == [0.0, 0.0]));
        assert!(solve_stiff_linear(2.0, -1.0, [1.0, 1.0], TimeScheme::Bdf2, 0.1, 1.0).is_err());
    }

    #[test]
    fn pitchfork_branches() {
        assert!(solve_pitchfork(-1.0, 0.5, 0.01, 50.0).unwrap().abs() < 1e-6);
        let x = solve_pitchfork(0.1, 1e-3, 0.05, 400.0).unwrap();
        assert!((x - 0.1f64.sqrt()).abs() < 1e-6, "{x}");
        let x = solve_pitchfork(0.1, -1e-3, 0.05, 400.0).unwrap();
        assert!((x + 0.1f64.sqrt()).abs() < 1e-6, "{x}");
        assert_eq!(solve_pitchfork(0.7, 0.0, 0.05, 100.0).unwrap(), 0.0);
        assert!(solve_pitchfork(5.0, 0.1, 0.05, 1.0).is_err());
    }
}

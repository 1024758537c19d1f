use super::linalg::BandMatrix;
use super::SolverError;
use crate::audit::SolutionField;

/// Algebraic residual target, relative to `max(1, |f|_inf)`.
pub const POISSON_RESIDUAL_TOL: f64 = 1e-10;

/// Result of a Poisson solve with the achieved algebraic residual.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub field: SolutionField,
    /// `max |f + Δ_h u|` over interior nodes.
    pub residual: f64,
}

/// Max-norm residual `f + Δ_h u` over interior nodes of an `(n+1)^2` field.
pub fn poisson_residual(u: &[f64], f: &[f64], n: usize) -> f64 {
    let h2 = (1.0 / n as f64).powi(2);
    let w = n + 1;
    let mut r = 0.0f64;
    for i in 1..n {
        for j in 1..n {
            let k = i * w + j;
            let lap = (u[k - w] + u[k + w] + u[k - 1] + u[k + 1] - 4.0 * u[k]) / h2;
            r = r.max((f[k] + lap).abs());
        }
    }
    r
}

/// Five-point solve of `-Δu = f` on the unit square with Dirichlet data,
/// `n` intervals per side. Banded Cholesky with one step of iterative
/// refinement. The field has shape `[n+1, n+1]` with axis 0 = x, including
/// boundary nodes.
pub fn solve_poisson_2d(
    forcing: &dyn Fn(f64, f64) -> f64,
    bc: &dyn Fn(f64, f64) -> f64,
    n: usize,
) -> Result<PoissonSolution, SolverError> {
    if n < 3 {
        return Err(SolverError::InvalidInput(format!("poisson grid needs n >= 3 intervals, got {n}")));
    }
    let h = 1.0 / n as f64;
    let w = n + 1;
    let mut u = vec![0.0; w * w];
    let mut f = vec![0.0; w * w];
    for i in 0..w {
        for j in 0..w {
            let (x, y) = (i as f64 * h, j as f64 * h);
            f[i * w + j] = forcing(x, y);
            if i == 0 || j == 0 || i == n || j == n {
                u[i * w + j] = bc(x, y);
            }
        }
    }

    let m = n - 1;
    let unknown = |i: usize, j: usize| (i - 1) * m + (j - 1);
    let mut a = BandMatrix::zeros(m * m, m);
    for i in 1..n {
        for j in 1..n {
            let k = unknown(i, j);
            a.set(k, k, 4.0);
            if j > 1 {
                a.set(k, k - 1, -1.0);
            }
            if i > 1 {
                a.set(k, k - m, -1.0);
            }
        }
    }
    let h2 = h * h;
    let rhs_of = |u: &[f64]| {
        let mut rhs = vec![0.0; m * m];
        for i in 1..n {
            for j in 1..n {
                let k = i * w + j;
                let mut s = h2 * f[k];
                for (ii, jj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                    if ii == 0 || jj == 0 || ii == n || jj == n {
                        s += u[ii * w + jj];
                    }
                }
                rhs[unknown(i, j)] = s;
            }
        }
        rhs
    };
    let rhs = rhs_of(&u);
    let l = a.cholesky().ok_or(SolverError::SingularSystem)?;
    let mut x = l.cholesky_solve(&rhs);
    let ax = a.mul(&x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
    for (xi, di) in x.iter_mut().zip(l.cholesky_solve(&r)) {
        *xi += di;
    }
    for i in 1..n {
        for j in 1..n {
            u[i * w + j] = x[unknown(i, j)];
        }
    }

    let residual = poisson_residual(&u, &f, n);
    let scale = f.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    if !(residual <= POISSON_RESIDUAL_TOL * scale) {
        return Err(SolverError::ResidualNotReached { residual });
    }
    let field = SolutionField::new(vec![w, w], vec![h, h], u).expect("shape built above");
    Ok(PoissonSolution { field, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_err(sol: &SolutionField, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let n = sol.shape[0] - 1;
        let h = 1.0 / n as f64;
        let mut e = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                e = e.max((sol.values[i * (n + 1) + j] - exact(i as f64 * h, j as f64 * h)).abs());
            }
        }
        e
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let s = solve_poisson_2d(&|_, _| 0.0, &|_, _| 0.0, 8).unwrap();
        assert!(s.field.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_boundary_gives_constant_field() {
        let s = solve_poisson_2d(&|_, _| 0.0, &|_, _| 1.0, 16).unwrap();
        assert!(max_err(&s.field, |_, _| 1.0) < 1e-13);
    }

    #[test]
    fn manufactured_sine_at_128() {
        let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let s = solve_poisson_2d(&|x, y| 2.0 * PI * PI * exact(x, y), &|_, _| 0.0, 128).unwrap();
        assert!(s.residual <= 1e-10, "{}", s.residual);
        let e = max_err(&s.field, exact);
        assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn quadratic_product_is_reproduced_exactly() {
        // Fourth derivatives vanish, so the five-point stencil has no
        // truncation error.
        let exact = |x: f64, y: f64| x * (1.0 - x) * y * (1.0 - y);
        let f = |x: f64, y: f64| 2.0 * (x * (1.0 - x) + y * (1.0 - y));
        let s = solve_poisson_2d(&f, &|_, _| 0.0, 20).unwrap();
        assert!(max_err(&s.field, exact) < 1e-14);
    }

    #[test]
    fn tiny_grid_is_refused() {
        assert!(matches!(solve_poisson_2d(&|_, _| 0.0, &|_, _| 0.0, 2), Err(SolverError::InvalidInput(_))));
    }
}

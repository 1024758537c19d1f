//! Deterministic structured elimination: banded Cholesky and (cyclic)
//! tridiagonal solves.

/// Symmetric positive definite band matrix with half-bandwidth `b`, stored
/// as row `k` holding entries `(k, k-d)` for `d = 0..=b`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, b: usize) -> Self {
        BandMatrix { n, b, data: vec![0.0; n * (b + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(col <= row && row - col <= self.b);
        row * (self.b + 1) + (row - col)
    }

    /// Lower-triangle entry; `col <= row`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row - col > self.b {
            0.0
        } else {
            self.data[self.idx(row, col)]
        }
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let i = self.idx(row, col);
        self.data[i] = v;
    }

    /// `y = A x` using symmetry.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            y[r] += self.get(r, r) * x[r];
            for c in r.saturating_sub(self.b)..r {
                let a = self.get(r, c);
                y[r] += a * x[c];
                y[c] += a * x[r];
            }
        }
        y
    }

    /// In-place Cholesky factor `L` with `A = L L^T`; `None` when a pivot
    /// is not positive.
    pub fn cholesky(&self) -> Option<BandMatrix> {
        let (n, b) = (self.n, self.b);
        let mut l = self.clone();
        for k in 0..n {
            for j in k.saturating_sub(b)..=k {
                let lo = k.saturating_sub(b).max(j.saturating_sub(b));
                let mut s = self.get(k, j);
                for p in lo..j {
                    s -= l.get(k, p) * l.get(j, p);
                }
                if j == k {
                    if !(s > 0.0) {
                        return None;
                    }
                    l.set(k, k, s.sqrt());
                } else {
                    let v = s / l.get(j, j);
                    l.set(k, j, v);
                }
            }
        }
        Some(l)
    }

    /// Solves `L L^T x = rhs` given the factor from [`BandMatrix::cholesky`].
    pub fn cholesky_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b) = (self.n, self.b);
        let mut y = rhs.to_vec();
        for k in 0..n {
            let mut s = y[k];
            for p in k.saturating_sub(b)..k {
                s -= self.get(k, p) * y[p];
            }
            y[k] = s / self.get(k, k);
        }
        for k in (0..n).rev() {
            let mut s = y[k];
            for r in k + 1..(k + b + 1).min(n) {
                s -= self.get(r, k) * y[r];
            }
            y[k] = s / self.get(k, k);
        }
        y
    }
}

/// Thomas algorithm for `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`
/// (`a_0` and `c_{n-1}` ignored). No pivoting; callers pass diagonally
/// dominant systems.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = if n > 1 { c[0] / b[0] } else { 0.0 };
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / m } else { 0.0 };
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = dp;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

/// Periodic tridiagonal system with constant coefficients
/// `lo x_{i-1} + diag x_i + up x_{i+1} = d_i`, indices mod n, via
/// Sherman–Morrison. Requires `n >= 3`.
pub fn solve_cyclic_constant(lo: f64, diag: f64, up: f64, d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let gamma = -diag;
    let mut b = vec![diag; n];
    b[0] = diag - gamma;
    b[n - 1] = diag - lo * up / gamma;
    let a = vec![lo; n];
    let c = vec![up; n];
    let x = solve_tridiagonal(&a, &b, &c, d);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    // Corner entries: A[0][n-1] = lo, A[n-1][0] = up.
    u[n - 1] = up;
    let z = solve_tridiagonal(&a, &b, &c, &u);
    let v0 = 1.0;
    let vn = lo / gamma;
    let fact = (x[0] * v0 + x[n - 1] * vn) / (1.0 + z[0] * v0 + z[n - 1] * vn);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_cholesky_solves_laplacian() {
        let n = 7;
        let mut a = BandMatrix::zeros(n, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let rhs = a.mul(&x);
        let l = a.cholesky().unwrap();
        let got = l.cholesky_solve(&rhs);
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_band_is_refused() {
        let mut a = BandMatrix::zeros(2, 1);
        a.set(0, 0, 1.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 1.0);
        assert!(a.cholesky().is_none());
    }

    #[test]
    fn cyclic_matches_dense_product() {
        let (lo, diag, up) = (-0.2, 1.6, -0.5);
        let x: Vec<f64> = (0..9).map(|i| 1.0 + (i as f64 * 0.7).cos()).collect();
        let n = x.len();
        let d: Vec<f64> = (0..n)
            .map(|i| lo * x[(i + n - 1) % n] + diag * x[i] + up * x[(i + 1) % n])
            .collect();
        let got = solve_cyclic_constant(lo, diag, up, &d);
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-13, "{g} vs {w}");
        }
    }
}

//! Residual evaluators and the certified bound `B = C * residual`.
//!
//! The residual of a computed solution against the continuous problem is
//! split into the algebraic defect of the discrete equations and an
//! estimate of the truncation error from divided differences of the
//! solution itself. Both are measured in the RMS norm over interior nodes,
//! where the discrete operators are contractive with the constants shipped
//! in `data/stability_constants.json`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{AuditError, CheckId, CheckResult, SolutionField, SolutionSeries};
use crate::opgraph::TimeScheme;

#[derive(Debug, Clone, Deserialize)]
struct StabilityEntry {
    safety_factor: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct StabilityData {
    #[serde(rename = "poisson-unit-square")]
    poisson: StabilityEntry,
    #[serde(rename = "heat-1d")]
    heat: StabilityEntry,
}

fn stability_data() -> &'static StabilityData {
    static DATA: OnceLock<StabilityData> = OnceLock::new();
    DATA.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/stability_constants.json")).expect("shipped constants are well formed")
    })
}

/// Smallest eigenvalue of the five-point `-Δ_h` on the unit square.
pub fn poisson_lambda_min(h: f64) -> f64 {
    8.0 / (h * h) * (PI * h / 2.0).sin().powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEstimate {
    /// Total defect `algebraic + truncation`.
    pub residual: f64,
    pub algebraic: f64,
    pub truncation: f64,
    pub stability_constant: f64,
    pub safety_factor: f64,
    /// Certified bound on the RMS error.
    pub bound: f64,
}

pub trait ResidualEvaluator {
    fn archetype(&self) -> &str;
    fn estimate(&self, series: &SolutionSeries) -> Result<ResidualEstimate, AuditError>;
}

/// RMS over the given node indices.
fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// RMS of `a - b` over nodes not on the boundary of any axis.
pub fn rms_interior_difference(field: &SolutionField, other: &[f64]) -> f64 {
    let strides = field.strides();
    let interior = |k: usize| {
        field
            .shape
            .iter()
            .zip(&strides)
            .all(|(&n, &s)| {
                let i = (k / s) % n;
                i > 0 && i + 1 < n
            })
    };
    rms((0..field.len()).filter(|&k| interior(k)).map(|k| field.values[k] - other[k]))
}

/// Five-point Poisson `-Δu = f` with the forcing sampled on the same grid.
#[derive(Debug, Clone)]
pub struct PoissonEvaluator {
    pub forcing: Vec<f64>,
}

impl ResidualEvaluator for PoissonEvaluator {
    fn archetype(&self) -> &str {
        "poisson"
    }

    fn estimate(&self, series: &SolutionSeries) -> Result<ResidualEstimate, AuditError> {
        let f = series.last();
        if f.shape.len() != 2 || f.shape[0] != f.shape[1] || f.shape[0] < 5 {
            return Err(AuditError::Evaluator("poisson residual needs a square grid with n >= 4 intervals".into()));
        }
        if self.forcing.len() != f.len() {
            return Err(AuditError::Evaluator("forcing and solution grids differ".into()));
        }
        let w = f.shape[0];
        let n = w - 1;
        let h = f.spacing[0];
        let u = &f.values;
        let at = |i: usize, j: usize| u[i * w + j];
        let mut alg = Vec::with_capacity((n - 1) * (n - 1));
        let mut tau = Vec::with_capacity((n - 1) * (n - 1));
        let d4 = |c: [f64; 5]| c[0] - 4.0 * c[1] + 6.0 * c[2] - 4.0 * c[3] + c[4];
        for i in 1..n {
            for j in 1..n {
                let lap = (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1) - 4.0 * at(i, j)) / (h * h);
                alg.push(self.forcing[i * w + j] + lap);
                let (ci, cj) = (i.clamp(2, n - 2), j.clamp(2, n - 2));
                let uxxxx = d4([at(ci - 2, j), at(ci - 1, j), at(ci, j), at(ci + 1, j), at(ci + 2, j)]);
                let uyyyy = d4([at(i, cj - 2), at(i, cj - 1), at(i, cj), at(i, cj + 1), at(i, cj + 2)]);
                tau.push((uxxxx + uyyyy) / (12.0 * h * h));
            }
        }
        let algebraic = rms(alg.into_iter());
        let truncation = rms(tau.into_iter());
        let residual = algebraic + truncation;
        let c = 1.0 / poisson_lambda_min(h);
        let safety = stability_data().poisson.safety_factor;
        Ok(ResidualEstimate { residual, algebraic, truncation, stability_constant: c, safety_factor: safety, bound: safety * c * residual })
    }
}

/// One-dimensional heat equation run by a two-level theta scheme.
#[derive(Debug, Clone)]
pub struct HeatEvaluator {
    pub kappa: f64,
    pub scheme: TimeScheme,
    pub periodic: bool,
}

impl ResidualEvaluator for HeatEvaluator {
    fn archetype(&self) -> &str {
        "heat"
    }

    fn estimate(&self, series: &SolutionSeries) -> Result<ResidualEstimate, AuditError> {
        let theta = match self.scheme {
            TimeScheme::FtcsExplicit => 0.0,
            TimeScheme::ImplicitEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
            other => return Err(AuditError::Evaluator(format!("no heat residual for scheme `{other}`"))),
        };
        let frames = &series.frames;
        let nf = frames.len();
        let min_frames = if theta == 0.5 { 4 } else { 3 };
        if nf < min_frames || frames[0].shape.len() != 1 || frames[0].len() < 5 {
            return Err(AuditError::Evaluator("heat residual needs a 1d series with enough frames and nodes".into()));
        }
        let m = frames[0].len();
        let h = frames[0].spacing[0];
        let k = self.kappa;
        let nodes: Vec<usize> = if self.periodic { (0..m).collect() } else { (1..m - 1).collect() };
        let idx = |i: isize| -> usize {
            if self.periodic {
                i.rem_euclid(m as isize) as usize
            } else {
                i as usize
            }
        };
        let lap = |u: &[f64], i: usize| (u[idx(i as isize - 1)] - 2.0 * u[i] + u[idx(i as isize + 1)]) / (h * h);
        let d4 = |u: &[f64], i: usize| {
            let c = if self.periodic { i as isize } else { (i as isize).clamp(2, m as isize - 3) };
            let g = |o: isize| u[idx(c + o)];
            (g(-2) - 4.0 * g(-1) + 6.0 * g(0) - 4.0 * g(1) + g(2)) / h.powi(4)
        };

        let mut stab = 1.0;
        let dt0 = series.times[1] - series.times[0];
        if theta == 0.0 && k * dt0 / (h * h) > 0.5 {
            stab = f64::INFINITY;
        }
        let (mut total, mut worst_alg, mut worst_trunc) = (0.0, 0.0f64, 0.0f64);
        for n in 0..nf - 1 {
            let dt = series.times[n + 1] - series.times[n];
            let (u0, u1) = (&frames[n].values, &frames[n + 1].values);
            let alg = rms(nodes.iter().map(|&i| (u1[i] - u0[i]) / dt - k * (theta * lap(u1, i) + (1.0 - theta) * lap(u0, i))));
            let space = k * h * h / 12.0 * rms(nodes.iter().map(|&i| d4(u0, i).abs().max(d4(u1, i).abs())));
            let time = if theta == 0.5 {
                let c = n.clamp(1, nf - 3);
                let (a, b, cc, d) = (&frames[c - 1].values, &frames[c].values, &frames[c + 1].values, &frames[c + 2].values);
                dt * dt / 12.0 * rms(nodes.iter().map(|&i| (d[i] - 3.0 * cc[i] + 3.0 * b[i] - a[i]) / dt.powi(3)))
            } else {
                let c = n.clamp(1, nf - 2);
                let (a, b, cc) = (&frames[c - 1].values, &frames[c].values, &frames[c + 1].values);
                dt / 2.0 * rms(nodes.iter().map(|&i| (cc[i] - 2.0 * b[i] + a[i]) / (dt * dt)))
            };
            worst_alg = worst_alg.max(alg);
            worst_trunc = worst_trunc.max(space + time);
            total += dt * (alg + space + time);
        }
        let safety = stability_data().heat.safety_factor;
        let bound = if stab.is_finite() { safety * stab * total } else { f64::INFINITY };
        Ok(ResidualEstimate {
            residual: worst_alg + worst_trunc,
            algebraic: worst_alg,
            truncation: worst_trunc,
            stability_constant: stab,
            safety_factor: safety,
            bound,
        })
    }
}

/// Data an evaluator may need beyond the solution.
#[derive(Debug, Clone, Default)]
pub struct ResidualContext {
    pub forcing: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    pub scheme: Option<TimeScheme>,
    pub periodic: bool,
}

/// Shipped evaluators: `poisson` and `heat`.
pub fn evaluator_for(archetype: &str, ctx: &ResidualContext) -> Result<Box<dyn ResidualEvaluator>, AuditError> {
    match archetype {
        "poisson" => Ok(Box::new(PoissonEvaluator {
            forcing: ctx.forcing.clone().ok_or_else(|| AuditError::Evaluator("poisson residual needs the forcing".into()))?,
        })),
        "heat" => Ok(Box::new(HeatEvaluator {
            kappa: ctx.kappa.ok_or_else(|| AuditError::Evaluator("heat residual needs kappa".into()))?,
            scheme: ctx.scheme.ok_or_else(|| AuditError::Evaluator("heat residual needs the scheme".into()))?,
            periodic: ctx.periodic,
        })),
        other => Err(AuditError::NoEvaluator(other.to_string())),
    }
}

/// Flags when the certified bound exceeds the tolerance. `measured` is the
/// bound `B`; the raw residual parts are evidence.
pub fn check_residual(series: &SolutionSeries, evaluator: &dyn ResidualEvaluator, tol: f64) -> Result<CheckResult, AuditError> {
    let e = evaluator.estimate(series)?;
    Ok(CheckResult::compare(CheckId::Residual, e.bound, tol)
        .with("residual", e.residual)
        .with("algebraic_residual", e.algebraic)
        .with("truncation_estimate", e.truncation)
        .with("stability_constant", e.stability_constant)
        .with("safety_factor", e.safety_factor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opgraph::SchemeDescriptor;
    use crate::solvers::{solve_heat_1d, solve_poisson_2d, HeatBc};

    fn grid_values(n: usize, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let h = 1.0 / n as f64;
        (0..(n + 1) * (n + 1)).map(|k| g((k / (n + 1)) as f64 * h, (k % (n + 1)) as f64 * h)).collect()
    }

    #[test]
    fn exact_discrete_solve_has_tiny_algebraic_residual() {
        let f = |x: f64, y: f64| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin();
        let sol = solve_poisson_2d(&f, &|_, _| 0.0, 32).unwrap();
        let ev = PoissonEvaluator { forcing: grid_values(32, f) };
        let est = ev.estimate(&SolutionSeries::single(sol.field)).unwrap();
        assert!(est.algebraic <= 1e-10, "{}", est.algebraic);
        assert!(est.truncation > 0.0);
    }

    #[test]
    fn manufactured_poisson_bound_covers_the_error_at_128() {
        let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let f = |x: f64, y: f64| 2.0 * PI * PI * exact(x, y);
        let sol = solve_poisson_2d(&f, &|_, _| 0.0, 128).unwrap();
        let truth = grid_values(128, exact);
        let err = rms_interior_difference(&sol.field, &truth);
        let ev = PoissonEvaluator { forcing: grid_values(128, f) };
        let r = check_residual(&SolutionSeries::single(sol.field), &ev, 1e-4).unwrap();
        assert!(err <= r.measured, "{err} > {}", r.measured);
        assert!(r.measured <= 1e-4, "{}", r.measured);
        assert!(!r.flagged());
    }

    #[test]
    fn zero_field_with_forcing_fails() {
        let f = |_: f64, _: f64| 1.0;
        let z = SolutionField::new(vec![17, 17], vec![1.0 / 16.0; 2], vec![0.0; 289]).unwrap();
        let ev = PoissonEvaluator { forcing: grid_values(16, f) };
        let r = check_residual(&SolutionSeries::single(z), &ev, 1e-4).unwrap();
        assert!(r.flagged());
        assert!((r.evidence["algebraic_residual"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heat_bound_covers_the_error() {
        for ts in [TimeScheme::FtcsExplicit, TimeScheme::ImplicitEuler, TimeScheme::CrankNicolson] {
            let h = 0.01;
            let scheme = SchemeDescriptor { dt: Some(0.4 * h * h), h: Some(h), ..SchemeDescriptor::new(ts) };
            let run = solve_heat_1d(&|x| (PI * x).sin(), HeatBc::Dirichlet { left: 0.0, right: 0.0 }, 1.0, 1.0, &scheme, 0.1).unwrap();
            let t = *run.series.times.last().unwrap();
            let truth: Vec<f64> = (0..=100).map(|i| (PI * i as f64 * h).sin() * (-PI * PI * t).exp()).collect();
            let err = rms_interior_difference(run.series.last(), &truth);
            let ev = HeatEvaluator { kappa: 1.0, scheme: ts, periodic: false };
            let est = ev.estimate(&run.series).unwrap();
            assert!(err <= est.bound, "{ts}: {err} > {}", est.bound);
            assert!(est.bound < 1e-3, "{ts}: {}", est.bound);
        }
    }

    #[test]
    fn unstable_ftcs_has_no_finite_bound() {
        let h = 0.05;
        let scheme = SchemeDescriptor { dt: Some(0.6 * h * h), h: Some(h), ..SchemeDescriptor::new(TimeScheme::FtcsExplicit) };
        let run = solve_heat_1d(&|x| (PI * x).sin(), HeatBc::Dirichlet { left: 0.0, right: 0.0 }, 1.0, 1.0, &scheme, 0.01).unwrap();
        let ev = HeatEvaluator { kappa: 1.0, scheme: TimeScheme::FtcsExplicit, periodic: false };
        assert!(ev.estimate(&run.series).unwrap().bound.is_infinite());
    }

    #[test]
    fn unknown_archetype_has_no_evaluator() {
        assert!(matches!(evaluator_for("wave", &ResidualContext::default()), Err(AuditError::NoEvaluator(a)) if a == "wave"));
        assert!(evaluator_for("poisson", &ResidualContext::default()).is_err());
    }
}

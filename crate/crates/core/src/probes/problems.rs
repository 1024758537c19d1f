use super::{LinearOperator, ParametricProblem, ProbeError, SolveResult};
use crate::opgraph::{SchemeDescriptor, TimeScheme};
use crate::solvers::{solve_heat_1d, solve_pitchfork, HeatBc};

pub const BUILTIN_PROBLEMS: [&str; 3] = ["pitchfork", "resonance", "heat-interior"];

/// Built-in problem by name, with an optional nominal parameter override.
pub fn builtin_problem(name: &str, theta: Option<f64>) -> Result<Box<dyn ParametricProblem>, ProbeError> {
    Ok(match name {
        "pitchfork" => Box::new(Pitchfork::new(theta.unwrap_or(0.1))),
        "resonance" => Box::new(Resonance { theta: theta.unwrap_or(1.02) }),
        "heat-interior" => Box::new(HeatInterior::new(theta.unwrap_or(1.0))),
        other => return Err(ProbeError::UnknownProblem(other.to_string())),
    })
}

/// Normal form `x' = theta x - x^3` integrated from rest to a late time.
/// Unperturbed, `x = 0` is invariant; the perturbation is added to `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pitchfork {
    pub theta: f64,
    pub x0: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl Pitchfork {
    pub fn new(theta: f64) -> Self {
        Pitchfork { theta, x0: 0.0, dt: 0.05, t_end: 400.0 }
    }
}

impl ParametricProblem for Pitchfork {
    fn name(&self) -> &str {
        "pitchfork"
    }

    fn theta(&self) -> Vec<f64> {
        vec![self.theta]
    }

    fn solve(&self, theta: &[f64], perturbation: Option<&[f64]>) -> SolveResult {
        let &[th] = theta else { return Err("pitchfork takes one parameter".into()) };
        let x0 = self.x0 + perturbation.and_then(|p| p.first().copied()).unwrap_or(0.0);
        let dt = self.dt.min(crate::solvers::pitchfork_max_dt(th));
        solve_pitchfork(th, x0, dt, self.t_end).map(|x| vec![x]).map_err(|e| e.to_string())
    }

    fn perturbation_dim(&self) -> usize {
        1
    }

    fn linearization(&self) -> Option<LinearOperator<'_>> {
        let x = self.solve(&[self.theta], None).ok()?[0];
        let slope = self.theta - 3.0 * x * x;
        Some(LinearOperator { dim: 1, apply: Box::new(move |v: &[f64]| vec![slope * v[0]]) })
    }
}

/// Steady forced response `y = f / (theta - 1)` with unit forcing; the
/// perturbation is added to the forcing amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub theta: f64,
}

impl ParametricProblem for Resonance {
    fn name(&self) -> &str {
        "resonance"
    }

    fn theta(&self) -> Vec<f64> {
        vec![self.theta]
    }

    fn solve(&self, theta: &[f64], perturbation: Option<&[f64]>) -> SolveResult {
        let &[th] = theta else { return Err("resonance takes one parameter".into()) };
        let f = 1.0 + perturbation.and_then(|p| p.first().copied()).unwrap_or(0.0);
        if th == 1.0 {
            return Err("forcing at the resonance".into());
        }
        Ok(vec![f / (th - 1.0)])
    }

    fn perturbation_dim(&self) -> usize {
        1
    }
}

/// Implicit-Euler heat decay of `sin(pi x)` on a coarse grid; the parameter
/// is the diffusivity and the perturbation is added to the interior initial
/// values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatInterior {
    pub kappa: f64,
    pub cells: usize,
    pub dt: f64,
    pub t_end: f64,
}

impl HeatInterior {
    pub fn new(kappa: f64) -> Self {
        HeatInterior { kappa, cells: 16, dt: 1e-3, t_end: 0.1 }
    }

    fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }
}

impl ParametricProblem for HeatInterior {
    fn name(&self) -> &str {
        "heat-interior"
    }

    fn theta(&self) -> Vec<f64> {
        vec![self.kappa]
    }

    fn solve(&self, theta: &[f64], perturbation: Option<&[f64]>) -> SolveResult {
        let &[kappa] = theta else { return Err("heat-interior takes one parameter".into()) };
        let h = self.h();
        let pert = perturbation.unwrap_or(&[]);
        let ic = |x: f64| {
            let i = (x / h).round() as usize;
            let base = (std::f64::consts::PI * x).sin();
            // Interior node i carries perturbation entry i - 1.
            base + if i >= 1 { pert.get(i - 1).copied().unwrap_or(0.0) } else { 0.0 }
        };
        let scheme = SchemeDescriptor { dt: Some(self.dt), h: Some(h), ..SchemeDescriptor::new(TimeScheme::ImplicitEuler) };
        let run = solve_heat_1d(&ic, HeatBc::Dirichlet { left: 0.0, right: 0.0 }, kappa, 1.0, &scheme, self.t_end)
            .map_err(|e| e.to_string())?;
        Ok(run.series.last().values.clone())
    }

    fn perturbation_dim(&self) -> usize {
        self.cells - 1
    }

    /// `kappa D2` on the interior nodes with zero boundary values.
    fn linearization(&self) -> Option<LinearOperator<'_>> {
        let n = self.cells - 1;
        let c = self.kappa / (self.h() * self.h());
        Some(LinearOperator {
            dim: n,
            apply: Box::new(move |v: &[f64]| {
                (0..n)
                    .map(|i| {
                        let l = if i > 0 { v[i - 1] } else { 0.0 };
                        let r = if i + 1 < n { v[i + 1] } else { 0.0 };
                        c * (l - 2.0 * v[i] + r)
                    })
                    .collect()
            }),
        })
    }
}

//! Bifurcation-sensitive probes. Each one asks whether a nominally solved
//! problem sits close to a qualitative change of behavior: by parameter
//! continuation, by the sign of the leading eigenvalue of the linearization,
//! or by the spread of a small perturbed ensemble.

mod problems;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use problems::{builtin_problem, HeatInterior, Pitchfork, Resonance, BUILTIN_PROBLEMS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("nominal solve failed: {0}")]
    Solve(String),
    #[error("problem exposes no linearization")]
    NoLinearization,
    #[error("invalid probe setting: {0}")]
    InvalidSetting(String),
    #[error("unknown built-in problem `{0}`")]
    UnknownProblem(String),
}

/// Result of a single solve; failures carry a message.
pub type SolveResult = Result<Vec<f64>, String>;

/// Matrix-free linear operator.
pub struct LinearOperator<'a> {
    pub dim: usize,
    pub apply: Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>,
}

/// A problem that can be re-solved at nearby parameters and with perturbed
/// data. Solves must be deterministic.
pub trait ParametricProblem {
    fn name(&self) -> &str;
    /// Nominal parameter vector.
    fn theta(&self) -> Vec<f64>;
    /// Solve at `theta`, adding `perturbation` to the problem data when given.
    /// The perturbation length is [`ParametricProblem::perturbation_dim`].
    fn solve(&self, theta: &[f64], perturbation: Option<&[f64]>) -> SolveResult;
    fn perturbation_dim(&self) -> usize;
    /// Linearization about the nominal solution, if the problem has one.
    fn linearization(&self) -> Option<LinearOperator<'_>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    Continuation,
    Lyapunov,
    Ensemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: ProbeKind,
    pub flagged: bool,
    pub measured: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub evidence: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ProbeReport {
    fn new(probe: ProbeKind, measured: f64, threshold: f64) -> Self {
        // NaN compares false, so treat it as a flag explicitly.
        let flagged = !(measured <= threshold);
        ProbeReport { probe, flagged, measured, threshold, evidence: BTreeMap::new(), notes: Vec::new() }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.evidence.insert(key.to_string(), v);
        self
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    fn force_flag(mut self, s: impl Into<String>) -> Self {
        self.flagged = true;
        self.note(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSettings {
    pub delta_rel: f64,
    pub delta_abs_floor: f64,
    pub tau: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings { delta_rel: 0.05, delta_abs_floor: 1e-6, tau: 0.5 }
    }
}

/// Norm floor for the relative change.
pub const CONTINUATION_NORM_FLOOR: f64 = 1e-30;

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative response change under `theta -> theta (1 +/- delta)`, with the
/// step floored at `delta_abs_floor` per component.
pub fn probe_continuation(
    p: &dyn ParametricProblem,
    s: ContinuationSettings,
) -> Result<ProbeReport, ProbeError> {
    if !(s.delta_rel > 0.0 && s.delta_abs_floor >= 0.0 && s.tau > 0.0) {
        return Err(ProbeError::InvalidSetting(format!("{s:?}")));
    }
    let theta = p.theta();
    let base = p.solve(&theta, None).map_err(ProbeError::Solve)?;
    let scale = norm2(&base).max(CONTINUATION_NORM_FLOOR);
    let mut measured = 0.0f64;
    let mut failures = Vec::new();
    let mut evidence = Vec::new();
    for (sign, label) in [(1.0, "plus"), (-1.0, "minus")] {
        let shifted: Vec<f64> = theta
            .iter()
            .map(|&t| t + sign * (t.abs() * s.delta_rel).max(s.delta_abs_floor))
            .collect();
        match p.solve(&shifted, None) {
            Ok(x) if x.len() == base.len() => {
                let diff: Vec<f64> = x.iter().zip(&base).map(|(a, b)| a - b).collect();
                let rel = norm2(&diff) / scale;
                measured = measured.max(rel);
                evidence.push((format!("relative_change_{label}"), rel));
                if let [only] = shifted.as_slice() {
                    evidence.push((format!("theta_{label}"), *only));
                }
                if let [y] = x.as_slice() {
                    evidence.push((format!("response_{label}"), *y));
                }
            }
            Ok(_) => failures.push(format!("perturbed solve failed ({label}): response length changed")),
            Err(e) => failures.push(format!("perturbed solve failed ({label}): {e}")),
        }
    }
    let mut r = ProbeReport::new(ProbeKind::Continuation, measured, s.tau).with("baseline_norm", norm2(&base));
    for (k, v) in evidence {
        r = r.with(&k, v);
    }
    for f in failures {
        r = r.force_flag(f);
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovSettings {
    pub iterations: usize,
    /// Flag when the leading eigenvalue exceeds this.
    pub tol: f64,
    /// Relative residual at which the power iteration stops.
    pub rtol: f64,
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        LyapunovSettings { iterations: 20_000, tol: 1e-8, rtol: 1e-10 }
    }
}

const LYAPUNOV_SEED: u64 = 0x5eed_1a9e;
const NORM_SAMPLES: usize = 8;

/// Leading eigenvalue estimate (largest real part) of the linearization by
/// power iteration on `A + sI`, where `s` bounds the operator norm from
/// above. The bound is estimated from random applications and doubled, so
/// the shifted spectrum is non-negative for real spectra.
pub fn probe_lyapunov(p: &dyn ParametricProblem, s: LyapunovSettings) -> Result<ProbeReport, ProbeError> {
    if s.iterations == 0 || !(s.rtol > 0.0) {
        return Err(ProbeError::InvalidSetting(format!("{s:?}")));
    }
    let op = p.linearization().ok_or(ProbeError::NoLinearization)?;
    let n = op.dim;
    if n == 0 {
        return Err(ProbeError::InvalidSetting("zero-dimensional linearization".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(LYAPUNOV_SEED);
    let mut random_unit = || {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = norm2(&v);
        v.into_iter().map(|x| x / nv).collect::<Vec<f64>>()
    };
    let mut gain = 0.0f64;
    for _ in 0..NORM_SAMPLES {
        gain = gain.max(norm2(&(op.apply)(&random_unit())));
    }
    let shift = 2.0 * gain.max(f64::MIN_POSITIVE);

    let mut v = random_unit();
    let mut mu = 0.0;
    let mut converged = false;
    let mut used = 0;
    for k in 1..=s.iterations {
        used = k;
        let av = (op.apply)(&v);
        let w: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a + shift * x).collect();
        mu = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        let res = norm2(&w.iter().zip(&v).map(|(a, x)| a - mu * x).collect::<Vec<f64>>());
        let nw = norm2(&w);
        if nw == 0.0 {
            // v lies in the kernel of A + sI: eigenvalue -s.
            converged = true;
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if res <= s.rtol * shift {
            converged = true;
            break;
        }
    }
    let lambda = mu - shift;
    let mut r = ProbeReport::new(ProbeKind::Lyapunov, lambda, s.tol)
        .with("leading_eigenvalue", lambda)
        .with("shift", shift)
        .with("iterations", used as f64);
    if !converged {
        r = r.force_flag("estimate unconverged");
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleSummary {
    #[default]
    Mean,
    Norm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSettings {
    pub n_members: usize,
    pub perturb_eps: f64,
    pub tau_ens: f64,
    pub seed: u64,
    pub summary: EnsembleSummary,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings { n_members: 5, perturb_eps: 1e-3, tau_ens: 0.1, seed: 0, summary: EnsembleSummary::Mean }
    }
}

pub const ENSEMBLE_MEAN_FLOOR: f64 = 1e-30;

/// Member perturbation: uniform on `[-eps, eps]` per degree of freedom,
/// seeded by `(seed, pair)`. Members come in antithetic pairs (odd members
/// negate their even partner) so every ensemble of two or more members sees
/// perturbations of both signs.
pub fn member_perturbation(seed: u64, member: usize, dim: usize, eps: f64) -> Vec<f64> {
    let pair = (member / 2) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair);
    let sign = if member % 2 == 0 { 1.0 } else { -1.0 };
    (0..dim).map(|_| sign * rng.gen_range(-eps..=eps)).collect()
}

/// Coefficient of variation of a scalar summary over perturbed members.
pub fn probe_ensemble(p: &dyn ParametricProblem, s: EnsembleSettings) -> Result<ProbeReport, ProbeError> {
    if s.n_members < 2 || !(s.perturb_eps > 0.0) || !(s.tau_ens > 0.0) {
        return Err(ProbeError::InvalidSetting(format!("{s:?}")));
    }
    let theta = p.theta();
    let dim = p.perturbation_dim();
    let mut values = Vec::with_capacity(s.n_members);
    let mut failures = Vec::new();
    for m in 0..s.n_members {
        let pert = member_perturbation(s.seed, m, dim, s.perturb_eps);
        match p.solve(&theta, Some(&pert)) {
            Ok(x) if x.is_empty() => failures.push(format!("member {m} failed: empty response")),
            Ok(x) => values.push(match s.summary {
                EnsembleSummary::Mean => x.iter().sum::<f64>() / x.len() as f64,
                EnsembleSummary::Norm => norm2(&x),
            }),
            Err(e) => failures.push(format!("member {m} failed: {e}")),
        }
    }
    if !failures.is_empty() {
        let mut r = ProbeReport::new(ProbeKind::Ensemble, f64::INFINITY, s.tau_ens)
            .with("failed_members", failures.len() as f64);
        r.notes = failures;
        return Ok(r);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let std = var.sqrt();
    let mut r = if mean.abs() < ENSEMBLE_MEAN_FLOOR {
        let cv = std / ENSEMBLE_MEAN_FLOOR;
        let mut r = ProbeReport::new(ProbeKind::Ensemble, cv, s.tau_ens).note("mean near zero");
        r.flagged = std > 10.0 * s.perturb_eps;
        r
    } else {
        ProbeReport::new(ProbeKind::Ensemble, std / mean.abs(), s.tau_ens)
    };
    r = r.with("mean", mean).with("std", std);
    for (m, v) in values.iter().enumerate() {
        r = r.with(&format!("member_{m}"), *v);
    }
    Ok(r)
}

/// Which probes to run on a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSelection {
    pub continuation: Option<ContinuationSettings>,
    pub lyapunov: Option<LyapunovSettings>,
    pub ensemble: Option<EnsembleSettings>,
}

impl Default for ProbeSelection {
    fn default() -> Self {
        ProbeSelection {
            continuation: Some(ContinuationSettings::default()),
            lyapunov: Some(LyapunovSettings::default()),
            ensemble: Some(EnsembleSettings::default()),
        }
    }
}

impl ProbeSelection {
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let Some(e) = self.ensemble.as_mut() {
            e.seed = seed;
        }
        self
    }
}

/// Runs the selected probes in a fixed order. A problem without a
/// linearization skips the Lyapunov probe.
pub fn run_probes(p: &dyn ParametricProblem, sel: &ProbeSelection) -> Result<Vec<ProbeReport>, ProbeError> {
    let mut out = Vec::new();
    if let Some(s) = sel.continuation {
        out.push(probe_continuation(p, s)?);
    }
    if let Some(s) = sel.lyapunov {
        match probe_lyapunov(p, s) {
            Ok(r) => out.push(r),
            Err(ProbeError::NoLinearization) => {}
            Err(e) => return Err(e),
        }
    }
    if let Some(s) = sel.ensemble {
        out.push(probe_ensemble(p, s)?);
    }
    Ok(out)
}

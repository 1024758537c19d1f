//! Individual invariant checks. Each is a pure function of its inputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AuditError, SolutionField, SolutionSeries};

/// Relative conservation threshold.
pub const CONSERVATION_TOL: f64 = 1e-12;
/// Floor on `|Q(0)|` in the relative conservation measure.
pub const CONSERVATION_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    Finite,
    Conservation,
    Bounds,
    Monotonicity,
    Symmetry,
    Entropy,
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: CheckId,
    pub status: CheckStatus,
    pub measured: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub evidence: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    /// Flags when `measured > threshold` or `measured` is NaN.
    pub fn compare(id: CheckId, measured: f64, threshold: f64) -> Self {
        let status = if measured <= threshold { CheckStatus::Pass } else { CheckStatus::Flag };
        CheckResult { id, status, measured, threshold, evidence: BTreeMap::new(), note: None }
    }

    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.evidence.insert(key.to_string(), v);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.note = Some(text.into());
        self
    }

    pub fn flagged(&self) -> bool {
        self.status == CheckStatus::Flag
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    Max,
    Min,
    Sum,
}

impl Functional {
    fn apply(self, f: &SolutionField) -> f64 {
        match self {
            Functional::Max => f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Functional::Min => f.values.iter().copied().fold(f64::INFINITY, f64::min),
            Functional::Sum => compensated_sum(f.values.iter().copied()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    NonIncreasing,
    NonDecreasing,
}

/// Neumaier summation.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

pub fn check_finite(series: &SolutionSeries) -> CheckResult {
    let bad: usize = series.frames.iter().map(|f| f.values.iter().filter(|v| !v.is_finite()).count()).sum();
    let r = CheckResult::compare(CheckId::Finite, bad as f64, 0.0).with("non_finite_values", bad as f64);
    if bad > 0 {
        r.note("solution contains NaN or infinite values")
    } else {
        r
    }
}

/// `max_t |Q(t) - Q(0)| / max(|Q(0)|, floor)` with `Q` the weighted sum;
/// uniform weights are the cell volume.
pub fn check_conservation(series: &SolutionSeries, weights: Option<&[f64]>, threshold: f64) -> Result<CheckResult, AuditError> {
    let first = &series.frames[0];
    if let Some(w) = weights {
        if w.len() != first.len() {
            return Err(AuditError::WeightLength { expected: first.len(), got: w.len() });
        }
    }
    let cell: f64 = first.spacing.iter().product();
    let q = |f: &SolutionField| match weights {
        Some(w) => compensated_sum(f.values.iter().zip(w).map(|(v, w)| v * w)),
        None => compensated_sum(f.values.iter().copied()) * cell,
    };
    let q0 = q(first);
    let denom = q0.abs().max(CONSERVATION_FLOOR);
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for (t, f) in series.times.iter().zip(&series.frames) {
        let d = (q(f) - q0).abs() / denom;
        if d > worst || d.is_nan() {
            worst = d;
            at = *t;
            if d.is_nan() {
                break;
            }
        }
    }
    Ok(CheckResult::compare(CheckId::Conservation, worst, threshold).with("q0", q0).with("worst_time", at))
}

/// Worst excursion outside `[lower - tol, upper + tol]` with the count of
/// violating cells.
pub fn check_bounds(field: &SolutionField, lower: Option<f64>, upper: Option<f64>, tol: f64) -> Result<CheckResult, AuditError> {
    if lower.is_none() && upper.is_none() {
        return Err(AuditError::NothingDeclared("bounds"));
    }
    let (mut worst, mut count) = (0.0f64, 0usize);
    for &v in &field.values {
        let below = lower.map_or(0.0, |l| l - v);
        let above = upper.map_or(0.0, |u| v - u);
        let ex = if v.is_nan() { f64::INFINITY } else { below.max(above) };
        if ex > tol {
            count += 1;
            worst = worst.max(ex);
        }
    }
    let r = CheckResult::compare(CheckId::Bounds, worst, tol).with("violations", count as f64);
    Ok(r)
}

/// [`check_bounds`] over every frame; evidence sums the violating cells.
pub fn check_bounds_series(series: &SolutionSeries, lower: Option<f64>, upper: Option<f64>, tol: f64) -> Result<CheckResult, AuditError> {
    let mut worst = 0.0f64;
    let mut total = 0.0;
    let mut frames = 0.0;
    for f in &series.frames {
        let r = check_bounds(f, lower, upper, tol)?;
        if r.flagged() {
            frames += 1.0;
        }
        total += r.evidence["violations"];
        worst = worst.max(r.measured);
    }
    Ok(CheckResult::compare(CheckId::Bounds, worst, tol)
        .with("violations", total)
        .with("frames_flagged", frames))
}

/// Largest step against the declared direction of a scalar functional.
pub fn check_monotonicity(series: &SolutionSeries, functional: Functional, direction: Direction, tol: f64) -> CheckResult {
    let vals: Vec<f64> = series.frames.iter().map(|f| functional.apply(f)).collect();
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for (k, w) in vals.windows(2).enumerate() {
        let step = match direction {
            Direction::NonIncreasing => w[1] - w[0],
            Direction::NonDecreasing => w[0] - w[1],
        };
        if step > worst || step.is_nan() {
            worst = if step.is_nan() { f64::INFINITY } else { step };
            at = series.times[k + 1];
        }
    }
    CheckResult::compare(CheckId::Monotonicity, worst, tol).with("worst_time", at)
}

/// `max |u(x) - u(mirror(x))| / max|u|` about the midpoint of `axis`.
pub fn check_symmetry(field: &SolutionField, axis: usize, tol: f64) -> Result<CheckResult, AuditError> {
    if axis >= field.shape.len() {
        return Err(AuditError::BadAxis { axis, dims: field.shape.len() });
    }
    let strides = field.strides();
    let (n, s) = (field.shape[axis], strides[axis]);
    let mut diff = 0.0f64;
    for (k, &v) in field.values.iter().enumerate() {
        let i = (k / s) % n;
        let mirror = k - i * s + (n - 1 - i) * s;
        let d = (v - field.values[mirror]).abs();
        diff = if d.is_nan() { f64::INFINITY } else { diff.max(d) };
    }
    let scale = field.max_abs();
    let measured = if diff == 0.0 { 0.0 } else { diff / scale };
    Ok(CheckResult::compare(CheckId::Symmetry, measured, tol))
}

pub fn check_symmetry_series(series: &SolutionSeries, axis: usize, tol: f64) -> Result<CheckResult, AuditError> {
    let mut worst = 0.0f64;
    for f in &series.frames {
        worst = worst.max(check_symmetry(f, axis, tol)?.measured);
    }
    Ok(CheckResult::compare(CheckId::Symmetry, worst, tol))
}

/// Square entropy `sum(u^2 / 2) * cell` must not increase; measured is the
/// largest increase relative to the initial entropy (floored).
pub fn check_entropy(series: &SolutionSeries, tol: f64) -> CheckResult {
    let eta = |f: &SolutionField| {
        let cell: f64 = f.spacing.iter().product();
        compensated_sum(f.values.iter().map(|u| 0.5 * u * u)) * cell
    };
    let e: Vec<f64> = series.frames.iter().map(eta).collect();
    let denom = e[0].abs().max(CONSERVATION_FLOOR);
    let mut worst = 0.0f64;
    for w in e.windows(2) {
        let inc = (w[1] - w[0]) / denom;
        worst = if inc.is_nan() { f64::INFINITY } else { worst.max(inc) };
    }
    CheckResult::compare(CheckId::Entropy, worst, tol)
        .with("initial_entropy", e[0])
        .with("final_entropy", *e.last().expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(values: Vec<f64>) -> SolutionField {
        SolutionField::new(vec![values.len()], vec![0.1], values).unwrap()
    }

    fn series(frames: Vec<Vec<f64>>) -> SolutionSeries {
        let times = (0..frames.len()).map(|t| t as f64).collect();
        SolutionSeries::new(times, frames.into_iter().map(field).collect()).unwrap()
    }

    #[test]
    fn conservation() {
        let c = series(vec![vec![1.0, 2.0, 3.0]; 4]);
        let r = check_conservation(&c, None, CONSERVATION_TOL).unwrap();
        assert_eq!((r.measured, r.status), (0.0, CheckStatus::Pass));

        let base = vec![1.0, 2.0, 3.0];
        let scaled: Vec<f64> = base.iter().map(|v| v * 1.01).collect();
        let s = series(vec![base.clone(), scaled, base.clone()]);
        let r = check_conservation(&s, None, CONSERVATION_TOL).unwrap();
        assert!((r.measured - 0.01).abs() < 1e-12);
        assert!(r.flagged());

        let zero = series(vec![vec![0.0, 0.0], vec![1e-40, 0.0]]);
        assert!(check_conservation(&zero, None, CONSERVATION_TOL).unwrap().measured.is_finite());
        assert!(check_conservation(&zero, Some(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn bounds() {
        let r = check_bounds(&field(vec![0.0; 5]), Some(0.0), None, 1e-12).unwrap();
        assert!(!r.flagged());
        let r = check_bounds(&field(vec![0.0, -0.5, 1.0]), Some(0.0), None, 1e-12).unwrap();
        assert!(r.flagged());
        assert_eq!(r.measured, 0.5);
        assert_eq!(r.evidence["violations"], 1.0);
        assert!(check_bounds(&field(vec![1.0]), None, None, 0.0).is_err());
        let r = check_bounds(&field(vec![2.0, f64::NAN]), None, Some(1.0), 0.0).unwrap();
        assert_eq!(r.evidence["violations"], 2.0);
    }

    #[test]
    fn ct_style_negative_cells_are_counted() {
        let n = 128 * 128;
        let values: Vec<f64> = (0..n).map(|k| if k % 3 == 0 && k < 3 * 5326 { -1e-3 } else { 0.2 }).collect();
        let f = SolutionField::new(vec![128, 128], vec![1.0, 1.0], values).unwrap();
        let r = check_bounds(&f, Some(0.0), None, 1e-12).unwrap();
        assert_eq!(r.evidence["violations"], 5326.0);
    }

    #[test]
    fn monotonicity() {
        let c = series(vec![vec![1.0, 2.0]; 3]);
        for d in [Direction::NonIncreasing, Direction::NonDecreasing] {
            assert!(!check_monotonicity(&c, Functional::Max, d, 1e-12).flagged());
        }
        let s = series(vec![vec![1.0], vec![0.5], vec![0.7]]);
        let r = check_monotonicity(&s, Functional::Max, Direction::NonIncreasing, 1e-12);
        assert!(r.flagged());
        assert!((r.measured - 0.2).abs() < 1e-15);
        assert_eq!(r.evidence["worst_time"], 2.0);
    }

    #[test]
    fn symmetry() {
        let g: Vec<f64> = (0..21).map(|i| (-((i as f64 - 10.0) / 4.0).powi(2)).exp()).collect();
        let r = check_symmetry(&field(g.clone()), 0, 1e-12).unwrap();
        assert_eq!(r.measured, 0.0);
        let mut shifted = g[1..].to_vec();
        shifted.push(0.0);
        assert!(check_symmetry(&field(shifted), 0, 1e-10).unwrap().flagged());
        assert!(check_symmetry(&field(g), 1, 1e-10).is_err());

        // Axis 1 of a 2x3 field mirrors columns.
        let f = SolutionField::new(vec![2, 3], vec![1.0, 1.0], vec![1.0, 5.0, 1.0, 2.0, 0.0, 2.0]).unwrap();
        assert_eq!(check_symmetry(&f, 1, 0.0).unwrap().measured, 0.0);
        assert!(check_symmetry(&f, 0, 0.0).unwrap().flagged());
    }

    #[test]
    fn entropy() {
        assert!(!check_entropy(&series(vec![vec![1.0, -1.0]; 3]), 1e-12).flagged());
        let growing = series(vec![vec![1.0, -1.0], vec![1.1, -1.1], vec![1.2, -1.2]]);
        assert!(check_entropy(&growing, 1e-12).flagged());
    }

    #[test]
    fn finite() {
        assert!(!check_finite(&series(vec![vec![1.0]])).flagged());
        assert!(check_finite(&series(vec![vec![1.0], vec![f64::INFINITY]])).flagged());
    }
}

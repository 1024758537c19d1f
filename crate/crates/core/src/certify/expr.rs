//! Closed-form data from spec text: `u = sin(pi*x)`, `f = 2*pi^2*...`,
//! `x = (1, 1)`.

use meval::Expr;

use super::PipelineError;

/// Right-hand side of an assignment, or the whole text when there is none.
pub fn rhs(text: &str) -> &str {
    text.rsplit('=').next().unwrap_or(text).trim()
}

fn parse(text: &str) -> Result<Expr, PipelineError> {
    rhs(text)
        .parse::<Expr>()
        .map_err(|e| PipelineError::Expression(format!("`{text}`: {e}")))
}

/// Function of `x`.
pub fn function_1d(text: &str) -> Result<impl Fn(f64) -> f64, PipelineError> {
    parse(text)?
        .bind("x")
        .map_err(|e| PipelineError::Expression(format!("`{text}`: {e}")))
}

/// Function of `x` and `y`.
pub fn function_2d(text: &str) -> Result<impl Fn(f64, f64) -> f64, PipelineError> {
    parse(text)?
        .bind2("x", "y")
        .map_err(|e| PipelineError::Expression(format!("`{text}`: {e}")))
}

/// A scalar or a parenthesized tuple of scalar expressions.
pub fn values(text: &str) -> Result<Vec<f64>, PipelineError> {
    let body = rhs(text).trim_start_matches('(').trim_end_matches(')');
    body.split(',')
        .map(|part| {
            part.trim()
                .parse::<Expr>()
                .and_then(|e| e.eval())
                .map_err(|e| PipelineError::Expression(format!("`{text}`: {e}")))
        })
        .collect()
}

/// Lower and upper end of an interval written `[a, b]`, optionally followed
/// by a unit.
pub fn interval(text: &str) -> Option<(f64, f64)> {
    let inner = text.split('[').nth(1)?.split(']').next()?;
    let mut it = inner.split(',').map(|s| s.trim().parse::<f64>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) if b > a => Some((a, b)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn assignments_evaluate() {
        let u = function_1d("u = sin(pi*x)").unwrap();
        assert!((u(0.5) - 1.0).abs() < 1e-15);
        let f = function_2d("f = 2*pi^2*sin(pi*x)*sin(pi*y)").unwrap();
        assert!((f(0.5, 0.5) - 2.0 * PI * PI).abs() < 1e-12);
        let g = function_1d("u = 1 + 0.5*cos(2*pi*x)").unwrap();
        assert!((g(0.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn tuples_and_scalars() {
        assert_eq!(values("x = (1, 1)").unwrap(), vec![1.0, 1.0]);
        assert_eq!(values("x = 0").unwrap(), vec![0.0]);
        assert!(values("x = (1, y)").is_err());
        assert!(function_1d("u = sin(pi*z)").is_err());
    }

    #[test]
    fn intervals() {
        assert_eq!(interval("[0, 1] m"), Some((0.0, 1.0)));
        assert_eq!(interval("[0, 400] s"), Some((0.0, 400.0)));
        assert_eq!(interval("[1, 0]"), None);
        assert_eq!(interval("unit square"), None);
    }
}

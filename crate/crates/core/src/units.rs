//! SI dimension algebra used by the dimensional-consistency gate.
//!
//! A [`Dimension`] is a vector of rational exponents over the seven SI base
//! quantities. Unit annotations from spec documents are parsed into a
//! dimension plus a scale factor to SI; the scale lives on [`Quantity`], never
//! on the dimension itself.

use std::fmt;
use std::ops::{Div, Mul};

use num_rational::Ratio;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::gates::{ArchetypeTemplate, GateFinding, GateId, SCondition};
use crate::specmd::ProblemSpec;

pub type Exponent = Ratio<i32>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("malformed unit expression `{text}`: {reason}")]
    Syntax { text: String, reason: String },
    #[error("incompatible dimensions: {left} vs {right}")]
    Incompatible { left: Dimension, right: Dimension },
    #[error("missing required parameter `{0}`")]
    MissingParameter(String),
    #[error("`{0}` is not a number with an optional unit")]
    NotAQuantity(String),
}

/// SI base quantities, in the order used by the exponent vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseQuantity {
    Length,
    Mass,
    Time,
    Current,
    Temperature,
    Amount,
    Luminosity,
}

impl BaseQuantity {
    pub const ALL: [BaseQuantity; 7] = [
        BaseQuantity::Length,
        BaseQuantity::Mass,
        BaseQuantity::Time,
        BaseQuantity::Current,
        BaseQuantity::Temperature,
        BaseQuantity::Amount,
        BaseQuantity::Luminosity,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BaseQuantity::Length => "L",
            BaseQuantity::Mass => "M",
            BaseQuantity::Time => "T",
            BaseQuantity::Current => "I",
            BaseQuantity::Temperature => "Θ",
            BaseQuantity::Amount => "N",
            BaseQuantity::Luminosity => "J",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dimension {
    exponents: [Exponent; 7],
}

impl Dimension {
    pub fn dimensionless() -> Self {
        Dimension {
            exponents: [Ratio::from_integer(0); 7],
        }
    }

    pub fn base(q: BaseQuantity) -> Self {
        Self::dimensionless().with(q, 1)
    }

    /// Builder used mostly by tests and the unit table: sets one integer exponent.
    pub fn with(mut self, q: BaseQuantity, exp: i32) -> Self {
        self.exponents[q.index()] = Ratio::from_integer(exp);
        self
    }

    pub fn exponent(&self, q: BaseQuantity) -> Exponent {
        self.exponents[q.index()]
    }

    pub fn is_dimensionless(&self) -> bool {
        self.exponents.iter().all(|e| *e == Ratio::from_integer(0))
    }

    pub fn powr(&self, r: Exponent) -> Self {
        let mut out = *self;
        for e in out.exponents.iter_mut() {
            *e *= r;
        }
        out
    }

    pub fn combine(self, op: DimOp) -> Self {
        match op {
            DimOp::Mul(other) => self * other,
            DimOp::Div(other) => self / other,
            DimOp::Pow(r) => self.powr(r),
        }
    }
}

impl Mul for Dimension {
    type Output = Dimension;
    fn mul(mut self, rhs: Dimension) -> Dimension {
        for (a, b) in self.exponents.iter_mut().zip(rhs.exponents) {
            *a += b;
        }
        self
    }
}

impl Div for Dimension {
    type Output = Dimension;
    fn div(mut self, rhs: Dimension) -> Dimension {
        for (a, b) in self.exponents.iter_mut().zip(rhs.exponents) {
            *a -= b;
        }
        self
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return f.write_str("1");
        }
        let mut first = true;
        for q in BaseQuantity::ALL {
            let e = self.exponent(q);
            if e == Ratio::from_integer(0) {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            f.write_str(q.symbol())?;
            if e != Ratio::from_integer(1) {
                if e.is_integer() {
                    write!(f, "^{}", e.numer())?;
                } else {
                    write!(f, "^({}/{})", e.numer(), e.denom())?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dimension({self})")
    }
}

impl Serialize for Dimension {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Exponent arithmetic on dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimOp {
    Mul(Dimension),
    Div(Dimension),
    Pow(Exponent),
}

pub fn combine(a: Dimension, op: DimOp) -> Dimension {
    a.combine(op)
}

/// Result of parsing a unit annotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsedUnit {
    pub dimension: Dimension,
    /// Multiply a value in this unit by `scale` to get SI.
    pub scale: f64,
    /// Logarithmic ratio units (dB and friends).
    pub logarithmic: bool,
}

impl ParsedUnit {
    fn one() -> Self {
        ParsedUnit {
            dimension: Dimension::dimensionless(),
            scale: 1.0,
            logarithmic: false,
        }
    }
}

fn lookup(token: &str) -> Option<ParsedUnit> {
    use BaseQuantity::*;
    let d = Dimension::dimensionless;
    let (dim, scale) = match token {
        "m" => (d().with(Length, 1), 1.0),
        "mm" => (d().with(Length, 1), 1e-3),
        "cm" => (d().with(Length, 1), 1e-2),
        "km" => (d().with(Length, 1), 1e3),
        "s" => (d().with(Time, 1), 1.0),
        "min" => (d().with(Time, 1), 60.0),
        "h" => (d().with(Time, 1), 3600.0),
        "kg" => (d().with(Mass, 1), 1.0),
        "K" => (d().with(Temperature, 1), 1.0),
        "A" => (d().with(Current, 1), 1.0),
        "mol" => (d().with(Amount, 1), 1.0),
        "cd" => (d().with(Luminosity, 1), 1.0),
        "Hz" => (d().with(Time, -1), 1.0),
        "Pa" => (d().with(Mass, 1).with(Length, -1).with(Time, -2), 1.0),
        "atm" => (d().with(Mass, 1).with(Length, -1).with(Time, -2), 101_325.0),
        "J" => (d().with(Mass, 1).with(Length, 2).with(Time, -2), 1.0),
        "W" => (d().with(Mass, 1).with(Length, 2).with(Time, -3), 1.0),
        "dimensionless" | "1" => (d(), 1.0),
        t if t.starts_with("dB") => {
            return Some(ParsedUnit {
                dimension: d(),
                scale: 1.0,
                logarithmic: true,
            })
        }
        _ => return None,
    };
    Some(ParsedUnit {
        dimension: dim,
        scale,
        logarithmic: false,
    })
}

/// Parses a unit annotation such as `m^2/s`, `kg/(m*s^2)` or `dB`.
///
/// Composition is left-associative: `a/b*c` is `(a/b)*c`. Whitespace between
/// factors means multiplication. Exponents are integers or parenthesised
/// fractions (`m^(1/2)`).
pub fn parse_unit(text: &str) -> Result<ParsedUnit, UnitError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(ParsedUnit::one());
    }
    let mut p = UnitParser {
        src: trimmed,
        chars: trimmed.char_indices().collect(),
        pos: 0,
    };
    let unit = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("unexpected trailing input"));
    }
    if unit.logarithmic && (!unit.dimension.is_dimensionless() || unit.scale != 1.0) {
        return Err(p.error("logarithmic units cannot be composed"));
    }
    Ok(unit)
}

struct UnitParser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl UnitParser<'_> {
    fn error(&self, reason: &str) -> UnitError {
        UnitError::Syntax {
            text: self.src.to_string(),
            reason: reason.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn expr(&mut self) -> Result<ParsedUnit, UnitError> {
        let mut acc = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('*') | Some('·') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = mul_units(acc, rhs, false);
                }
                Some('/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = mul_units(acc, rhs, true);
                }
                Some(c) if c.is_alphanumeric() || c == '(' => {
                    let rhs = self.factor()?;
                    acc = mul_units(acc, rhs, false);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<ParsedUnit, UnitError> {
        self.skip_ws();
        let base = match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(')') {
                    return Err(self.error("unbalanced parenthesis"));
                }
                self.pos += 1;
                inner
            }
            Some(c) if c.is_alphanumeric() => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let token: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
                lookup(&token).ok_or(UnitError::UnknownUnit(token))?
            }
            _ => return Err(self.error("expected a unit")),
        };
        self.skip_ws();
        if self.peek() == Some('^') {
            self.pos += 1;
            let exp = self.exponent()?;
            if base.logarithmic {
                return Err(self.error("logarithmic units cannot be raised to a power"));
            }
            let scale = base.scale.powf(*exp.numer() as f64 / *exp.denom() as f64);
            return Ok(ParsedUnit {
                dimension: base.dimension.powr(exp),
                scale,
                logarithmic: false,
            });
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Exponent, UnitError> {
        self.skip_ws();
        if self.peek() == Some('(') {
            self.pos += 1;
            let num = self.integer()?;
            self.skip_ws();
            let den = if self.peek() == Some('/') {
                self.pos += 1;
                self.integer()?
            } else {
                1
            };
            self.skip_ws();
            if self.peek() != Some(')') {
                return Err(self.error("unbalanced exponent parenthesis"));
            }
            self.pos += 1;
            if den == 0 {
                return Err(self.error("zero exponent denominator"));
            }
            Ok(Ratio::new(num, den))
        } else {
            Ok(Ratio::from_integer(self.integer()?))
        }
    }

    fn integer(&mut self) -> Result<i32, UnitError> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.peek(), Some('-') | Some('+')) {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let lit: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
        lit.parse().map_err(|_| self.error("expected an integer exponent"))
    }
}

fn mul_units(a: ParsedUnit, b: ParsedUnit, divide: bool) -> ParsedUnit {
    let (dimension, scale) = if divide {
        (a.dimension / b.dimension, a.scale / b.scale)
    } else {
        (a.dimension * b.dimension, a.scale * b.scale)
    };
    ParsedUnit {
        dimension,
        scale,
        logarithmic: a.logarithmic || b.logarithmic,
    }
}

/// A numeric value with its unit annotation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantity {
    /// Value as written, in `unit_text` units.
    pub value: f64,
    #[serde(rename = "dimension")]
    pub dim: Dimension,
    pub scale: f64,
    #[serde(rename = "unit")]
    pub unit_text: String,
    pub logarithmic: bool,
}

impl Quantity {
    pub fn dimensionless(value: f64) -> Self {
        Quantity {
            value,
            dim: Dimension::dimensionless(),
            scale: 1.0,
            unit_text: String::new(),
            logarithmic: false,
        }
    }

    pub fn new(value: f64, unit_text: &str) -> Result<Self, UnitError> {
        let unit = parse_unit(unit_text)?;
        Ok(Quantity {
            value,
            dim: unit.dimension,
            scale: unit.scale,
            unit_text: unit_text.trim().to_string(),
            logarithmic: unit.logarithmic,
        })
    }

    /// Parses `"<number> [unit]"`, e.g. `1.0e-4 m^2/s` or `30.0`.
    pub fn parse(text: &str) -> Result<Self, UnitError> {
        let text = text.trim();
        let (num, rest) = match text.find(char::is_whitespace) {
            Some(i) => (&text[..i], &text[i..]),
            None => (text, ""),
        };
        let value: f64 = num
            .parse()
            .map_err(|_| UnitError::NotAQuantity(text.to_string()))?;
        if !value.is_finite() {
            return Err(UnitError::NotAQuantity(text.to_string()));
        }
        Quantity::new(value, rest)
    }

    pub fn si_value(&self) -> f64 {
        self.value * self.scale
    }

    fn require_same(&self, other: &Quantity) -> Result<(), UnitError> {
        if self.dim != other.dim || self.logarithmic != other.logarithmic {
            return Err(UnitError::Incompatible {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    /// Sum expressed in SI units of the common dimension.
    pub fn checked_add(&self, other: &Quantity) -> Result<Quantity, UnitError> {
        self.require_same(other)?;
        Ok(Quantity {
            value: self.si_value() + other.si_value(),
            dim: self.dim,
            scale: 1.0,
            unit_text: String::new(),
            logarithmic: self.logarithmic,
        })
    }

    pub fn checked_cmp(&self, other: &Quantity) -> Result<Option<std::cmp::Ordering>, UnitError> {
        self.require_same(other)?;
        Ok(self.si_value().partial_cmp(&other.si_value()))
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.unit_text.is_empty() {
            write!(f, "{}", self.value)
        } else {
            write!(f, "{} {}", self.value, self.unit_text)
        }
    }
}

/// Compares the declared dimension of every template parameter with the
/// dimension the template requires. Each mismatch, and each parameter whose
/// unit annotation cannot be read, is a reject finding on S1.
pub fn check_template(spec: &ProblemSpec, template: &ArchetypeTemplate) -> Result<Vec<GateFinding>, UnitError> {
    let mut findings = Vec::new();
    for (name, unit) in &template.params {
        let expected = parse_unit(unit)?.dimension;
        match spec.parameter(name) {
            Some(q) if q.dim == expected => {}
            Some(q) => findings.push(GateFinding::reject(
                GateId::G1Dimensional,
                "dimension",
                SCondition::S1,
                format!("{{param: {name}, expected {expected}, actual {}}}", q.dim),
            )),
            None => match spec.setting(name) {
                Some(text) => {
                    let reason = Quantity::parse(text).err().map_or_else(|| "unreadable".to_string(), |e| e.to_string());
                    findings.push(GateFinding::reject(
                        GateId::G1Dimensional,
                        "unit-annotation",
                        SCondition::S1,
                        format!("{{param: {name}, expected {expected}, actual unreadable}}: {reason}"),
                    ));
                }
                None => return Err(UnitError::MissingParameter(name.clone())),
            },
        }
    }
    Ok(findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use BaseQuantity::*;

    fn dim(l: i32, m: i32, t: i32) -> Dimension {
        Dimension::dimensionless().with(Length, l).with(Mass, m).with(Time, t)
    }

    #[test]
    fn diffusivity_unit() {
        let u = parse_unit("m^2/s").unwrap();
        assert_eq!(u.dimension, dim(2, 0, -1));
        assert!(!u.logarithmic);
    }

    #[test]
    fn atm_matches_expanded_pascal() {
        let expanded = parse_unit("kg*m^-1*s^-2").unwrap();
        let atm = parse_unit("atm").unwrap();
        assert_eq!(atm.dimension, expanded.dimension);
        assert_eq!(atm.dimension, dim(-1, 1, -2));
        assert_eq!(atm.scale, 101_325.0);
        assert_eq!(parse_unit("Pa").unwrap().dimension, atm.dimension);
    }

    #[test]
    fn decibel_is_flagged_dimensionless() {
        let u = parse_unit("dB").unwrap();
        assert!(u.dimension.is_dimensionless());
        assert!(u.logarithmic);
        assert!(parse_unit("dBm").unwrap().logarithmic);
        assert!(parse_unit("dB^2").is_err());
    }

    #[test]
    fn unknown_unit_is_reported() {
        assert_eq!(
            parse_unit("furlong/s"),
            Err(UnitError::UnknownUnit("furlong".into()))
        );
    }

    #[test]
    fn grouped_and_fractional() {
        let u = parse_unit("kg/(m*s^2)").unwrap();
        assert_eq!(u.dimension, dim(-1, 1, -2));
        let r = parse_unit("m^(1/2)").unwrap();
        assert_eq!(r.dimension.exponent(Length), Ratio::new(1, 2));
        let j = parse_unit("J/(mol K)").unwrap();
        assert_eq!(j.dimension.exponent(Amount), Ratio::from_integer(-1));
        assert_eq!(j.dimension.exponent(Temperature), Ratio::from_integer(-1));
    }

    #[test]
    fn scales_compose() {
        assert!((parse_unit("mm^2/min").unwrap().scale - 1e-6 / 60.0).abs() < 1e-20);
        assert_eq!(parse_unit("km/h").unwrap().dimension, dim(1, 0, -1));
    }

    #[test]
    fn combine_examples() {
        let l = Dimension::base(Length);
        assert_eq!(combine(l, DimOp::Mul(l)), dim(2, 0, 0));
        let kappa = dim(2, 0, -1);
        assert!(combine(kappa, DimOp::Div(kappa)).is_dimensionless());
        assert_eq!(combine(dim(2, 0, 0), DimOp::Pow(Ratio::new(1, 2))), l);
    }

    #[test]
    fn quantity_parse_and_compare() {
        let q = Quantity::parse("1.0e-4 m^2/s").unwrap();
        assert_eq!(q.value, 1.0e-4);
        assert_eq!(q.dim, dim(2, 0, -1));
        assert_eq!(q.unit_text, "m^2/s");
        let bare = Quantity::parse("30.0").unwrap();
        assert!(bare.dim.is_dimensionless() && bare.unit_text.is_empty());
        assert!(Quantity::parse("parallel_beam").is_err());

        let a = Quantity::parse("1 atm").unwrap();
        let b = Quantity::parse("101325 Pa").unwrap();
        assert_eq!(a.checked_cmp(&b).unwrap(), Some(std::cmp::Ordering::Equal));
        let c = Quantity::parse("1 m").unwrap();
        assert!(a.checked_add(&c).is_err());
        let db = Quantity::parse("30 dB").unwrap();
        assert!(db.checked_cmp(&Quantity::dimensionless(30.0)).is_err());
    }

    #[test]
    fn display_notation() {
        assert_eq!(dim(2, 0, -1).to_string(), "L^2 T^-1");
        assert_eq!(Dimension::dimensionless().to_string(), "1");
        assert_eq!(
            Dimension::base(Length).powr(Ratio::new(1, 2)).to_string(),
            "L^(1/2)"
        );
    }

    fn arb_dim() -> impl Strategy<Value = Dimension> {
        proptest::collection::vec((-4i32..=4, 1i32..=3), 7).prop_map(|v| {
            let mut d = Dimension::dimensionless();
            for (q, (n, den)) in BaseQuantity::ALL.iter().zip(v) {
                d.exponents[q.index()] = Ratio::new(n, den);
            }
            d
        })
    }

    proptest! {
        #[test]
        fn mul_is_associative(a in arb_dim(), b in arb_dim(), c in arb_dim()) {
            prop_assert_eq!((a * b) * c, a * (b * c));
        }

        #[test]
        fn dimensionless_is_identity(a in arb_dim()) {
            prop_assert_eq!(a * Dimension::dimensionless(), a);
        }

        #[test]
        fn self_division_is_dimensionless(a in arb_dim()) {
            prop_assert!((a / a).is_dimensionless());
        }

        #[test]
        fn parse_is_deterministic(idx in 0usize..19) {
            let vocab = ["m", "s", "kg", "K", "A", "mol", "cd", "Hz", "Pa", "atm",
                         "J", "W", "mm", "cm", "km", "min", "h", "dB", "dimensionless"];
            let a = parse_unit(vocab[idx]).unwrap();
            let b = parse_unit(vocab[idx]).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

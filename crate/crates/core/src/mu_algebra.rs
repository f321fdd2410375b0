//! Exact term algebra for sums of `c * z^p * (S0 - q z^mu)^e`.
//!
//! Exponents are exact: a rational part plus rational multiples of two
//! fixed irrational radicals (`R` and `Q/(mu q)`), so Rodrigues-type
//! n-th derivatives only ever shift exponents by rationals and keys merge
//! exactly. Coefficients are `f64`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::conformable::{format_ratio, FracOrder};
use crate::error::{Error, Result};

/// Terms with smaller coefficient magnitude are dropped on normalization.
pub const COEFF_FLOOR: f64 = 1e-30;

/// Numeric values of the irrational generators that may appear in exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radicals {
    /// `R = sqrt((mu - 1)^2 + 4 eps^2)` (or its signed quantization root).
    pub r: f64,
    /// `Q / (mu q)` with `Q = sqrt(mu^2 q^2 + 4 gamma^2)`.
    pub q_ratio: f64,
}

/// Exponent `rational + r_coeff * R + q_coeff * Q/(mu q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Exponent {
    pub rational: Rational64,
    pub r_coeff: Rational64,
    pub q_coeff: Rational64,
}

impl Exponent {
    pub fn rational(r: Rational64) -> Self {
        Self {
            rational: r,
            r_coeff: Rational64::zero(),
            q_coeff: Rational64::zero(),
        }
    }

    pub fn integer(n: i64) -> Self {
        Self::rational(Rational64::from_integer(n))
    }

    pub fn zero() -> Self {
        Self::integer(0)
    }

    pub fn new(rational: Rational64, r_coeff: Rational64, q_coeff: Rational64) -> Self {
        Self {
            rational,
            r_coeff,
            q_coeff,
        }
    }

    pub fn has_radicals(&self) -> bool {
        !self.r_coeff.is_zero() || !self.q_coeff.is_zero()
    }

    /// Whether the exponent is a known integer (no radical parts).
    pub fn is_integer(&self) -> bool {
        !self.has_radicals() && self.rational.is_integer()
    }

    pub fn value(&self, radicals: Option<&Radicals>) -> f64 {
        let mut v = to_f64(self.rational);
        if self.has_radicals() {
            let rad = radicals.expect("radical exponents are only built with radical values");
            v += to_f64(self.r_coeff) * rad.r + to_f64(self.q_coeff) * rad.q_ratio;
        }
        v
    }

    pub fn shift(&self, by: Rational64) -> Self {
        Self {
            rational: self.rational + by,
            ..*self
        }
    }
}

impl std::ops::Add for Exponent {
    type Output = Exponent;

    fn add(self, rhs: Exponent) -> Exponent {
        Exponent {
            rational: self.rational + rhs.rational,
            r_coeff: self.r_coeff + rhs.r_coeff,
            q_coeff: self.q_coeff + rhs.q_coeff,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rational)?;
        if !self.r_coeff.is_zero() {
            write!(f, " + ({})R", self.r_coeff)?;
        }
        if !self.q_coeff.is_zero() {
            write!(f, " + ({})Q/(mu q)", self.q_coeff)?;
        }
        Ok(())
    }
}

fn to_f64(r: Rational64) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Shared context `(mu, S0, q)` of a term sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub mu: FracOrder,
    pub s0: f64,
    pub q: f64,
    pub radicals: Option<Radicals>,
}

impl Shape {
    pub fn new(mu: FracOrder, s0: f64, q: f64) -> Self {
        Self {
            mu,
            s0,
            q,
            radicals: None,
        }
    }

    pub fn with_radicals(self, radicals: Radicals) -> Self {
        Self {
            radicals: Some(radicals),
            ..self
        }
    }

    /// `S0 - q z^mu`.
    pub fn base(&self, z: f64) -> f64 {
        self.s0 - self.q * z.powf(self.mu.value())
    }
}

/// One term `coeff * z^z_power * (S0 - q z^mu)^base_power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuTerm {
    pub coeff: f64,
    pub z_power: Exponent,
    pub base_power: Exponent,
}

/// A normalized sum of [`MuTerm`]s over a common [`Shape`].
///
/// Terms are keyed by `(z_power, base_power)` in a `BTreeMap`, which gives
/// the canonical order and merges like terms on insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct MuTermSum {
    shape: Shape,
    terms: BTreeMap<(Exponent, Exponent), f64>,
}

impl MuTermSum {
    pub fn zero(shape: Shape) -> Self {
        Self {
            shape,
            terms: BTreeMap::new(),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = MuTerm> + '_ {
        self.terms.iter().map(|(&(z_power, base_power), &coeff)| MuTerm {
            coeff,
            z_power,
            base_power,
        })
    }

    /// Coefficient stored under the given exponent key, zero when absent.
    pub fn coeff_of(&self, z_power: Exponent, base_power: Exponent) -> f64 {
        self.terms.get(&(z_power, base_power)).copied().unwrap_or(0.0)
    }

    fn push(&mut self, coeff: f64, z_power: Exponent, base_power: Exponent) {
        *self.terms.entry((z_power, base_power)).or_insert(0.0) += coeff;
    }

    fn normalized(mut self) -> Self {
        self.terms.retain(|_, c| c.abs() >= COEFF_FLOOR);
        self
    }

    /// Inserts a term with exact exponents, which may carry radical parts.
    pub fn add_term(mut self, coeff: f64, z_power: Exponent, base_power: Exponent) -> Result<Self> {
        if !coeff.is_finite() {
            return Err(Error::NonFiniteCoefficient(coeff));
        }
        if (z_power.has_radicals() || base_power.has_radicals()) && self.shape.radicals.is_none() {
            return Err(Error::MissingRadicals);
        }
        self.push(coeff, z_power, base_power);
        Ok(self.normalized())
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() {
            return Err(Error::NonFiniteCoefficient(factor));
        }
        let mut out = Self::zero(self.shape);
        for t in self.terms() {
            out.push(t.coeff * factor, t.z_power, t.base_power);
        }
        Ok(out.normalized())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch);
        }
        let mut out = self.clone();
        for t in other.terms() {
            out.push(t.coeff, t.z_power, t.base_power);
        }
        Ok(out.normalized())
    }

    /// Multiplies every term by `coeff * z^z_power * base^base_power`.
    pub fn mul_monomial(&self, coeff: f64, z_power: Exponent, base_power: Exponent) -> Result<Self> {
        let lifted = Self::zero(self.shape).add_term(1.0, z_power, base_power)?;
        if !coeff.is_finite() {
            return Err(Error::NonFiniteCoefficient(coeff));
        }
        let mut out = Self::zero(lifted.shape);
        for t in self.terms() {
            out.push(t.coeff * coeff, t.z_power + z_power, t.base_power + base_power);
        }
        Ok(out.normalized())
    }

    /// Exact `d/dz`.
    ///
    /// `c z^p B^e -> c p z^(p-1) B^e - c e q mu z^(p+mu-1) B^(e-1)` with
    /// `B = S0 - q z^mu`.
    pub fn differentiate(&self) -> Self {
        let rad = self.shape.radicals.as_ref();
        let mu = self.shape.mu.ratio();
        let q_mu = self.shape.q * self.shape.mu.value();
        let one = Rational64::from_integer(1);
        let mut out = Self::zero(self.shape);
        for t in self.terms() {
            let p = t.z_power.value(rad);
            if p != 0.0 {
                out.push(t.coeff * p, t.z_power.shift(-one), t.base_power);
            }
            let e = t.base_power.value(rad);
            if e != 0.0 && q_mu != 0.0 {
                out.push(-t.coeff * e * q_mu, t.z_power.shift(mu - one), t.base_power.shift(-one));
            }
        }
        out.normalized()
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |f, _| f.differentiate())
    }

    /// Evaluates the sum at `z`.
    pub fn evaluate(&self, z: f64) -> Result<f64> {
        let rad = self.shape.radicals.as_ref();
        let base = self.shape.base(z);
        let mut acc = 0.0;
        for t in self.terms() {
            let zp = if t.z_power.is_integer() {
                let k = t.z_power.rational.to_integer();
                if z <= 0.0 && k < 0 {
                    return Err(Error::Domain(format!("z = {z} with negative power {}", t.z_power)));
                }
                if z < 0.0 {
                    return Err(Error::Domain(format!("z = {z} must be nonnegative")));
                }
                z.powi(k as i32)
            } else {
                if z <= 0.0 {
                    return Err(Error::Domain(format!("z = {z} with non-integer power {}", t.z_power)));
                }
                z.powf(t.z_power.value(rad))
            };
            let bp = if t.base_power.is_integer() {
                let k = t.base_power.rational.to_integer();
                if base == 0.0 && k < 0 {
                    return Err(Error::Domain(format!(
                        "S0 - q z^mu = 0 with negative power {}",
                        t.base_power
                    )));
                }
                base.powi(k as i32)
            } else {
                if base <= 0.0 {
                    return Err(Error::Domain(format!(
                        "S0 - q z^mu = {base} <= 0 with non-integer power {}",
                        t.base_power
                    )));
                }
                base.powf(t.base_power.value(rad))
            };
            acc += t.coeff * zp * bp;
        }
        Ok(acc)
    }

    /// Debug JSON form: context plus one object per term.
    pub fn to_json(&self) -> serde_json::Value {
        let exponent = |e: &Exponent| {
            let mut v = serde_json::json!(format_ratio(&e.rational));
            if e.has_radicals() {
                v = serde_json::json!({
                    "rational": format_ratio(&e.rational),
                    "r": format_ratio(&e.r_coeff),
                    "q_ratio": format_ratio(&e.q_coeff),
                });
            }
            v
        };
        let terms: Vec<_> = self
            .terms()
            .map(|t| {
                serde_json::json!({
                    "coeff": t.coeff,
                    "z_power": exponent(&t.z_power),
                    "base_power": exponent(&t.base_power),
                })
            })
            .collect();
        serde_json::json!({
            "context": {
                "mu": format_ratio(&self.shape.mu.ratio()),
                "s0": self.shape.s0,
                "q": self.shape.q,
                "radicals": self.shape.radicals,
            },
            "terms": terms,
        })
    }
}

/// Single-term sum `c * z^p * (S0 - q z^mu)^e` with rational exponents.
pub fn make_term(c: f64, p: Rational64, e: Rational64, shape: Shape) -> Result<MuTermSum> {
    MuTermSum::zero(shape).add_term(c, Exponent::rational(p), Exponent::rational(e))
}

/// Like [`make_term`] but takes `mu` as text and rejects non-rational input.
pub fn make_term_str(c: f64, p: Rational64, e: Rational64, mu: &str, s0: f64, q: f64) -> Result<MuTermSum> {
    let mu: FracOrder = mu.parse()?;
    make_term(c, p, e, Shape::new(mu, s0, q))
}

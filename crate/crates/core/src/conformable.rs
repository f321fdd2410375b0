//! The conformable (local) fractional derivative.
//!
//! For `0 < mu <= 1` and `t > 0` the operator is defined by the limit
//!
//! ```text
//! D^mu[f](t) = lim_{eps -> 0} (f(t + eps * t^(1 - mu)) - f(t)) / eps
//! ```
//!
//! and for differentiable `f` it equals `t^(1 - mu) * f'(t)`. Applying it
//! twice gives `D^mu D^mu f = t^(2 - 2mu) f'' + (1 - mu) t^(1 - 2mu) f'`,
//! which is how fractional equations are turned into classical ODEs.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step schedule used by [`conf_deriv_limit`].
pub const LIMIT_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Relative disagreement between successive extrapolants that is tolerated.
pub const LIMIT_TOLERANCE: f64 = 1e-6;

/// Point used in place of `t = 0` for the right-limit extension.
pub const RIGHT_LIMIT_T: f64 = 1e-8;

/// Fractional order `mu`, an exact rational in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FracOrder(Rational64);

impl FracOrder {
    pub fn new(mu: Rational64) -> Result<Self> {
        if mu <= Rational64::zero() || mu > Rational64::one() {
            return Err(Error::InvalidOrder(mu.to_string()));
        }
        Ok(Self(mu))
    }

    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidOrder(format!("{num}/{den}")));
        }
        Self::new(Rational64::new(num, den))
    }

    /// The classical order `mu = 1`.
    pub fn one() -> Self {
        Self(Rational64::one())
    }

    pub fn ratio(&self) -> Rational64 {
        self.0
    }

    pub fn value(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_classical(&self) -> bool {
        self.0.is_one()
    }
}

impl fmt::Display for FracOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parses `"1/2"`, `"3"`, or a terminating decimal such as `"0.75"` into an
/// exact rational. Exponents (`1e-3`) and non-finite values are rejected.
pub fn parse_rational(text: &str) -> Result<Rational64> {
    let s = text.trim();
    let bad = || Error::NonRational(text.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| bad())?;
        let den: i64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(num, den));
    }
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac_part.len() > 17 {
        return Err(bad());
    }
    let den = 10i64.checked_pow(frac_part.len() as u32).ok_or_else(bad)?;
    let int_val: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| bad())?
    };
    let frac_val: i64 = if frac_part.is_empty() {
        0
    } else {
        frac_part.parse().map_err(|_| bad())?
    };
    let num = int_val
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(bad)?;
    let r = Rational64::new(num, den);
    Ok(if negative { -r } else { r })
}

impl FromStr for FracOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(parse_rational(s)?)
    }
}

impl Serialize for FracOrder {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_ratio(&self.0))
    }
}

impl<'de> Deserialize<'de> for FracOrder {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Always renders as `num/den`, including integers (`1/1`).
pub fn format_ratio(r: &Rational64) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Extrapolated limit value together with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEstimate {
    pub value: f64,
    pub error: f64,
}

/// Numeric conformable derivative from the limit definition.
///
/// Difference quotients are taken at the steps in [`LIMIT_STEPS`] (scaled by
/// `t^(1-mu)`); adjacent pairs are combined by Richardson extrapolation and
/// the two extrapolants must agree to [`LIMIT_TOLERANCE`]. Quotients are
/// symmetric when `t - eps t^(1-mu)` stays positive and one-sided otherwise.
pub fn conf_deriv_limit<F>(f: F, t: f64, mu: FracOrder) -> Result<LimitEstimate>
where
    F: Fn(f64) -> f64,
{
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("conformable derivative needs t > 0, got {t}")));
    }
    let scale = t.powf(1.0 - mu.value());
    let symmetric = t - LIMIT_STEPS[0] * scale > 0.0;
    let f_t = f(t);
    let quotient = |eps: f64| {
        let h = eps * scale;
        if symmetric {
            (f(t + h) - f(t - h)) / (2.0 * eps)
        } else {
            (f(t + h) - f_t) / eps
        }
    };
    let q: Vec<f64> = LIMIT_STEPS.iter().map(|&eps| quotient(eps)).collect();
    // leading error term is eps^2 (symmetric) or eps (one-sided); steps shrink by 10
    let factor = if symmetric { 100.0 } else { 10.0 };
    let coarse = (factor * q[1] - q[0]) / (factor - 1.0);
    let fine = (factor * q[2] - q[1]) / (factor - 1.0);
    if !coarse.is_finite() || !fine.is_finite() {
        return Err(Error::NonConvergence {
            value: fine,
            error: f64::INFINITY,
        });
    }
    let error = (coarse - fine).abs();
    let magnitude = coarse.abs().max(fine.abs()).max(f64::MIN_POSITIVE);
    if error > LIMIT_TOLERANCE * magnitude && error > 1e-12 {
        return Err(Error::NonConvergence { value: coarse, error });
    }
    Ok(LimitEstimate { value: coarse, error })
}

/// Right-limit value `f^(mu)(0)`, approximated at `t = RIGHT_LIMIT_T`.
pub fn conf_deriv_at_origin<F>(f: F, mu: FracOrder) -> Result<LimitEstimate>
where
    F: Fn(f64) -> f64,
{
    conf_deriv_limit(f, RIGHT_LIMIT_T, mu)
}

/// Key property: `D^mu[f](t) = t^(1-mu) f'(t)`.
pub fn conf_deriv_key<F>(fprime: F, t: f64, mu: FracOrder) -> f64
where
    F: Fn(f64) -> f64,
{
    if mu.is_classical() {
        return fprime(t);
    }
    t.powf(1.0 - mu.value()) * fprime(t)
}

/// A coefficient of the form `coeff * z^power` with an exact exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PowerCoeff {
    pub coeff: Rational64,
    pub power: Rational64,
}

impl PowerCoeff {
    pub fn eval(&self, z: f64) -> f64 {
        let c = self.coeff.to_f64().unwrap_or(f64::NAN);
        if self.coeff.is_zero() {
            return 0.0;
        }
        if self.power.is_integer() {
            c * z.powi(self.power.to_integer() as i32)
        } else {
            c * z.powf(self.power.to_f64().unwrap_or(f64::NAN))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    pub fn abs_coeff(&self) -> Rational64 {
        self.coeff.abs()
    }
}

/// Coefficients `(a, b)` with `D^mu D^mu psi = a(z) psi'' + b(z) psi'`:
/// `a = z^(2-2mu)` and `b = (1-mu) z^(1-2mu)`.
pub fn conf_deriv2_coefficients(mu: FracOrder) -> (PowerCoeff, PowerCoeff) {
    let one = Rational64::one();
    let two = Rational64::from_integer(2);
    let m = mu.ratio();
    (
        PowerCoeff {
            coeff: one,
            power: two - two * m,
        },
        PowerCoeff {
            coeff: one - m,
            power: one - two * m,
        },
    )
}

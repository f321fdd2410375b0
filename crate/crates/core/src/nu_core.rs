//! Conformable Nikiforov-Uvarov engine for the coefficient family
//!
//! ```text
//! sigma_f  = z (S0 - q w)
//! tau~_f   = c (S0 - q w)              (c = 2 - mu here)
//! sigma~   = A w^2 + B w + C           (w = z^mu)
//! ```
//!
//! `k` is taken as `k_mu z^(mu-1)`, chosen so the radicand under the square
//! root of `pi_f` is a perfect square in `w`; the branch of `pi_f` whose
//! `tau_f = tau~_f + 2 pi_f` has a negative `w` slope is kept, and the
//! quantization condition `lambda = lambda_n` is solved for the radical
//! `R = sqrt((mu-1)^2 + 4 eps^2)`.

use num_rational::Rational64;
use serde::Serialize;

use crate::conformable::FracOrder;
use crate::error::{Error, Result};
use crate::mu_algebra::{Exponent, MuTermSum, Shape};

/// Coefficient triple of the basic equation in the (gamma, beta, eps) parametrization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuProblem {
    pub s0: f64,
    pub q: f64,
    pub mu: FracOrder,
    pub gamma_sq: f64,
    pub beta_sq: f64,
    /// Signed radical `R`; `eps^2 = (R^2 - (mu-1)^2) / 4`.
    pub radical: f64,
    /// Factor multiplying `(S0 - q w)` in `tau~_f`.
    pub tau_scale: f64,
}

impl NuProblem {
    /// Builds the problem from `eps^2`, taking `R = +sqrt((mu-1)^2 + 4 eps^2)`.
    pub fn new(s0: f64, q: f64, mu: FracOrder, gamma_sq: f64, beta_sq: f64, eps_sq: f64) -> Result<Self> {
        let m1 = mu.value() - 1.0;
        let radicand = m1 * m1 + 4.0 * eps_sq;
        if !(radicand >= 0.0) {
            return Err(Error::NegativeRadicand {
                first: mu.value().powi(2) * q * q + 4.0 * gamma_sq,
                second: radicand,
            });
        }
        Self::with_radical(s0, q, mu, gamma_sq, beta_sq, radicand.sqrt())
    }

    /// Builds the problem from a signed radical `R` (negative values select the
    /// other sign of the square root).
    pub fn with_radical(s0: f64, q: f64, mu: FracOrder, gamma_sq: f64, beta_sq: f64, radical: f64) -> Result<Self> {
        if !(s0 != 0.0 && s0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "S0 must be finite and nonzero, got {s0}"
            )));
        }
        if !(q != 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "q must be finite and nonzero, got {q}"
            )));
        }
        if !(gamma_sq.is_finite() && beta_sq.is_finite() && radical.is_finite()) {
            return Err(Error::InvalidParameter("non-finite gamma^2, beta^2 or R".into()));
        }
        Ok(Self {
            s0,
            q,
            mu,
            gamma_sq,
            beta_sq,
            radical,
            tau_scale: 2.0 - mu.value(),
        })
    }

    pub fn eps_sq(&self) -> f64 {
        let m1 = self.mu.value() - 1.0;
        (self.radical * self.radical - m1 * m1) / 4.0
    }

    /// `Q = sqrt(mu^2 q^2 + 4 gamma^2)`.
    pub fn radical_q(&self) -> Result<f64> {
        let v = self.mu.value().powi(2) * self.q * self.q + 4.0 * self.gamma_sq;
        if v < 0.0 {
            return Err(Error::NegativeRadicand {
                first: v,
                second: self.radical * self.radical,
            });
        }
        Ok(v.sqrt())
    }

    /// `(A, B, C)` of `sigma~ = A w^2 + B w + C`.
    pub fn sigma_tilde(&self) -> (f64, f64, f64) {
        let (g, b, e, q, s0) = (self.gamma_sq, self.beta_sq, self.eps_sq(), self.q, self.s0);
        (-(g + q * b + q * q * e), s0 * (b + 2.0 * q * e), -s0 * s0 * e)
    }

    /// `(sigma_f' - tau~_f) / 2` as `(constant, w coefficient)`.
    fn half_difference(&self) -> (f64, f64) {
        let mu = self.mu.value();
        let c0 = (self.s0 - self.tau_scale * self.s0) / 2.0;
        let c1 = (-self.q * (1.0 + mu) + self.tau_scale * self.q) / 2.0;
        (c0, c1)
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.mu, self.s0, self.q)
    }
}

/// Coefficients `(a2, a1, a0)` of `w^2, w, 1` inside the square root of `pi_f`.
pub fn radicand_quadratic(p: &NuProblem, k_mu: f64) -> (f64, f64, f64) {
    let (c0, c1) = p.half_difference();
    let (a, b, c) = p.sigma_tilde();
    (c1 * c1 - a - k_mu * p.q, 2.0 * c0 * c1 - b + k_mu * p.s0, c0 * c0 - c)
}

pub fn discriminant((a2, a1, a0): (f64, f64, f64)) -> f64 {
    a1 * a1 - 4.0 * a2 * a0
}

/// Scale for relative discriminant checks: square of the largest coefficient.
pub fn discriminant_scale((a2, a1, a0): (f64, f64, f64)) -> f64 {
    let m = a2.abs().max(a1.abs()).max(a0.abs());
    m * m
}

/// Both roots `(k1, k2)`, `k1 >= k2`, of `discriminant(radicand_quadratic(p, k)) = 0`.
///
/// In closed form `k = (2 beta^2 + mu(mu-1) q +- Q |R|) / 2`.
pub fn solve_k(p: &NuProblem) -> Result<(f64, f64)> {
    let first = p.mu.value().powi(2) * p.q * p.q + 4.0 * p.gamma_sq;
    let second = p.radical * p.radical;
    if first < 0.0 {
        return Err(Error::NegativeRadicand { first, second });
    }
    // discriminant is quadratic in k: (a1 + S0 k)^2 - 4 (a2 - q k) a0
    let (a2, a1, a0) = radicand_quadratic(p, 0.0);
    let qa = p.s0 * p.s0;
    let qb = 2.0 * a1 * p.s0 + 4.0 * p.q * a0;
    let qc = a1 * a1 - 4.0 * a2 * a0;
    let disc = qb * qb - 4.0 * qa * qc;
    // disc = S0^4 (mu^2 q^2 + 4 gamma^2) R^2, nonnegative up to rounding
    let root = disc.max(0.0).sqrt();
    let big = -(qb + qb.signum() * root) / 2.0;
    let (x1, x2) = if big == 0.0 { (0.0, 0.0) } else { (big / qa, qc / big) };
    Ok((x1.max(x2), x1.min(x2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KRoot {
    Plus,
    Minus,
}

/// One of the four `(k root, sign)` combinations for `pi_f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Branch {
    pub k_root: KRoot,
    pub sign_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchCandidate {
    pub branch: Branch,
    pub k_mu: f64,
    pub pi_f: (f64, f64),
    pub tau_f: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuSolution {
    pub k_mu: f64,
    /// `pi_f = pi_f.0 + pi_f.1 * w`.
    pub pi_f: (f64, f64),
    /// `tau_f = tau_f.0 + tau_f.1 * w`.
    pub tau_f: (f64, f64),
    /// `lambda = lambda_coeff * z^(mu-1)`.
    pub lambda_coeff: f64,
    pub branch: Branch,
    /// Other branches that also had a negative `tau_f` slope.
    pub alternatives: Vec<BranchCandidate>,
}

/// All four `pi_f` branches built from the perfect-square radicand.
pub fn branch_candidates(p: &NuProblem) -> Result<Vec<BranchCandidate>> {
    let (k1, k2) = solve_k(p)?;
    let (c0, c1) = p.half_difference();
    let mut out = Vec::with_capacity(4);
    for (k_root, k) in [(KRoot::Minus, k2), (KRoot::Plus, k1)] {
        let (a2, a1, a0) = radicand_quadratic(p, k);
        // perfect square (u + v w)^2 with 2uv = a1
        let u = a0.max(0.0).sqrt();
        let v = if a1 < 0.0 {
            -a2.max(0.0).sqrt()
        } else {
            a2.max(0.0).sqrt()
        };
        for sign_positive in [true, false] {
            let s = if sign_positive { 1.0 } else { -1.0 };
            let pi_f = (c0 + s * u, c1 + s * v);
            let tau_f = (p.tau_scale * p.s0 + 2.0 * pi_f.0, -p.tau_scale * p.q + 2.0 * pi_f.1);
            out.push(BranchCandidate {
                branch: Branch { k_root, sign_positive },
                k_mu: k,
                pi_f,
                tau_f,
            });
        }
    }
    Ok(out)
}

/// `pi_f` in the displayed closed form,
/// `(S0 (mu - 1 + R) - (q (2mu - 1 + R) + Q) w) / 2`.
pub fn closed_form_pi(p: &NuProblem) -> Result<(f64, f64)> {
    let mu = p.mu.value();
    let (r, q_rad) = (p.radical, p.radical_q()?);
    Ok((0.5 * p.s0 * (mu - 1.0 + r), -0.5 * (p.q * (2.0 * mu - 1.0 + r) + q_rad)))
}

/// Picks the physical branch: negative `tau_f` slope; among several, the one
/// closest to the displayed closed form.
pub fn build_solution(p: &NuProblem) -> Result<NuSolution> {
    let target = closed_form_pi(p)?;
    let mut physical: Vec<BranchCandidate> = branch_candidates(p)?.into_iter().filter(|c| c.tau_f.1 < 0.0).collect();
    if physical.is_empty() {
        return Err(Error::NoPhysicalBranch);
    }
    let distance = |c: &BranchCandidate| (c.pi_f.0 - target.0).abs() + (c.pi_f.1 - target.1).abs();
    physical.sort_by(|a, b| distance(a).total_cmp(&distance(b)));
    let chosen = physical.remove(0);
    let mu = p.mu.value();
    Ok(NuSolution {
        k_mu: chosen.k_mu,
        pi_f: chosen.pi_f,
        tau_f: chosen.tau_f,
        lambda_coeff: chosen.k_mu + mu * chosen.pi_f.1,
        branch: chosen.branch,
        alternatives: physical,
    })
}

/// Coefficient of `z^(mu-1)` in `lambda_n = -n tau_f' - n(n-1)/2 sigma_f''`.
pub fn lambda_n_coeff(p: &NuProblem, sol: &NuSolution, n: u32) -> f64 {
    let mu = p.mu.value();
    let n = n as f64;
    -n * sol.tau_f.1 * mu + 0.5 * n * (n - 1.0) * p.q * (1.0 + mu) * mu
}

/// `lambda(R)` coefficient on the displayed branch:
/// `(2 beta^2 - mu^2 q - Q R - mu Q - mu q R) / 2`.
pub fn lambda_closed(p: &NuProblem, radical: f64) -> Result<f64> {
    let mu = p.mu.value();
    let q_rad = p.radical_q()?;
    Ok(0.5 * (2.0 * p.beta_sq - mu * mu * p.q - q_rad * radical - mu * q_rad - mu * p.q * radical))
}

/// `lambda_n(R)` coefficient: `n mu (q (mu + 1 + R) + Q + (n-1)(mu+1) q / 2)`.
pub fn lambda_n_closed(p: &NuProblem, radical: f64, n: u32) -> Result<f64> {
    let mu = p.mu.value();
    let q_rad = p.radical_q()?;
    let n = n as f64;
    Ok(n * mu * (p.q * (mu + 1.0 + radical) + q_rad + (n - 1.0) * (mu + 1.0) * p.q / 2.0))
}

/// Signed root of the affine equation `lambda(R) = lambda_n(R)`.
pub fn quantization_root(p: &NuProblem, n: u32) -> Result<f64> {
    let mu = p.mu.value();
    let q_rad = p.radical_q()?;
    let nf = n as f64;
    let denom = q_rad + mu * p.q + 2.0 * nf * mu * p.q;
    if !(denom > 0.0) {
        return Err(Error::DegenerateQuantization(denom));
    }
    let numer = 2.0 * p.beta_sq
        - mu * mu * p.q
        - mu * q_rad
        - 2.0 * nf * mu * (p.q * (mu + 1.0) + q_rad + (nf - 1.0) * (mu + 1.0) * p.q / 2.0);
    Ok(numer / denom)
}

/// Like [`quantization_root`], but a negative root is an error.
pub fn quantization_radical(p: &NuProblem, n: u32) -> Result<f64> {
    let r = quantization_root(p, n)?;
    if r < 0.0 {
        return Err(Error::NegativeRadical(r));
    }
    Ok(r)
}

/// `sigma_f = S0 z - q z^(1+mu)` as a term sum.
pub fn sigma_f_sum(p: &NuProblem) -> MuTermSum {
    let mu = p.mu.ratio();
    let one = Rational64::from_integer(1);
    MuTermSum::zero(p.shape())
        .add_term(p.s0, Exponent::integer(1), Exponent::zero())
        .and_then(|s| s.add_term(-p.q, Exponent::rational(one + mu), Exponent::zero()))
        .expect("finite coefficients")
}

/// `c0 + c1 z^mu` as a term sum.
pub fn linear_in_w_sum(p: &NuProblem, (c0, c1): (f64, f64)) -> Result<MuTermSum> {
    MuTermSum::zero(p.shape())
        .add_term(c0, Exponent::zero(), Exponent::zero())?
        .add_term(c1, Exponent::rational(p.mu.ratio()), Exponent::zero())
}

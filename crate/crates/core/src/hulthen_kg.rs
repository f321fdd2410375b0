//! Klein-Gordon bound states in the generalized Hulthen scalar potential
//! `S(x) = -S0 e^(-alpha x) / (1 - q e^(-alpha x))`, in natural units.

use num_rational::Rational64;
use serde::Serialize;

use crate::conformable::FracOrder;
use crate::error::{Error, Result};
use crate::mu_algebra::{Exponent, MuTermSum, Radicals, Shape};
use crate::nu_core::{self, NuProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HulthenParams {
    pub m: f64,
    pub s0: f64,
    pub alpha: f64,
    pub q: f64,
    pub mu: FracOrder,
}

impl HulthenParams {
    pub fn new(m: f64, s0: f64, alpha: f64, q: f64, mu: FracOrder) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
        }
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::InvalidParameter(format!("S0 must be positive, got {s0}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must be finite, got {q}")));
        }
        Ok(Self { m, s0, alpha, q, mu })
    }

    /// Compton units: `m = alpha`.
    pub fn compton(s0: f64, alpha: f64, q: f64, mu: FracOrder) -> Result<Self> {
        Self::new(alpha, s0, alpha, q, mu)
    }

    pub fn gamma_sq(&self) -> f64 {
        self.s0 * self.s0 / (self.alpha * self.alpha)
    }

    pub fn beta_sq(&self) -> f64 {
        2.0 * self.m * self.s0 / (self.alpha * self.alpha)
    }

    /// Upper end of the `z` interval where `S0 - q z^mu > 0` and `z <= S0`.
    pub fn z_max(&self) -> f64 {
        if self.q > 0.0 {
            self.s0.min((self.s0 / self.q).powf(1.0 / self.mu.value()))
        } else {
            self.s0
        }
    }

    fn require_deformed(&self) -> Result<()> {
        if self.q == 0.0 {
            return Err(Error::InvalidParameter(
                "q = 0 makes the exponent 1/(mu q) diverge; the spectrum formulas need q != 0".into(),
            ));
        }
        Ok(())
    }

    /// `Q = sqrt(mu^2 q^2 + 4 gamma^2)`.
    pub fn radical_q(&self) -> f64 {
        (self.mu.value().powi(2) * self.q * self.q + 4.0 * self.gamma_sq()).sqrt()
    }

    /// NU problem for a trial signed radical `R`.
    pub fn nu_problem(&self, radical: f64) -> Result<NuProblem> {
        self.require_deformed()?;
        NuProblem::with_radical(self.s0, self.q, self.mu, self.gamma_sq(), self.beta_sq(), radical)
    }
}

/// `S(x) = -S0 e^(-alpha x) / (1 - q e^(-alpha x))`.
pub fn potential(x: f64, p: &HulthenParams) -> Result<f64> {
    let e = (-p.alpha * x).exp();
    let denom = 1.0 - p.q * e;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Pole(p.q.ln() / p.alpha));
    }
    Ok(-p.s0 * e / denom)
}

/// `E_eff = (E^2 - m^2) / 2m`, `U_eff = S^2 / 2m + S`.
pub fn effective_quantities(energy: f64, x: f64, p: &HulthenParams) -> Result<(f64, f64)> {
    let s = potential(x, p)?;
    Ok(((energy * energy - p.m * p.m) / (2.0 * p.m), s * s / (2.0 * p.m) + s))
}

/// `(gamma^2, beta^2, eps^2)`.
pub fn map_parameters(p: &HulthenParams, energy: f64) -> (f64, f64, f64) {
    let a2 = p.alpha * p.alpha;
    (p.gamma_sq(), p.beta_sq(), (p.m * p.m - energy * energy) / a2)
}

pub fn x_to_z(x: f64, p: &HulthenParams) -> f64 {
    p.s0 * (-p.alpha * x).exp()
}

pub fn z_to_x(z: f64, p: &HulthenParams) -> Result<f64> {
    if !(z > 0.0 && z <= p.s0) {
        return Err(Error::Domain(format!("z = {z} outside (0, S0 = {}]", p.s0)));
    }
    Ok(-(z / p.s0).ln() / p.alpha)
}

/// Unchecked inverse map, valid for any `z > 0` (negative `x` when `z > S0`).
pub fn z_to_x_extended(z: f64, p: &HulthenParams) -> f64 {
    -(z / p.s0).ln() / p.alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PotentialKind {
    Exponential,
    StandardHulthen,
    WoodsSaxon,
    Deformed,
}

pub fn special_case(q: f64) -> PotentialKind {
    if q == 0.0 {
        PotentialKind::Exponential
    } else if q == 1.0 {
        PotentialKind::StandardHulthen
    } else if q == -1.0 {
        PotentialKind::WoodsSaxon
    } else {
        PotentialKind::Deformed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Validity {
    pub real_energy: bool,
    /// The quantization root `R` is nonnegative, i.e. it is the principal
    /// square root of `(mu-1)^2 + 4 eps^2`.
    pub nonneg_radical: bool,
    /// `eps^2 > 0`, i.e. `E < m`.
    pub bound: bool,
}

impl Validity {
    /// Real energy with a principal radical.
    pub fn is_valid(&self) -> bool {
        self.real_energy && self.nonneg_radical
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenstate {
    pub n: u32,
    pub energy: f64,
    pub eps_sq: f64,
    /// `sqrt((mu-1)^2 + 4 eps^2)`, always nonnegative.
    pub radical_r: f64,
    /// Signed root of the quantization condition; equals `radical_r` up to sign.
    pub quantization_root: f64,
    pub radical_q: f64,
    pub valid: Validity,
}

/// Diagnostic payload for states without a real energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvalidState {
    pub n: u32,
    pub energy_sq: f64,
    pub quantization_root: f64,
    pub radical_q: f64,
}

/// Signed quantization ratio from the displayed energy formula:
///
/// ```text
/// X = (4 m S0 - mu^2 alpha^2 q - mu alpha W (1 + 2n) - mu (mu+1) n (n+1) q alpha^2)
///     / (mu alpha^2 q (2n + 1) + alpha W),       W = sqrt(mu^2 alpha^2 q^2 + 4 S0^2)
/// ```
///
/// and `E^2 - m^2 = alpha^2 / 4 ((mu - 1)^2 - X^2)`.
pub fn spectrum_ratio(n: u32, p: &HulthenParams) -> Result<f64> {
    p.require_deformed()?;
    let (mu, a, q, s0, m) = (p.mu.value(), p.alpha, p.q, p.s0, p.m);
    let nf = n as f64;
    let w = (mu * mu * a * a * q * q + 4.0 * s0 * s0).sqrt();
    let numer = 4.0 * m * s0
        - mu * mu * a * a * q
        - mu * a * w * (1.0 + 2.0 * nf)
        - mu * (mu + 1.0) * nf * (nf + 1.0) * q * a * a;
    let denom = mu * a * a * q * (2.0 * nf + 1.0) + a * w;
    if denom == 0.0 {
        return Err(Error::DegenerateQuantization(denom));
    }
    Ok(numer / denom)
}

fn state_from_root(n: u32, p: &HulthenParams, root: f64) -> std::result::Result<Eigenstate, InvalidState> {
    let mu1 = p.mu.value() - 1.0;
    let energy_sq = p.m * p.m + p.alpha * p.alpha / 4.0 * (mu1 * mu1 - root * root);
    let radical_q = p.radical_q();
    if !(energy_sq >= 0.0) {
        return Err(InvalidState {
            n,
            energy_sq,
            quantization_root: root,
            radical_q,
        });
    }
    let eps_sq = (root * root - mu1 * mu1) / 4.0;
    Ok(Eigenstate {
        n,
        energy: energy_sq.sqrt(),
        eps_sq,
        radical_r: root.abs(),
        quantization_root: root,
        radical_q,
        valid: Validity {
            real_energy: true,
            nonneg_radical: root >= 0.0,
            bound: eps_sq > 0.0,
        },
    })
}

/// Energy of level `n` from the closed-form spectrum (positive branch).
///
/// States whose quantization root is negative are returned with
/// `valid.nonneg_radical = false`; an imaginary energy is an error.
pub fn energy(n: u32, p: &HulthenParams) -> Result<Eigenstate> {
    let root = spectrum_ratio(n, p)?;
    state_from_root(n, p, root).map_err(|s| Error::ImaginaryEnergy(s.energy_sq))
}

/// Like [`energy`] but returns the diagnostic payload on failure.
pub fn energy_or_diagnostic(n: u32, p: &HulthenParams) -> Result<std::result::Result<Eigenstate, InvalidState>> {
    let root = spectrum_ratio(n, p)?;
    Ok(state_from_root(n, p, root))
}

/// Energy of level `n` through the NU engine: solve `lambda = lambda_n` for `R`.
pub fn energy_via_nu(n: u32, p: &HulthenParams) -> Result<Eigenstate> {
    let problem = p.nu_problem(0.0)?;
    let root = nu_core::quantization_root(&problem, n)?;
    state_from_root(n, p, root).map_err(|s| Error::ImaginaryEnergy(s.energy_sq))
}

/// Negative-energy partner `-E_n`.
pub fn negative_energy(state: &Eigenstate) -> f64 {
    -state.energy
}

/// Rodrigues-formula wavefunction with `B_n = 1`:
///
/// ```text
/// psi = z^((mu-1+R)/2) B^((mu q + Q)/(2 mu q)) z^(-R) B^(-Q/(mu q))
///       d^n/dz^n [ z^(n+R) B^(n + Q/(mu q)) ],        B = S0 - q z^mu
/// ```
///
/// `R` is the state's signed quantization root.
pub fn wavefunction(n: u32, p: &HulthenParams, state: &Eigenstate) -> Result<MuTermSum> {
    p.require_deformed()?;
    if state.n != n {
        return Err(Error::InvalidParameter(format!(
            "state is for n = {}, requested n = {n}",
            state.n
        )));
    }
    let q_ratio = state.radical_q / (p.mu.value() * p.q);
    let radicals = Radicals {
        r: state.quantization_root,
        q_ratio,
    };
    if !radicals.r.is_finite() || !radicals.q_ratio.is_finite() {
        return Err(Error::IrrationalExponent(format!(
            "R = {}, Q/(mu q) = {}",
            radicals.r, radicals.q_ratio
        )));
    }
    let shape = Shape::new(p.mu, p.s0, p.q).with_radicals(radicals);
    let zero = Rational64::from_integer(0);
    let one = Rational64::from_integer(1);
    let half = Rational64::new(1, 2);
    let ni = n as i64;
    let generator = MuTermSum::zero(shape).add_term(
        1.0,
        Exponent::new(Rational64::from_integer(ni), one, zero),
        Exponent::new(Rational64::from_integer(ni), zero, one),
    )?;
    let mu = p.mu.ratio();
    // phi * z^(-R) B^(-Q/(mu q)) = z^((mu-1)/2 - R/2) B^(1/2 - Q/(2 mu q))
    generator.nth_derivative(n as usize).mul_monomial(
        1.0,
        Exponent::new((mu - one) / Rational64::from_integer(2), -half, zero),
        Exponent::new(half, zero, -half),
    )
}

/// `phi(z) = z^((mu-1+R)/2) B^((mu q + Q)/(2 mu q))`, evaluated directly.
pub fn phi(z: f64, p: &HulthenParams, state: &Eigenstate) -> f64 {
    let mu = p.mu.value();
    let b = p.s0 - p.q * z.powf(mu);
    z.powf(0.5 * (mu - 1.0 + state.quantization_root)) * b.powf((mu * p.q + state.radical_q) / (2.0 * mu * p.q))
}

/// `B_n` with `int_0^inf |psi(x)|^2 dx = 1`, using `dx = -dz / (alpha z)`.
pub fn normalization(p: &HulthenParams, psi: &MuTermSum, tol: f64) -> Result<f64> {
    let z_top = p.z_max();
    let t_top = z_top.ln();
    // psi^2 ~ z^(mu - 1 + R) near z = 0: integrable in ln z only if that exponent is positive
    let lowest = psi
        .terms()
        .map(|t| t.z_power.value(psi.shape().radicals.as_ref()))
        .fold(f64::INFINITY, f64::min);
    let decay = 2.0 * lowest;
    if !(decay > 0.0) {
        return Err(Error::NotNormalizable(format!(
            "|psi|^2 ~ z^{decay} does not vanish as z -> 0"
        )));
    }
    let span = 60.0 / decay;
    let integrand = |t: f64| -> f64 {
        let z = t.exp();
        psi.evaluate(z).map(|v| v * v / p.alpha).unwrap_or(f64::NAN)
    };
    let t_lo = t_top - span;
    // endpoint z_top may sit on a zero of B; pull in by a relative hair
    let t_hi = t_top + (1.0 - 1e-12f64).ln();
    let integral = adaptive_simpson(&integrand, t_lo, t_hi, tol, 50)?;
    if !(integral > 0.0) || !integral.is_finite() {
        return Err(Error::NotNormalizable(format!("norm integral = {integral}")));
    }
    Ok(1.0 / integral.sqrt())
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        if !flm.is_finite() || !frm.is_finite() {
            return Err(Error::Domain(format!("integrand not finite near {m}")));
        }
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    if !fa.is_finite() || !fm.is_finite() || !fb.is_finite() {
        return Err(Error::Domain("integrand not finite at the interval ends".into()));
    }
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

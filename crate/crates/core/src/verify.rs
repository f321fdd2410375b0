//! Independent numeric checks of the closed-form spectrum and wavefunctions.
//!
//! * [`ode_residual`] plugs `(E, psi)` into the second-order equation in `z`.
//! * [`quantize_numeric`] finds the root of `lambda(R) - lambda_n(R)` by
//!   bracketing and bisection through the NU engine.
//! * [`fd_eigensolve_mu1`] discretizes the `mu = 1` equation in `x` and
//!   computes the lowest eigenvalues of the tridiagonal matrix.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hulthen_kg::{self, Eigenstate, HulthenParams};
use crate::mu_algebra::MuTermSum;
use crate::nu_core;

pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
pub const RESIDUAL_MARGIN: f64 = 1e-4;
pub const QUANTIZE_TOLERANCE: f64 = 1e-12;
pub const FD_TOLERANCE: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub grid: Vec<f64>,
    pub max_rel_residual: f64,
    /// Largest additive-term magnitude seen on the grid.
    pub scale: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// True when every term vanished identically (e.g. the zero function).
    pub degenerate: bool,
}

/// `n` log-spaced points in `(0, z_max)`, pulled in from both ends by
/// [`RESIDUAL_MARGIN`] relative.
pub fn residual_grid(z_max: f64, n: usize) -> Vec<f64> {
    let lo = (z_max * RESIDUAL_MARGIN).ln();
    let hi = (z_max * (1.0 - RESIDUAL_MARGIN)).ln();
    match n {
        0 => Vec::new(),
        1 => vec![hi.exp()],
        _ => (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
            .collect(),
    }
}

/// Residual of `psi'' + (2 - mu)/z psi' + sigma~ / (z (S0 - q z^mu))^2 psi`
/// with `eps^2` taken from `state.energy`.
pub fn ode_residual(
    psi: &MuTermSum,
    state: &Eigenstate,
    p: &HulthenParams,
    grid_size: usize,
) -> Result<ResidualReport> {
    ode_residual_at_energy(psi, state.energy, p, grid_size, RESIDUAL_TOLERANCE)
}

pub fn ode_residual_at_energy(
    psi: &MuTermSum,
    energy: f64,
    p: &HulthenParams,
    grid_size: usize,
    tolerance: f64,
) -> Result<ResidualReport> {
    let grid = residual_grid(p.z_max(), grid_size);
    ode_residual_on_grid(psi, energy, p, grid, tolerance)
}

pub fn ode_residual_on_grid(
    psi: &MuTermSum,
    energy: f64,
    p: &HulthenParams,
    grid: Vec<f64>,
    tolerance: f64,
) -> Result<ResidualReport> {
    let z_max = p.z_max();
    let (gamma_sq, beta_sq, eps_sq) = hulthen_kg::map_parameters(p, energy);
    let (mu, q, s0) = (p.mu.value(), p.q, p.s0);
    let d1 = psi.differentiate();
    let d2 = d1.differentiate();
    let mut max_rel = 0.0f64;
    let mut scale = 0.0f64;
    for &z in &grid {
        if !(z > 0.0 && z < z_max) {
            return Err(Error::Domain(format!("grid point {z} outside (0, {z_max})")));
        }
        let w = z.powf(mu);
        let base = s0 - q * w;
        let sigma_tilde = -(gamma_sq + q * beta_sq + q * q * eps_sq) * w * w + s0 * (beta_sq + 2.0 * q * eps_sq) * w
            - s0 * s0 * eps_sq;
        let t1 = d2.evaluate(z)?;
        let t2 = (2.0 - mu) / z * d1.evaluate(z)?;
        let t3 = sigma_tilde / (z * base).powi(2) * psi.evaluate(z)?;
        let local = t1.abs().max(t2.abs()).max(t3.abs());
        scale = scale.max(local);
        if local > 0.0 {
            max_rel = max_rel.max((t1 + t2 + t3).abs() / local);
        }
    }
    let degenerate = scale == 0.0;
    Ok(ResidualReport {
        grid,
        max_rel_residual: max_rel,
        scale,
        tolerance,
        pass: max_rel <= tolerance,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizeResult {
    /// Signed root `R` of `lambda(R) = lambda_n(R)`.
    pub radical: f64,
    pub eps_sq: f64,
    pub energy: f64,
    pub iterations: u32,
}

/// `lambda(R) - lambda_n(R)` through the NU engine (k roots, branch choice).
pub fn quantization_mismatch(n: u32, p: &HulthenParams, radical: f64) -> Result<f64> {
    let problem = p.nu_problem(radical)?;
    let sol = nu_core::build_solution(&problem)?;
    Ok(sol.lambda_coeff - nu_core::lambda_n_coeff(&problem, &sol, n))
}

/// Numeric quantization: scan `[R_lo, R_hi]`, `R_hi = max(10, 4 beta^2 / Q)`,
/// for a sign change of [`quantization_mismatch`] and bisect it to
/// [`QUANTIZE_TOLERANCE`] in `R`.
///
/// `R` is signed. `R_lo` is `-R_hi` or the point below which the displayed
/// branch loses its negative `tau_f` slope, `-(mu + 1) - Q/q`, whichever is
/// larger.
pub fn quantize_numeric(n: u32, p: &HulthenParams) -> Result<QuantizeResult> {
    let q_rad = p.radical_q();
    let r_hi = 10f64.max(4.0 * p.beta_sq() / q_rad);
    let mut r_lo = -r_hi;
    if p.q > 0.0 {
        let edge = -(p.mu.value() + 1.0) - q_rad / p.q;
        r_lo = r_lo.max(edge + 1e-9 * edge.abs().max(1.0));
    }
    let f = |r: f64| quantization_mismatch(n, p, r);
    let segments = 64;
    let step = (r_hi - r_lo) / segments as f64;
    if !(step > 0.0) {
        return Err(Error::NoBracket {
            lo: r_lo,
            hi: r_hi,
            f_lo: f64::NAN,
            f_hi: f64::NAN,
        });
    }
    let points: Vec<(f64, Option<f64>)> = (0..=segments)
        .map(|i| {
            let r = r_lo + step * i as f64;
            (r, f(r).ok())
        })
        .collect();
    for pair in points.windows(2) {
        let ((mut a, fa), (mut b, fb)) = match (pair[0], pair[1]) {
            ((a, Some(fa)), (b, Some(fb))) => ((a, fa), (b, fb)),
            _ => continue,
        };
        if fa == 0.0 {
            return finish(p, a, 0);
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        let mut fa_cur = fa;
        let mut iterations = 0;
        while (b - a) > QUANTIZE_TOLERANCE && iterations < 200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = f(mid)?;
            iterations += 1;
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fm.signum() == fa_cur.signum() {
                a = mid;
                fa_cur = fm;
            } else {
                b = mid;
            }
        }
        let root = 0.5 * (a + b);
        // a jump across zero (branch switch) is not a root
        let scale = fa.abs().max(fb.abs());
        if f(root)?.abs() <= 1e-6 * scale {
            return finish(p, root, iterations);
        }
    }
    let f_lo = points.first().and_then(|p| p.1).unwrap_or(f64::NAN);
    let f_hi = points.last().and_then(|p| p.1).unwrap_or(f64::NAN);
    Err(Error::NoBracket {
        lo: r_lo,
        hi: r_hi,
        f_lo,
        f_hi,
    })
}

fn finish(p: &HulthenParams, radical: f64, iterations: u32) -> Result<QuantizeResult> {
    let mu1 = p.mu.value() - 1.0;
    let eps_sq = (radical * radical - mu1 * mu1) / 4.0;
    let e_sq = p.m * p.m - p.alpha * p.alpha * eps_sq;
    if e_sq < 0.0 {
        return Err(Error::ImaginaryEnergy(e_sq));
    }
    Ok(QuantizeResult {
        radical,
        eps_sq,
        energy: e_sq.sqrt(),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdConfig {
    pub x_max: f64,
    pub n_points: usize,
    /// Largest energy shift tolerated when the grid is doubled.
    pub tolerance: f64,
    pub check_convergence: bool,
}

impl FdConfig {
    /// `x_max = 40 / alpha`, 4000 interior points.
    pub fn standard(alpha: f64) -> Self {
        Self {
            x_max: 40.0 / alpha,
            n_points: 4000,
            tolerance: FD_TOLERANCE,
            check_convergence: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdResult {
    pub energies: Vec<f64>,
    /// Left end of the domain: the pole `ln(q)/alpha` of the potential.
    pub x_start: f64,
    /// The left end lies at `x > 0` (q > 1).
    pub pole_truncated: bool,
    pub n_points: usize,
}

/// Lowest `count` energies of `-psi'' + (S^2 + 2 m S) psi = (E^2 - m^2) psi`
/// on `(ln(q)/alpha, x_max)` with Dirichlet ends, `mu = 1`, `q > 0`.
pub fn fd_eigensolve_mu1(p: &HulthenParams, count: usize, config: &FdConfig) -> Result<FdResult> {
    if !p.mu.is_classical() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference oracle needs mu = 1, got {}",
            p.mu
        )));
    }
    if !(p.q > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference oracle needs q > 0, got {}",
            p.q
        )));
    }
    let x_start = p.q.ln() / p.alpha;
    if !(config.x_max > x_start) || config.n_points < 2 || count == 0 || count > config.n_points {
        return Err(Error::InvalidParameter("bad finite-difference grid".into()));
    }
    let energies = fd_energies(p, count, x_start, config.x_max, config.n_points)?;
    if config.check_convergence {
        let fine = fd_energies(p, count, x_start, config.x_max, 2 * config.n_points)?;
        let shift = energies
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if shift > config.tolerance {
            return Err(Error::Convergence {
                shift,
                tolerance: config.tolerance,
            });
        }
    }
    Ok(FdResult {
        energies,
        x_start,
        pole_truncated: x_start > 0.0,
        n_points: config.n_points,
    })
}

fn fd_energies(p: &HulthenParams, count: usize, x_start: f64, x_max: f64, n: usize) -> Result<Vec<f64>> {
    let h = (x_max - x_start) / (n + 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let diag = (1..=n)
        .map(|i| {
            let s = hulthen_kg::potential(x_start + i as f64 * h, p)?;
            Ok(2.0 * inv_h2 + s * s + 2.0 * p.m * s)
        })
        .collect::<Result<Vec<f64>>>()?;
    let eigen = tridiagonal_lowest(&diag, -inv_h2, count);
    eigen
        .into_iter()
        .map(|lam| {
            let e_sq = p.m * p.m + lam;
            if e_sq < 0.0 {
                Err(Error::ImaginaryEnergy(e_sq))
            } else {
                Ok(e_sq.sqrt())
            }
        })
        .collect()
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `diag` and constant off-diagonal `off` (Sturm sequence).
fn count_below(diag: &[f64], off: f64, x: f64) -> usize {
    let off2 = off * off;
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in diag.iter().enumerate() {
        d = if i == 0 { a - x } else { a - x - off2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + off.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest `count` eigenvalues, ascending, by bisection on the Sturm count.
fn tridiagonal_lowest(diag: &[f64], off: f64, count: usize) -> Vec<f64> {
    let lo0 = diag.iter().fold(f64::INFINITY, |m, &a| m.min(a)) - 2.0 * off.abs();
    let hi0 = diag.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a)) + 2.0 * off.abs();
    (0..count)
        .map(|k| {
            let (mut lo, mut hi) = (lo0, hi0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(diag, off, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

//! Reduced droplet model: the one-variable energy
//!
//!   f_xi(nu) = Cbar1 * nu^{(d-1)/d} - 4 nu + 4 xi^{-(d+1)} nu^2
//!
//! over rescaled droplet volume nu >= 0, its crossover value xi_d, the
//! barrier constants in both regimes, and the coefficients of the
//! lower-bound certificate.

use crate::numerics::{self, bisect, golden_max};
use crate::params::Dim;
use std::fmt;

/// Scaling parameter of the reduced model; +infinity drops the quadratic
/// term and is a distinct tag to avoid overflow in xi^{-(d+1)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Xi {
    Finite(f64),
    Infinite,
}

impl Xi {
    /// Coefficient of the nu^2 term: 4 xi^{-(d+1)}, or 0 in the limit.
    fn quad_coeff(self, d: Dim) -> f64 {
        match self {
            Xi::Finite(x) => {
                assert!(x > 0.0, "xi must be positive, got {x}");
                4.0 * x.powi(-(d.get() as i32 + 1))
            }
            Xi::Infinite => 0.0,
        }
    }
}

impl fmt::Display for Xi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Xi::Finite(x) => write!(f, "{x}"),
            Xi::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReducedError {
    /// f_xi has no strictly positive zero at or below the crossover.
    NoPositiveZero { xi: f64, critical: f64 },
    /// The certificate coefficients need 8 phi^{1/3} < 1.
    PhiTooLarge { phi: f64 },
    Numerics(numerics::NumericsError),
}

impl fmt::Display for ReducedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReducedError::NoPositiveZero { xi, critical } => {
                write!(f, "no positive zero: xi={xi} is not above the crossover {critical}")
            }
            ReducedError::PhiTooLarge { phi } => {
                write!(f, "phi too large for certificate: need 8 phi^(1/3) < 1, got phi={phi}")
            }
            ReducedError::Numerics(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ReducedError {}

impl From<numerics::NumericsError> for ReducedError {
    fn from(e: numerics::NumericsError) -> Self {
        ReducedError::Numerics(e)
    }
}

/// Perimeter coefficient Cbar1 = c0 * sigma_d^{1/d} * d^{(d-1)/d}.
pub fn cbar1(d: Dim) -> f64 {
    let df = d.as_f64();
    numerics::c0() * numerics::sphere_area(d.get()).powf(1.0 / df) * df.powf((df - 1.0) / df)
}

/// The reduced energy f_xi(nu). Requires nu >= 0.
pub fn reduced_energy(nu: f64, xi: Xi, d: Dim) -> f64 {
    assert!(nu >= 0.0, "nu must be nonnegative, got {nu}");
    let df = d.as_f64();
    cbar1(d) * nu.powf((df - 1.0) / df) - 4.0 * nu + xi.quad_coeff(d) * nu * nu
}

/// Crossover value xi_d: below it f_xi >= 0, above it f_xi dips negative.
pub fn critical_xi(d: Dim) -> f64 {
    let df = d.as_f64();
    numerics::c0().powf(df / (df + 1.0)) * numerics::sphere_area(d.get()).powf(1.0 / (df + 1.0))
        * (df + 1.0)
        / (4.0f64.powf(df / (df + 1.0)) * df.powf(1.0 / (df + 1.0)))
}

/// Maximum point and value of the xi = infinity reduced energy:
/// nu_m = (Cbar1 (d-1)/(4d))^d, c_star = sigma_d c0^d / d * ((d-1)/4)^{d-1}.
pub fn barrier_constant_offcritical(d: Dim) -> (f64, f64) {
    let df = d.as_f64();
    let nu_m = (cbar1(d) * (df - 1.0) / (4.0 * df)).powf(df);
    let c_star = numerics::sphere_area(d.get()) * numerics::c0().powf(df) / df
        * ((df - 1.0) / 4.0).powf(df - 1.0);
    // Closed algebra must agree with the model it summarizes.
    let check = reduced_energy(nu_m, Xi::Infinite, d);
    assert!(
        (check - c_star).abs() <= 1e-12 * c_star.abs(),
        "closed-form maximum inconsistent: f({nu_m}) = {check} vs {c_star}"
    );
    (nu_m, c_star)
}

/// d/dnu of the reduced energy (used to bracket its critical points).
fn reduced_slope(nu: f64, q: f64, d: Dim) -> f64 {
    let df = d.as_f64();
    let beta = (df - 1.0) / df;
    beta * cbar1(d) * nu.powf(beta - 1.0) - 4.0 + 2.0 * q * nu
}

/// First strictly positive zero nu_xi of f_xi and the barrier constant
/// C_xi = max of f_xi on [0, nu_xi]. Requires xi strictly above xi_d.
pub fn barrier_constant_critical(xi: f64, d: Dim) -> Result<(f64, f64), ReducedError> {
    let crit = critical_xi(d);
    if !(xi > crit) {
        return Err(ReducedError::NoPositiveZero { xi, critical: crit });
    }
    let q = Xi::Finite(xi).quad_coeff(d);
    let df = d.as_f64();
    let beta = (df - 1.0) / df;

    // The slope decreases then increases; its minimum sits at the unique
    // inflection point nu_c of f_xi.
    let nu_c = (beta * (1.0 - beta) * cbar1(d) / (2.0 * q)).powf(1.0 / (2.0 - beta));
    if reduced_slope(nu_c, q, d) >= 0.0 {
        // f_xi monotone: no negative dip, so no strictly positive zero.
        return Err(ReducedError::NoPositiveZero { xi, critical: crit });
    }
    // Slope zero below nu_c: the maximum point of f_xi.
    let mut lo = nu_c;
    while reduced_slope(lo, q, d) < 0.0 {
        lo *= 0.5;
    }
    let z_max = bisect(|nu| reduced_slope(nu, q, d), lo, nu_c, 1e-13, 300)?;
    // Slope zero above nu_c: the minimum point of f_xi.
    let mut hi = nu_c;
    while reduced_slope(hi, q, d) < 0.0 {
        hi *= 2.0;
    }
    let z_min = bisect(|nu| reduced_slope(nu, q, d), nu_c, hi, 1e-13, 300)?;
    if reduced_energy(z_min, Xi::Finite(xi), d) >= 0.0 {
        return Err(ReducedError::NoPositiveZero { xi, critical: crit });
    }
    // First positive zero lies between the positive maximum and the
    // negative minimum.
    let nu_xi = bisect(
        |nu| reduced_energy(nu, Xi::Finite(xi), d),
        z_max,
        z_min,
        1e-12,
        300,
    )?;
    let (_, c_xi) = golden_max(|nu| reduced_energy(nu, Xi::Finite(xi), d), 0.0, nu_xi, 1e-10);
    Ok((nu_xi, c_xi.max(0.0)))
}

/// Coefficients (C1, C2, C3) of the energy-gap lower bound, with the
/// transition width fixed at kappa = phi^{1/3}.
pub fn certificate_coefficients(phi: f64, d: Dim) -> Result<(f64, f64, f64), ReducedError> {
    let kappa = phi.cbrt();
    if !(8.0 * kappa < 1.0) {
        return Err(ReducedError::PhiTooLarge { phi });
    }
    let df = d.as_f64();
    let c1 = (1.0 - 8.0 * kappa).sqrt()
        * (numerics::c0() - 8.0 * std::f64::consts::SQRT_2 * phi.powf(2.0 / 3.0))
        * numerics::sphere_area(d.get()).powf(1.0 / df)
        * df.powf((df - 1.0) / df);
    // G'(-1+phi) = phi (1-phi) (2-phi).
    let c2 = (2.0 + kappa) * (1.0 - phi) * (2.0 - phi);
    // G''(t) = 3t^2 - 1.
    let g2 = 3.0 * (-1.0 + 2.0 * kappa) * (-1.0 + 2.0 * kappa) - 1.0;
    let c3 = 0.5 * g2 * (2.0 - 2.0 * kappa - phi).powi(2) * (1.0 - 2.0 * kappa);
    Ok((c1, c2, c3))
}

/// Sampled reduced-energy curve for CSV export: `samples` points uniform on
/// [0, nu_max], rows (nu, f_xi(nu)).
pub fn sample_curve(xi: Xi, d: Dim, nu_max: f64, samples: usize) -> Vec<(f64, f64)> {
    assert!(samples >= 2, "need at least two samples");
    assert!(nu_max > 0.0, "nu_max must be positive");
    (0..samples)
        .map(|i| {
            let nu = nu_max * i as f64 / (samples - 1) as f64;
            (nu, reduced_energy(nu, xi, d))
        })
        .collect()
}

//! Convergence of the rescaled excess energy toward its sharp-interface
//! limit. Shrinking lengths by phi turns droplet states of excess volume
//! nu into balls of radius r with nu = (sigma_d / d) r^d, and the energy
//! gap, scaled by phi^{d-1}, approaches a perimeter functional with a
//! volume penalty and a quadratic confinement term.

use std::fmt;

use crate::construction::clamped_kink;
use crate::field::{FieldError, TorusField};
use crate::numerics::sphere_area;
use crate::params::{Dim, ModelParams, ParamError};
use crate::reduced::{reduced_energy, Xi};

/// Errors from the rescaled-limit comparisons.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaError {
    /// Field mean does not match the prescribed -1 + phi.
    MeanMismatch { got: f64, want: f64 },
    /// Ball plus clamped tails does not fit inside the torus.
    DropletDoesNotFit { need: f64, side: f64 },
    /// The sweep needs strictly decreasing volume fractions.
    PhisNotDecreasing,
    /// At least two volume fractions are needed to fit a rate.
    TooFewPhis { len: usize },
    Param(ParamError),
    Field(FieldError),
}

impl fmt::Display for GammaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaError::MeanMismatch { got, want } => {
                write!(f, "field mean {got:e} does not match the prescribed {want:e}")
            }
            GammaError::DropletDoesNotFit { need, side } => {
                write!(f, "ball and clamped tails need length {need}, torus side is {side}")
            }
            GammaError::PhisNotDecreasing => {
                write!(f, "volume fractions must be strictly decreasing")
            }
            GammaError::TooFewPhis { len } => {
                write!(f, "need at least 2 volume fractions, got {len}")
            }
            GammaError::Param(e) => write!(f, "{e}"),
            GammaError::Field(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for GammaError {}

impl From<ParamError> for GammaError {
    fn from(e: ParamError) -> GammaError {
        GammaError::Param(e)
    }
}

impl From<FieldError> for GammaError {
    fn from(e: FieldError) -> GammaError {
        GammaError::Field(e)
    }
}

/// Energy above the uniform state, scaled by phi^{d-1} so the droplet
/// barrier stays order one as phi shrinks.
pub fn rescaled_gap(u: &TorusField, params: &ModelParams) -> Result<f64, GammaError> {
    let got = u.mean();
    if (got - params.mean()).abs() > 1e-10 {
        return Err(GammaError::MeanMismatch { got, want: params.mean() });
    }
    let scale = params.phi().powi(params.d().get() as i32 - 1);
    Ok(scale * u.energy_gap(params)?)
}

/// Sharp-interface limit of the rescaled gap for a ball of rescaled radius
/// r: c0 sigma_d r^{d-1} - 4 (sigma_d/d) r^d + 4 xi^{-(d+1)} ((sigma_d/d) r^d)^2.
pub fn limit_functional(r: f64, xi: f64, d: Dim) -> f64 {
    assert!(r >= 0.0, "radius must be nonnegative, got {r}");
    assert!(xi > 0.0, "xi must be positive, got {xi}");
    let nu = sphere_area(d.get()) / d.as_f64() * r.powi(d.get() as i32);
    reduced_energy(nu, Xi::Finite(xi), d)
}

/// Recovery state for the rescaled radius r: a clamped kink across the
/// sphere of physical radius r/phi, centered on the torus, shifted by the
/// exact constant alpha that restores the mean. Returns the field and
/// alpha. The signed distance is Euclidean from the center; the fit
/// precondition keeps the wrapped copies outside the clamped tails.
pub fn recovery_field(
    r: f64,
    params: &ModelParams,
    n: usize,
) -> Result<(TorusField, f64), GammaError> {
    assert!(r > 0.0, "rescaled radius must be positive, got {r}");
    let phi = params.phi();
    let rho = r / phi;
    let clamp = phi.powf(-0.5);
    let need = 2.0 * rho + 4.0 * clamp;
    if need >= params.l() {
        return Err(GammaError::DropletDoesNotFit { need, side: params.l() });
    }
    let mut u = TorusField::from_fn(params.d(), n, params.l(), |x| {
        let dist = x.iter().map(|&c| c * c).sum::<f64>().sqrt();
        clamped_kink(dist - rho, clamp)
    });
    let alpha = params.mean() - u.mean();
    u.values_mut().iter_mut().for_each(|v| *v += alpha);
    Ok((u, alpha))
}

/// Grid resolution keeping the cell size near 0.35, even so the torus
/// center falls on a node.
pub fn sweep_grid(params: &ModelParams) -> usize {
    let mut n = (params.l() / 0.35).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    n.max(32)
}

/// One row of a convergence sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub phi: f64,
    pub n: usize,
    pub gap: f64,
    pub error: f64,
    /// Exact mean shift over its leading-order value phi (1 - 2 nu / xi^{d+1}).
    pub alpha_ratio: f64,
}

/// Measured approach of recovery states to the sharp-interface limit.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub limit: f64,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of ln(error) against ln(phi).
    pub fitted_exponent: f64,
    /// True when the errors decrease strictly along the sweep.
    pub monotone: bool,
}

/// Builds recovery states at fixed (r, xi) along strictly decreasing phi,
/// compares their rescaled gaps to the limit, and fits the decay rate.
pub fn convergence_sweep(
    phis: &[f64],
    xi: f64,
    r: f64,
    d: Dim,
) -> Result<SweepResult, GammaError> {
    if phis.len() < 2 {
        return Err(GammaError::TooFewPhis { len: phis.len() });
    }
    if phis.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GammaError::PhisNotDecreasing);
    }
    let limit = limit_functional(r, xi, d);
    let nu = sphere_area(d.get()) / d.as_f64() * r.powi(d.get() as i32);
    let mut rows = Vec::with_capacity(phis.len());
    for &phi in phis {
        let params = ModelParams::from_xi(d, phi, xi)?;
        let n = sweep_grid(&params);
        let (u, alpha) = recovery_field(r, &params, n)?;
        let gap = rescaled_gap(&u, &params)?;
        let alpha_leading = phi * (1.0 - 2.0 * nu / xi.powi(d.get() as i32 + 1));
        rows.push(SweepRow {
            phi,
            n,
            gap,
            error: (gap - limit).abs(),
            alpha_ratio: alpha / alpha_leading,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].error < w[0].error);
    let xs: Vec<f64> = rows.iter().map(|row| row.phi.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|row| row.error.max(f64::MIN_POSITIVE).ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let fitted_exponent = sxy / sxx;
    Ok(SweepResult { limit, rows, fitted_exponent, monotone })
}

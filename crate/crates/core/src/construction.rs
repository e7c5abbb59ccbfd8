//! Explicit upper-bound machinery: the tanh kink, its clamped version with
//! a quintic blend, fractional droplet states with exact and asymptotic
//! bulk offsets, the seed segment from the uniform state to the smallest
//! droplet, and the concatenated barrier path.

use crate::field::{self, TorusField};
use crate::numerics::{adaptive_simpson, quintic_hermite, sphere_area};
use crate::params::ModelParams;
use crate::reduced;
use rayon::prelude::*;
use std::fmt;
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstructionError {
    /// Droplet radius exceeds L/4, so it no longer fits well inside the torus.
    DropletTooLarge { r_eta: f64, limit: f64 },
    /// Clamping half-width exceeds the droplet radius.
    ClampExceedsRadius { r: f64, r_eta: f64 },
    EtaOutOfRange(f64),
    /// The asymptotic offset needs 1 - eta >= 100 phi^2.
    AlphaAsymptoticInvalid { eta: f64, phi: f64 },
    /// The droplet family reaches eta = 1 without finding a lower state.
    NoLowerState { xi: f64, critical: f64 },
    /// Interface (width ~ sqrt(2)) needs h <= 0.5 to be resolved.
    GridTooCoarse { h: f64 },
    TooFewImages(usize),
    Field(field::FieldError),
}

impl fmt::Display for ConstructionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstructionError::DropletTooLarge { r_eta, limit } => {
                write!(f, "droplet too large for torus: r_eta={r_eta} violates r_eta <= {limit}")
            }
            ConstructionError::ClampExceedsRadius { r, r_eta } => {
                write!(f, "clamping half-width R={r} exceeds droplet radius r_eta={r_eta}")
            }
            ConstructionError::EtaOutOfRange(eta) => {
                write!(f, "eta must lie in [0, 1], got {eta}")
            }
            ConstructionError::AlphaAsymptoticInvalid { eta, phi } => {
                write!(f, "asymptotic offset invalid: needs 1 - eta >= 100 phi^2, got eta={eta}, phi={phi}")
            }
            ConstructionError::NoLowerState { xi, critical } => {
                if xi <= critical {
                    write!(f, "no lower state: xi={xi} is at or below the crossover {critical}, the uniform state is the global minimizer")
                } else {
                    write!(f, "no lower state: xi={xi} exceeds the crossover {critical} but the margin is too shallow for this grid and clamp width")
                }
            }
            ConstructionError::GridTooCoarse { h } => {
                write!(f, "grid too coarse: h={h} > 0.5 under-resolves the interface")
            }
            ConstructionError::TooFewImages(m) => {
                write!(f, "need at least 16 images, got {m}")
            }
            ConstructionError::Field(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ConstructionError {}

impl From<field::FieldError> for ConstructionError {
    fn from(e: field::FieldError) -> Self {
        ConstructionError::Field(e)
    }
}

/// The planar transition profile -tanh(x/sqrt(2)).
pub fn kink(x: f64) -> f64 {
    -(x / std::f64::consts::SQRT_2).tanh()
}

fn kink_d1(x: f64) -> f64 {
    let c = (x / std::f64::consts::SQRT_2).cosh();
    -1.0 / (std::f64::consts::SQRT_2 * c * c)
}

fn kink_d2(x: f64) -> f64 {
    let s = x / std::f64::consts::SQRT_2;
    let sech2 = 1.0 / (s.cosh() * s.cosh());
    sech2 * s.tanh()
}

/// Clamped kink: the tanh profile for |x| < R, exactly -sgn(x) for
/// |x| > 2R, and an odd quintic Hermite blend on R <= |x| <= 2R matching
/// value, first and second derivative at R and flat at 2R. Monotone
/// nonincreasing.
pub fn clamped_kink(x: f64, r: f64) -> f64 {
    assert!(r > 0.0, "clamping half-width must be positive, got {r}");
    let ax = x.abs();
    let val = if ax < r {
        kink(ax)
    } else if ax <= 2.0 * r {
        quintic_hermite(
            (ax - r) / r,
            kink(r),
            kink_d1(r) * r,
            kink_d2(r) * r * r,
            -1.0,
            0.0,
            0.0,
        )
    } else {
        -1.0
    };
    if x < 0.0 {
        -val
    } else {
        val
    }
}

/// Droplet radius r_eta = eta^{1/d} (phi d / (2 sigma_d))^{1/d} L: the
/// radius of the ball holding fraction eta of the excess mass.
pub fn droplet_radius(eta: f64, params: &ModelParams) -> f64 {
    let d = params.d().as_f64();
    eta.powf(1.0 / d)
        * (params.phi() * d / (2.0 * sphere_area(params.d().get()))).powf(1.0 / d)
        * params.l()
}

/// The once-evaluated first moment of the interface profile defect:
/// integral of (sgn(s) + kink(s)) s ds over the line.
fn interface_first_moment() -> f64 {
    static MOMENT: OnceLock<f64> = OnceLock::new();
    *MOMENT.get_or_init(|| {
        // Even integrand; the tail decays like e^{-sqrt(2) s}.
        2.0 * adaptive_simpson(|s| (1.0 + kink(s)) * s, 0.0, 60.0, 1e-13)
    })
}

/// Derived droplet quantities carried alongside the field.
#[derive(Debug, Clone, PartialEq)]
pub struct DropletSpec {
    pub eta: f64,
    /// Clamping half-width of the interface profile.
    pub r: f64,
    pub r_eta: f64,
    /// Bulk offset solved exactly from the grid mean constraint.
    pub alpha_exact: f64,
    /// Leading-order offset phi(1-eta) - C1' r_eta^{d-2} / L^d; drops
    /// O(e^{-R/C}) tail and higher-order curvature terms.
    pub alpha_asymptotic: f64,
}

/// Radial clamped-kink profile around the domain center plus the exact
/// mean-restoring offset. Returns the field and the offset.
fn radial_droplet_field(r_eta: f64, r: f64, params: &ModelParams, n: usize) -> (TorusField, f64) {
    let l = params.l();
    let dd = params.d().get() as usize;
    // Even n puts a node exactly at the center; odd n uses the nearest one.
    let center: Vec<f64> = (0..dd).map(|_| (n / 2) as f64 * (l / n as f64) - 0.5 * l).collect();
    let mut u = TorusField::from_fn(params.d(), n, l, |x| {
        clamped_kink(field::torus_dist(x, &center, l) - r_eta, r)
    });
    let alpha = params.mean() - u.mean();
    u.values_mut().iter_mut().for_each(|v| *v += alpha);
    (u, alpha)
}

/// Fractional droplet state: clamped kink around a ball of radius r_eta
/// centered at the domain center, shifted by the exact mean offset.
pub fn droplet_state(
    eta: f64,
    r: f64,
    params: &ModelParams,
    n: usize,
) -> Result<(TorusField, DropletSpec), ConstructionError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(ConstructionError::EtaOutOfRange(eta));
    }
    if eta == 0.0 {
        let u = field::uniform_state(params, n);
        let spec = DropletSpec {
            eta,
            r,
            r_eta: 0.0,
            alpha_exact: params.phi(),
            alpha_asymptotic: params.phi(),
        };
        return Ok((u, spec));
    }
    let r_eta = droplet_radius(eta, params);
    let limit = params.l() / 4.0;
    if r_eta > limit {
        return Err(ConstructionError::DropletTooLarge { r_eta, limit });
    }
    if r > r_eta {
        return Err(ConstructionError::ClampExceedsRadius { r, r_eta });
    }
    let (u, alpha_exact) = radial_droplet_field(r_eta, r, params, n);
    let spec = DropletSpec {
        eta,
        r,
        r_eta,
        alpha_exact,
        alpha_asymptotic: alpha_formula(eta, params),
    };
    Ok((u, spec))
}

fn alpha_formula(eta: f64, params: &ModelParams) -> f64 {
    let d = params.d().get();
    let r_eta = droplet_radius(eta, params);
    let c1p = (d as f64 - 1.0) * sphere_area(d) * interface_first_moment();
    params.phi() * (1.0 - eta) - c1p * r_eta.powi(d as i32 - 2) / params.volume()
}

/// Leading-order bulk offset of the droplet state. Valid away from eta = 1:
/// requires 1 - eta >= 100 phi^2. The clamping half-width only affects the
/// dropped exponential tail terms.
pub fn alpha_asymptotic(eta: f64, _r: f64, params: &ModelParams) -> Result<f64, ConstructionError> {
    if 1.0 - eta < 100.0 * params.phi() * params.phi() {
        return Err(ConstructionError::AlphaAsymptoticInvalid { eta, phi: params.phi() });
    }
    Ok(alpha_formula(eta, params))
}

/// Leading-order prediction for the droplet energy gap at volume
/// V = eta phi L^d / 2: the perimeter term minus the bulk gain, plus the
/// quadratic correction in the critical-like regime. Equals
/// phi^{-d+1} f_xi(phi^d V) by the rescaling identity.
pub fn droplet_gap_asymptotic(eta: f64, params: &ModelParams) -> f64 {
    let d = params.d().get() as i32;
    let v = eta * params.phi() * params.volume() / 2.0;
    let base = reduced::cbar1(params.d()) * v.powf((d as f64 - 1.0) / d as f64)
        - 4.0 * params.phi() * v;
    match params.regime() {
        crate::params::Regime::CriticalLike => {
            base + 4.0 * params.phi().powi(d + 1) * v * v / params.xi().powi(d + 1)
        }
        crate::params::Regime::OffCriticalLike => base,
    }
}

/// Convex combination (1-lambda) uniform + lambda w_R, where w_R is the
/// smallest droplet-like state (clamped kink at radius R). Both endpoints
/// have the exact mean, so every intermediate does too.
pub fn seed_segment(lambda: f64, r: f64, params: &ModelParams, n: usize) -> TorusField {
    assert!((0.0..=1.0).contains(&lambda), "lambda must lie in [0, 1], got {lambda}");
    let (w, _) = radial_droplet_field(r, r, params, n);
    let mut u = w;
    let base = params.mean();
    u.values_mut().iter_mut().for_each(|v| *v = (1.0 - lambda) * base + lambda * *v);
    u
}

/// A discrete path of fields with per-image energy gaps and +1-phase
/// volumes. A valid barrier path ends strictly below the uniform state.
#[derive(Debug, Clone)]
pub struct PathProfile {
    pub images: Vec<TorusField>,
    pub t: Vec<f64>,
    pub gap: Vec<f64>,
    pub v: Vec<f64>,
    pub max_gap: f64,
    pub max_index: usize,
    pub end_gap: f64,
}

/// Default clamping half-width: min(phi^{-1+1/d}/3, 3 phi^{-1/2}),
/// between the interface width and the smallest droplet radius.
pub fn default_clamp_halfwidth(params: &ModelParams) -> f64 {
    let d = params.d().as_f64();
    (params.phi().powf(-1.0 + 1.0 / d) / 3.0).min(3.0 * params.phi().powf(-0.5))
}

/// Transition width for the volume diagnostic along paths: the certificate
/// convention phi^{1/3}, capped inside the partition's validity range.
pub(crate) fn path_kappa(params: &ModelParams) -> f64 {
    params.phi().cbrt().min(0.45)
}

/// Fraction eta whose droplet radius equals r, nudged up a few ulps so the
/// round trip through `droplet_radius` never lands below r.
pub fn eta_for_radius(r: f64, params: &ModelParams) -> f64 {
    let d = params.d().as_f64();
    (r / params.l()).powf(d) * 2.0 * sphere_area(params.d().get()) / (params.phi() * d)
        * (1.0 + 4.0 * f64::EPSILON)
}

/// Concatenated barrier path: seed segment from the uniform state to the
/// smallest droplet, then the growing droplet family up to an eta with a
/// strictly negative gap. Uniform parameter spacing per stage.
pub fn barrier_path(
    params: &ModelParams,
    n: usize,
    r: f64,
    n_images: usize,
) -> Result<PathProfile, ConstructionError> {
    if n_images < 16 {
        return Err(ConstructionError::TooFewImages(n_images));
    }
    let h = params.l() / n as f64;
    if h > 0.5 {
        return Err(ConstructionError::GridTooCoarse { h });
    }
    assert!(r > 0.0, "clamping half-width must be positive, got {r}");

    // Where the droplet family takes over from the seed segment.
    let eta_seed = eta_for_radius(r, params);

    // Predicted end point: the reduced model's first positive zero, or the
    // zero of its xi = infinity version as a starting guess below the
    // crossover (where the finite-size search decides).
    let crit = reduced::critical_xi(params.d());
    let xi = params.xi();
    let nu_zero = match reduced::barrier_constant_critical(xi, params.d()) {
        Ok((nu_xi, _)) => nu_xi,
        Err(_) => (reduced::cbar1(params.d()) / 4.0).powf(params.d().as_f64()),
    };
    let mut eta_try = (2.0 * nu_zero / xi.powi(params.d().get() as i32 + 1))
        .max(eta_seed)
        .min(1.0);

    // Expand eta by 1.2x until the single-droplet gap goes negative.
    let eta_end = loop {
        match droplet_state(eta_try, r, params, n) {
            Ok((u, _)) => {
                let gap = u.energy_gap(params)?;
                if gap < 0.0 {
                    break eta_try;
                }
            }
            Err(ConstructionError::DropletTooLarge { .. }) => {
                // The family leaves the torus before finding a lower state.
                return Err(ConstructionError::NoLowerState { xi, critical: crit });
            }
            Err(e) => return Err(e),
        }
        if eta_try >= 1.0 {
            return Err(ConstructionError::NoLowerState { xi, critical: crit });
        }
        eta_try = (eta_try * 1.2).min(1.0);
    };

    // Image budget: a fixed slice seeds the path, the rest grows the droplet.
    let n_seed = (n_images / 6).max(8);
    let n_drop = n_images - n_seed;

    let lambdas: Vec<f64> =
        (0..n_seed).map(|k| k as f64 / (n_seed - 1) as f64).collect();
    let etas: Vec<f64> = (1..=n_drop)
        .map(|k| eta_seed + (eta_end - eta_seed) * k as f64 / n_drop as f64)
        .collect();

    // The seed endpoints are cheap to combine once w_R is built.
    let (w_r, _) = radial_droplet_field(r, r, params, n);
    let base = params.mean();
    let mut images: Vec<TorusField> = lambdas
        .par_iter()
        .map(|&lambda| {
            let mut u = w_r.clone();
            u.values_mut()
                .iter_mut()
                .for_each(|v| *v = (1.0 - lambda) * base + lambda * *v);
            u
        })
        .collect();
    let droplet_images: Vec<TorusField> = etas
        .par_iter()
        .map(|&eta| {
            radial_droplet_field(droplet_radius(eta, params), r, params, n).0
        })
        .collect();
    images.extend(droplet_images);

    let mut gap = Vec::with_capacity(images.len());
    for u in &images {
        gap.push(u.energy_gap(params)?);
    }
    let kappa = path_kappa(params);
    let v: Vec<f64> = images.iter().map(|u| field::plus_phase_volume(u, kappa)).collect();
    let m = images.len();
    let t: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
    let (max_index, max_gap) = gap
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |(bi, bg), (i, &g)| if g > bg { (i, g) } else { (bi, bg) });
    let end_gap = *gap.last().unwrap();
    Ok(PathProfile { images, t, gap, v, max_gap, max_index, end_gap })
}

/// Index where the droplet stage begins inside a path built with
/// `barrier_path` and this image budget.
pub fn seed_image_count(n_images: usize) -> usize {
    (n_images / 6).max(8)
}

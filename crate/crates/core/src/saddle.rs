//! Refinement of barrier paths toward the transition state: string-method
//! relaxation under the mean-constrained Allen-Cahn force, followed by a
//! climbing polish of the highest image.
//!
//! The force is the negative energy gradient projected onto mean-zero
//! perturbations, so relaxation descends the energy while every image keeps
//! the prescribed spatial mean. Equal-arc-length reparameterization keeps the
//! images spread along the path instead of sliding into the endpoints.

use std::fmt;

use rayon::prelude::*;

use crate::construction::{path_kappa, PathProfile};
use crate::field::{det_sum_terms, plus_phase_volume, potential, FieldError, TorusField};
use crate::params::ModelParams;

/// Errors from path relaxation.
#[derive(Debug, Clone, PartialEq)]
pub enum SaddleError {
    /// The path maximum blew up or went non-finite despite step halving.
    UnstableStep { step: f64 },
    /// The input path does not start at the uniform state or does not end
    /// strictly below it.
    BadEndpoints { start_gap: f64, end_gap: f64 },
    /// Fewer than three images, so there is nothing to relax.
    TooShort { len: usize },
    Field(FieldError),
}

impl fmt::Display for SaddleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SaddleError::UnstableStep { step } => {
                write!(f, "unstable step: path maximum blew up despite halving down to {step:e}")
            }
            SaddleError::BadEndpoints { start_gap, end_gap } => write!(
                f,
                "path must start at gap 0 and end strictly below, got start {start_gap:e}, end {end_gap:e}"
            ),
            SaddleError::TooShort { len } => {
                write!(f, "need at least 3 images to relax, got {len}")
            }
            SaddleError::Field(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SaddleError {}

impl From<FieldError> for SaddleError {
    fn from(e: FieldError) -> SaddleError {
        SaddleError::Field(e)
    }
}

/// Iteration controls for `string_relax`.
#[derive(Debug, Clone, Copy)]
pub struct SaddleOpts {
    pub max_iter: usize,
    pub step: f64,
    pub tol: f64,
}

impl SaddleOpts {
    /// Defaults with a step just inside the explicit stability bound
    /// 2 / (4 d / h^2 + sup G'') of the discrete semiflow.
    pub fn stable_for(u: &TorusField) -> SaddleOpts {
        let d = u.d().as_f64();
        let h2 = u.h() * u.h();
        SaddleOpts { max_iter: 20_000, step: 1.6 / (4.0 * d / h2 + 6.0), tol: 1e-4 }
    }
}

/// A refined near-critical field with its diagnostics.
#[derive(Debug, Clone)]
pub struct SaddleResult {
    pub field: TorusField,
    /// Energy above the uniform state.
    pub gap: f64,
    /// Lagrange multiplier of the mean constraint, mean of G'(u).
    pub lambda: f64,
    /// Grid L2 norm of -lap u + G'(u) - lambda.
    pub residual: f64,
    pub iterations: usize,
    /// True when the final residual is at or below the configured tolerance.
    pub converged: bool,
}

/// Writes lap u - G'(u) into `out`, then re-centers the sum to zero. The
/// discrete Laplacian sums to zero, so the re-centering constant equals the
/// mean of G'(u) up to roundoff.
fn force_into(u: &TorusField, out: &mut [f64]) {
    u.laplacian_into(out);
    let vals = u.values();
    out.par_iter_mut().zip(vals.par_iter()).for_each(|(o, &v)| {
        *o -= potential(v).1;
    });
    let m = det_sum_terms(out.len(), u.n(), |i| out[i]) / out.len() as f64;
    out.par_iter_mut().for_each(|o| *o -= m);
}

/// Mean-constrained Allen-Cahn force lap u - G'(u) + mean(G'(u)). Its grid
/// L2 pairing with any mean-zero direction is minus the energy's directional
/// derivative, and its own mean vanishes to machine precision.
pub fn constrained_force(u: &TorusField) -> TorusField {
    let mut out = u.clone();
    let mut buf = vec![0.0; u.len()];
    force_into(u, &mut buf);
    out.values_mut().copy_from_slice(&buf);
    out
}

/// Lagrange multiplier mean(G'(u)) and the grid L2 norm of the constrained
/// Euler-Lagrange residual -lap u + G'(u) - lambda. Both vanish only at
/// critical points of the energy restricted to the mean constraint.
pub fn euler_lagrange_residual(u: &TorusField) -> (f64, f64) {
    let mut lap = vec![0.0; u.len()];
    u.laplacian_into(&mut lap);
    let vals = u.values();
    let lambda = det_sum_terms(vals.len(), u.n(), |i| potential(vals[i]).1) / vals.len() as f64;
    let sq = det_sum_terms(vals.len(), u.n(), |i| {
        let r = -lap[i] + potential(vals[i]).1 - lambda;
        r * r
    });
    (lambda, (u.cell_volume() * sq).sqrt())
}

/// Grid L2 inner product h^d sum a_i b_i.
fn grid_dot(a: &[f64], b: &[f64], hvol: f64, chunk: usize) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    hvol * det_sum_terms(a.len(), chunk, |i| a[i] * b[i])
}

/// Norm of the force component orthogonal to the central-difference tangent
/// through the neighbors, in grid L2.
fn orthogonal_norm(f: &[f64], prev: &[f64], next: &[f64], hvol: f64, chunk: usize) -> f64 {
    let ff = grid_dot(f, f, hvol, chunk);
    let tt = hvol
        * det_sum_terms(f.len(), chunk, |i| {
            let t = next[i] - prev[i];
            t * t
        });
    if tt <= 0.0 {
        return ff.max(0.0).sqrt();
    }
    let ft = hvol * det_sum_terms(f.len(), chunk, |i| f[i] * (next[i] - prev[i]));
    (ff - ft * ft / tt).max(0.0).sqrt()
}

/// Redistributes the images to equal arc length in grid L2, holding both
/// endpoints fixed, by piecewise-linear interpolation along the old polygon.
fn reparameterize(images: &mut [TorusField], hvol: f64, chunk: usize) {
    let m = images.len();
    let mut s = vec![0.0; m];
    for k in 1..m {
        let a = images[k - 1].values();
        let b = images[k].values();
        let sq = det_sum_terms(a.len(), chunk, |i| {
            let t = b[i] - a[i];
            t * t
        });
        s[k] = s[k - 1] + (hvol * sq).sqrt();
    }
    let total = s[m - 1];
    if total <= 0.0 {
        return;
    }
    let fresh: Vec<(usize, TorusField)> = (1..m - 1)
        .into_par_iter()
        .map(|k| {
            let target = total * k as f64 / (m - 1) as f64;
            // Segment j with s[j] <= target <= s[j+1].
            let j = s.partition_point(|&x| x < target).clamp(1, m - 1) - 1;
            let seg = s[j + 1] - s[j];
            let theta = if seg > 0.0 { ((target - s[j]) / seg).clamp(0.0, 1.0) } else { 0.0 };
            let mut img = images[j].clone();
            let b = images[j + 1].values();
            img.values_mut().iter_mut().zip(b.iter()).for_each(|(v, &w)| {
                *v += theta * (w - *v);
            });
            (k, img)
        })
        .collect();
    for (k, img) in fresh {
        images[k] = img;
    }
}

/// Relaxes a barrier path by the string method and polishes its highest
/// image by climbing. Each iteration takes one explicit descent step on
/// every interior image, reparameterizes to equal arc length, and restores
/// the exact mean. The polish reverses the force component along the path
/// tangent so the top image ascends to the nearby critical point. Returns
/// the relaxed path, with the polished image in place of its maximum, and
/// the diagnostics of that image.
pub fn string_relax(
    initial: &PathProfile,
    params: &ModelParams,
    opts: &SaddleOpts,
) -> Result<(PathProfile, SaddleResult), SaddleError> {
    let m = initial.images.len();
    if m < 3 {
        return Err(SaddleError::TooShort { len: m });
    }
    if initial.gap[0].abs() > 1e-6 || initial.end_gap >= 0.0 {
        return Err(SaddleError::BadEndpoints {
            start_gap: initial.gap[0],
            end_gap: initial.end_gap,
        });
    }
    let mut images = initial.images.clone();
    let len = images[0].len();
    let chunk = images[0].n();
    let hvol = images[0].cell_volume();
    let target_mean = params.mean();
    let e0 = images[0].energy();

    let mut step = opts.step;
    let mut string_iters = 0usize;
    let mut halvings = 0usize;
    let mut prev_max = f64::INFINITY;
    let mut stagnant = 0usize;
    let mut forces: Vec<Vec<f64>> = vec![vec![0.0; len]; m];

    loop {
        forces
            .par_iter_mut()
            .zip(images.par_iter())
            .skip(1)
            .take(m - 2)
            .for_each(|(f, u)| force_into(u, f));
        let orth_max = (1..m - 1)
            .into_par_iter()
            .map(|k| {
                orthogonal_norm(
                    &forces[k],
                    images[k - 1].values(),
                    images[k + 1].values(),
                    hvol,
                    chunk,
                )
            })
            .reduce(|| 0.0, f64::max);
        if orth_max <= opts.tol || string_iters >= opts.max_iter {
            break;
        }

        images
            .par_iter_mut()
            .zip(forces.par_iter())
            .skip(1)
            .take(m - 2)
            .for_each(|(u, f)| {
                u.values_mut().iter_mut().zip(f.iter()).for_each(|(v, &fi)| *v += step * fi);
            });
        reparameterize(&mut images, hvol, chunk);
        images.par_iter_mut().skip(1).take(m - 2).for_each(|u| u.project_mean(target_mean));
        string_iters += 1;

        // Reparameterization legitimately raises the discrete path maximum
        // toward the continuum one, so small rises are normal. Only explosive
        // growth or non-finite values signal a too-large step.
        let max_gap = images
            .par_iter()
            .map(|u| u.energy() - e0)
            .reduce(|| f64::NEG_INFINITY, f64::max);
        if !max_gap.is_finite() {
            return Err(SaddleError::UnstableStep { step });
        }
        if max_gap > prev_max + 0.1 * (1.0 + prev_max.abs()) {
            halvings += 1;
            if halvings > 6 {
                return Err(SaddleError::UnstableStep { step });
            }
            step *= 0.5;
        }
        // The orthogonal force plateaus at discretization scale, so a frozen
        // path maximum is the practical string convergence signal.
        if (max_gap - prev_max).abs() <= 1e-11 * (1.0 + prev_max.abs()) {
            stagnant += 1;
            if stagnant >= 50 {
                break;
            }
        } else {
            stagnant = 0;
        }
        prev_max = max_gap;
    }

    // Highest image of the relaxed path seeds the climb.
    let gaps: Vec<f64> = images.iter().map(|u| u.energy() - e0).collect();
    let ki = gaps
        .iter()
        .enumerate()
        .fold((1usize, f64::NEG_INFINITY), |best, (k, &g)| if g > best.1 { (k, g) } else { best })
        .0
        .clamp(1, m - 2);

    // Fixed unit tangent from the relaxed neighbors; the climb's fixed point
    // still has zero full force, the tangent only shapes the approach.
    let mut tau: Vec<f64> = images[ki + 1]
        .values()
        .iter()
        .zip(images[ki - 1].values().iter())
        .map(|(&a, &b)| a - b)
        .collect();
    let tau_norm = grid_dot(&tau, &tau, hvol, chunk).sqrt();
    if tau_norm > 0.0 {
        tau.iter_mut().for_each(|t| *t /= tau_norm);
    }

    let mut top = images[ki].clone();
    let mut f = vec![0.0; len];
    let mut climb_step = step;
    let mut climb_iters = 0usize;
    let mut prev_res = f64::INFINITY;
    let mut res_rises = 0usize;
    loop {
        force_into(&top, &mut f);
        let res = grid_dot(&f, &f, hvol, chunk).sqrt();
        if res <= opts.tol || climb_iters >= opts.max_iter {
            break;
        }
        if res > prev_res * (1.0 + 1e-12) {
            res_rises += 1;
            if res_rises >= 5 {
                climb_step *= 0.5;
                res_rises = 0;
            }
        } else {
            res_rises = 0;
        }
        prev_res = res;
        let along = grid_dot(&f, &tau, hvol, chunk);
        top.values_mut()
            .iter_mut()
            .zip(f.iter().zip(tau.iter()))
            .for_each(|(v, (&fi, &ti))| *v += climb_step * (fi - 2.0 * along * ti));
        top.project_mean(target_mean);
        climb_iters += 1;
    }

    let (lambda, residual) = euler_lagrange_residual(&top);
    let gap = top.energy() - e0;
    let converged = residual <= opts.tol;
    let iterations = string_iters + climb_iters;
    images[ki] = top.clone();

    let mut gap_out = gaps;
    gap_out[ki] = gap;
    let kappa = path_kappa(params);
    let v: Vec<f64> = images.par_iter().map(|u| plus_phase_volume(u, kappa)).collect();
    let (max_index, max_gap) = gap_out
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |best, (k, &g)| if g > best.1 { (k, g) } else { best });
    let t: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
    let end_gap = gap_out[m - 1];
    let path = PathProfile { images, t, gap: gap_out, v, max_gap, max_index, end_gap };
    let result = SaddleResult { field: top, gap, lambda, residual, iterations, converged };
    Ok((path, result))
}

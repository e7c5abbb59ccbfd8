//! Small numerical building blocks: surface area of the unit sphere,
//! golden-section maximization, bracketed bisection, adaptive Simpson
//! quadrature, smoothstep, and the quintic Hermite blend.

use std::fmt;

/// Surface tension of the planar transition profile: 2*sqrt(2)/3.
pub fn c0() -> f64 {
    2.0 * std::f64::consts::SQRT_2 / 3.0
}

#[derive(Debug, Clone, PartialEq)]
pub enum NumericsError {
    /// Bisection needs f(lo) and f(hi) of opposite sign.
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    /// Iteration cap reached before the requested tolerance.
    MaxIterations { iters: usize, last: f64 },
}

impl fmt::Display for NumericsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericsError::NoSignChange { lo, hi, f_lo, f_hi } => write!(
                f,
                "no sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}"
            ),
            NumericsError::MaxIterations { iters, last } => {
                write!(f, "no convergence after {iters} iterations (last x={last})")
            }
        }
    }
}

impl std::error::Error for NumericsError {}

/// ln Gamma(m/2) for positive integer m, by the recursion
/// Gamma(x+1) = x Gamma(x) from Gamma(1/2) = sqrt(pi) or Gamma(1) = 1.
fn ln_gamma_half(m: u32) -> f64 {
    assert!(m >= 1, "ln_gamma_half needs m >= 1");
    let mut acc;
    let mut k;
    if m % 2 == 1 {
        acc = 0.5 * std::f64::consts::PI.ln(); // ln Gamma(1/2)
        k = 1;
    } else {
        acc = 0.0; // ln Gamma(1)
        k = 2;
    }
    while k < m {
        acc += (k as f64 / 2.0).ln();
        k += 2;
    }
    acc
}

/// Surface area of the unit (d-1)-sphere in R^d: 2 pi^{d/2} / Gamma(d/2).
/// Evaluated in log space so large d cannot overflow intermediates.
pub fn sphere_area(d: u32) -> f64 {
    assert!(d >= 1, "sphere_area needs d >= 1");
    let ln_area = std::f64::consts::LN_2 + (d as f64 / 2.0) * std::f64::consts::PI.ln()
        - ln_gamma_half(d);
    ln_area.exp()
}

/// Golden-section search for the maximum of `f` on `[a, b]`.
///
/// Returns `(x_max, f_max)`. `tol` is the absolute tolerance in x.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bisection root on `[lo, hi]`, which must bracket a sign change.
///
/// Stops when the interval shrinks below `rel_tol * max(1, |mid|)`.
pub fn bisect(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64, NumericsError> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(NumericsError::NoSignChange { lo, hi, f_lo, f_hi });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_tol * mid.abs().max(1.0) {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(NumericsError::MaxIterations { iters: max_iter, last: 0.5 * (lo + hi) })
}

fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        // Richardson correction of the composite estimate.
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
            + adaptive_step(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    adaptive_step(&f, a, fa, b, fb, fm, whole, tol, 48)
}

/// Cubic smoothstep: 0 for t <= 0, 1 for t >= 1, 3t^2 - 2t^3 between.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * (3.0 - 2.0 * t)
    }
}

/// Quintic Hermite interpolant on [0, 1] with prescribed value, first and
/// second derivative at both ends (derivatives in unit-interval scale).
pub fn quintic_hermite(t: f64, p0: f64, m0: f64, s0: f64, p1: f64, m1: f64, s1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h21 = 0.5 * t3 - t4 + 0.5 * t5;
    p0 * h00 + m0 * h10 + s0 * h20 + p1 * h01 + m1 * h11 + s1 * h21
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas_match_closed_forms() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
        // Large d stays finite and positive.
        assert!(sphere_area(200) > 0.0 && sphere_area(200).is_finite());
    }

    #[test]
    fn c0_value() {
        assert!((c0() - 0.942_809_041_582_063_4).abs() < 1e-15);
    }

    #[test]
    fn golden_max_finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 2.0) * (x - 2.0) + 3.0, 0.0, 5.0, 1e-10);
        // Near a smooth peak the abscissa is sqrt(eps)-limited by roundoff.
        assert!((x - 2.0).abs() < 1e-6);
        assert!((fx - 3.0).abs() < 1e-13);
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bisect_rejects_same_sign() {
        let e = bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).unwrap_err();
        match e {
            NumericsError::NoSignChange { .. } => {}
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn simpson_polynomial_and_arctan() {
        let i = adaptive_simpson(|x| x * x * x, 0.0, 1.0, 1e-12);
        assert!((i - 0.25).abs() < 1e-12);
        let j = adaptive_simpson(|x| 1.0 / (1.0 + x * x), 0.0, 1.0, 1e-12);
        assert!((j - PI / 4.0).abs() < 1e-11);
    }

    #[test]
    fn smoothstep_plateaus_and_midpoint() {
        assert_eq!(smoothstep(-0.5), 0.0);
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
        // Monotone on a fine grid.
        let mut prev = 0.0;
        for k in 1..=1000 {
            let v = smoothstep(k as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn quintic_hermite_endpoint_data() {
        let (p0, m0, s0, p1, m1, s1) = (0.3, -1.2, 0.7, -1.0, 0.0, 0.0);
        let h = |t: f64| quintic_hermite(t, p0, m0, s0, p1, m1, s1);
        assert!((h(0.0) - p0).abs() < 1e-15);
        assert!((h(1.0) - p1).abs() < 1e-15);
        // Taylor check at both ends: H(e) = p + m e + s e^2/2 + O(e^3).
        let e = 1e-3;
        assert!((h(e) - (p0 + m0 * e + 0.5 * s0 * e * e)).abs() < 1e-7);
        assert!((h(1.0 - e) - (p1 - m1 * e + 0.5 * s1 * e * e)).abs() < 1e-7);
    }
}

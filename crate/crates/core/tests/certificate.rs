//! Certificate soundness on droplet families in the regime where the
//! bound's constants exist: every certified lower bound must sit at or
//! below the measured energy gap, before and after excess truncation.

use chb_core::construction::{droplet_state, eta_for_radius};
use chb_core::field::{
    lower_bound_certificate, truncate_excess, TorusField, DEFAULT_EPSILON0,
};
use chb_core::params::{Dim, ModelParams};

fn soundness_tol(gap: f64) -> f64 {
    1e-9 * (1.0 + gap.abs())
}

#[test]
fn droplet_family_certificates_are_sound() {
    let d = Dim::new(2).unwrap();
    let phi = 0.001;
    let r = 1.2;
    for l in [250.0, 350.0] {
        let params = ModelParams::new(d, l, phi).unwrap();
        let n = (l / 0.4).ceil() as usize;
        let kappa = phi.cbrt();
        let eta_lo = eta_for_radius(r, &params);
        let mut nonvacuous = 0usize;
        for i in 0..8 {
            let eta = eta_lo + (1.0 - eta_lo) * i as f64 / 7.0;
            let (u, _) = droplet_state(eta, r, &params, n).unwrap();
            let t = truncate_excess(&u, &params, kappa).unwrap();
            let cert = lower_bound_certificate(&t, &params, DEFAULT_EPSILON0).unwrap();
            let gap = t.energy_gap(&params).unwrap();

            assert!(cert.hypotheses_ok, "volume window failed: {}", cert.reason);
            // The smallest droplets are all interface and never reach the
            // +1-phase detection band, so their bound is a trivial zero.
            if cert.v > 0.0 {
                assert!(cert.bound_offcritical > 0.0, "vacuous bound at eta {eta}");
                nonvacuous += 1;
            }
            assert!(
                cert.bound_offcritical <= gap + soundness_tol(gap),
                "unsound bound at L {l} eta {eta}: bound {} vs gap {gap}",
                cert.bound_offcritical
            );
            if let Some(b) = cert.bound_critical {
                assert!(b <= gap + soundness_tol(gap), "unsound sharper bound: {b} vs {gap}");
            }
        }
        assert!(nonvacuous >= 4, "family barely exercises the bound: {nonvacuous}/8");
    }
}

#[test]
fn truncation_composes_with_certificate() {
    // A spike on the droplet plateau exceeds the truncation ceiling; after
    // truncation the certificate must still undercut the measured gap.
    let d = Dim::new(2).unwrap();
    let phi = 0.001;
    let params = ModelParams::new(d, 250.0, phi).unwrap();
    let n = 626;
    let kappa = phi.cbrt();
    for eta in [0.3, 0.6, 0.9] {
        let (u, _) = droplet_state(eta, 1.2, &params, n).unwrap();
        let mut spiked = u.clone();
        spike_center(&mut spiked, 0.6, 3.0);
        spiked.project_mean(params.mean());

        let t = truncate_excess(&spiked, &params, kappa).unwrap();
        assert!(
            t.values().iter().all(|&v| v <= 1.0 + kappa + 1e-12),
            "ceiling violated at eta {eta}"
        );
        assert!((t.mean() - params.mean()).abs() < 1e-10, "mean drifted at eta {eta}");
        assert!(
            t.energy() <= spiked.energy() + 1e-12 * (1.0 + spiked.energy().abs()),
            "truncation raised the energy at eta {eta}"
        );

        let cert = lower_bound_certificate(&t, &params, DEFAULT_EPSILON0).unwrap();
        let gap = t.energy_gap(&params).unwrap();
        assert!(
            cert.bound_offcritical <= gap + soundness_tol(gap),
            "unsound bound after truncation at eta {eta}: {} vs {gap}",
            cert.bound_offcritical
        );
    }
}

/// Add a compact bump of the given height and width at the domain center.
fn spike_center(u: &mut TorusField, height: f64, width: f64) {
    let n = u.n();
    let l = u.l();
    let h = l / n as f64;
    let center = (n / 2) as f64 * h - 0.5 * l;
    let dd = u.d().get() as usize;
    let vals = u.values_mut();
    // Row-major index decode per axis, matching TorusField's layout.
    for (idx, v) in vals.iter_mut().enumerate() {
        let mut rem = idx;
        let mut dist2 = 0.0;
        for _ in 0..dd {
            let x = (rem % n) as f64 * h - 0.5 * l;
            rem /= n;
            let w = chb_core::field::torus_wrap(x - center, l);
            dist2 += w * w;
        }
        let s = dist2.sqrt() / width;
        if s < 1.0 {
            *v += height * (1.0 - s * s).powi(2);
        }
    }
}

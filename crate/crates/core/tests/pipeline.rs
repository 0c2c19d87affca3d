//! Cross-module checks: sample → φ_Λ → ψ → certificate, and the estimators
//! against each other.

use std::f64::consts::PI;

use steinhaus::blaschke::{criterion_sum, phi_lambda};
use steinhaus::criteria::evaluate_criteria;
use steinhaus::majorant::{build_psi, certify_majorant, poisson_extension_step, CERTIFICATE_TOL};
use steinhaus::quad::QuadOptions;
use steinhaus::sequences::{sample_sequence, CountRule, RadiusProfile};
use steinhaus::stochastic::{expect_logp_rho, Method};
use steinhaus::DiskPoint;

#[test]
fn certificates_hold_on_each_profile_family() {
    let profiles = [
        RadiusProfile::geometric(0.5, 300).unwrap(),
        RadiusProfile::dyadic(CountRule::Linear, 400).unwrap(),
        RadiusProfile::power(1.0, 2.0, 400).unwrap(),
    ];
    for profile in &profiles {
        for seed in 0..3 {
            let s = sample_sequence(profile, seed);
            let t = phi_lambda(&s);
            let psi = build_psi(&t).unwrap();
            let cert = certify_majorant(&t, &psi, 2.0, CERTIFICATE_TOL);
            assert!(cert.valid, "{profile} seed {seed}: min margin {}", cert.min_margin());
            let x1 = criterion_sum(&t, 1.0).unwrap();
            assert!(cert.psi_l1 <= cert.sup_k * x1 / PI * (1.0 + 1e-12));
            assert!(cert.psi_lp.is_finite() && cert.psi_lp >= cert.psi_l1 * (1.0 - 1e-12));
            // mean value property
            let h0 = poisson_extension_step(&psi.step, &DiskPoint::ORIGIN);
            assert!((h0 - cert.psi_l1).abs() <= 1e-12 * cert.psi_l1);
        }
    }
}

#[test]
fn criteria_report_is_deterministic() {
    let s = sample_sequence(&RadiusProfile::power(1.0, 2.0, 300).unwrap(), 12);
    let a = serde_json::to_string(&evaluate_criteria(&s, &[1.0, 2.0]).unwrap()).unwrap();
    let b = serde_json::to_string(&evaluate_criteria(&s, &[1.0, 2.0]).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn estimators_agree_across_the_diagonal_grid() {
    let quad = Method::Quadrature(QuadOptions::with_rel_tol(1e-10));
    for (r, s) in [(0.9, 0.95), (0.99, 0.98), (0.5, 0.9)] {
        for p in [1.0, 2.0, 3.0] {
            let q = expect_logp_rho(r, s, p, &quad).unwrap();
            let mc = expect_logp_rho(r, s, p, &Method::MonteCarlo { n: 300_000, seed: 8 }).unwrap();
            let band = 3.0 * mc.std_error + q.achieved_error;
            assert!((q.mean - mc.mean).abs() <= band, "r={r} s={s} p={p}: {} vs {}", q.mean, mc.mean);
        }
    }
}

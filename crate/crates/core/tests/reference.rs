mod common;

use common::*;
use lame_dtn::dtn::{direct_p1, DtnExpansion};
use lame_dtn::error::DtnError;
use lame_dtn::geometry::CollarData;
use lame_dtn::lame::SymbolContext;
use lame_dtn::reference::{
    fit_decay_slope, halfspace_dtn, layered_dtn, IntegrationOptions, LayeredMedium, RampProfile,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

fn p1_value(lam: f64, mu: f64, xi: &[f64]) -> DMatrix<Complex64> {
    let c = flat_collar(xi.len() + 1, 2, lam, mu, xi.to_vec());
    direct_p1(&SymbolContext::new(&c).unwrap()).unwrap().value()
}

#[test]
fn halfspace_equals_principal_symbol() {
    let mut r = rng(201);
    for dim in [2, 3] {
        for _ in 0..4 {
            let mu = r.random_range(0.3..3.0);
            let lam = r.random_range(-mu..4.0);
            for _ in 0..5 {
                let scale = 10f64.powf(r.random_range(-1.0..2.0));
                let xi: Vec<f64> = random_xi(&mut r, dim).iter().map(|x| x * scale).collect();
                let d = halfspace_dtn(lam, mu, &xi).unwrap().dtn;
                let p = p1_value(lam, mu, &xi);
                let tol = 1e-10 * p.camax().max(1.0);
                assert!((&d - &p).camax() < tol, "dim {dim}: {}", (&d - &p).camax());
            }
        }
    }
}

#[test]
fn halfspace_at_lambda_plus_mu_zero_has_no_enhancement() {
    let mu = 1.7;
    let xi = [0.6, -0.8];
    let d = halfspace_dtn(-mu, mu, &xi).unwrap().dtn;
    for a in 0..2 {
        for b in 0..2 {
            let want = if a == b { mu } else { 0.0 };
            assert!((d[(a, b)] - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
        assert!((d[(a, 2)] - Complex64::new(0.0, -mu * xi[a])).norm() < 1e-12);
    }
    assert!((d[(2, 2)] - Complex64::new(mu, 0.0)).norm() < 1e-12);
}

#[test]
fn halfspace_rejects_inadmissible_and_zero_covector() {
    assert!(matches!(
        halfspace_dtn(1.0, 0.0, &[1.0]),
        Err(DtnError::Inadmissible(_))
    ));
    assert!(matches!(
        halfspace_dtn(-2.0, 1.0, &[1.0]),
        Err(DtnError::Inadmissible(_))
    ));
    assert!(matches!(
        halfspace_dtn(1.0, 1.0, &[0.0, 0.0]),
        Err(DtnError::InvalidInput(_))
    ));
}

fn ramp_medium() -> LayeredMedium {
    LayeredMedium {
        lam: RampProfile {
            deep: 1.0,
            delta: 0.8,
            depth: 1.0,
            power: 6,
        },
        mu: RampProfile {
            deep: 1.0,
            delta: 0.4,
            depth: 1.0,
            power: 6,
        },
    }
}

#[test]
fn layered_solution_is_stable_under_tolerance_halving() {
    let m = ramp_medium();
    for k in [8.0, 64.0] {
        let xi = [k * 0.6, k * 0.8];
        let a = layered_dtn(&m, &xi, &IntegrationOptions::default())
            .unwrap()
            .dtn;
        let fine = IntegrationOptions {
            rtol: 5e-13,
            atol: 5e-14,
            ..Default::default()
        };
        let b = layered_dtn(&m, &xi, &fine).unwrap().dtn;
        assert!(
            (&a - &b).camax() < 1e-9 * a.camax(),
            "{}",
            (&a - &b).camax()
        );
    }
}

#[test]
fn layered_step_budget_failure_reports_frequency() {
    let opts = IntegrationOptions {
        max_steps: 3,
        ..Default::default()
    };
    match layered_dtn(&ramp_medium(), &[128.0], &opts) {
        Err(DtnError::Integration { xi_norm, .. }) => assert_eq!(xi_norm, 128.0),
        other => panic!("expected integration failure, got {other:?}"),
    }
}

#[test]
fn truncated_expansion_remainder_decays_at_expected_rate() {
    let m = ramp_medium();
    let dir = [1.0];
    let collar = CollarData::euclidean(
        2,
        7,
        dir.to_vec(),
        &m.lam.to_polynomial(2),
        &m.mu.to_polynomial(2),
    )
    .unwrap();
    let p: Vec<_> = DtnExpansion::compute(&collar, 3)
        .unwrap()
        .p
        .terms
        .iter()
        .map(|t| t.value())
        .collect();
    let mut errs = vec![Vec::new(); 3];
    for j in 3..9 {
        let k = 2f64.powi(j);
        let d = layered_dtn(&m, &[k], &IntegrationOptions::default())
            .unwrap()
            .dtn;
        let mut acc = DMatrix::zeros(2, 2);
        for (t, pj) in p.iter().enumerate() {
            acc += pj * Complex64::new(k.powi(1 - t as i32), 0.0);
            errs[t].push((k, (&d - &acc).norm() / d.norm()));
        }
    }
    for (t, e) in errs.iter().enumerate() {
        let fit = fit_decay_slope(e, 0.0).unwrap();
        let target = -(t as f64 + 1.0);
        assert!(
            fit.slope <= target + 0.2,
            "{} terms: slope {}",
            t + 1,
            fit.slope
        );
    }
}

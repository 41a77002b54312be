//! Acceptance criteria. Runs as a plain binary and prints one PASS/FAIL
//! line per criterion.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use lame_dtn::dtn::{direct_p1, lowering_matrix, DtnExpansion, GroundTruthOracle};
use lame_dtn::geometry::{normal_var, xi_vars, CollarData};
use lame_dtn::jet::Jet;
use lame_dtn::lame::SymbolContext;
use lame_dtn::recovery::{f34_matrix, recover_all, KnownMetric, RecoveryOptions};
use lame_dtn::reference::{
    fit_decay_slope, halfspace_dtn, layered_dtn, IntegrationOptions, LayeredMedium, RampProfile,
};
use lame_dtn::symbol::SymbolMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = out.passed && in_time;
        if !passed {
            self.failures += 1;
        }
        println!(
            "{} [{id}] {name}: {}; runtime {:.2}s (limit {}s{})",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", exceeded" },
        );
    }
}

fn check(value: f64, tol: f64) -> bool {
    value.is_finite() && value <= tol
}

/// The randomized corpus shared by criteria 2, 3 and 7.
fn corpus(order: usize) -> Vec<CollarData> {
    (0..25)
        .map(|i| {
            let mut r = rng(1000 + i);
            random_collar(&mut r, 2 + (i % 2) as usize, order)
        })
        .collect()
}

fn principal_exactness() -> Outcome {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for dim in [2, 3] {
        for _ in 0..10 {
            let mu = r.random_range(0.2..3.0);
            let lam = r.random_range(-mu..4.0);
            for _ in 0..20 {
                let scale = 10f64.powf(r.random_range(-1.0..1.0));
                let xi: Vec<f64> = random_xi(&mut r, dim).iter().map(|x| x * scale).collect();
                let d = halfspace_dtn(lam, mu, &xi).expect("admissible half-space");
                let c = flat_collar(dim, 2, lam, mu, xi.clone());
                let p = direct_p1(&SymbolContext::new(&c).unwrap()).unwrap().value();
                worst = worst.max((&d.dtn - &p).camax());
                count += 1;
            }
        }
    }
    Outcome {
        passed: check(worst, 1e-10),
        detail: format!("max |halfspace - p1| = {worst:.2e} over {count} samples (tol 1e-10)"),
    }
}

fn factorization_identities(collars: &[CollarData]) -> Outcome {
    let (mut principal, mut sylvester, mut full) = (0.0f64, 0.0f64, 0.0f64);
    for c in collars {
        let exp = DtnExpansion::compute(c, 4).expect("expansion");
        let f = &exp.factorization;
        principal = principal.max(f.residual(&exp.q, 2).unwrap());
        for s in &exp.q.sylvester_residuals {
            sylvester = sylvester.max(*s);
        }
        for r in [2, 1, 0, -1] {
            full = full.max(f.residual(&exp.q, r).unwrap());
        }
    }
    Outcome {
        passed: check(principal, 1e-12) && check(sylvester, 1e-11) && check(full, 1e-10),
        detail: format!(
            "q1^2 - b1 q1 + c2 = {principal:.2e} (tol 1e-12), Sylvester = {sylvester:.2e} (tol 1e-11), \
             full symbol degrees 2..-1 = {full:.2e} (tol 1e-10) on {} collars",
            collars.len()
        ),
    }
}

fn two_routes(collars: &[CollarData]) -> Outcome {
    let mut worst: f64 = 0.0;
    for c in collars {
        let exp = DtnExpansion::compute(c, 1).expect("expansion");
        let direct = direct_p1(&exp.factorization.ctx).unwrap();
        worst = worst.max(exp.p.terms[0].distance(&direct));
    }
    Outcome {
        passed: check(worst, 1e-11),
        detail: format!("max |(A q1 - d1) - p1 display| = {worst:.2e} (tol 1e-11)"),
    }
}

fn normal_slice(c: &CollarData, f: &Jet, k: usize) -> Jet {
    let mut vars = xi_vars(c.dim());
    vars.push(normal_var(c.dim()));
    f.partial_multi(&[normal_var(c.dim())], &[k as u8])
        .fix_vars(&vars)
}

fn recovery_round_trip() -> Outcome {
    let opts = RecoveryOptions::default();
    let (mut rel, mut spread) = (0.0f64, 0.0f64);
    let mut failed = Vec::new();
    for i in 0..25u64 {
        let mut r = rng(2000 + i);
        let dim = 2 + (i % 2) as usize;
        let truth = random_collar(&mut r, dim, 5);
        let oracle = GroundTruthOracle::new(truth.clone(), 3).unwrap();
        let metric = KnownMetric::from_collar(&truth);
        let other_xi = random_xi(&mut r, dim);
        let (a, b) = match (
            recover_all(&oracle, &metric, truth.xi0(), 2, &opts),
            recover_all(&oracle, &metric, &other_xi, 2, &opts),
        ) {
            (Ok(a), Ok(b)) if a.is_complete() && b.is_complete() => (a, b),
            (a, b) => {
                failed.push(format!(
                    "collar {i}: {:?} / {:?}",
                    a.map(|x| x.failure),
                    b.map(|x| x.failure)
                ));
                continue;
            }
        };
        for k in 0..=2 {
            for (got, field) in [(&a.lam_jets[k], truth.lam()), (&a.mu_jets[k], truth.mu())] {
                let want = normal_slice(&truth, field, k);
                let order = got.order().min(want.order());
                let err = (&got.truncated(order) - &want.truncated(order)).max_norm();
                rel = rel.max(err / want.max_norm().max(1.0));
            }
            spread = spread
                .max((a.lam_values()[k] - b.lam_values()[k]).abs())
                .max((a.mu_values()[k] - b.mu_values()[k]).abs());
        }
    }
    Outcome {
        passed: failed.is_empty() && check(rel, 1e-8) && check(spread, 1e-9),
        detail: format!(
            "orders 0..2 with tangential jets: relative error {rel:.2e} (tol 1e-8), \
             probe-direction spread {spread:.2e} (tol 1e-9), {} failed recoveries{}",
            failed.len(),
            if failed.is_empty() {
                String::new()
            } else {
                format!(" [{}]", failed.join("; "))
            }
        ),
    }
}

fn determinant_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for mu in [0.1, 0.5, 1.0, 2.0, 7.5] {
        for s in [0.0, 0.01, 0.3, 0.5, 1.0, 2.0, 3.3, 5.0, 10.0, 100.0] {
            let lam = s - mu;
            let m = f34_matrix(lam, mu);
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let want = mu * (lam + 3.0 * mu).powi(2);
            let scale = (m[0][0] * m[1][1]).abs() + (m[0][1] * m[1][0]).abs() + want.abs();
            worst = worst.max((det - want).abs() / (f64::EPSILON * scale));
            points += 1;
        }
    }
    Outcome {
        passed: points == 50 && check(worst, 8.0),
        detail: format!(
            "max |det - mu(lambda+3mu)^2| = {worst:.2} ulp of the term scale over {points} points incl. lambda+mu=0 (tol 8 ulp)"
        ),
    }
}

fn decay_experiment(dim: usize, medium: &LayeredMedium, dir: &[f64]) -> Result<[f64; 3], String> {
    let collar = CollarData::euclidean(
        dim,
        7,
        dir.to_vec(),
        &medium.lam.to_polynomial(dim),
        &medium.mu.to_polynomial(dim),
    )
    .map_err(|e| e.to_string())?;
    let p: Vec<DMatrix<Complex64>> = DtnExpansion::compute(&collar, 3)
        .map_err(|e| e.to_string())?
        .p
        .terms
        .iter()
        .map(SymbolMatrix::value)
        .collect();
    let mut errs = vec![Vec::new(); 3];
    for j in 3..9 {
        let k = 2f64.powi(j);
        let xi: Vec<f64> = dir.iter().map(|x| x * k).collect();
        let d = layered_dtn(medium, &xi, &IntegrationOptions::default())
            .map_err(|e| e.to_string())?
            .dtn;
        let mut acc = DMatrix::zeros(dim, dim);
        for (t, pj) in p.iter().enumerate() {
            acc += pj * Complex64::new(k.powi(1 - t as i32), 0.0);
            errs[t].push((k, (&d - &acc).norm() / d.norm()));
        }
    }
    let mut slopes = [0.0; 3];
    for (t, e) in errs.iter().enumerate() {
        slopes[t] = fit_decay_slope(e, 0.0).map_err(|e| e.to_string())?.slope;
    }
    Ok(slopes)
}

fn remainder_order() -> Outcome {
    let medium = LayeredMedium {
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
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for (dim, dir) in [(2, vec![1.0]), (3, vec![0.6, 0.8])] {
        match decay_experiment(dim, &medium, &dir) {
            Ok(s) => {
                for (t, slope) in s.iter().enumerate() {
                    passed &= *slope <= -(t as f64 + 1.0) + 0.2;
                }
                parts.push(format!("n={dim}: {:.3}, {:.3}, {:.3}", s[0], s[1], s[2]));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("n={dim}: {e}"));
            }
        }
    }
    Outcome {
        passed,
        detail: format!(
            "relative-error slopes over |xi'| = 8..256 with p1 / +p0 / +p-1 = [{}] (need <= -0.8, -1.8, -2.8)",
            parts.join("; ")
        ),
    }
}

fn structural_invariants(collars: &[CollarData]) -> Outcome {
    let (mut herm, mut homog) = (0.0f64, 0.0f64);
    let mut min_eig = f64::INFINITY;
    for c in collars {
        let exp = DtnExpansion::compute(c, 4).expect("expansion");
        let gp = lowering_matrix(c) * exp.p.terms[0].value();
        herm = herm.max((&gp - gp.adjoint()).camax() / gp.camax());
        let hermitian_part = (&gp + gp.adjoint()) * Complex64::new(0.5, 0.0);
        min_eig = min_eig.min(hermitian_part.symmetric_eigenvalues().min());
        let xi3: Vec<f64> = c.xi0().iter().map(|x| 3.0 * x).collect();
        let scaled = DtnExpansion::compute(&c.with_xi(xi3).unwrap(), 4).expect("expansion");
        let xv = xi_vars(c.dim());
        for (a, b) in [(&exp.q, &scaled.q), (&exp.p, &scaled.p)] {
            for (ta, tb) in a.terms.iter().zip(&b.terms) {
                let lhs = ta.fix_vars(&xv).scale(3f64.powi(ta.degree()));
                let rhs = tb.fix_vars(&xv);
                homog = homog.max(lhs.distance(&rhs) / rhs.max_norm().max(1.0));
            }
        }
    }
    Outcome {
        passed: check(herm, 1e-13) && min_eig > 0.0 && check(homog, 1e-10),
        detail: format!(
            "G p1 anti-Hermitian part {herm:.2e} (tol 1e-13, roundoff), min eigenvalue {min_eig:.3}, \
             homogeneity defect of q and p degrees 1..-2 {homog:.2e} (tol 1e-10)"
        ),
    }
}

fn trivial_collapses() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (dim, lam, mu, xi) in [
        (2, 1.0, 1.0, vec![1.0]),
        (2, -0.5, 0.5, vec![-2.0]),
        (3, 0.3, 2.0, vec![0.4, -1.1]),
        (3, 5.0, 0.7, vec![3.0, 0.0]),
    ] {
        let exp = DtnExpansion::compute(&flat_collar(dim, 5, lam, mu, xi), 3).expect("expansion");
        for t in 1..3 {
            worst = worst
                .max(exp.q.terms[t].max_norm())
                .max(exp.p.terms[t].max_norm());
        }
        cases += 1;
    }
    Outcome {
        passed: worst == 0.0,
        detail: format!("max |q0|, |q-1|, |p0|, |p-1| over {cases} constant Euclidean inputs = {worst:e} (exact zero)"),
    }
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };
    let secs = Duration::from_secs;
    suite.run(
        1,
        "principal-symbol exactness",
        secs(5),
        principal_exactness,
    );
    let collars = corpus(6);
    suite.run(2, "factorization identities", secs(30), || {
        factorization_identities(&collars)
    });
    suite.run(3, "two-route agreement", secs(30), || two_routes(&collars));
    suite.run(
        4,
        "boundary recovery round trip",
        secs(60),
        recovery_round_trip,
    );
    suite.run(5, "determinant identity", secs(1), determinant_identity);
    suite.run(6, "asymptotic remainder order", secs(120), remainder_order);
    suite.run(7, "structural invariants", secs(60), || {
        structural_invariants(&collars)
    });
    suite.run(8, "trivial collapses", secs(10), trivial_collapses);
    if suite.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}

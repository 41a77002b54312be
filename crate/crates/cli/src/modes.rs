use lame_dtn::dtn::{direct_p1, lowering_matrix, DtnExpansion, GroundTruthOracle};
use lame_dtn::error::DtnError;
use lame_dtn::geometry::{normal_var, xi_vars, CollarData, Polynomial};
use lame_dtn::recovery::{recover_all, BoundaryRecovery, KnownMetric, RecoveryOptions};
use lame_dtn::reference::{
    fit_decay_slope, halfspace_dtn, layered_dtn, DecayFit, IntegrationOptions,
};
use lame_dtn::symbol::SymbolReport;
use log::{debug, info};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::report::{Check, ErrorRecord};
use crate::CliError;

/// Result of one mode run, before the report envelope is added.
pub struct ModeOutput {
    pub body: serde_json::Value,
    pub checks: Vec<Check>,
    pub errors: Vec<ErrorRecord>,
    pub csv: Option<DecayTable>,
}

pub fn run(cfg: &ExperimentConfig, mode: Mode) -> Result<ModeOutput, CliError> {
    match mode {
        Mode::Symbols => symbols(cfg),
        Mode::Residuals => residuals(cfg),
        Mode::Recover => recover(cfg),
        Mode::ValidateHalfspace => validate_halfspace(cfg),
        Mode::ValidateLayered => validate_layered(cfg),
    }
}

fn to_value<T: Serialize>(t: &T) -> serde_json::Value {
    serde_json::to_value(t).expect("report types serialize")
}

fn record(context: String, e: impl std::fmt::Display) -> ErrorRecord {
    ErrorRecord {
        context,
        message: e.to_string(),
    }
}

/// Runs `job` over the covector list in parallel, keeping input order.
fn per_xi<T: Send>(
    cfg: &ExperimentConfig,
    job: impl Fn(&CollarData) -> Result<T, DtnError> + Sync,
) -> (Vec<T>, Vec<ErrorRecord>) {
    let results: Vec<_> = cfg
        .xi
        .par_iter()
        .enumerate()
        .map(|(i, xi)| {
            debug!("job xi[{i}] = {xi:?}");
            let collar = cfg.collar(xi).map_err(|e| record(format!("xi[{i}]"), e))?;
            job(&collar).map_err(|e| record(format!("xi[{i}]"), e))
        })
        .collect();
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => errors.push(e),
        }
    }
    (ok, errors)
}

#[derive(Serialize)]
struct SymbolsEntry {
    xi: Vec<f64>,
    q: Vec<SymbolReport>,
    p: Vec<SymbolReport>,
    p1_direct: SymbolReport,
    sylvester_residuals: Vec<f64>,
    route_disagreement: Vec<f64>,
    two_route_gap: f64,
    hermitian_defect: f64,
    /// Eigenvalues of `G p_1`, ascending.
    lowered_p1_eigenvalues: Vec<f64>,
}

fn symbols(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let (entries, errors) = per_xi(cfg, |c| {
        let exp = DtnExpansion::compute(c, cfg.depth)?;
        let direct = direct_p1(&exp.factorization.ctx)?;
        let gp = lowering_matrix(c) * exp.p.terms[0].value();
        let hermitian_defect = (&gp - gp.adjoint()).camax() / gp.camax();
        let mut eig: Vec<f64> = ((&gp + gp.adjoint()) * Complex64::new(0.5, 0.0))
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        Ok(SymbolsEntry {
            xi: c.xi0().to_vec(),
            q: exp.q.terms.iter().map(|t| t.report()).collect(),
            p: exp.p.terms.iter().map(|t| t.report()).collect(),
            p1_direct: direct.report(),
            two_route_gap: exp.p.terms[0].distance(&direct),
            sylvester_residuals: exp.q.sylvester_residuals.clone(),
            route_disagreement: exp.q.route_disagreement.clone(),
            hermitian_defect,
            lowered_p1_eigenvalues: eig,
        })
    });
    let tol = &cfg.tolerances;
    let max = |f: &dyn Fn(&SymbolsEntry) -> f64| entries.iter().map(f).fold(0.0, f64::max);
    let sylvester = max(&|e| e.sylvester_residuals.iter().copied().fold(0.0, f64::max));
    let min_eig = entries
        .iter()
        .flat_map(|e| e.lowered_p1_eigenvalues.first().copied())
        .fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::at_most("p1 two-route gap", max(&|e| e.two_route_gap), tol.two_route),
        Check::at_most("sylvester residual", sylvester, tol.sylvester),
        Check::at_most(
            "G p1 hermitian defect",
            max(&|e| e.hermitian_defect),
            tol.hermitian,
        ),
        Check::above("G p1 min eigenvalue", min_eig, 0.0),
    ];
    Ok(ModeOutput {
        body: to_value(&serde_json::json!({ "entries": entries })),
        checks,
        errors,
        csv: None,
    })
}

#[derive(Serialize)]
struct ResidualEntry {
    xi: Vec<f64>,
    degrees: Vec<i32>,
    residuals: Vec<f64>,
}

fn residuals(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let degrees: Vec<i32> = (3 - cfg.depth as i32..=2).rev().collect();
    let (entries, errors) = per_xi(cfg, |c| {
        let exp = DtnExpansion::compute(c, cfg.depth)?;
        let residuals = degrees
            .iter()
            .map(|&r| exp.factorization.residual(&exp.q, r))
            .collect::<Result<Vec<f64>, DtnError>>()?;
        Ok(ResidualEntry {
            xi: c.xi0().to_vec(),
            degrees: degrees.clone(),
            residuals,
        })
    });
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();
    for (i, &r) in degrees.iter().enumerate() {
        let worst = entries.iter().map(|e| e.residuals[i]).fold(0.0, f64::max);
        let threshold = if r == 2 { tol.principal } else { tol.residual };
        checks.push(Check::at_most(
            format!("full symbol residual, degree {r}"),
            worst,
            threshold,
        ));
    }
    Ok(ModeOutput {
        body: to_value(&serde_json::json!({ "entries": entries })),
        checks,
        errors,
        csv: None,
    })
}

#[derive(Serialize)]
struct RecoveryRow {
    order: usize,
    lambda: f64,
    lambda_truth: f64,
    mu: f64,
    mu_truth: f64,
}

fn normal_slice(c: &CollarData, f: &lame_dtn::jet::Jet, k: usize) -> lame_dtn::jet::Jet {
    let mut vars = xi_vars(c.dim());
    vars.push(normal_var(c.dim()));
    f.partial_multi(&[normal_var(c.dim())], &[k as u8])
        .fix_vars(&vars)
}

fn recover(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let m_max = cfg.recover.m_max;
    let truth = cfg.collar(&cfg.xi[0])?;
    let oracle = GroundTruthOracle::new(truth.clone(), m_max + 1)
        .map_err(|e| CliError::config("recover.m_max", e.to_string()))?;
    let metric = KnownMetric::from_collar(&truth);
    let opts = RecoveryOptions::default();
    info!(
        "recovering orders 0..={m_max} along {} covectors",
        cfg.xi.len()
    );
    let runs: Vec<Result<BoundaryRecovery, DtnError>> = cfg
        .xi
        .par_iter()
        .map(|xi| recover_all(&oracle, &metric, xi, m_max, &opts))
        .collect();
    let mut errors = Vec::new();
    let mut recs = Vec::new();
    for (i, r) in runs.into_iter().enumerate() {
        match r {
            Ok(rec) => {
                if let Some(f) = &rec.failure {
                    errors.push(record(format!("xi[{i}] order {}", f.order), &f.message));
                }
                recs.push(rec);
            }
            Err(e) => errors.push(record(format!("xi[{i}]"), e)),
        }
    }
    let truth_lam: Vec<_> = (0..=m_max)
        .map(|k| normal_slice(&truth, truth.lam(), k))
        .collect();
    let truth_mu: Vec<_> = (0..=m_max)
        .map(|k| normal_slice(&truth, truth.mu(), k))
        .collect();
    let mut rel: f64 = 0.0;
    for rec in &recs {
        for (k, (l, m)) in rec.lam_jets.iter().zip(&rec.mu_jets).enumerate() {
            for (got, want) in [(l, &truth_lam[k]), (m, &truth_mu[k])] {
                let order = got.order().min(want.order());
                let err = (&got.truncated(order) - &want.truncated(order)).max_norm();
                rel = rel.max(err / want.max_norm().max(1.0));
            }
        }
    }
    let mut spread: f64 = 0.0;
    if let Some(first) = recs.first() {
        for rec in &recs[1..] {
            for (a, b) in first.lam_values().iter().zip(rec.lam_values()) {
                spread = spread.max((a - b).abs());
            }
            for (a, b) in first.mu_values().iter().zip(rec.mu_values()) {
                spread = spread.max((a - b).abs());
            }
        }
    }
    let table: Vec<RecoveryRow> = recs
        .first()
        .map(|rec| {
            (0..rec.lam_derivs.len())
                .map(|k| RecoveryRow {
                    order: k,
                    lambda: rec.lam_derivs[k].value,
                    lambda_truth: truth_lam[k].value().re,
                    mu: rec.mu_derivs[k].value,
                    mu_truth: truth_mu[k].value().re,
                })
                .collect()
        })
        .unwrap_or_default();
    let incomplete = cfg.xi.len() - recs.iter().filter(|r| r.is_complete()).count();
    let tol = &cfg.tolerances;
    let mut checks = vec![
        Check::at_most("recovery relative error", rel, tol.recovery),
        Check::at_most("incomplete recoveries", incomplete as f64, 0.0),
    ];
    if recs.len() > 1 {
        checks.push(Check::at_most(
            "probe-direction spread",
            spread,
            tol.xi_independence,
        ));
    }
    Ok(ModeOutput {
        body: serde_json::json!({
            "m_max": m_max,
            "table": table,
            "recoveries": recs,
        }),
        checks,
        errors,
        csv: None,
    })
}

#[derive(Serialize)]
struct HalfspaceEntry {
    lambda: f64,
    mu: f64,
    xi: Vec<f64>,
    max_error: f64,
}

fn halfspace_job(dim: usize, lam: f64, mu: f64, xi: &[f64]) -> Result<f64, DtnError> {
    let d = halfspace_dtn(lam, mu, xi)?;
    let c = CollarData::euclidean(
        dim,
        2,
        xi.to_vec(),
        &Polynomial::constant(lam, dim),
        &Polynomial::constant(mu, dim),
    )?;
    let p1 = direct_p1(&lame_dtn::lame::SymbolContext::new(&c)?)?.value();
    Ok((&d.dtn - &p1).camax())
}

fn validate_halfspace(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let spec = cfg.halfspace.as_ref().expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs: Vec<(f64, f64)> = spec.samples.iter().map(|s| (s.lambda, s.mu)).collect();
    for _ in 0..spec.random_pairs {
        let mu = rng.random_range(0.2..3.0);
        pairs.push((rng.random_range(-mu..4.0), mu));
    }
    let mut covectors = cfg.xi.clone();
    for _ in 0..spec.random_xi {
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let xi: Vec<f64> = loop {
            let v: Vec<f64> = (0..cfg.dim - 1)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.1 {
                break v.iter().map(|x| x / n * scale).collect();
            }
        };
        covectors.push(xi);
    }
    let jobs: Vec<(f64, f64, Vec<f64>)> = pairs
        .iter()
        .flat_map(|&(l, m)| covectors.iter().map(move |xi| (l, m, xi.clone())))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(l, m, xi)| halfspace_job(cfg.dim, *l, *m, xi))
        .collect();
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for ((lambda, mu, xi), r) in jobs.into_iter().zip(results) {
        match r {
            Ok(max_error) => entries.push(HalfspaceEntry {
                lambda,
                mu,
                xi,
                max_error,
            }),
            Err(e) => errors.push(record(format!("lambda={lambda}, mu={mu}, xi={xi:?}"), e)),
        }
    }
    let tol = cfg.tolerances.halfspace;
    let worst = entries.iter().map(|e| e.max_error).fold(0.0, f64::max);
    let samples: Vec<(f64, f64)> = entries
        .iter()
        .map(|e| (e.xi.iter().map(|x| x * x).sum::<f64>().sqrt(), e.max_error))
        .collect();
    let fit = fit_decay_slope(&samples, tol).ok();
    let verdict = if !entries.is_empty() && worst <= tol {
        "exact agreement"
    } else {
        "disagreement"
    };
    Ok(ModeOutput {
        body: serde_json::json!({
            "verdict": verdict,
            "max_error": worst,
            "exact_agreement_sentinel": fit.as_ref().map(DecayFit::is_exact),
            "entries": entries,
        }),
        checks: vec![Check::at_most("halfspace vs p1 max error", worst, tol)],
        errors,
        csv: None,
    })
}

/// Decay data: one row per frequency, one error column per truncation.
#[derive(Debug, Clone, Serialize)]
pub struct DecayTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn truncation_name(terms: usize) -> String {
    let mut name = String::from("err_");
    for t in 0..terms {
        name.push_str(&match 1 - t as i32 {
            1 => "p1".to_string(),
            0 => "p0".to_string(),
            d => format!("pm{}", -d),
        });
    }
    name
}

fn validate_layered(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let profile = cfg.profile.expect("validated");
    let spec = cfg.layered.as_ref().expect("validated");
    let medium = cfg.medium_of(&profile);
    let norm = spec.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dir: Vec<f64> = spec.direction.iter().map(|x| x / norm).collect();
    let dim = cfg.dim;
    let collar = CollarData::euclidean(
        dim,
        cfg.order,
        dir.clone(),
        &profile.lambda.to_polynomial(dim),
        &profile.mu.to_polynomial(dim),
    )
    .map_err(|e| CliError::config("profile", e.to_string()))?;
    let p: Vec<_> = DtnExpansion::compute(&collar, cfg.depth)
        .map_err(|e| CliError::config("depth", e.to_string()))?
        .p
        .terms
        .iter()
        .map(|t| t.value())
        .collect();
    let opts = IntegrationOptions {
        rtol: spec.rtol,
        atol: spec.atol,
        ..Default::default()
    };
    info!("layered solves at {} frequencies", spec.xi_norms.len());
    let results: Vec<_> = spec
        .xi_norms
        .par_iter()
        .map(|&k| {
            let xi: Vec<f64> = dir.iter().map(|x| x * k).collect();
            layered_dtn(&medium, &xi, &opts).map(|s| {
                let mut acc = s.dtn.clone() * Complex64::new(0.0, 0.0);
                let scale = s.dtn.norm();
                let mut row = vec![k];
                for (t, pj) in p.iter().enumerate() {
                    acc += pj * Complex64::new(k.powi(1 - t as i32), 0.0);
                    row.push((&s.dtn - &acc).norm() / scale);
                }
                row
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (k, r) in spec.xi_norms.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => errors.push(record(format!("|xi'| = {k}"), e)),
        }
    }
    let mut headers = vec!["xi_norm".to_string()];
    headers.extend((1..=p.len()).map(truncation_name));
    let mut fits = Vec::new();
    let mut checks = Vec::new();
    if errors.is_empty() {
        for t in 0..p.len() {
            let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[t + 1])).collect();
            let target = -(t as f64 + 1.0);
            match fit_decay_slope(&samples, 0.0) {
                Ok(fit) => {
                    checks.push(Check::at_most(
                        format!("relative error slope with {} terms", t + 1),
                        fit.slope,
                        target + cfg.tolerances.slope_slack,
                    ));
                    fits.push(serde_json::json!({ "column": headers[t + 1], "target": target, "fit": fit }));
                }
                Err(e) => errors.push(record(headers[t + 1].clone(), e)),
            }
        }
    }
    let table = DecayTable { headers, rows };
    Ok(ModeOutput {
        body: serde_json::json!({
            "direction": dir,
            "error_kind": "relative Frobenius error against the layered DtN matrix",
            "table": table,
            "fits": fits,
        }),
        checks,
        errors,
        csv: Some(table),
    })
}

#[cfg(test)]
mod tests {
    use super::truncation_name;

    #[test]
    fn csv_column_names() {
        assert_eq!(truncation_name(1), "err_p1");
        assert_eq!(truncation_name(2), "err_p1p0");
        assert_eq!(truncation_name(3), "err_p1p0pm1");
    }
}

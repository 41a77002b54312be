//! Boundary determination of the Lamé coefficients from DtN symbols.
//!
//! Order 0 reads `lambda`, `mu` off `p_1`. Each higher order `k` recovers
//! `(d_n^k lambda, d_n^k mu)` by affine probing: the forward pipeline is run
//! on a trial collar carrying the recovered lower orders, with the unknown
//! pair set to `(0,0)`, `(1,0)`, `(0,1)`, and the resulting affine system is
//! matched against the oracle in least squares.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::dtn::{restrict, DtNSymbolOracle, DtnExpansion};
use crate::error::{DtnError, Result};
use crate::geometry::{normal_var, CollarData, Polynomial};
use crate::jet::{multi_factorial, Jet, JetSpace};
use crate::lame::SymbolContext;
use crate::symbol::{invert, SymbolMatrix};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Metric data known to the recovery stage.
#[derive(Debug, Clone)]
pub struct KnownMetric {
    dim: usize,
    space: Arc<JetSpace>,
    g_lower: Vec<Vec<Jet>>,
    base_point: Vec<f64>,
}

impl KnownMetric {
    /// Keeps only the metric of a collar.
    pub fn from_collar(c: &CollarData) -> KnownMetric {
        KnownMetric {
            dim: c.dim(),
            space: c.space().clone(),
            g_lower: c.g_lower().to_vec(),
            base_point: c.base_point().to_vec(),
        }
    }

    pub fn from_polynomials(
        dim: usize,
        order: usize,
        base_point: Vec<f64>,
        metric: &[Vec<Polynomial>],
    ) -> Result<KnownMetric> {
        let one = Polynomial::constant(1.0, dim);
        let mut xi = vec![0.0; dim - 1];
        xi[0] = 1.0;
        let c = CollarData::from_polynomials(dim, order, base_point, xi, metric, &one, &one)?;
        Ok(KnownMetric::from_collar(&c))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    /// Collar with this metric and the given Lamé jets.
    pub fn collar(&self, lam: Jet, mu: Jet, xi: &[f64]) -> Result<CollarData> {
        CollarData::new(
            self.dim,
            self.g_lower.clone(),
            lam,
            mu,
            self.base_point.clone(),
            xi.to_vec(),
        )
    }
}

/// Tuning for the recovery solves.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryOptions {
    /// Relative least-squares residual above which the data are rejected.
    pub inconsistency_tol: f64,
    /// Condition number above which a warning is recorded.
    pub condition_warn: f64,
    /// Size of the unit probes.
    pub probe_scale: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            inconsistency_tol: 1e-6,
            condition_warn: 1e10,
            probe_scale: 1.0,
        }
    }
}

/// `mu = (f1+f2)/2`, `lambda = mu (f2/f1 - 2)`.
pub fn lame_from_f(f1: f64, f2: f64) -> Result<(f64, f64)> {
    if f1 <= 0.0 || f2 <= 0.0 {
        return Err(DtnError::DataInconsistency(format!(
            "f1 = {f1}, f2 = {f2}; both must be positive"
        )));
    }
    let mu = 0.5 * (f1 + f2);
    Ok((mu * (f2 / f1 - 2.0), mu))
}

/// `(f3, f4)` as functions of `(d_n lambda, d_n mu)` at a boundary point.
pub fn f34(lam: f64, mu: f64, dlam: f64, dmu: f64) -> (f64, f64) {
    let l3 = (lam + 3.0 * mu).powi(2);
    let f3 = 2.0 / l3 * (mu * dlam - (2.0 * lam + 3.0 * mu) * dmu);
    let f4 = 2.0 / ((lam + 2.0 * mu) * l3)
        * (mu * mu * dlam + (lam * lam + 4.0 * lam * mu + 6.0 * mu * mu) * dmu);
    (f3, f4)
}

/// The bracketed matrix `[[mu, -(2lambda+3mu)], [mu^2, lambda^2+4lambda mu+6mu^2]]`.
pub fn f34_matrix(lam: f64, mu: f64) -> [[f64; 2]; 2] {
    [
        [mu, -(2.0 * lam + 3.0 * mu)],
        [mu * mu, lam * lam + 4.0 * lam * mu + 6.0 * mu * mu],
    ]
}

/// Serializable tangential Taylor expansion of a recovered quantity.
#[derive(Debug, Clone, Serialize)]
pub struct TangentialJet {
    /// Usable order in the tangential variables.
    pub order: i32,
    pub value: f64,
    /// Taylor coefficients by tangential exponent.
    pub terms: Vec<TangentialTerm>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentialTerm {
    pub powers: Vec<u8>,
    pub coeff: f64,
}

impl TangentialJet {
    fn from_jet(j: &Jet, dim: usize) -> TangentialJet {
        let space = j.space();
        let terms = (0..space.len())
            .filter(|&i| space.degree(i) as i32 <= j.order())
            .filter_map(|i| {
                let e = space.exponents(i);
                let c = j.coeffs()[i].re;
                (c != 0.0 && e[dim - 1..].iter().all(|&p| p == 0)).then(|| TangentialTerm {
                    powers: e[..dim - 1].to_vec(),
                    coeff: c,
                })
            })
            .collect();
        TangentialJet {
            order: j.order(),
            value: j.value().re,
            terms,
        }
    }
}

/// Outcome of one recovery order.
#[derive(Debug, Clone)]
pub struct OrderRecovery {
    pub order: usize,
    pub lam: Jet,
    pub mu: Jet,
    /// Relative residual of the overdetermined solve.
    pub residual: f64,
    pub condition: f64,
    /// Gap between the solutions from the `(a,n)` and `(n,b)` subsystems.
    pub subsystem_gap: f64,
}

/// `p_1` entries as tangential jets: `(p_1)^n_b = i f1 xi_b`,
/// `(p_1)^n_n = f2 |xi'|`.
fn f_jets(p1: &SymbolMatrix, xi: &[f64], xi_norm: &Jet) -> Result<(Jet, Jet, f64)> {
    let nn = p1.dim() - 1;
    let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
    let mut f1 = Jet::zero(p1.space());
    for (b, &x) in xi.iter().enumerate() {
        f1 += &p1.get(nn, b).scale(x);
    }
    let f1 = f1.scale(-I / xi_sq);
    let f2 = p1.get(nn, nn) * &xi_norm.inv("|xi'|")?;
    let mut defect = f1.im().max_norm().max(f2.im().max_norm());
    for (b, &x) in xi.iter().enumerate() {
        defect = defect.max((p1.get(nn, b) - &f1.scale(I * x)).max_norm());
    }
    let scale = f1.max_norm().max(f2.max_norm());
    Ok((f1.re(), f2.re(), defect / scale))
}

/// Order-0 recovery: `lambda`, `mu` and their tangential jets from `p_1`.
pub fn recover_order0(
    oracle: &dyn DtNSymbolOracle,
    metric: &KnownMetric,
    xi: &[f64],
    opts: &RecoveryOptions,
) -> Result<OrderRecovery> {
    let dim = metric.dim();
    let zero = vec![0.0; dim - 1];
    let p1 = oracle.symbol(1, &zero, xi)?;
    let space = metric.space();
    let probe = metric.collar(Jet::constant(space, 0.0), Jet::constant(space, 1.0), xi)?;
    let ctx = SymbolContext::new(&probe)?;
    let xi_norm = ctx.xi_norm.fix_vars(&crate::dtn::boundary_vars(dim));
    let (f1, f2, residual) = f_jets(&p1, xi, &xi_norm)?;
    lame_from_f(f1.value().re, f2.value().re)?;
    if residual > opts.inconsistency_tol {
        return Err(DtnError::DataInconsistency(format!(
            "p_1 deviates from the expected pattern by {residual:e}"
        )));
    }
    let mu = (&f1 + &f2).scale(0.5);
    let ratio = &f2 * &f1.inv("f1")?;
    let lam = &mu * &ratio.add_scalar(-2.0);
    Ok(OrderRecovery {
        order: 0,
        lam,
        mu,
        residual,
        condition: 1.0,
        subsystem_gap: 0.0,
    })
}

/// `sum_j slices[j](x') x_n^j / j!` as a full-order collar jet. Each slice
/// contributes up to its own usable order.
pub fn normal_series(space: &Arc<JetSpace>, dim: usize, slices: &[Jet]) -> Jet {
    let nv = normal_var(dim);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); space.len()];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let e = space.exponents(i);
        let j = usize::from(e[nv]);
        if j >= slices.len() || e[dim..].iter().any(|&p| p > 0) {
            continue;
        }
        let slice = &slices[j];
        if (space.degree(i) - j) as i32 > slice.order() {
            continue;
        }
        let mut tangential = e.to_vec();
        tangential[nv] = 0;
        *c = Complex64::new(
            slice.coeff(&tangential).re / multi_factorial(&[j as u8]) as f64,
            0.0,
        );
    }
    Jet::from_coeffs(space, space.order() as i32, coeffs).expect("coefficients sized to space")
}

/// The affine system probed at order `k`, restricted to the boundary.
#[derive(Debug, Clone)]
pub struct ProbeSystem {
    pub order: usize,
    /// Transformed oracle data.
    pub observed: SymbolMatrix,
    /// Transformed trial data with the unknowns at zero.
    pub base: SymbolMatrix,
    /// Response per unit change of `d_n^k lambda` and `d_n^k mu`.
    pub d_lam: SymbolMatrix,
    pub d_mu: SymbolMatrix,
}

impl ProbeSystem {
    /// Evaluates the probes. `known_lam[j]`, `known_mu[j]` hold the recovered
    /// `d_n^j` slices for `j < k`.
    pub fn build(
        oracle: &dyn DtNSymbolOracle,
        metric: &KnownMetric,
        known_lam: &[Jet],
        known_mu: &[Jet],
        xi: &[f64],
        probe_scale: f64,
    ) -> Result<ProbeSystem> {
        let k = known_lam.len();
        if k == 0 || known_mu.len() != k {
            return Err(DtnError::InvalidInput(
                "probing needs the recovered orders below k".into(),
            ));
        }
        let dim = metric.dim();
        let space = metric.space();
        if metric.order() < k + 3 {
            return Err(DtnError::DerivativeBudget {
                quantity: format!("recovery of order {k}"),
                needed: k + 3,
                available: metric.order() as i32,
            });
        }
        let trial = |u: [f64; 2]| -> Result<DtnExpansion> {
            let mut lam = known_lam.to_vec();
            lam.push(Jet::constant(space, u[0]));
            let mut mu = known_mu.to_vec();
            mu.push(Jet::constant(space, u[1]));
            let c = metric.collar(
                normal_series(space, dim, &lam),
                normal_series(space, dim, &mu),
                xi,
            )?;
            DtnExpansion::compute(&c, k + 1)
        };
        let e0 = trial([0.0, 0.0])?;
        let el = trial([probe_scale, 0.0])?;
        let em = trial([0.0, probe_scale])?;

        // T(p) = S^k(A^{-1}(p + [k=1] d_0)), S(X) = (q_1 - b_1)X + X q_1
        let f = &e0.factorization;
        let a_inv = invert(&restrict(&f.sym.a), "A")?;
        let l = restrict(&f.q1_minus_b1);
        let r = restrict(&f.q1);
        let d0 = restrict(&f.sym.d0);
        let transform = |p: &SymbolMatrix| -> SymbolMatrix {
            let p = if k == 1 { p.add(&d0) } else { p.clone() };
            let mut x = a_inv.matmul(&p);
            for _ in 0..k {
                x = l.matmul(&x).add(&x.matmul(&r));
            }
            x
        };
        let pick = |e: &DtnExpansion| transform(&restrict(&e.p.terms[k]));
        let base = pick(&e0);
        let d_lam = pick(&el).sub(&base).scale(1.0 / probe_scale);
        let d_mu = pick(&em).sub(&base).scale(1.0 / probe_scale);
        let zero = vec![0.0; dim - 1];
        let observed = transform(&oracle.symbol(1 - k as i32, &zero, xi)?);
        Ok(ProbeSystem {
            order: k,
            observed,
            base,
            d_lam,
            d_mu,
        })
    }

    /// Observation entries: `(a,n)`, `(n,b)` for tangential `a`, `b`, and `(n,n)`.
    fn entries(&self, which: Subsystem) -> Vec<(usize, usize)> {
        let nn = self.observed.dim() - 1;
        let mut out = Vec::new();
        if which != Subsystem::RowNormal {
            out.extend((0..nn).map(|a| (a, nn)));
        }
        if which != Subsystem::ColumnNormal {
            out.extend((0..nn).map(|b| (nn, b)));
        }
        out.push((nn, nn));
        out
    }

    /// Real least-squares rows `[d_lam, d_mu | rhs]` as jets.
    fn rows(&self, which: Subsystem) -> Vec<[Jet; 3]> {
        let mut rows = Vec::new();
        for (r, c) in self.entries(which) {
            let rhs = self.observed.get(r, c) - self.base.get(r, c);
            let (l, m) = (self.d_lam.get(r, c), self.d_mu.get(r, c));
            rows.push([l.re(), m.re(), rhs.re()]);
            rows.push([l.im(), m.im(), rhs.im()]);
        }
        rows
    }

    /// Condition number of the constant-term system matrix.
    pub fn condition(&self) -> f64 {
        let rows = self.rows(Subsystem::All);
        let m = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j].value().re);
        let sv = m.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    fn solve_rows(rows: &[[Jet; 3]]) -> Result<[Jet; 2]> {
        let space = rows[0][0].space();
        let mut n = [Jet::zero(space), Jet::zero(space), Jet::zero(space)];
        let mut b = [Jet::zero(space), Jet::zero(space)];
        for [x, y, z] in rows {
            n[0] += &(x * x);
            n[1] += &(x * y);
            n[2] += &(y * y);
            b[0] += &(x * z);
            b[1] += &(y * z);
        }
        let det = &(&n[0] * &n[2]) - &(&n[1] * &n[1]);
        let inv = det.inv("normal-equation determinant")?;
        let u0 = &(&(&n[2] * &b[0]) - &(&n[1] * &b[1])) * &inv;
        let u1 = &(&(&n[0] * &b[1]) - &(&n[1] * &b[0])) * &inv;
        Ok([u0, u1])
    }

    /// Solves for `(d_n^k lambda, d_n^k mu)` as tangential jets.
    pub fn solve(&self, opts: &RecoveryOptions) -> Result<OrderRecovery> {
        let condition = self.condition();
        if !condition.is_finite() {
            return Err(DtnError::NearSingular { condition });
        }
        let rows = self.rows(Subsystem::All);
        let [lam, mu] = Self::solve_rows(&rows)?;
        let scale = rows
            .iter()
            .flat_map(|r| r.iter().map(Jet::max_norm))
            .fold(0.0, f64::max)
            .max(self.observed.max_norm())
            .max(f64::MIN_POSITIVE);
        let defect = rows
            .iter()
            .map(|[x, y, z]| (&(&(x * &lam) + &(y * &mu)) - z).max_norm())
            .fold(0.0, f64::max);
        let residual = defect / scale;
        if residual > opts.inconsistency_tol {
            return Err(DtnError::DataInconsistency(format!(
                "order {} observations inconsistent: relative residual {residual:e}",
                self.order
            )));
        }
        let [la, ma] = Self::solve_rows(&self.rows(Subsystem::ColumnNormal))?;
        let [lb, mb] = Self::solve_rows(&self.rows(Subsystem::RowNormal))?;
        let subsystem_gap = (&la - &lb).max_norm().max((&ma - &mb).max_norm());
        Ok(OrderRecovery {
            order: self.order,
            lam,
            mu,
            residual,
            condition,
            subsystem_gap,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Subsystem {
    All,
    /// `(a,n)` and `(n,n)`.
    ColumnNormal,
    /// `(n,b)` and `(n,n)`.
    RowNormal,
}

/// Recovers `(d_n^k lambda, d_n^k mu)` given all lower orders.
pub fn recover_normal_derivs(
    oracle: &dyn DtNSymbolOracle,
    metric: &KnownMetric,
    known_lam: &[Jet],
    known_mu: &[Jet],
    xi: &[f64],
    opts: &RecoveryOptions,
) -> Result<OrderRecovery> {
    ProbeSystem::build(oracle, metric, known_lam, known_mu, xi, opts.probe_scale)?.solve(opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryFailure {
    pub order: usize,
    pub message: String,
}

/// Recovered boundary Taylor data.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryRecovery {
    pub dim: usize,
    pub base_point: Vec<f64>,
    pub xi: Vec<f64>,
    pub m_max: usize,
    /// `d_n^k lambda` for `k = 0, 1, ...` with tangential jets.
    pub lam_derivs: Vec<TangentialJet>,
    pub mu_derivs: Vec<TangentialJet>,
    pub residuals: Vec<f64>,
    pub conditioning: Vec<f64>,
    pub subsystem_gaps: Vec<f64>,
    pub warnings: Vec<String>,
    pub failure: Option<RecoveryFailure>,
    #[serde(skip)]
    pub lam_jets: Vec<Jet>,
    #[serde(skip)]
    pub mu_jets: Vec<Jet>,
}

impl BoundaryRecovery {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.lam_jets.len() == self.m_max + 1
    }

    pub fn lam_values(&self) -> Vec<f64> {
        self.lam_derivs.iter().map(|j| j.value).collect()
    }

    pub fn mu_values(&self) -> Vec<f64> {
        self.mu_derivs.iter().map(|j| j.value).collect()
    }
}

/// Sequential recovery of orders `0..=m_max`. A failing order stops the
/// sequence; earlier orders are kept.
pub fn recover_all(
    oracle: &dyn DtNSymbolOracle,
    metric: &KnownMetric,
    xi: &[f64],
    m_max: usize,
    opts: &RecoveryOptions,
) -> Result<BoundaryRecovery> {
    if oracle.depth() < m_max + 1 {
        return Err(DtnError::DerivativeBudget {
            quantity: format!("oracle depth for m_max = {m_max}"),
            needed: m_max + 1,
            available: oracle.depth() as i32,
        });
    }
    if oracle.dim() != metric.dim() {
        return Err(DtnError::InvalidInput(format!(
            "oracle dimension {} differs from metric dimension {}",
            oracle.dim(),
            metric.dim()
        )));
    }
    let mut out = BoundaryRecovery {
        dim: metric.dim(),
        base_point: metric.base_point.clone(),
        xi: xi.to_vec(),
        m_max,
        lam_derivs: Vec::new(),
        mu_derivs: Vec::new(),
        residuals: Vec::new(),
        conditioning: Vec::new(),
        subsystem_gaps: Vec::new(),
        warnings: Vec::new(),
        failure: None,
        lam_jets: Vec::new(),
        mu_jets: Vec::new(),
    };
    for k in 0..=m_max {
        let step = if k == 0 {
            recover_order0(oracle, metric, xi, opts)
        } else {
            recover_normal_derivs(oracle, metric, &out.lam_jets, &out.mu_jets, xi, opts)
        };
        let r = match step {
            Ok(r) => r,
            Err(e) => {
                out.failure = Some(RecoveryFailure {
                    order: k,
                    message: e.to_string(),
                });
                break;
            }
        };
        if r.condition > opts.condition_warn {
            out.warnings.push(format!(
                "order {k}: condition number {:.3e} exceeds {:.1e}",
                r.condition, opts.condition_warn
            ));
        }
        if k == 0 {
            let (lam0, mu0) = (r.lam.value().re, r.mu.value().re);
            if lam0 + mu0 < -opts.inconsistency_tol * mu0 {
                out.warnings
                    .push(format!("recovered lambda + mu = {:e} < 0", lam0 + mu0));
            }
        }
        out.lam_derivs
            .push(TangentialJet::from_jet(&r.lam, metric.dim()));
        out.mu_derivs
            .push(TangentialJet::from_jet(&r.mu, metric.dim()));
        out.residuals.push(r.residual);
        out.conditioning.push(r.condition);
        out.subsystem_gaps.push(r.subsystem_gap);
        out.lam_jets.push(r.lam);
        out.mu_jets.push(r.mu);
    }
    Ok(out)
}

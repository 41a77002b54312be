//! Collar data in boundary normal coordinates: metric, Lamé coefficients,
//! inverse metric, Christoffel symbols and Ricci tensor, all as jets.
//!
//! Jets live in `2n - 1` variables: the spatial coordinates `x_1..x_n`
//! (indices `0..n`, with `x_n` the normal coordinate at index `n - 1`)
//! followed by the cotangent variables `xi_1..xi_{n-1}` (indices `n..2n-1`).
//! The boundary is `x_n = 0`; the metric has the block form
//! `g = g_ab dx_a dx_b + dx_n^2`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DtnError, Result};
use crate::jet::{Jet, JetSpace};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 4;

/// Smallest jet order a collar may carry: the Ricci tensor and the
/// zeroth-order operator symbol both consume two metric derivatives.
pub const MIN_ORDER: usize = 2;

/// Index of spatial coordinate `x_{j+1}`.
pub fn x_var(j: usize) -> usize {
    j
}

/// Index of the normal coordinate `x_n`.
pub fn normal_var(dim: usize) -> usize {
    dim - 1
}

/// Index of cotangent coordinate `xi_{b+1}`.
pub fn xi_var(dim: usize, b: usize) -> usize {
    dim + b
}

/// Variables other than the tangential coordinates and cotangent variables.
pub fn xi_vars(dim: usize) -> Vec<usize> {
    (0..dim - 1).map(|b| xi_var(dim, b)).collect()
}

/// Jet space for a collar of dimension `dim`.
pub fn collar_space(dim: usize, order: usize) -> Arc<JetSpace> {
    JetSpace::get(2 * dim - 1, order)
}

/// A real polynomial in the spatial coordinates, written in powers of
/// `x - base_point`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub powers: Vec<u8>,
    pub coeff: f64,
}

impl Polynomial {
    pub fn constant(value: f64, dim: usize) -> Polynomial {
        Polynomial {
            terms: vec![Monomial {
                powers: vec![0; dim],
                coeff: value,
            }],
        }
    }

    pub fn push(&mut self, powers: Vec<u8>, coeff: f64) {
        self.terms.push(Monomial { powers, coeff });
    }

    /// Value of the constant term.
    pub fn constant_term(&self) -> f64 {
        self.terms
            .iter()
            .filter(|m| m.powers.iter().all(|&p| p == 0))
            .map(|m| m.coeff)
            .sum()
    }

    /// Expands into a jet of the collar space (no cotangent dependence).
    pub fn to_jet(&self, dim: usize, space: &Arc<JetSpace>) -> Result<Jet> {
        let mut padded = Vec::with_capacity(self.terms.len());
        for m in &self.terms {
            if m.powers.len() != dim {
                return Err(DtnError::InvalidInput(format!(
                    "monomial {:?} has {} powers, expected {dim}",
                    m.powers,
                    m.powers.len()
                )));
            }
            if !m.coeff.is_finite() {
                return Err(DtnError::InvalidInput("non-finite coefficient".into()));
            }
            let mut e = m.powers.clone();
            e.resize(space.n_vars(), 0);
            padded.push((e, Complex64::new(m.coeff, 0.0)));
        }
        Jet::from_terms(space, padded.iter().map(|(e, c)| (e.as_slice(), *c)))
    }
}

/// Local data of the elastic medium near a boundary point.
#[derive(Debug, Clone)]
pub struct CollarData {
    dim: usize,
    space: Arc<JetSpace>,
    g_lower: Vec<Vec<Jet>>,
    lam: Jet,
    mu: Jet,
    base_point: Vec<f64>,
    xi0: Vec<f64>,
}

impl CollarData {
    /// Validates and assembles collar data. `g_lower` is the tangential
    /// `(n-1) x (n-1)` block of the metric.
    pub fn new(
        dim: usize,
        g_lower: Vec<Vec<Jet>>,
        lam: Jet,
        mu: Jet,
        base_point: Vec<f64>,
        xi0: Vec<f64>,
    ) -> Result<CollarData> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(DtnError::InvalidInput(format!(
                "dimension {dim} outside supported range 2..={MAX_DIM}"
            )));
        }
        let space = lam.space().clone();
        if space.n_vars() != 2 * dim - 1 {
            return Err(DtnError::InvalidInput(format!(
                "jets carry {} variables, expected {}",
                space.n_vars(),
                2 * dim - 1
            )));
        }
        if space.order() < MIN_ORDER {
            return Err(DtnError::DerivativeBudget {
                quantity: "collar metric (Ricci tensor and zeroth-order symbols)".into(),
                needed: MIN_ORDER,
                available: space.order() as i32,
            });
        }
        if g_lower.len() != dim - 1 || g_lower.iter().any(|r| r.len() != dim - 1) {
            return Err(DtnError::InvalidInput(format!(
                "tangential metric block must be {0}x{0}",
                dim - 1
            )));
        }
        if base_point.len() != dim {
            return Err(DtnError::InvalidInput(format!(
                "base point has {} coordinates, expected {dim}",
                base_point.len()
            )));
        }
        if base_point[dim - 1] != 0.0 {
            return Err(DtnError::InvalidInput(
                "base point must lie on the boundary (x_n = 0)".into(),
            ));
        }

        let all: Vec<&Jet> = g_lower.iter().flatten().chain([&lam, &mu]).collect();
        for j in &all {
            if !Arc::ptr_eq(j.space(), &space) {
                return Err(DtnError::ShapeMismatch {
                    left_vars: space.n_vars(),
                    left_order: space.order(),
                    right_vars: j.n_vars(),
                    right_order: j.space().order(),
                });
            }
            if j.order() < space.order() as i32 {
                return Err(DtnError::InvalidInput(
                    "collar jets must carry the full space order".into(),
                ));
            }
            let xis = xi_vars(dim);
            if j.fix_vars(&xis) != **j {
                return Err(DtnError::InvalidInput(
                    "metric and Lamé jets must not depend on the cotangent variables".into(),
                ));
            }
            if j.coeffs().iter().any(|c| c.im != 0.0 || !c.re.is_finite()) {
                return Err(DtnError::InvalidInput(
                    "metric and Lamé jets must be real and finite".into(),
                ));
            }
        }

        for a in 0..dim - 1 {
            for b in 0..a {
                let diff = (&g_lower[a][b] - &g_lower[b][a]).max_norm();
                let scale = g_lower[a][b].max_norm().max(1.0);
                if diff > 1e-14 * scale {
                    return Err(DtnError::InvalidInput(format!(
                        "metric block is not symmetric in ({}, {})",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        let g0 = DMatrix::from_fn(dim - 1, dim - 1, |a, b| g_lower[a][b].value().re);
        if g0.clone().cholesky().is_none() {
            return Err(DtnError::InvalidInput(
                "metric block is not positive definite at the base point".into(),
            ));
        }

        let mu0 = mu.value().re;
        let lam0 = lam.value().re;
        if mu0.is_nan() || mu0 <= 0.0 {
            return Err(DtnError::Inadmissible(format!(
                "mu = {mu0} must be positive"
            )));
        }
        if lam0 + mu0 < -1e-12 * mu0 {
            return Err(DtnError::Inadmissible(format!(
                "lambda + mu = {} must be non-negative",
                lam0 + mu0
            )));
        }

        check_xi(dim, &xi0)?;

        Ok(CollarData {
            dim,
            space,
            g_lower,
            lam,
            mu,
            base_point,
            xi0,
        })
    }

    /// Collar data from polynomial tables in powers of `x - base_point`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_polynomials(
        dim: usize,
        order: usize,
        base_point: Vec<f64>,
        xi0: Vec<f64>,
        metric: &[Vec<Polynomial>],
        lam: &Polynomial,
        mu: &Polynomial,
    ) -> Result<CollarData> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(DtnError::InvalidInput(format!(
                "dimension {dim} outside supported range 2..={MAX_DIM}"
            )));
        }
        let space = collar_space(dim, order);
        let g = metric
            .iter()
            .map(|row| row.iter().map(|p| p.to_jet(dim, &space)).collect())
            .collect::<Result<Vec<Vec<Jet>>>>()?;
        CollarData::new(
            dim,
            g,
            lam.to_jet(dim, &space)?,
            mu.to_jet(dim, &space)?,
            base_point,
            xi0,
        )
    }

    /// Euclidean collar with the given Lamé polynomials.
    pub fn euclidean(
        dim: usize,
        order: usize,
        xi0: Vec<f64>,
        lam: &Polynomial,
        mu: &Polynomial,
    ) -> Result<CollarData> {
        let metric: Vec<Vec<Polynomial>> = (0..dim - 1)
            .map(|a| {
                (0..dim - 1)
                    .map(|b| Polynomial::constant(if a == b { 1.0 } else { 0.0 }, dim))
                    .collect()
            })
            .collect();
        CollarData::from_polynomials(dim, order, vec![0.0; dim], xi0, &metric, lam, mu)
    }

    /// Same medium probed along another cotangent direction.
    pub fn with_xi(&self, xi0: Vec<f64>) -> Result<CollarData> {
        check_xi(self.dim, &xi0)?;
        Ok(CollarData {
            xi0,
            ..self.clone()
        })
    }

    /// Same metric with other Lamé coefficients.
    pub fn with_lame(&self, lam: Jet, mu: Jet) -> Result<CollarData> {
        CollarData::new(
            self.dim,
            self.g_lower.clone(),
            lam,
            mu,
            self.base_point.clone(),
            self.xi0.clone(),
        )
    }

    /// The collar re-expanded about a nearby boundary point. The stored
    /// jets are read as exact polynomials.
    pub fn recentered(&self, tangential_offset: &[f64]) -> Result<CollarData> {
        if tangential_offset.len() != self.dim - 1 {
            return Err(DtnError::InvalidInput(format!(
                "tangential offset has {} components, expected {}",
                tangential_offset.len(),
                self.dim - 1
            )));
        }
        let mut offset = vec![0.0; self.space.n_vars()];
        offset[..self.dim - 1].copy_from_slice(tangential_offset);
        let shift = |j: &Jet| j.recenter(&offset);
        let g = self
            .g_lower
            .iter()
            .map(|row| row.iter().map(shift).collect())
            .collect::<Result<Vec<Vec<Jet>>>>()?;
        let mut base = self.base_point.clone();
        for (b, o) in base.iter_mut().zip(tangential_offset) {
            *b += o;
        }
        CollarData::new(
            self.dim,
            g,
            shift(&self.lam)?,
            shift(&self.mu)?,
            base,
            self.xi0.clone(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn g_lower(&self) -> &[Vec<Jet>] {
        &self.g_lower
    }

    pub fn lam(&self) -> &Jet {
        &self.lam
    }

    pub fn mu(&self) -> &Jet {
        &self.mu
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn xi0(&self) -> &[f64] {
        &self.xi0
    }

    /// The full `n x n` metric with `g_nn = 1`, `g_an = 0`.
    pub fn metric(&self) -> Vec<Vec<Jet>> {
        let n = self.dim;
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        if j < n - 1 && k < n - 1 {
                            self.g_lower[j][k].clone()
                        } else if j == k {
                            Jet::constant(&self.space, 1.0)
                        } else {
                            Jet::zero(&self.space)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Lowered-index cotangent components `xi_b` as jets.
    pub fn xi_lower(&self) -> Vec<Jet> {
        (0..self.dim - 1)
            .map(|b| Jet::variable(&self.space, xi_var(self.dim, b), self.xi0[b]))
            .collect()
    }
}

fn check_xi(dim: usize, xi0: &[f64]) -> Result<()> {
    if xi0.len() != dim - 1 {
        return Err(DtnError::InvalidInput(format!(
            "covector has {} components, expected {}",
            xi0.len(),
            dim - 1
        )));
    }
    if xi0.iter().any(|x| !x.is_finite()) || xi0.iter().all(|&x| x == 0.0) {
        return Err(DtnError::InvalidInput(
            "covector xi' must be nonzero".into(),
        ));
    }
    Ok(())
}

/// Inverse of a square jet matrix by Gauss-Jordan elimination with partial
/// pivoting on the constant terms.
pub fn invert_jet_matrix(m: &[Vec<Jet>], quantity: &str) -> Result<Vec<Vec<Jet>>> {
    let n = m.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let space = m[0][0].space().clone();
    let scale = m
        .iter()
        .flatten()
        .map(|j| j.value().norm())
        .fold(0.0, f64::max);
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(&space, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| {
                a[r][col]
                    .value()
                    .norm()
                    .total_cmp(&a[s][col].value().norm())
            })
            .unwrap_or(col);
        let pv = a[pivot][col].value().norm();
        if !(pv > 1e-13 * scale.max(f64::MIN_POSITIVE)) {
            return Err(DtnError::Singularity {
                quantity: quantity.to_string(),
                value: pv,
            });
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let r = a[col][col].inv(quantity)?;
        for k in 0..n {
            a[col][k] = &a[col][k] * &r;
            inv[col][k] = &inv[col][k] * &r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col].clone();
            for k in 0..n {
                let t = &f * &a[col][k];
                a[row][k] -= &t;
                let t = &f * &inv[col][k];
                inv[row][k] -= &t;
            }
        }
    }
    Ok(inv)
}

/// Inverse metric `g^{jk}` with the boundary-normal block structure
/// `g^{nn} = 1`, `g^{an} = 0`.
pub fn inverse_metric(c: &CollarData) -> Result<Vec<Vec<Jet>>> {
    let n = c.dim;
    let block = invert_jet_matrix(&c.g_lower, "tangential metric block")?;
    Ok((0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    if j < n - 1 && k < n - 1 {
                        block[j][k].clone()
                    } else if j == k {
                        Jet::constant(&c.space, 1.0)
                    } else {
                        Jet::zero(&c.space)
                    }
                })
                .collect()
        })
        .collect())
}

/// Christoffel symbols of the second kind, `gamma[j][k][l]`, symmetric in
/// the lower pair.
#[derive(Debug, Clone)]
pub struct ChristoffelJets {
    dim: usize,
    gamma: Vec<Jet>,
}

impl ChristoffelJets {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Gamma^j_{kl}`.
    pub fn get(&self, j: usize, k: usize, l: usize) -> &Jet {
        &self.gamma[(j * self.dim + k) * self.dim + l]
    }

    /// Contraction `Gamma^a_{a k}` over tangential `a`.
    pub fn trace_tangential(&self, k: usize) -> Jet {
        let mut acc = Jet::zero(self.gamma[0].space()).truncated(self.gamma[0].order());
        for a in 0..self.dim - 1 {
            acc += self.get(a, a, k);
        }
        acc
    }
}

/// `Gamma^j_{kl} = 1/2 g^{jm} (d_l g_km + d_k g_lm - d_m g_kl)`.
pub fn christoffel(c: &CollarData) -> Result<ChristoffelJets> {
    let ginv = inverse_metric(c)?;
    Ok(christoffel_from(c, &ginv))
}

pub fn christoffel_from(c: &CollarData, ginv: &[Vec<Jet>]) -> ChristoffelJets {
    let n = c.dim;
    let g = c.metric();
    // dg[m][k][l] = d_m g_kl
    let dg: Vec<Vec<Vec<Jet>>> = (0..n)
        .map(|m| {
            (0..n)
                .map(|k| (0..n).map(|l| g[k][l].partial(x_var(m))).collect())
                .collect()
        })
        .collect();
    let mut gamma = Vec::with_capacity(n * n * n);
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                let mut acc = Jet::zero(&c.space).truncated(c.space.order() as i32 - 1);
                for m in 0..n {
                    let bracket = &(&dg[l][k][m] + &dg[k][l][m]) - &dg[m][k][l];
                    acc += &(&ginv[j][m] * &bracket);
                }
                gamma.push(acc.scale(0.5));
            }
        }
    }
    ChristoffelJets { dim: n, gamma }
}

/// Ricci tensor
/// `R_kl = d_j Gamma^j_kl - d_k Gamma^j_jl + Gamma^j_jm Gamma^m_kl - Gamma^j_km Gamma^m_jl`.
pub fn ricci(c: &CollarData) -> Result<Vec<Vec<Jet>>> {
    let gamma = christoffel(c)?;
    ricci_from(c, &gamma)
}

pub fn ricci_from(c: &CollarData, gamma: &ChristoffelJets) -> Result<Vec<Vec<Jet>>> {
    let n = c.dim;
    if c.order() < 2 {
        return Err(DtnError::DerivativeBudget {
            quantity: "Ricci tensor".into(),
            needed: 2,
            available: c.order() as i32,
        });
    }
    let mut r = vec![vec![Jet::zero(&c.space); n]; n];
    for k in 0..n {
        for l in 0..n {
            let mut acc = Jet::zero(&c.space).truncated(c.order() as i32 - 2);
            for j in 0..n {
                acc += &gamma.get(j, k, l).partial(x_var(j));
                acc -= &gamma.get(j, j, l).partial(x_var(k));
                for m in 0..n {
                    acc += &(gamma.get(j, j, m) * gamma.get(m, k, l));
                    acc -= &(gamma.get(j, k, m) * gamma.get(m, j, l));
                }
            }
            r[k][l] = acc;
        }
    }
    Ok(r)
}

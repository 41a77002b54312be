//! Symbol expansion of the Dirichlet-to-Neumann map,
//! `p_1 = A q_1 - d_1`, `p_0 = A q_0 - d_0`, `p_{-m} = A q_{-m}`, and the
//! oracle interface through which recovery consumes it.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{DtnError, Result};
use crate::factorization::{Factorization, SymbolExpansion, SymbolKind};
use crate::geometry::{normal_var, xi_vars, CollarData};
use crate::lame::SymbolContext;
use crate::symbol::SymbolMatrix;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Assembles the DtN expansion from the `q` expansion.
pub fn assemble_p(f: &Factorization, q: &SymbolExpansion) -> SymbolExpansion {
    let a = &f.sym.a;
    let terms = q
        .terms
        .iter()
        .map(|qj| {
            let p = a.matmul(qj);
            match qj.degree() {
                1 => p.sub(&f.sym.d1),
                0 => p.sub(&f.sym.d0),
                _ => p,
            }
        })
        .collect();
    SymbolExpansion {
        kind: SymbolKind::P,
        terms,
        sylvester_residuals: q.sylvester_residuals.clone(),
        route_disagreement: q.route_disagreement.clone(),
    }
}

/// `p_1` written out directly:
/// `[[mu|xi| I + mu(lambda+mu)/((lambda+3mu)|xi|) xi^a xi_b, -2i mu^2/(lambda+3mu) xi^a],
///   [2i mu^2/(lambda+3mu) xi_b, 2mu(lambda+2mu)/(lambda+3mu) |xi|]]`.
pub fn direct_p1(ctx: &SymbolContext) -> Result<SymbolMatrix> {
    let n = ctx.dim();
    let nn = n - 1;
    let inv_l3m = (&ctx.lam + &ctx.mu.scale(3.0)).inv("lambda + 3 mu")?;
    let inv_norm = ctx.xi_norm.inv("|xi'|")?;
    let mu_sq = &ctx.mu * &ctx.mu;
    let corner = &(&mu_sq * &inv_l3m).scale(2.0) * &ctx.one();
    let tangential = &(&ctx.mu * &(&ctx.lam + &ctx.mu)) * &(&inv_l3m * &inv_norm);
    let mut p = SymbolMatrix::zeros(ctx.collar.space(), n, 1);
    for a in 0..nn {
        for b in 0..nn {
            let mut e = &tangential * &(&ctx.xi_upper[a] * &ctx.xi_lower[b]);
            if a == b {
                e += &(&ctx.mu * &ctx.xi_norm);
            }
            p.set(a, b, e);
        }
        p.set(a, nn, (&corner * &ctx.xi_upper[a]).scale(-I));
        p.set(nn, a, (&corner * &ctx.xi_lower[a]).scale(I));
    }
    let nn_entry = &(&(&ctx.mu * &ctx.lam2mu) * &inv_l3m).scale(2.0) * &ctx.xi_norm;
    p.set(nn, nn, nn_entry);
    Ok(p)
}

/// `G = diag(g_ab(x0), 1)`, lowering the row index of a symbol.
pub fn lowering_matrix(collar: &CollarData) -> DMatrix<Complex64> {
    let n = collar.dim();
    DMatrix::from_fn(n, n, |r, c| {
        if r < n - 1 && c < n - 1 {
            collar.g_lower()[r][c].value()
        } else if r == c {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Forward pipeline at one collar point.
#[derive(Debug, Clone)]
pub struct DtnExpansion {
    pub factorization: Factorization,
    pub q: SymbolExpansion,
    pub p: SymbolExpansion,
}

impl DtnExpansion {
    pub fn compute(collar: &CollarData, depth: usize) -> Result<DtnExpansion> {
        let factorization = Factorization::new(SymbolContext::new(collar)?)?;
        let q = factorization.expand(depth)?;
        let p = assemble_p(&factorization, &q);
        Ok(DtnExpansion {
            factorization,
            q,
            p,
        })
    }
}

/// Variables removed when restricting a symbol to the boundary at a fixed
/// covector: the normal coordinate and the cotangent variables.
pub fn boundary_vars(dim: usize) -> Vec<usize> {
    let mut v = xi_vars(dim);
    v.push(normal_var(dim));
    v
}

/// Restriction of a symbol to `x_n = 0`, `xi' = xi0`, keeping tangential jets.
pub fn restrict(m: &SymbolMatrix) -> SymbolMatrix {
    let dim = m.dim();
    m.fix_vars(&boundary_vars(dim))
}

/// Source of DtN symbols at boundary points near a fixed base point.
pub trait DtNSymbolOracle: Sync {
    fn dim(&self) -> usize;

    /// Jet order of the returned tangential jets.
    fn order(&self) -> usize;

    /// Deepest available expansion.
    fn depth(&self) -> usize;

    /// The terms `p_1, p_0, ..., p_{2-depth}` at the boundary point
    /// `x0 + (offset, 0)` and covector `xi`, as tangential jets.
    fn p_terms(&self, offset: &[f64], xi: &[f64], depth: usize) -> Result<Vec<SymbolMatrix>>;

    /// A single term of degree `degree`.
    fn symbol(&self, degree: i32, offset: &[f64], xi: &[f64]) -> Result<SymbolMatrix> {
        if degree > 1 {
            return Err(DtnError::InvalidInput(format!(
                "no DtN symbol of degree {degree}"
            )));
        }
        let depth = (2 - degree) as usize;
        let mut terms = self.p_terms(offset, xi, depth)?;
        Ok(terms.swap_remove(depth - 1))
    }
}

/// Synthetic oracle that runs the forward pipeline on known collar data.
#[derive(Debug, Clone)]
pub struct GroundTruthOracle {
    collar: CollarData,
    depth: usize,
}

impl GroundTruthOracle {
    pub fn new(collar: CollarData, depth: usize) -> Result<GroundTruthOracle> {
        if collar.order() < depth + 2 {
            return Err(DtnError::DerivativeBudget {
                quantity: format!("oracle of depth {depth}"),
                needed: depth + 2,
                available: collar.order() as i32,
            });
        }
        Ok(GroundTruthOracle { collar, depth })
    }

    pub fn collar(&self) -> &CollarData {
        &self.collar
    }
}

impl DtNSymbolOracle for GroundTruthOracle {
    fn dim(&self) -> usize {
        self.collar.dim()
    }

    fn order(&self) -> usize {
        self.collar.order()
    }

    fn depth(&self) -> usize {
        self.depth
    }

    fn p_terms(&self, offset: &[f64], xi: &[f64], depth: usize) -> Result<Vec<SymbolMatrix>> {
        if depth > self.depth {
            return Err(DtnError::InvalidInput(format!(
                "oracle depth {} < requested {depth}",
                self.depth
            )));
        }
        let collar = if offset.iter().all(|&o| o == 0.0) {
            self.collar.with_xi(xi.to_vec())?
        } else {
            self.collar.recentered(offset)?.with_xi(xi.to_vec())?
        };
        let exp = DtnExpansion::compute(&collar, depth)?;
        Ok(exp.p.terms.iter().map(restrict).collect())
    }
}

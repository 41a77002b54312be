//! Direct evaluations of the Lamé operator on vector fields given as jets.
//!
//! Four independent routes are provided: the expanded coordinate formula,
//! the divergence of the stress tensor, the Bochner-Laplacian form with the
//! Ricci term, and the collar form rebuilt from the operator symbols. They
//! serve as cross-checks for the symbol displays.

use num_complex::Complex64;

use crate::error::{DtnError, Result};
use crate::geometry::{normal_var, ricci_from, x_var, xi_var};
use crate::jet::{multi_indices, Jet};
use crate::lame::{LameSymbols, SymbolContext};
use crate::symbol::SymbolMatrix;

/// `nabla_k u^j`, indexed `[j][k]`.
fn covariant_vector(ctx: &SymbolContext, u: &[Jet]) -> Vec<Vec<Jet>> {
    let n = ctx.dim();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    let mut e = u[j].partial(x_var(k));
                    for m in 0..n {
                        e += &(ctx.gamma.get(j, k, m) * &u[m]);
                    }
                    e
                })
                .collect()
        })
        .collect()
}

/// Covariant derivative of a `(1,1)` tensor, `nabla_l T^j_k`, indexed
/// `[j][k][l]`.
fn covariant_tensor(ctx: &SymbolContext, t: &[Vec<Jet>]) -> Vec<Vec<Vec<Jet>>> {
    let n = ctx.dim();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    (0..n)
                        .map(|l| {
                            let mut e = t[j][k].partial(x_var(l));
                            for m in 0..n {
                                e += &(ctx.gamma.get(j, l, m) * &t[m][k]);
                                e -= &(ctx.gamma.get(m, l, k) * &t[j][m]);
                            }
                            e
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn divergence(ctx: &SymbolContext, cov: &[Vec<Jet>]) -> Jet {
    let mut d = ctx.zero();
    for (k, row) in cov.iter().enumerate() {
        d += &row[k];
    }
    d
}

fn raise(ctx: &SymbolContext, j: usize, covector: &[Jet]) -> Jet {
    let mut e = ctx.zero();
    for (k, c) in covector.iter().enumerate() {
        e += &(&ctx.ginv[j][k] * c);
    }
    e
}

fn gradient(f: &Jet, n: usize) -> Vec<Jet> {
    (0..n).map(|k| f.partial(x_var(k))).collect()
}

/// `nabla^j u_k`, indexed `[j][k]`.
fn raised_lowered(ctx: &SymbolContext, u: &[Jet]) -> Vec<Vec<Jet>> {
    let n = ctx.dim();
    let g = ctx.collar.metric();
    let u_low: Vec<Jet> = (0..n)
        .map(|k| {
            let mut e = ctx.zero();
            for m in 0..n {
                e += &(&g[k][m] * &u[m]);
            }
            e
        })
        .collect();
    // nabla_l u_k
    let cov_low: Vec<Vec<Jet>> = (0..n)
        .map(|l| {
            (0..n)
                .map(|k| {
                    let mut e = u_low[k].partial(x_var(l));
                    for m in 0..n {
                        e -= &(ctx.gamma.get(m, l, k) * &u_low[m]);
                    }
                    e
                })
                .collect()
        })
        .collect();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    let col: Vec<Jet> = (0..n).map(|l| cov_low[l][k].clone()).collect();
                    raise(ctx, j, &col)
                })
                .collect()
        })
        .collect()
}

/// The expanded coordinate formula
/// `mu Delta_g u^j + (lambda+mu) nabla^j div u + (nabla^j lambda) div u
///  + (nabla^k mu)(nabla_k u^j + nabla^j u_k)
///  + mu g^{kl} (2 Gamma^j_{km} d_l u^m + d_m Gamma^j_{kl} u^m)`.
pub fn lame_expanded(ctx: &SymbolContext, u: &[Jet]) -> Vec<Jet> {
    let n = ctx.dim();
    let cov = covariant_vector(ctx, u);
    let div = divergence(ctx, &cov);
    let grad_div = gradient(&div, n);
    let grad_lam = gradient(&ctx.lam, n);
    let grad_mu = gradient(&ctx.mu, n);
    let up_mu: Vec<Jet> = (0..n).map(|k| raise(ctx, k, &grad_mu)).collect();
    let rl = raised_lowered(ctx, u);
    let lpm = &ctx.lam + &ctx.mu;
    (0..n)
        .map(|j| {
            // Laplace-Beltrami of the component u^j
            let mut lap = ctx.zero();
            for a in 0..n {
                for b in 0..n {
                    let mut e = u[j].partial(x_var(a)).partial(x_var(b));
                    for c in 0..n {
                        e -= &(ctx.gamma.get(c, a, b) * &u[j].partial(x_var(c)));
                    }
                    lap += &(&ctx.ginv[a][b] * &e);
                }
            }
            let mut out = &ctx.mu * &lap;
            out += &(&lpm * &raise(ctx, j, &grad_div));
            out += &(&raise(ctx, j, &grad_lam) * &div);
            for k in 0..n {
                out += &(&up_mu[k] * &(&cov[j][k] + &rl[j][k]));
            }
            let mut tail = ctx.zero();
            for k in 0..n {
                for l in 0..n {
                    let mut e = ctx.zero();
                    for m in 0..n {
                        e += &(&ctx.gamma.get(j, k, m).scale(2.0) * &u[m].partial(x_var(l)));
                        e += &(&ctx.gamma.get(j, k, l).partial(x_var(m)) * &u[m]);
                    }
                    tail += &(&ctx.ginv[k][l] * &e);
                }
            }
            out += &(&ctx.mu * &tail);
            out
        })
        .collect()
}

/// `div tau` with `tau^j_k = lambda div u delta^j_k + mu (nabla^j u_k + nabla_k u^j)`.
pub fn lame_divergence(ctx: &SymbolContext, u: &[Jet]) -> Vec<Jet> {
    let n = ctx.dim();
    let cov = covariant_vector(ctx, u);
    let div = divergence(ctx, &cov);
    let rl = raised_lowered(ctx, u);
    let lam_div = &ctx.lam * &div;
    let tau: Vec<Vec<Jet>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    let mut e = &ctx.mu * &(&rl[j][k] + &cov[j][k]);
                    if j == k {
                        e += &lam_div;
                    }
                    e
                })
                .collect()
        })
        .collect();
    let dtau = covariant_tensor(ctx, &tau);
    (0..n)
        .map(|j| {
            let mut e = ctx.zero();
            for k in 0..n {
                for l in 0..n {
                    e += &(&ctx.ginv[k][l] * &dtau[j][k][l]);
                }
            }
            e
        })
        .collect()
}

/// `mu Delta_B u + (lambda+mu) grad div u + mu Ric(u) + (grad lambda) div u
///  + (Su)(grad mu)`.
pub fn lame_bochner(ctx: &SymbolContext, u: &[Jet]) -> Result<Vec<Jet>> {
    let n = ctx.dim();
    let ric = ricci_from(&ctx.collar, &ctx.gamma)?;
    let cov = covariant_vector(ctx, u);
    let div = divergence(ctx, &cov);
    let dcov = covariant_tensor(ctx, &cov);
    let rl = raised_lowered(ctx, u);
    let grad_div = gradient(&div, n);
    let grad_lam = gradient(&ctx.lam, n);
    let grad_mu = gradient(&ctx.mu, n);
    let up_mu: Vec<Jet> = (0..n).map(|k| raise(ctx, k, &grad_mu)).collect();
    let lpm = &ctx.lam + &ctx.mu;
    Ok((0..n)
        .map(|j| {
            let mut bochner = ctx.zero();
            for k in 0..n {
                for l in 0..n {
                    bochner += &(&ctx.ginv[k][l] * &dcov[j][k][l]);
                }
            }
            let ric_low: Vec<Jet> = (0..n)
                .map(|k| {
                    let mut e = ctx.zero();
                    for l in 0..n {
                        e += &(&ric[k][l] * &u[l]);
                    }
                    e
                })
                .collect();
            let mut out = &ctx.mu * &(&bochner + &raise(ctx, j, &ric_low));
            out += &(&lpm * &raise(ctx, j, &grad_div));
            out += &(&raise(ctx, j, &grad_lam) * &div);
            for k in 0..n {
                out += &(&(&rl[j][k] + &cov[j][k]) * &up_mu[k]);
            }
            out
        })
        .collect())
}

/// Applies a symbol that is a polynomial of degree at most `xi_degree` in
/// the cotangent variable as the differential operator
/// `sum_a sigma_a(x) (-i d_{x'})^a`.
pub fn apply_symbol(
    ctx: &SymbolContext,
    sym: &SymbolMatrix,
    xi_degree: usize,
    u: &[Jet],
) -> Result<Vec<Jet>> {
    let n = ctx.dim();
    let collar = &ctx.collar;
    let space = collar.space();
    let mut offset = vec![0.0; space.n_vars()];
    for b in 0..n - 1 {
        offset[xi_var(n, b)] = -collar.xi0()[b];
    }
    let minus_i = Complex64::new(0.0, -1.0);
    let mut out = vec![ctx.zero(); n];
    for r in 0..n {
        for c in 0..n {
            let entry = sym.get(r, c);
            if entry.max_norm() == 0.0 {
                continue;
            }
            let at_zero = entry.recenter(&offset)?;
            let keep = entry.order() - xi_degree as i32;
            for d in 0..=xi_degree {
                for a in multi_indices(n - 1, d) {
                    let coeff = xi_coefficient(&at_zero, n, &a)?.truncated(keep);
                    let mut du = u[c].clone();
                    for (b, &k) in a.iter().enumerate() {
                        for _ in 0..k {
                            du = du.partial(x_var(b));
                        }
                    }
                    let term = (&coeff * &du).scale(minus_i.powi(d as i32));
                    out[r] += &term;
                }
            }
        }
    }
    Ok(out)
}

/// The x-dependent coefficient of the monomial `xi^a` of a jet expanded
/// about `xi = 0`.
fn xi_coefficient(jet: &Jet, n: usize, a: &[u8]) -> Result<Jet> {
    let space = jet.space();
    let mut terms = Vec::new();
    for idx in 0..space.len() {
        let e = space.exponents(idx);
        if (0..n - 1).all(|b| e[xi_var(n, b)] == a[b]) {
            let mut x_only = e.to_vec();
            for b in 0..n - 1 {
                x_only[xi_var(n, b)] = 0;
            }
            terms.push((x_only, jet.coeffs()[idx]));
        }
    }
    let out = Jet::from_terms(space, terms.iter().map(|(e, c)| (e.as_slice(), *c)))?;
    Ok(out.truncated(jet.order()))
}

/// `A (d_n^2 u + Op(b) d_n u + Op(c) u)` assembled from the symbols.
pub fn lame_from_symbols(ctx: &SymbolContext, sym: &LameSymbols, u: &[Jet]) -> Result<Vec<Jet>> {
    let n = ctx.dim();
    if u.len() != n {
        return Err(DtnError::InvalidInput(format!(
            "vector field has {} components, expected {n}",
            u.len()
        )));
    }
    let nv = normal_var(n);
    let du: Vec<Jet> = u.iter().map(|f| f.partial(nv)).collect();
    let mut inner: Vec<Jet> = du.iter().map(|f| f.partial(nv)).collect();
    let parts = [
        apply_symbol(ctx, &sym.b1, 1, &du)?,
        apply_symbol(ctx, &sym.b0, 0, &du)?,
        apply_symbol(ctx, &sym.c2, 2, u)?,
        apply_symbol(ctx, &sym.c1, 1, u)?,
        apply_symbol(ctx, &sym.c0, 0, u)?,
    ];
    for p in &parts {
        for (acc, t) in inner.iter_mut().zip(p) {
            *acc += t;
        }
    }
    Ok((0..n)
        .map(|j| {
            let mut e = ctx.zero();
            for (k, f) in inner.iter().enumerate() {
                e += &(sym.a.get(j, k) * f);
            }
            e
        })
        .collect())
}

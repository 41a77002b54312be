//! Factorization `A^{-1} L = (d_n + B - Q)(d_n + Q)` at the symbol level:
//! the principal symbol `q_1`, the transport terms `E_r`, and the lower
//! order symbols `q_{r-1}` obtained from the Sylvester equations
//! `(q_1 - b_1) q_{r-1} + q_{r-1} q_1 = E_r`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{DtnError, Result};
use crate::geometry::{normal_var, x_var, xi_var};
use crate::jet::{multi_factorial, multi_indices, Jet};
use crate::lame::{LameSymbols, SymbolContext};
use crate::symbol::SymbolMatrix;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Condition number above which a Sylvester operator is rejected.
pub const SYLVESTER_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Q,
    P,
}

/// Terms of degrees `1, 0, -1, ...` of a symbol expansion.
#[derive(Debug, Clone)]
pub struct SymbolExpansion {
    pub kind: SymbolKind,
    pub terms: Vec<SymbolMatrix>,
    /// Sylvester residual of each term below the principal one.
    pub sylvester_residuals: Vec<f64>,
    /// Max-norm gap between the closed form and the generic solver.
    pub route_disagreement: Vec<f64>,
}

impl SymbolExpansion {
    pub fn depth(&self) -> usize {
        self.terms.len()
    }

    /// The term of the given degree, if computed.
    pub fn term(&self, degree: i32) -> Option<&SymbolMatrix> {
        if degree > 1 {
            return None;
        }
        self.terms.get((1 - degree) as usize)
    }

    /// Sum of the terms of degree at least `lowest`.
    pub fn partial_sum(&self, lowest: i32) -> Option<SymbolMatrix> {
        let mut acc = self.term(1)?.clone();
        for d in (lowest..1).rev() {
            acc = acc.add(self.term(d)?);
        }
        Some(acc)
    }
}

/// `F_1` and `F_2`, both nilpotent of degree one.
pub fn f_matrices(ctx: &SymbolContext) -> Result<(SymbolMatrix, SymbolMatrix)> {
    let n = ctx.dim();
    let nn = n - 1;
    let inv_norm = ctx.xi_norm.inv("|xi'|")?;
    let ratio = &ctx.lam2mu * &ctx.inv_mu;
    let inv_ratio = &ctx.mu * &ctx.inv_lam2mu;
    let mut f1 = SymbolMatrix::zeros(ctx.collar.space(), n, 1);
    let mut f2 = f1.clone();
    for a in 0..nn {
        for b in 0..nn {
            let e = &(&ctx.xi_upper[a] * &ctx.xi_lower[b]) * &inv_norm;
            f1.set(a, b, e.clone());
            f2.set(a, b, e);
        }
        f1.set(a, nn, ctx.xi_upper[a].scale(I));
        f1.set(nn, a, ctx.xi_lower[a].scale(I));
        f2.set(a, nn, (&ratio * &ctx.xi_upper[a]).scale(-I));
        f2.set(nn, a, (&inv_ratio * &ctx.xi_lower[a]).scale(-I));
    }
    f1.set(nn, nn, -&ctx.xi_norm);
    f2.set(nn, nn, -&ctx.xi_norm);
    Ok((f1, f2))
}

/// `q_1 = |xi'| I + (lambda+mu)/(lambda+3mu) F_1`, with the branch check
/// that every eigenvalue at the base point has positive real part.
pub fn principal_q(ctx: &SymbolContext) -> Result<SymbolMatrix> {
    let (f1, _) = f_matrices(ctx)?;
    let a = ctx.f_coefficient()?;
    let n = ctx.dim();
    let id = SymbolMatrix::identity(ctx.collar.space(), n);
    let q1 = id.scale_jet(&ctx.xi_norm, 1).add(&f1.scale_jet(&a, 0));
    check_branch(&q1)?;
    Ok(q1)
}

fn check_branch(q1: &SymbolMatrix) -> Result<()> {
    let v = q1.value();
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let eig = v
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| DtnError::Branch("eigenvalues of q_1 did not converge".into()))?;
    let worst = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if !(worst > 1e-12 * scale) {
        return Err(DtnError::Branch(format!(
            "q_1 has an eigenvalue with real part {worst:e}"
        )));
    }
    Ok(())
}

/// `(-i)^{|J|} / J! d_xi^J lhs d_{x'}^J rhs`.
fn compose(lhs: &SymbolMatrix, rhs: &SymbolMatrix, j: &[u8]) -> SymbolMatrix {
    let n = lhs.dim();
    let mut l = lhs.clone();
    let mut r = rhs.clone();
    let mut total = 0i32;
    for (b, &k) in j.iter().enumerate() {
        for _ in 0..k {
            l = l.partial(xi_var(n, b), -1);
            r = r.partial(x_var(b), 0);
        }
        total += i32::from(k);
    }
    let factor = (-I).powi(total) / multi_factorial(j) as f64;
    l.matmul(&r).scale(factor)
}

fn budget_check(m: &SymbolMatrix, quantity: impl FnOnce() -> String, needed: usize) -> Result<()> {
    if m.order() < 0 {
        return Err(DtnError::DerivativeBudget {
            quantity: quantity(),
            needed,
            available: m.order() + needed as i32,
        });
    }
    Ok(())
}

/// Sum over multi-indices `J` with `|J| = d` of the composition terms.
fn compose_degree(lhs: &SymbolMatrix, rhs: &SymbolMatrix, d: usize) -> Result<SymbolMatrix> {
    let n = lhs.dim();
    let mut acc: Option<SymbolMatrix> = None;
    for j in multi_indices(n - 1, d) {
        let t = compose(lhs, rhs, &j);
        budget_check(
            &t,
            || {
                format!(
                    "composition of degrees {} and {} with |J'| = {d}",
                    lhs.degree(),
                    rhs.degree()
                )
            },
            d,
        )?;
        acc = Some(match acc {
            None => t,
            Some(s) => s.add(&t),
        });
    }
    Ok(acc.expect("at least one multi-index"))
}

/// Degree-`r` homogeneous component of the full symbol equation
/// `sum (-i)^|J|/J! d_xi^J q d_x^J q - sum (-i)^|J|/J! d_xi^J b d_x^J q - d_n q + c`.
///
/// `q` lists the terms of degrees `1, 0, -1, ...`. With `exclude_next` the
/// two terms linear in `q_{r-1}` (namely `(q_1 - b_1) q_{r-1} + q_{r-1} q_1`)
/// are left out, so that the result is `-E_r`.
pub fn degree_component(
    sym: &LameSymbols,
    q: &[SymbolMatrix],
    r: i32,
    exclude_next: bool,
) -> Result<SymbolMatrix> {
    if r > 2 {
        return Err(DtnError::InvalidInput(format!(
            "no component of degree {r}"
        )));
    }
    let lowest_needed = if exclude_next { r } else { r - 1 };
    let lowest_have = 2 - q.len() as i32;
    if lowest_needed < lowest_have && !(exclude_next && r == 2) {
        return Err(DtnError::InvalidInput(format!(
            "degree {r} component needs q down to degree {lowest_needed}, have {lowest_have}"
        )));
    }
    let space = q[0].space().clone();
    let n = q[0].dim();
    let mut acc = SymbolMatrix::zeros(&space, n, r);
    let skip =
        |dj: i32, dk: i32| exclude_next && ((dj == 1 && dk == r - 1) || (dj == r - 1 && dk == 1));

    for qj in q {
        for qk in q {
            let (dj, dk) = (qj.degree(), qk.degree());
            let d = dj + dk - r;
            if d < 0 || skip(dj, dk) {
                continue;
            }
            acc = acc.add(&compose_degree(qj, qk, d as usize)?);
        }
    }
    for l in [1, 0] {
        let b = sym.b(l).expect("b_1 and b_0 exist");
        for qk in q {
            let dk = qk.degree();
            let d = l + dk - r;
            // b_0 is independent of xi and b_1 is linear in it
            if d < 0 || d > l || (exclude_next && l == 1 && dk == r - 1) {
                continue;
            }
            acc = acc.sub(&compose_degree(b, qk, d as usize)?);
        }
    }
    if let Some(qr) = q.iter().find(|m| m.degree() == r) {
        let dn = qr.partial(normal_var(n), 0);
        budget_check(&dn, || format!("d/dx_n of q_{r}"), 1)?;
        acc = acc.sub(&dn);
    }
    if let Some(c) = sym.c(r) {
        acc = acc.add(c);
    }
    Ok(acc.with_degree(r))
}

fn sum_over_tangential(n: usize, f: impl Fn(usize) -> SymbolMatrix) -> SymbolMatrix {
    let mut acc = f(0);
    for a in 1..n - 1 {
        acc = acc.add(&f(a));
    }
    acc
}

/// The right-hand side `E_r` of the Sylvester equation for `q_{r-1}`,
/// written out term by term for `r = 1`, `r = 0` and `r = -m`.
pub fn e_term(sym: &LameSymbols, q: &[SymbolMatrix], r: i32) -> Result<SymbolMatrix> {
    if r > 1 {
        return Err(DtnError::InvalidInput(format!(
            "E is defined for degree <= 1, got {r}"
        )));
    }
    if (q.len() as i32) < 2 - r {
        return Err(DtnError::InvalidInput(format!(
            "E_{r} needs q down to degree {r}, have {} term(s)",
            q.len()
        )));
    }
    let q1 = &q[0];
    let n = q1.dim();
    let nv = normal_var(n);
    let q1mb1 = q1.sub(&sym.b1);
    let out = match r {
        1 => {
            let t = sum_over_tangential(n, |a| {
                q1mb1
                    .partial(xi_var(n, a), -1)
                    .matmul(&q1.partial(x_var(a), 0))
            })
            .scale(I);
            t.add(&sym.b0.matmul(q1))
                .add(&q1.partial(nv, 0))
                .sub(&sym.c1)
        }
        0 => {
            let q0 = &q[1];
            let t = sum_over_tangential(n, |a| {
                let first = q1mb1
                    .partial(xi_var(n, a), -1)
                    .matmul(&q0.partial(x_var(a), 0));
                let second = q0
                    .partial(xi_var(n, a), -1)
                    .matmul(&q1.partial(x_var(a), 0));
                first.add(&second)
            })
            .scale(I);
            let mut second_order = SymbolMatrix::zeros(q1.space(), n, 0);
            for a in 0..n - 1 {
                for b in 0..n - 1 {
                    let l = q1.partial(xi_var(n, a), -1).partial(xi_var(n, b), -1);
                    let rr = q1.partial(x_var(a), 0).partial(x_var(b), 0);
                    second_order = second_order.add(&l.matmul(&rr));
                }
            }
            t.add(&second_order.scale(0.5))
                .sub(&q0.matmul(q0))
                .add(&sym.b0.matmul(q0))
                .add(&q0.partial(nv, 0))
                .sub(&sym.c0)
        }
        _ => {
            let m = -r;
            let qm = &q[(1 + m) as usize];
            let mut acc = sym.b0.matmul(qm).add(&qm.partial(nv, 0)).sub(
                &sum_over_tangential(n, |a| {
                    sym.b1
                        .partial(xi_var(n, a), -1)
                        .matmul(&qm.partial(x_var(a), 0))
                })
                .scale(I),
            );
            for qj in &q[..(m + 2) as usize] {
                for qk in &q[..(m + 2) as usize] {
                    let d = qj.degree() + qk.degree() + m;
                    if d < 0 {
                        continue;
                    }
                    acc = acc.sub(&compose_degree(qj, qk, d as usize)?);
                }
            }
            acc
        }
    };
    budget_check(&out, || format!("E_{r}"), (2 - r) as usize)?;
    Ok(out.with_degree(r))
}

/// Closed-form solution of `(q_1 - b_1) X + X q_1 = E`:
/// `X = E/(2|xi'|) - a (F_2 E + E F_1)/(4|xi'|^2) + a^2 F_2 E F_1/(4|xi'|^3)`
/// with `a = (lambda+mu)/(lambda+3mu)`.
pub fn next_q_closed_form(ctx: &SymbolContext, e: &SymbolMatrix) -> Result<SymbolMatrix> {
    let (f1, f2) = f_matrices(ctx)?;
    let a = ctx.f_coefficient()?;
    let r = ctx.xi_norm.inv("|xi'|")?;
    let r2 = &r * &r;
    let r3 = &r2 * &r;
    let first = e.scale_jet(&r, -1).scale(0.5);
    let second = f2
        .matmul(e)
        .add(&e.matmul(&f1))
        .scale_jet(&(&a * &r2), -2)
        .scale(0.25);
    let third = f2
        .matmul(e)
        .matmul(&f1)
        .scale_jet(&(&(&a * &a) * &r3), -3)
        .scale(0.25);
    Ok(first.sub(&second).add(&third).with_degree(e.degree() - 1))
}

/// `L X + X R`.
pub fn sylvester_apply(l: &SymbolMatrix, r: &SymbolMatrix, x: &SymbolMatrix) -> SymbolMatrix {
    l.matmul(x).add(&x.matmul(r))
}

/// Generic jet solver for `L X + X R = E`, degree by degree in the jet
/// variables. The constant-term operator is factored once.
pub fn sylvester_solve(
    l: &SymbolMatrix,
    r: &SymbolMatrix,
    e: &SymbolMatrix,
) -> Result<SymbolMatrix> {
    let n = l.dim();
    let nsq = n * n;
    let l0 = l.value();
    let r0 = r.value();
    let mut k = DMatrix::<Complex64>::zeros(nsq, nsq);
    for row in 0..n {
        for col in 0..n {
            let p = row * n + col;
            for m in 0..n {
                k[(p, m * n + col)] += l0[(row, m)];
                k[(p, row * n + m)] += r0[(m, col)];
            }
        }
    }
    let sv = k.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= SYLVESTER_CONDITION_LIMIT) {
        return Err(DtnError::NearSingular { condition });
    }
    let lu = k.lu();
    let space = l.space().clone();
    let order = l.order().min(r.order()).min(e.order());

    let solve_const = |rhs: &SymbolMatrix| -> Result<SymbolMatrix> {
        let len = space.len();
        let mut out: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); len]; nsq];
        for idx in 0..len {
            let b = DVector::from_fn(nsq, |p, _| rhs.entries()[p].coeffs()[idx]);
            if b.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            let x = lu.solve(&b).ok_or(DtnError::NearSingular {
                condition: f64::INFINITY,
            })?;
            for p in 0..nsq {
                out[p][idx] = x[p];
            }
        }
        let mut it = out.into_iter();
        let jets = (0..nsq)
            .map(|_| Jet::from_coeffs(&space, order, it.next().expect("n^2 entries")))
            .collect::<Result<Vec<Jet>>>()?;
        let mut jets = jets.into_iter();
        Ok(SymbolMatrix::from_fn(n, e.degree(), |_, _| {
            jets.next().expect("n^2 entries")
        }))
    };

    let lc = SymbolMatrix::from_fn(n, l.degree(), |a, b| Jet::constant(&space, l0[(a, b)]));
    let rc = SymbolMatrix::from_fn(n, r.degree(), |a, b| Jet::constant(&space, r0[(a, b)]));
    let l_var = l.sub(&lc);
    let r_var = r.sub(&rc);
    let mut x = solve_const(e)?;
    for _ in 0..space.order().min(order.max(0) as usize) {
        let rhs = e.sub(&sylvester_apply(&l_var, &r_var, &x));
        x = solve_const(&rhs)?;
    }
    Ok(x.with_degree(e.degree() - l.degree()))
}

/// Everything needed to run the recursion at one collar point.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub ctx: SymbolContext,
    pub sym: LameSymbols,
    pub q1: SymbolMatrix,
    pub q1_minus_b1: SymbolMatrix,
}

impl Factorization {
    pub fn new(ctx: SymbolContext) -> Result<Factorization> {
        let sym = LameSymbols::build(&ctx);
        let q1 = principal_q(&ctx)?;
        let q1_minus_b1 = q1.sub(&sym.b1);
        Ok(Factorization {
            ctx,
            sym,
            q1,
            q1_minus_b1,
        })
    }

    /// `(q_1 - b_1) X + X q_1`.
    pub fn sylvester(&self, x: &SymbolMatrix) -> SymbolMatrix {
        sylvester_apply(&self.q1_minus_b1, &self.q1, x)
    }

    /// The expansion `q_1, q_0, ..., q_{2-depth}`. Needs jet order at least
    /// `depth + 2`.
    pub fn expand(&self, depth: usize) -> Result<SymbolExpansion> {
        if depth == 0 {
            return Err(DtnError::InvalidInput(
                "expansion depth must be positive".into(),
            ));
        }
        let k = self.ctx.collar.order();
        if k < depth + 2 {
            return Err(DtnError::DerivativeBudget {
                quantity: format!("symbol expansion of depth {depth}"),
                needed: depth + 2,
                available: k as i32,
            });
        }
        let mut terms = vec![self.q1.clone()];
        let mut residuals = Vec::new();
        let mut disagreement = Vec::new();
        for t in 1..depth {
            let r = 2 - t as i32;
            let e = e_term(&self.sym, &terms, r)?;
            let closed = next_q_closed_form(&self.ctx, &e)?;
            let generic = sylvester_solve(&self.q1_minus_b1, &self.q1, &e)?;
            residuals.push(self.sylvester(&closed).distance(&e));
            disagreement.push(closed.distance(&generic));
            terms.push(closed);
        }
        Ok(SymbolExpansion {
            kind: SymbolKind::Q,
            terms,
            sylvester_residuals: residuals,
            route_disagreement: disagreement,
        })
    }

    /// Max-norm of the degree-`r` component of the full symbol equation.
    pub fn residual(&self, q: &SymbolExpansion, r: i32) -> Result<f64> {
        Ok(degree_component(&self.sym, &q.terms, r, false)?.max_norm())
    }
}

/// Convenience wrapper: full `q` expansion of the given depth.
pub fn full_expansion_q(ctx: &SymbolContext, depth: usize) -> Result<SymbolExpansion> {
    Factorization::new(ctx.clone())?.expand(depth)
}

/// Convenience wrapper around [`Factorization::residual`].
pub fn full_symbol_residual(sym: &LameSymbols, q: &SymbolExpansion, r: i32) -> Result<f64> {
    Ok(degree_component(sym, &q.terms, r, false)?.max_norm())
}

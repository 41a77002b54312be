//! Symbols of the collar-form Lamé operator
//! `A^{-1} L = I d_n^2 + B d_n + C` and of the boundary traction operator.
//!
//! Matrix entries follow the block layout `[[tangential, normal column],
//! [normal row, normal-normal]]`, first index upper (row), second lower
//! (column).

use num_complex::Complex64;

use crate::error::Result;
use crate::geometry::{christoffel_from, inverse_metric, x_var, ChristoffelJets, CollarData};
use crate::jet::Jet;
use crate::symbol::SymbolMatrix;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Jets shared by every symbol built at one collar point.
#[derive(Debug, Clone)]
pub struct SymbolContext {
    pub collar: CollarData,
    pub ginv: Vec<Vec<Jet>>,
    pub gamma: ChristoffelJets,
    /// `xi_b`
    pub xi_lower: Vec<Jet>,
    /// `xi^a = g^{ab} xi_b`
    pub xi_upper: Vec<Jet>,
    /// `xi^a xi_a`
    pub xi_norm_sq: Jet,
    /// `|xi'|`
    pub xi_norm: Jet,
    pub lam: Jet,
    pub mu: Jet,
    /// `lambda + 2 mu`
    pub lam2mu: Jet,
    pub inv_mu: Jet,
    pub inv_lam2mu: Jet,
}

impl SymbolContext {
    pub fn new(collar: &CollarData) -> Result<SymbolContext> {
        let n = collar.dim();
        let ginv = inverse_metric(collar)?;
        let gamma = christoffel_from(collar, &ginv);
        let xi_lower = collar.xi_lower();
        let xi_upper: Vec<Jet> = (0..n - 1)
            .map(|a| {
                let mut acc = Jet::zero(collar.space());
                for b in 0..n - 1 {
                    acc += &(&ginv[a][b] * &xi_lower[b]);
                }
                acc
            })
            .collect();
        let mut xi_norm_sq = Jet::zero(collar.space());
        for a in 0..n - 1 {
            xi_norm_sq += &(&xi_upper[a] * &xi_lower[a]);
        }
        let xi_norm = xi_norm_sq.sqrt("|xi'|^2")?;
        let lam = collar.lam().clone();
        let mu = collar.mu().clone();
        let lam2mu = &lam + &mu.scale(2.0);
        let inv_mu = mu.inv("mu")?;
        let inv_lam2mu = lam2mu.inv("lambda + 2 mu")?;
        Ok(SymbolContext {
            collar: collar.clone(),
            ginv,
            gamma,
            xi_lower,
            xi_upper,
            xi_norm_sq,
            xi_norm,
            lam,
            mu,
            lam2mu,
            inv_mu,
            inv_lam2mu,
        })
    }

    pub fn dim(&self) -> usize {
        self.collar.dim()
    }

    pub fn zero(&self) -> Jet {
        Jet::zero(self.collar.space())
    }

    pub fn one(&self) -> Jet {
        Jet::constant(self.collar.space(), 1.0)
    }

    fn zeros(&self, degree: i32) -> SymbolMatrix {
        SymbolMatrix::zeros(self.collar.space(), self.dim(), degree)
    }

    /// `d_k f`
    pub fn d(&self, f: &Jet, k: usize) -> Jet {
        f.partial(x_var(k))
    }

    /// `nabla^a f = g^{ab} d_b f` for tangential `a`.
    pub fn grad_up(&self, f: &Jet, a: usize) -> Jet {
        let mut acc = self.zero();
        for b in 0..self.dim() - 1 {
            acc += &(&self.ginv[a][b] * &self.d(f, b));
        }
        acc
    }

    /// `xi_a nabla^a f = xi^b d_b f`.
    pub fn xi_dot_grad(&self, f: &Jet) -> Jet {
        let mut acc = self.zero();
        for b in 0..self.dim() - 1 {
            acc += &(&self.xi_upper[b] * &self.d(f, b));
        }
        acc
    }

    /// `sum_a Gamma^a_{a k}` over tangential `a`.
    pub fn trace_gamma(&self, k: usize) -> Jet {
        self.gamma.trace_tangential(k)
    }

    /// `(lambda + mu) / (lambda + 3 mu)`
    pub fn f_coefficient(&self) -> Result<Jet> {
        let num = &self.lam + &self.mu;
        let den = &self.lam + &self.mu.scale(3.0);
        Ok(&num * &den.inv("lambda + 3 mu")?)
    }
}

/// The symbols of the collar-form Lamé operator and of the traction map.
#[derive(Debug, Clone)]
pub struct LameSymbols {
    pub a: SymbolMatrix,
    pub d1: SymbolMatrix,
    pub d0: SymbolMatrix,
    pub b1: SymbolMatrix,
    pub b0: SymbolMatrix,
    pub c2: SymbolMatrix,
    pub c1: SymbolMatrix,
    pub c0: SymbolMatrix,
}

impl LameSymbols {
    pub fn build(ctx: &SymbolContext) -> LameSymbols {
        let (d1, d0) = build_d1_d0(ctx);
        let (b1, b0) = build_b(ctx);
        let (c2, c1, c0) = build_c(ctx);
        LameSymbols {
            a: build_a(ctx),
            d1,
            d0,
            b1,
            b0,
            c2,
            c1,
            c0,
        }
    }

    /// `b_l` for `l` in `{1, 0}`.
    pub fn b(&self, degree: i32) -> Option<&SymbolMatrix> {
        match degree {
            1 => Some(&self.b1),
            0 => Some(&self.b0),
            _ => None,
        }
    }

    /// `c_l` for `l` in `{2, 1, 0}`.
    pub fn c(&self, degree: i32) -> Option<&SymbolMatrix> {
        match degree {
            2 => Some(&self.c2),
            1 => Some(&self.c1),
            0 => Some(&self.c0),
            _ => None,
        }
    }
}

/// `A = diag(mu I, lambda + 2 mu)`.
pub fn build_a(ctx: &SymbolContext) -> SymbolMatrix {
    let n = ctx.dim();
    let mut diag = vec![ctx.mu.clone(); n];
    diag[n - 1] = ctx.lam2mu.clone();
    SymbolMatrix::diagonal(&diag, 0)
}

/// Symbols of the tangential part `D` of the traction operator.
pub fn build_d1_d0(ctx: &SymbolContext) -> (SymbolMatrix, SymbolMatrix) {
    let n = ctx.dim();
    let nn = n - 1;
    let mut d1 = ctx.zeros(1);
    let mut d0 = ctx.zeros(0);
    let i_mu = ctx.mu.scale(I);
    let i_lam = ctx.lam.scale(I);
    for a in 0..nn {
        d1.set(a, nn, &i_mu * &ctx.xi_upper[a]);
        d1.set(nn, a, &i_lam * &ctx.xi_lower[a]);
        d0.set(nn, a, &ctx.lam * &ctx.trace_gamma(a));
    }
    d0.set(nn, nn, &ctx.lam * &ctx.trace_gamma(nn));
    (d1, d0)
}

/// Symbols `b_1`, `b_0` of the first-order coefficient `B`.
pub fn build_b(ctx: &SymbolContext) -> (SymbolMatrix, SymbolMatrix) {
    let n = ctx.dim();
    let nn = n - 1;
    let lpm = &ctx.lam + &ctx.mu;

    let mut b1 = ctx.zeros(1);
    let top = &lpm.scale(I) * &ctx.inv_mu;
    let bottom = &lpm.scale(I) * &ctx.inv_lam2mu;
    for a in 0..nn {
        b1.set(a, nn, &top * &ctx.xi_upper[a]);
        b1.set(nn, a, &bottom * &ctx.xi_lower[a]);
    }

    let mut b0 = ctx.zeros(0);
    let tr_n = ctx.trace_gamma(nn);
    let dn_mu_over_mu = &ctx.d(&ctx.mu, nn) * &ctx.inv_mu;
    let lpm_over_l2m = &lpm * &ctx.inv_lam2mu;
    for a in 0..nn {
        for b in 0..nn {
            let mut e = ctx.gamma.get(a, b, nn).scale(2.0);
            if a == b {
                e += &tr_n;
                e += &dn_mu_over_mu;
            }
            b0.set(a, b, e);
        }
        b0.set(a, nn, &ctx.grad_up(&ctx.lam, a) * &ctx.inv_mu);
        let e = &(&lpm_over_l2m * &ctx.trace_gamma(a)) + &(&ctx.d(&ctx.mu, a) * &ctx.inv_lam2mu);
        b0.set(nn, a, e);
    }
    let e = &tr_n + &(&ctx.d(&ctx.lam2mu, nn) * &ctx.inv_lam2mu);
    b0.set(nn, nn, e);
    (b1, b0)
}

/// Symbols `c_2`, `c_1`, `c_0` of the tangential operator `C`.
pub fn build_c(ctx: &SymbolContext) -> (SymbolMatrix, SymbolMatrix, SymbolMatrix) {
    let n = ctx.dim();
    let nn = n - 1;
    let lpm = &ctx.lam + &ctx.mu;
    let lpm_over_mu = &lpm * &ctx.inv_mu;
    let mu_over_l2m = &ctx.mu * &ctx.inv_lam2mu;
    let g = &ctx.gamma;
    let xi_up = &ctx.xi_upper;
    let xi_lo = &ctx.xi_lower;

    // c_2
    let mut c2 = ctx.zeros(2);
    for a in 0..nn {
        for b in 0..nn {
            let mut e = &lpm_over_mu * &(&xi_up[a] * &xi_lo[b]);
            if a == b {
                e += &ctx.xi_norm_sq;
            }
            c2.set(a, b, -e);
        }
    }
    c2.set(nn, nn, -(&mu_over_l2m * &ctx.xi_norm_sq));

    // c_1
    let mut c1 = ctx.zeros(1);
    let add = |m: &mut SymbolMatrix, r: usize, c: usize, v: Jet| {
        let e = m.get(r, c) + &v;
        m.set(r, c, e);
    };
    // first-order part of the Laplace-Beltrami operator
    let mut s = ctx.zero();
    for a in 0..nn {
        for b in 0..nn {
            s += &(&xi_up[a] * g.get(b, a, b));
        }
        s += &ctx.d(&xi_up[a], a);
    }
    let s = s.scale(I);
    for a in 0..nn {
        add(&mut c1, a, a, s.clone());
    }
    add(&mut c1, nn, nn, &mu_over_l2m * &s);
    // grad div Christoffel part
    let f = lpm_over_mu.scale(I);
    let tr_n = ctx.trace_gamma(nn);
    for a in 0..nn {
        for b in 0..nn {
            add(&mut c1, a, b, &f * &(&xi_up[a] * &ctx.trace_gamma(b)));
        }
        add(&mut c1, a, nn, &f * &(&tr_n * &xi_up[a]));
    }
    // Bochner Christoffel part
    let two_i = Complex64::new(0.0, 2.0);
    for a in 0..nn {
        for b in 0..nn {
            let mut e = ctx.zero();
            for c in 0..nn {
                e += &(&xi_up[c] * g.get(a, c, b));
            }
            add(&mut c1, a, b, e.scale(two_i));
        }
        let mut e = ctx.zero();
        for c in 0..nn {
            e += &(&xi_up[c] * g.get(a, c, nn));
        }
        add(&mut c1, a, nn, e.scale(two_i));
        let mut e = ctx.zero();
        for c in 0..nn {
            e += &(&xi_up[c] * g.get(nn, c, a));
        }
        add(&mut c1, nn, a, (&mu_over_l2m * &e).scale(two_i));
    }
    // coefficient gradients
    let xi_grad_mu = ctx.xi_dot_grad(&ctx.mu);
    let dn_mu = ctx.d(&ctx.mu, nn);
    let dn_lam = ctx.d(&ctx.lam, nn);
    for a in 0..nn {
        let grad_lam = ctx.grad_up(&ctx.lam, a);
        for b in 0..nn {
            let mut e = &(&xi_lo[b] * &grad_lam) + &(&xi_up[a] * &ctx.d(&ctx.mu, b));
            if a == b {
                e += &xi_grad_mu;
            }
            add(&mut c1, a, b, (&e * &ctx.inv_mu).scale(I));
        }
        add(
            &mut c1,
            a,
            nn,
            (&(&dn_mu * &ctx.inv_mu) * &xi_up[a]).scale(I),
        );
        add(
            &mut c1,
            nn,
            a,
            (&(&dn_lam * &ctx.inv_lam2mu) * &xi_lo[a]).scale(I),
        );
    }
    add(&mut c1, nn, nn, (&xi_grad_mu * &ctx.inv_lam2mu).scale(I));

    // c_0
    let mut c0 = ctx.zeros(0);
    let lpm_over_l2m = &lpm * &ctx.inv_lam2mu;
    let tr: Vec<Jet> = (0..n).map(|k| ctx.trace_gamma(k)).collect();
    // grad div Christoffel derivatives
    for a in 0..nn {
        for k in 0..n {
            let mut e = ctx.zero();
            for c in 0..nn {
                e += &(&ctx.ginv[a][c] * &ctx.d(&tr[k], c));
            }
            add(&mut c0, a, k, &lpm_over_mu * &e);
        }
    }
    for k in 0..n {
        add(&mut c0, nn, k, &lpm_over_l2m * &ctx.d(&tr[k], nn));
    }
    // Bochner Christoffel derivatives, with g^{ml} summed over all indices
    let contract = |j: usize, k: usize| {
        let mut e = ctx.zero();
        for m in 0..n {
            for l in 0..n {
                e += &(&ctx.ginv[m][l] * &ctx.d(g.get(j, m, l), k));
            }
        }
        e
    };
    for k in 0..n {
        for a in 0..nn {
            add(&mut c0, a, k, contract(a, k));
        }
        add(&mut c0, nn, k, &mu_over_l2m * &contract(nn, k));
    }
    // coefficient gradients
    for a in 0..nn {
        let grad_lam = ctx.grad_up(&ctx.lam, a);
        for b in 0..nn {
            let mut e = &grad_lam * &tr[b];
            for c in 0..nn {
                e -= &(&ctx.d(&ctx.mu, c) * &ctx.d(&ctx.ginv[a][c], b));
            }
            add(&mut c0, a, b, &e * &ctx.inv_mu);
        }
        let mut e = &grad_lam * &tr[nn];
        for b in 0..nn {
            e -= &(&ctx.d(&ctx.mu, b) * &ctx.d(&ctx.ginv[a][b], nn));
        }
        add(&mut c0, a, nn, &e * &ctx.inv_mu);
    }
    let dn_lam_over = &dn_lam * &ctx.inv_lam2mu;
    for k in 0..n {
        add(&mut c0, nn, k, &dn_lam_over * &tr[k]);
    }

    (c2, c1, c0)
}

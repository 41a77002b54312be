#![allow(dead_code)]

use lame_dtn::geometry::{collar_space, CollarData, Polynomial};
use lame_dtn::jet::{multi_indices, Jet};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random polynomial in the spatial coordinates with the given constant
/// term and coefficients of size `scale / deg!`.
pub fn random_poly(
    rng: &mut impl Rng,
    dim: usize,
    order: usize,
    c0: f64,
    scale: f64,
) -> Polynomial {
    let mut p = Polynomial::constant(c0, dim);
    let mut fact = 1.0;
    for d in 1..=order {
        fact *= d as f64;
        for e in multi_indices(dim, d) {
            p.push(e, scale * rng.random_range(-1.0..1.0) / fact);
        }
    }
    p
}

/// Random symmetric positive definite tangential metric table.
pub fn random_metric(
    rng: &mut impl Rng,
    dim: usize,
    order: usize,
    scale: f64,
) -> Vec<Vec<Polynomial>> {
    let m = dim - 1;
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..m).map(|_| rng.random_range(-0.5..0.5)).collect())
        .collect();
    let mut g = vec![vec![Polynomial::default(); m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut c0: f64 = (0..m).map(|k| a[i][k] * a[j][k]).sum();
            if i == j {
                c0 += 0.8;
            }
            let p = random_poly(rng, dim, order, c0, scale);
            g[i][j] = p.clone();
            g[j][i] = p;
        }
    }
    g
}

/// Random admissible Lamé pair: `mu(0)` in `[0.5, 2]`, `lambda(0) + mu(0)`
/// in `[0, 3]`.
pub fn random_lame(
    rng: &mut impl Rng,
    dim: usize,
    order: usize,
    scale: f64,
) -> (Polynomial, Polynomial) {
    let mu0 = rng.random_range(0.5..2.0);
    let lam0 = rng.random_range(0.0..3.0) - mu0;
    (
        random_poly(rng, dim, order, lam0, scale),
        random_poly(rng, dim, order, mu0, scale * mu0),
    )
}

pub fn random_xi(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let xi: Vec<f64> = (0..dim - 1).map(|_| rng.random_range(-1.5..1.5)).collect();
        if xi.iter().map(|x| x * x).sum::<f64>() > 0.1 {
            return xi;
        }
    }
}

pub fn random_collar(rng: &mut impl Rng, dim: usize, order: usize) -> CollarData {
    let metric = random_metric(rng, dim, order, 0.3);
    let (lam, mu) = random_lame(rng, dim, order, 0.4);
    let xi = random_xi(rng, dim);
    CollarData::from_polynomials(dim, order, vec![0.0; dim], xi, &metric, &lam, &mu)
        .expect("random collar is admissible")
}

/// Euclidean collar with constant coefficients.
pub fn flat_collar(dim: usize, order: usize, lam: f64, mu: f64, xi: Vec<f64>) -> CollarData {
    CollarData::euclidean(
        dim,
        order,
        xi,
        &Polynomial::constant(lam, dim),
        &Polynomial::constant(mu, dim),
    )
    .expect("flat collar is admissible")
}

/// Random polynomial vector field times `exp(i x'.xi0)`, independent of the
/// cotangent variables.
pub fn random_field(rng: &mut impl Rng, collar: &CollarData) -> Vec<Jet> {
    let dim = collar.dim();
    let space = collar_space(dim, collar.order());
    let mut phase = Jet::zero(&space);
    for b in 0..dim - 1 {
        phase += &Jet::variable(&space, b, 0.0).scale(Complex64::new(0.0, collar.xi0()[b]));
    }
    let wave = phase.exp();
    (0..dim)
        .map(|_| {
            let c = rng.random_range(-1.0..1.0);
            let p = random_poly(rng, dim, collar.order(), c, 1.0);
            let re = p.to_jet(dim, &space).unwrap();
            let c = rng.random_range(-1.0..1.0);
            let p = random_poly(rng, dim, collar.order(), c, 1.0);
            let im = p.to_jet(dim, &space).unwrap();
            &(&re + &im.scale(Complex64::new(0.0, 1.0))) * &wave
        })
        .collect()
}

pub fn max_diff(a: &[Jet], b: &[Jet], order: i32) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (&x.truncated(order) - &y.truncated(order)).max_norm())
        .fold(0.0, f64::max)
}

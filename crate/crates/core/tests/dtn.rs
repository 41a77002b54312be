mod common;

use common::*;
use lame_dtn::dtn::{
    assemble_p, direct_p1, lowering_matrix, restrict, DtNSymbolOracle, DtnExpansion,
    GroundTruthOracle,
};
use lame_dtn::factorization::Factorization;
use lame_dtn::lame::SymbolContext;

#[test]
fn two_routes_to_principal_symbol_agree() {
    for (dim, seed) in [(2, 301), (3, 302), (4, 303)] {
        let mut r = rng(seed);
        let c = random_collar(&mut r, dim, 4);
        let f = Factorization::new(SymbolContext::new(&c).unwrap()).unwrap();
        let q = f.expand(2).unwrap();
        let p = assemble_p(&f, &q);
        let direct = direct_p1(&f.ctx).unwrap();
        assert!(p.terms[0].distance(&direct) < 1e-11 * direct.max_norm().max(1.0));
    }
}

#[test]
fn lowered_principal_symbol_is_hermitian_positive() {
    for seed in 310..320 {
        let mut r = rng(seed);
        let dim = 2 + (seed % 2) as usize;
        let c = random_collar(&mut r, dim, 2);
        let p1 = direct_p1(&SymbolContext::new(&c).unwrap()).unwrap().value();
        let gp = lowering_matrix(&c) * p1;
        assert!((&gp - gp.adjoint()).camax() < 1e-13 * gp.camax());
        let im_part = nalgebra::DMatrix::from_fn(dim, dim, |i, j| gp[(i, j)].im);
        // Hermitian H = S + iA is positive iff the real form [[S, -A], [A, S]] is
        let n = dim;
        let real_form = nalgebra::DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let (bi, bj) = (i / n, j / n);
            let (ii, jj) = (i % n, j % n);
            match (bi, bj) {
                (0, 0) | (1, 1) => gp[(ii, jj)].re,
                (0, 1) => -im_part[(ii, jj)],
                _ => im_part[(ii, jj)],
            }
        });
        let eig = real_form.symmetric_eigenvalues();
        assert!(eig.min() > 0.0, "{eig}");
    }
}

#[test]
fn oracle_degree_one_is_restricted_assembly() {
    let mut r = rng(321);
    let c = random_collar(&mut r, 3, 5);
    let oracle = GroundTruthOracle::new(c.clone(), 3).unwrap();
    let exp = DtnExpansion::compute(&c, 3).unwrap();
    let zero = [0.0, 0.0];
    for (t, degree) in [1, 0, -1].into_iter().enumerate() {
        let got = oracle.symbol(degree, &zero, c.xi0()).unwrap();
        assert_eq!(got.degree(), degree);
        assert_eq!(got, restrict(&exp.p.terms[t]));
    }
    assert!(oracle.symbol(-2, &zero, c.xi0()).is_err());
    assert!(oracle.symbol(2, &zero, c.xi0()).is_err());
}

#[test]
fn oracle_symbols_are_homogeneous() {
    let mut r = rng(331);
    let c = random_collar(&mut r, 3, 5);
    let oracle = GroundTruthOracle::new(c.clone(), 3).unwrap();
    let zero = [0.0, 0.0];
    let xi = c.xi0().to_vec();
    let xi2: Vec<f64> = xi.iter().map(|x| 2.0 * x).collect();
    let a = oracle.p_terms(&zero, &xi, 3).unwrap();
    let b = oracle.p_terms(&zero, &xi2, 3).unwrap();
    for (pa, pb) in a.iter().zip(&b) {
        let scaled = pa.scale(2f64.powi(pa.degree()));
        assert!(
            scaled.distance(pb) < 1e-10 * pb.max_norm().max(1.0),
            "degree {}",
            pa.degree()
        );
    }
}

#[test]
fn oracle_tangential_jets_predict_nearby_points() {
    let mut r = rng(341);
    let c = random_collar(&mut r, 3, 5);
    let oracle = GroundTruthOracle::new(c.clone(), 2).unwrap();
    let base = oracle.p_terms(&[0.0, 0.0], c.xi0(), 2).unwrap();
    let h = [0.01, -0.015];
    let moved = oracle.p_terms(&h, c.xi0(), 2).unwrap();
    let mut shift = vec![0.0; base[0].get(0, 0).n_vars()];
    shift[..2].copy_from_slice(&h);
    for (pb, pm) in base.iter().zip(&moved) {
        for (jb, jm) in pb.entries().iter().zip(pm.entries()) {
            let predicted = jb.recenter(&shift).unwrap().value();
            // Taylor remainder of order h^(K+1)
            assert!(
                (predicted - jm.value()).norm() < 1e-9,
                "{predicted} vs {}",
                jm.value()
            );
        }
    }
}

#[test]
fn constant_coefficients_have_no_lower_order_terms() {
    let c = flat_collar(3, 5, 0.4, 1.1, vec![0.3, 1.2]);
    let exp = DtnExpansion::compute(&c, 3).unwrap();
    for t in 1..3 {
        assert_eq!(exp.q.terms[t].max_norm(), 0.0);
        assert_eq!(exp.p.terms[t].max_norm(), 0.0);
    }
}

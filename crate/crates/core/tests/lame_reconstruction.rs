mod common;

use common::*;
use lame_dtn::lame::{LameSymbols, SymbolContext};
use lame_dtn::operator::{lame_bochner, lame_divergence, lame_expanded, lame_from_symbols};

fn check(dim: usize, seed: u64) {
    let mut r = rng(seed);
    let order = 5;
    let collar = random_collar(&mut r, dim, order);
    let ctx = SymbolContext::new(&collar).unwrap();
    let sym = LameSymbols::build(&ctx);
    let u = random_field(&mut r, &collar);

    let expanded = lame_expanded(&ctx, &u);
    let divergence = lame_divergence(&ctx, &u);
    let bochner = lame_bochner(&ctx, &u).unwrap();
    let symbols = lame_from_symbols(&ctx, &sym, &u).unwrap();

    let k = order as i32 - 2;
    let scale = divergence.iter().map(|j| j.max_norm()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    assert!(
        max_diff(&divergence, &expanded, k) < tol,
        "expanded form, seed {seed}"
    );
    assert!(
        max_diff(&divergence, &bochner, k) < tol,
        "Bochner form, seed {seed}"
    );
    assert!(
        max_diff(&divergence, &symbols, k) < tol,
        "symbol form, seed {seed}"
    );
}

#[test]
fn operator_routes_agree_in_two_dimensions() {
    for seed in 0..6 {
        check(2, seed);
    }
}

#[test]
fn operator_routes_agree_in_three_dimensions() {
    for seed in 10..14 {
        check(3, seed);
    }
}

#[test]
fn operator_routes_agree_in_four_dimensions() {
    check(4, 99);
}

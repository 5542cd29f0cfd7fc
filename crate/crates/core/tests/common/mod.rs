//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use gdof_lab::{ChannelSpec2, Mat2};
use proptest::prelude::*;
use rand::Rng;

/// Denominator of the dyadic grid. Sums and differences of grid values are
/// exact in `f64`, so formula identities can be compared bit for bit.
pub const DYADIC: f64 = 1024.0;

pub fn dyadic(units: u32) -> f64 {
    units as f64 / DYADIC
}

fn spec_from_fractions(alpha: [f64; 4], frac: [f64; 4], quantize: bool) -> ChannelSpec2 {
    let q = |v: f64| if quantize { (v * DYADIC).floor() / DYADIC } else { v };
    let a: Mat2 = [[alpha[0], alpha[1]], [alpha[2], alpha[3]]];
    let b: Mat2 = [
        [q(frac[0] * alpha[0]), q(frac[1] * alpha[1])],
        [q(frac[2] * alpha[2]), q(frac[3] * alpha[3])],
    ];
    ChannelSpec2::new(a, b).expect("generated spec is valid")
}

/// Random spec with strengths in `[0, max_alpha]` on the dyadic grid.
pub fn random_dyadic_spec<R: Rng>(rng: &mut R, max_alpha: f64) -> ChannelSpec2 {
    let top = (max_alpha * DYADIC) as u32;
    let alpha = [(); 4].map(|_| dyadic(rng.random_range(0..=top)));
    let frac = [(); 4].map(|_| rng.random::<f64>());
    spec_from_fractions(alpha, frac, true)
}

/// Random spec with continuous strengths in `[0, max_alpha]`.
pub fn random_spec<R: Rng>(rng: &mut R, max_alpha: f64) -> ChannelSpec2 {
    let alpha = [(); 4].map(|_| rng.random::<f64>() * max_alpha);
    let frac = [(); 4].map(|_| rng.random::<f64>());
    spec_from_fractions(alpha, frac, false)
}

pub fn dyadic_spec_strategy(max_alpha: f64) -> impl Strategy<Value = ChannelSpec2> {
    let top = (max_alpha * DYADIC) as u32;
    (prop::array::uniform4(0..=top), prop::array::uniform4(0.0..=1.0f64))
        .prop_map(|(a, f)| spec_from_fractions(a.map(dyadic), f, true))
}

pub fn spec_strategy(max_alpha: f64) -> impl Strategy<Value = ChannelSpec2> {
    (prop::array::uniform4(0.0..=max_alpha), prop::array::uniform4(0.0..=1.0f64))
        .prop_map(|(a, f)| spec_from_fractions(a, f, false))
}

/// Proptest configuration with a fixed generator seed, for properties checked
/// by simulation at finite SNR.
pub fn fixed_config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x6d6f_6e74_6563_6172),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Specs whose exponents are multiples of `1/q`, so any two exponents either
/// coincide or differ by at least `1/q`.
pub fn lattice_spec_strategy(q: u32, max_alpha: f64) -> impl Strategy<Value = ChannelSpec2> {
    let top = (max_alpha * q as f64) as u32;
    (prop::array::uniform4(0..=top), prop::array::uniform4(0.0..=1.0f64)).prop_map(move |(a, f)| {
        let alpha = a.map(|v| v as f64 / q as f64);
        let beta = [0, 1, 2, 3].map(|i| (f[i] * a[i] as f64).floor() / q as f64);
        ChannelSpec2::new([[alpha[0], alpha[1]], [alpha[2], alpha[3]]], [[beta[0], beta[1]], [beta[2], beta[3]]])
            .expect("lattice spec is valid")
    })
}

/// Grid `{0, step, 2 step, ...} ∪ {cap}` restricted to `[0, cap]`.
pub fn grid_levels(cap: f64, step: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..).map(|i| i as f64 * step).take_while(|x| *x < cap - 1e-12).collect();
    v.push(cap);
    v
}

/// Best sum GDoF over every CSIT matrix on the per-entry grid whose entries
/// sum to at most `budget`, found by visiting all four coordinates.
pub fn exhaustive_budget_optimum(alpha: &Mat2, budget: f64, step: f64) -> f64 {
    let lv: Vec<Vec<f64>> = [alpha[0][0], alpha[0][1], alpha[1][0], alpha[1][1]]
        .iter()
        .map(|&c| grid_levels(c, step))
        .collect();
    let mut best = f64::NEG_INFINITY;
    for &b11 in &lv[0] {
        for &b12 in &lv[1] {
            for &b21 in &lv[2] {
                for &b22 in &lv[3] {
                    if b11 + b12 + b21 + b22 > budget + 1e-9 {
                        break;
                    }
                    let spec = ChannelSpec2::new(*alpha, [[b11, b12], [b21, b22]]).unwrap();
                    best = best.max(gdof_lab::sum_gdof_two_user(&spec).unwrap().d_sum);
                }
            }
        }
    }
    best
}

//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use steward_core::beliefs::GriddedBelief;
use steward_core::game::{ex_ante_utility, GameParams};

/// Brute-force argmax of the ex-ante utility on a 1e-4 grid.
pub fn grid_argmax(go: f64, v: f64, p: &GameParams<f64>) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..=10_000 {
        let g = k as f64 * 1e-4;
        let u = ex_ante_utility(g, go, v, p).unwrap();
        if u > best.0 {
            best = (u, g);
        }
    }
    best.1
}

/// Games drawn from alpha in [0, 2], n_hat in {0.3, 0.5, 0.7},
/// lambda_in in (1, 3], lambda_out in (0, 1).
pub fn random_game<R: Rng>(rng: &mut R) -> GameParams<f64> {
    GameParams::new(
        2.0 * rng.random::<f64>(),
        3.0 - 2.0 * rng.random::<f64>().min(1.0 - 1e-9),
        rng.random::<f64>().clamp(1e-6, 1.0 - 1e-6),
        [0.3, 0.5, 0.7][rng.random_range(0..3)],
        0.3,
    )
    .unwrap()
}

/// `E[0.5 + |o - 0.5|]` for a two-component Gaussian mixture clipped to
/// [0, 1], by composite Simpson on the interior plus the two boundary atoms.
pub fn mixture_v_bar(mu1: f64, mu2: f64, sigma: f64, mix: f64) -> f64 {
    let (a, b) = (Normal::new(mu1, sigma).unwrap(), Normal::new(mu2, sigma).unwrap());
    let pdf = |x: f64| mix * a.pdf(x) + (1.0 - mix) * b.pdf(x);
    let cdf = |x: f64| mix * a.cdf(x) + (1.0 - mix) * b.cdf(x);
    let n = 20_000;
    let h = 1.0 / n as f64;
    let f = |x: f64| (0.5 + (x - 0.5).abs()) * pdf(x);
    // split at 0.5 so the kink sits on a node
    let mut s = f(0.0) + f(1.0);
    for k in 1..n {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 + cdf(0.0) + (1.0 - cdf(1.0))
}

/// Analytic bin masses of `Beta(a, b)` truncated to `[lo, hi]`.
pub fn truncated_masses(a: f64, b: f64, lo: f64, hi: f64, grid: &GriddedBelief<f64>) -> Vec<f64> {
    let cdf = |x: f64| beta_reg(a, b, x.clamp(lo, hi));
    let total = cdf(hi) - cdf(lo);
    (0..grid.bins())
        .map(|k| {
            let (l, r) = grid.bin_edges(k);
            (cdf(r) - cdf(l)) / total
        })
        .collect()
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#![allow(dead_code)]

use qbm_core::{EnvironmentSpec, GaussianState, Regime, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BETAS: [f64; 3] = [0.5, 1.0 / 1.15, 5.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random environment of `n` modes and a trap stiffness placed in `regime`.
pub fn instance(
    rng: &mut impl Rng,
    n: usize,
    regime: Regime,
    beta: f64,
) -> (SystemParams, EnvironmentSpec) {
    let env_mass = rng.gen_range(0.5..2.0);
    let mass = rng.gen_range(0.5..2.0);
    let mut omegas = Vec::with_capacity(n);
    let mut w = rng.gen_range(0.2..0.8);
    for _ in 0..n {
        omegas.push(w);
        w += rng.gen_range(0.08..0.7);
    }
    let couplings: Vec<f64> = omegas
        .iter()
        .map(|w| {
            let c = rng.gen_range(0.15..0.8) * w;
            if rng.gen_bool(0.5) {
                c
            } else {
                -c
            }
        })
        .collect();
    let s: f64 = omegas
        .iter()
        .zip(&couplings)
        .map(|(w, c)| c * c / (env_mass * w * w))
        .sum();
    let stiffness = match regime {
        Regime::Bounded => s * rng.gen_range(1.1..3.0),
        Regime::Critical => s,
        Regime::Unstable => s * rng.gen_range(0.4..0.95),
    };
    let sys = SystemParams::new(mass, (stiffness / mass).sqrt(), 1.0).unwrap();
    let env = EnvironmentSpec::new(env_mass, omegas, couplings, beta).unwrap();
    (sys, env)
}

pub fn packet(rng: &mut impl Rng, hbar: f64) -> GaussianState {
    let dx2 = rng.gen_range(0.04..1.0);
    let dxp = rng.gen_range(-0.3..0.3);
    let dp2 = (0.25 * hbar * hbar + dxp * dxp) / dx2 * rng.gen_range(1.0..4.0);
    GaussianState::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        dx2,
        dp2,
        dxp,
        hbar,
    )
    .unwrap()
}

pub fn regimes() -> [Regime; 3] {
    [Regime::Bounded, Regime::Critical, Regime::Unstable]
}

// Reference values are kept at the digits the oracle printed.
#![allow(clippy::excessive_precision)]

mod common;

use common::*;
use qbm_core::gaussian::{evolve_covariance, evolve_covariance_regular, evolve_mean, Transport};
use qbm_core::noise::{noise_covariance, noise_covariance_direct};
use qbm_core::oracle::oracle_covariance;
use qbm_core::zsol::z_exact;
use qbm_core::{EnvironmentSpec, GaussianState, ModalDecomposition, RootOptions, SystemParams};

fn n1() -> (SystemParams, EnvironmentSpec, ModalDecomposition) {
    let sys = SystemParams::natural();
    let env = EnvironmentSpec::new(1.0, vec![2.0], vec![1.0], 1.0).unwrap();
    let m = ModalDecomposition::solve(&sys, &env, RootOptions::default()).unwrap();
    (sys, env, m)
}

fn fig1_packet() -> GaussianState {
    GaussianState::new(0.0, 0.0, 0.04, 25.0, 0.0, 1.0).unwrap()
}

// Reference moments from a 30-digit matrix exponential of the two-oscillator flow.
#[test]
fn single_mode_mean_matches_reference() {
    let (sys, _, m) = n1();
    let (xc, pc) = evolve_mean(&m, &sys, 1.0, 0.0, 1.7);
    assert!((xc - 0.060227732922865575944).abs() < 1e-9);
    assert!((pc + 0.69076626110909345418).abs() < 1e-9);
}

#[test]
fn single_mode_covariance_matches_reference() {
    let (sys, env, m) = n1();
    let s = evolve_covariance(&m, &sys, &env, &fig1_packet(), 2.0).unwrap();
    assert!((s.dx2 - 28.217493587126428951).abs() < 1e-6);
    assert!((s.dp2 - 0.66250682307907690092).abs() < 1e-6);
    assert!((s.dxp + 3.5393515602174334615).abs() < 1e-6);
    let o = oracle_covariance(&sys, &env, &fig1_packet(), 2.0).unwrap();
    assert!((o.dx2 - 28.217493587126428951).abs() < 1e-9);
    assert!((o.dp2 - 0.66250682307907690092).abs() < 1e-9);
    assert!((o.dxp + 3.5393515602174334615).abs() < 1e-9);
}

#[test]
fn single_mode_noise_is_oracle_minus_transport() {
    let (sys, env, m) = n1();
    let n = noise_covariance(&m, &sys, &env, 2.0).unwrap();
    assert!((n.xx - 0.26309432263346798074).abs() < 1e-6);
    assert!((n.xp - 0.041909507113543750549).abs() < 1e-6);
    assert!((n.pp - 0.18776867992444380407).abs() < 1e-6);
    let o = oracle_covariance(&sys, &env, &fig1_packet(), 2.0).unwrap();
    let zero = Default::default();
    let h = Transport::from_z(z_exact(&m, 2.0), sys.mass()).propagate(&fig1_packet(), &zero);
    assert!((o.dx2 - h.dx2 - n.xx).abs() < 1e-6);
    assert!((o.dxp - h.dxp - n.xp).abs() < 1e-6);
    assert!((o.dp2 - h.dp2 - n.pp).abs() < 1e-6);
}

#[test]
fn randomized_equivalence_all_regimes() {
    let mut r = rng(2024);
    for regime in regimes() {
        for case in 0..6 {
            let n = 1 + case % 5;
            let beta = BETAS[case % 3];
            let (sys, env) = instance(&mut r, n, regime, beta);
            let s0 = packet(&mut r, 1.0);
            let m = ModalDecomposition::solve(&sys, &env, RootOptions::forcing(regime)).unwrap();
            let t_max = m.mu0().map_or(30.0, |mu| (4.0 / mu).min(30.0));
            for k in 1..=6 {
                let t = t_max * k as f64 / 6.0;
                let a = evolve_covariance_regular(&m, &sys, &env, &s0, t).unwrap();
                let (xc, pc) = evolve_mean(&m, &sys, s0.xc, s0.pc, t);
                let b = oracle_covariance(&sys, &env, &s0, t).unwrap();
                for (name, x, y) in [
                    ("dx2", a.dx2, b.dx2),
                    ("dp2", a.dp2, b.dp2),
                    ("dxp", a.dxp, b.dxp),
                    ("xc", xc, b.xc),
                    ("pc", pc, b.pc),
                ] {
                    assert!((x - y).abs() < 1e-6, "{regime:?} n={n} t={t} {name}: {x} vs {y}");
                }
            }
        }
    }
}

#[test]
fn chi_route_matches_full_square_route() {
    let mut r = rng(99);
    for case in 0..4 {
        let (sys, env) = instance(&mut r, 1 + case, qbm_core::Regime::Bounded, BETAS[case % 3]);
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::default()).unwrap();
        for t in [0.9, 4.3] {
            let a = match noise_covariance(&m, &sys, &env, t) {
                Ok(a) => a,
                Err(qbm_core::Error::CausticAtHorizon { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let b = noise_covariance_direct(&m, &sys, &env, t).unwrap();
            for (x, y) in [(a.xx, b.xx), (a.xp, b.xp), (a.pp, b.pp)] {
                assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()), "t={t}: {x} vs {y}");
            }
        }
    }
}

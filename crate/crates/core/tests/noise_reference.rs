// Reference values are kept at the digits the oracle printed.
#![allow(clippy::excessive_precision)]

use qbm_core::noise::{chi, noise_integrals, noise_covariance_direct};
use qbm_core::{EnvironmentSpec, ModalDecomposition, RootOptions, SystemParams};

// Triangle integrals of a single-mode kernel against the two-frequency v
// functions, evaluated independently at 30 digits by adaptive quadrature.
const CHI: [[f64; 2]; 2] = [
    [0.1628382899417566599, 0.25739129520042991181],
    [-0.20888440396770214846, 0.1311938262692705497],
];

fn setup() -> (SystemParams, EnvironmentSpec, ModalDecomposition) {
    let sys = SystemParams::natural();
    let env = EnvironmentSpec::new(1.0, vec![2.0], vec![1.0], 1.0).unwrap();
    let m = ModalDecomposition::solve(&sys, &env, RootOptions::default()).unwrap();
    (sys, env, m)
}

#[test]
fn chi_values_single_mode() {
    let (sys, env, m) = setup();
    for i in 1..=2u8 {
        for j in 1..=2u8 {
            let v = chi(&m, &sys, &env, 3.0, i, j).unwrap();
            let r = CHI[i as usize - 1][j as usize - 1];
            assert!((v - r).abs() < 1e-10 * r.abs().max(1.0), "chi{i}{j}: {v} vs {r}");
        }
    }
    let n = noise_integrals(&m, &sys, &env, 3.0).unwrap();
    assert!(n.chi11 > 0.0 && n.chi22 > 0.0);
    assert!((n.chi12_plus_21() - (CHI[0][1] + CHI[1][0])).abs() < 1e-10);
}

#[test]
fn hotter_environment_adds_noise() {
    let (sys, env, m) = setup();
    for t in [1.0, 3.0, 8.0] {
        let mut prev: Option<(f64, f64)> = None;
        for beta in [5.0, 2.0, 1.0, 0.5, 0.1] {
            let e = env.with_beta(beta).unwrap();
            let n = noise_covariance_direct(&m, &sys, &e, t).unwrap();
            assert!(n.xx >= 0.0 && n.pp >= 0.0 && n.det() >= -1e-12);
            if let Some((xx, pp)) = prev {
                assert!(n.xx >= xx && n.pp >= pp, "beta={beta} t={t}");
            }
            prev = Some((n.xx, n.pp));
        }
    }
}

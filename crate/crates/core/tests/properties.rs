mod common;

use common::*;
use proptest::prelude::*;
use qbm_core::charpoly::eval_p0;
use qbm_core::gaussian::{
    decoherence_measure, density_matrix_value, evolve_covariance_regular, off_diagonal,
};
use qbm_core::model::{classify_regime, kernel_ki, kernel_kr, spectral_strength, DEFAULT_BALANCE_TOL};
use qbm_core::noise::noise_covariance_direct;
use qbm_core::oracle::{build_full_flow, flow_exponential, symplectic_defect};
use qbm_core::quadrature::adaptive;
use qbm_core::zsol::{propagator_basis, residual_check_scaled, z_exact};
use qbm_core::{EnvironmentSpec, GaussianState, ModalDecomposition, Regime, RootOptions, SystemParams};

fn regime_of(i: usize) -> Regime {
    regimes()[i % 3]
}

fn rank(r: Regime) -> u8 {
    match r {
        Regime::Bounded => 0,
        Regime::Critical => 1,
        Regime::Unstable => 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_have_definite_parity(seed in any::<u64>(), n in 1usize..6, dt in -40.0f64..40.0) {
        let (_, env) = instance(&mut rng(seed), n, Regime::Bounded, 1.0);
        prop_assert!((kernel_ki(&env, dt) + kernel_ki(&env, -dt)).abs() < 1e-12);
        prop_assert!((kernel_kr(&env, 1.0, dt) - kernel_kr(&env, 1.0, -dt)).abs() < 1e-12);
    }

    #[test]
    fn spectral_strength_is_additive(seed in any::<u64>(), n in 2usize..8, cut in 1usize..7) {
        let (_, env) = instance(&mut rng(seed), n, Regime::Bounded, 1.0);
        let cut = cut.min(n - 1);
        let part = |lo: usize, hi: usize| {
            EnvironmentSpec::new(
                env.mass(),
                env.omegas()[lo..hi].to_vec(),
                env.couplings()[lo..hi].to_vec(),
                1.0,
            )
            .unwrap()
        };
        let total = spectral_strength(&part(0, cut)) + spectral_strength(&part(cut, n));
        prop_assert!((total - spectral_strength(&env)).abs() < 1e-13 * total);
    }

    #[test]
    fn stronger_coupling_never_stabilizes(
        seed in any::<u64>(), n in 1usize..6, r in 0usize..3, k in 0usize..6, f in 1.0f64..3.0,
    ) {
        let (sys, env) = instance(&mut rng(seed), n, regime_of(r), 1.0);
        let mut c = env.couplings().to_vec();
        c[k % n] *= f;
        let before = classify_regime(&sys, &env, DEFAULT_BALANCE_TOL).label;
        let after = classify_regime(&sys, &env.with_couplings(c).unwrap(), DEFAULT_BALANCE_TOL).label;
        prop_assert!(rank(after) >= rank(before));
    }

    #[test]
    fn bounded_roots_interlace(seed in any::<u64>(), n in 1usize..=12) {
        let (sys, env) = instance(&mut rng(seed), n, Regime::Bounded, 1.0);
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::default()).unwrap();
        let nu = m.nus();
        prop_assert_eq!(nu.len(), n + 1);
        prop_assert!(nu[0] > 0.0);
        for (k, w) in env.omegas().iter().enumerate() {
            prop_assert!(nu[k] < *w && *w < nu[k + 1], "k={} nu={:?} w={:?}", k, nu, env.omegas());
        }
    }

    #[test]
    fn sum_rules(seed in any::<u64>(), n in 1usize..=8, r in 0usize..3) {
        let regime = regime_of(r);
        let (sys, env) = instance(&mut rng(seed), n, regime, 1.0);
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::forcing(regime)).unwrap();
        prop_assert!((m.amp_sum() - 1.0).abs() < 1e-10);
        let om2 = sys.omega() * sys.omega();
        prop_assert!((m.second_moment() - om2).abs() < 1e-8 * om2.max(1.0));
        let z0 = z_exact(&m, 0.0);
        prop_assert_eq!(z0.z, 0.0);
        prop_assert!((z0.zdot - 1.0).abs() < 1e-10);
        prop_assert!(z0.zddot.abs() < 1e-12);
    }

    #[test]
    fn characteristic_function_changes_sign_at_roots(seed in any::<u64>(), n in 1usize..=8, r in 0usize..3) {
        let regime = regime_of(r);
        let (sys, env) = instance(&mut rng(seed), n, regime, 1.0);
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::forcing(regime)).unwrap();
        for mode in m.modes().iter().filter(|md| md.s != 0.0) {
            let d = 1e-9 * mode.s.abs();
            let lo = eval_p0(&sys, &env, mode.s - d);
            let hi = eval_p0(&sys, &env, mode.s + d);
            prop_assert!(lo * hi <= 0.0, "s={} lo={} hi={}", mode.s, lo, hi);
        }
    }

    #[test]
    fn modal_z_solves_the_memory_equation(seed in any::<u64>(), n in 1usize..=8, r in 0usize..3) {
        let regime = regime_of(r);
        let (sys, env) = instance(&mut rng(seed), n, regime, 1.0);
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::forcing(regime)).unwrap();
        let taus: Vec<f64> = (0..100).map(|i| 0.1 * i as f64).collect();
        prop_assert!(residual_check_scaled(&m, &sys, &env, &taus) < 1e-8);
    }

    #[test]
    fn reflection_identities(seed in any::<u64>(), n in 1usize..5, t in 0.5f64..12.0, frac in 0.0f64..1.0) {
        let (sys, env) = instance(&mut rng(seed), n, Regime::Bounded, 1.0);
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::default()).unwrap();
        if let Ok(b) = propagator_basis(&m, t) {
            let tau = frac * t;
            prop_assert!((b.v1(&m, tau) - b.u2(&m, t - tau)).abs() < 1e-15);
            prop_assert!((b.v2(&m, tau) - b.u1(&m, t - tau)).abs() < 1e-15);
            prop_assert!((b.u2(&m, t) - 1.0).abs() < 1e-12 && b.u2(&m, 0.0) == 0.0);
        }
    }

    #[test]
    fn noise_matrix_is_positive(seed in any::<u64>(), n in 1usize..5, r in 0usize..3, b in 0usize..3, t in 0.1f64..15.0) {
        let regime = regime_of(r);
        let (sys, env) = instance(&mut rng(seed), n, regime, BETAS[b]);
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::forcing(regime)).unwrap();
        let nc = noise_covariance_direct(&m, &sys, &env, t).unwrap();
        let scale = nc.xx.abs().max(nc.pp.abs()).max(1e-300);
        prop_assert!(nc.xx >= 0.0 && nc.pp >= 0.0);
        prop_assert!(nc.det() >= -1e-12 * scale * scale);
    }

    #[test]
    fn physical_states_everywhere(seed in any::<u64>(), n in 1usize..5, r in 0usize..3, b in 0usize..3, t in 0.1f64..20.0) {
        let regime = regime_of(r);
        let mut g = rng(seed);
        let (sys, env) = instance(&mut g, n, regime, BETAS[b]);
        let s0 = packet(&mut g, 1.0);
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::forcing(regime)).unwrap();
        let s = evolve_covariance_regular(&m, &sys, &env, &s0, t).unwrap();
        prop_assert!(s.uncertainty() >= 0.25 - 1e-9 - 1e-12 * s.dx2 * s.dp2);
        let dc = decoherence_measure(&s);
        prop_assert!((dc * s.dx2 - s.uncertainty()).abs() <= 1e-12 * s.uncertainty());
        prop_assert!(dc >= 0.25 / s.dx2 * (1.0 - 1e-9));
    }

    #[test]
    fn decoupled_evolution_is_symplectic(seed in any::<u64>(), t in 0.1f64..30.0) {
        let mut g = rng(seed);
        let (sys, env) = instance(&mut g, 3, Regime::Bounded, 1.0);
        let env = env.with_couplings(vec![0.0; 3]).unwrap();
        let s0 = packet(&mut g, 1.0);
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::default()).unwrap();
        let s = evolve_covariance_regular(&m, &sys, &env, &s0, t).unwrap();
        prop_assert!((s.uncertainty() - s0.uncertainty()).abs() < 1e-10);
    }

    #[test]
    fn full_flow_is_symplectic(seed in any::<u64>(), n in 0usize..6, r in 0usize..3, t in 0.0f64..30.0) {
        let regime = regime_of(r);
        let (sys, env) = if n == 0 {
            (SystemParams::natural(), EnvironmentSpec::empty(1.0, 1.0).unwrap())
        } else {
            instance(&mut rng(seed), n, regime, 1.0)
        };
        let g = build_full_flow(&sys, &env);
        let t = if regime == Regime::Unstable { t.min(10.0) } else { t };
        let s = flow_exponential(&g, t).unwrap();
        prop_assert!(symplectic_defect(&s) < 1e-9 * s.amax().max(1.0).powi(2));
    }

    #[test]
    fn density_matrix_is_hermitian(
        xc in -2.0f64..2.0, pc in -2.0f64..2.0, dx2 in 0.05f64..2.0, dxp in -0.5f64..0.5,
        extra in 1.0f64..3.0, big_r in -3.0f64..3.0, r in -3.0f64..3.0,
    ) {
        let dp2 = (0.25 + dxp * dxp) / dx2 * extra;
        let s = GaussianState::new(xc, pc, dx2, dp2, dxp, 1.0).unwrap();
        let a = density_matrix_value(&s, 1.0, big_r, r);
        let b = density_matrix_value(&s, 1.0, big_r, -r);
        prop_assert!((a - b.conj()).norm() <= 1e-14 * a.norm().max(1e-300));
        prop_assert!(off_diagonal(&s, 1.0, r) <= 1.0);
        prop_assert!(off_diagonal(&s, 1.0, r.abs() + 0.1) < off_diagonal(&s, 1.0, r.abs()));
    }
}

#[test]
fn density_matrix_diagonal_is_normalized() {
    for (xc, dx2) in [(0.0, 0.04), (1.3, 0.7), (-2.0, 5.0)] {
        let s = GaussianState::new(xc, 0.4, dx2, 30.0, 0.1, 1.0).unwrap();
        let w = 12.0 * dx2.sqrt();
        let total = adaptive(
            |x| density_matrix_value(&s, 1.0, x, 0.0).re,
            xc - w,
            xc + w,
            1e-12,
            0.0,
            200,
        )
        .unwrap();
        assert!((total - 1.0).abs() < 1e-8);
    }
}

#[test]
fn roots_flow_to_bare_frequencies() {
    let (sys, env) = instance(&mut rng(5), 4, Regime::Bounded, 1.0);
    let mut bare: Vec<f64> = env.omegas().to_vec();
    bare.push(sys.omega());
    bare.sort_by(f64::total_cmp);
    let mut prev = f64::INFINITY;
    for lam in [0.5, 0.1, 0.01, 0.001] {
        let c: Vec<f64> = env.couplings().iter().map(|c| c * lam).collect();
        let m = ModalDecomposition::solve(&sys, &env.with_couplings(c).unwrap(), RootOptions::default()).unwrap();
        let dev = m
            .nus()
            .iter()
            .zip(&bare)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < prev);
        prev = dev;
    }
    assert!(prev < 1e-5);
}

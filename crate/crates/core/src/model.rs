//! Physical parameters of the trapped particle and its few-mode environment,
//! the two memory kernels, and the bounding-vs-spectral-strength regime split.

use std::fmt;

use crate::error::{invalid, Result};

/// Default relative tolerance used to call a configuration "balanced".
pub const DEFAULT_BALANCE_TOL: f64 = 1e-9;

/// Central oscillator: mass `M`, trap frequency `Omega`, action scale `hbar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    mass: f64,
    omega: f64,
    hbar: f64,
}

impl SystemParams {
    pub fn new(mass: f64, omega: f64, hbar: f64) -> Result<Self> {
        positive("system.mass", mass)?;
        positive("system.omega", omega)?;
        positive("system.hbar", hbar)?;
        Ok(Self { mass, omega, hbar })
    }

    /// `M = Omega = hbar = 1`.
    pub fn natural() -> Self {
        Self {
            mass: 1.0,
            omega: 1.0,
            hbar: 1.0,
        }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// The bounding strength `M Omega^2`.
    pub fn bounding_strength(&self) -> f64 {
        self.mass * self.omega * self.omega
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.mass, omega, self.hbar)
    }
}

/// Environment of `N` discrete oscillators sharing a common mass.
///
/// Frequencies must be strictly increasing; the root-location argument in
/// [`crate::charpoly`] relies on that ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    mass: f64,
    omegas: Vec<f64>,
    couplings: Vec<f64>,
    beta: f64,
}

impl EnvironmentSpec {
    pub fn new(mass: f64, omegas: Vec<f64>, couplings: Vec<f64>, beta: f64) -> Result<Self> {
        positive("environment.mass", mass)?;
        positive("environment.beta", beta)?;
        if omegas.len() != couplings.len() {
            return Err(invalid(
                "environment.couplings",
                format!(
                    "expected {} couplings (one per frequency), got {}",
                    omegas.len(),
                    couplings.len()
                ),
            ));
        }
        for (k, &w) in omegas.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid(
                    "environment.frequencies",
                    format!("frequency #{} must be finite and > 0, got {w}", k + 1),
                ));
            }
            if k > 0 && w <= omegas[k - 1] {
                return Err(invalid(
                    "environment.frequencies",
                    format!(
                        "frequencies must be strictly increasing: #{} = {} is not greater than #{} = {}",
                        k + 1,
                        w,
                        k,
                        omegas[k - 1]
                    ),
                ));
            }
        }
        if let Some((k, c)) = couplings.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(invalid(
                "environment.couplings",
                format!("coupling #{} is not finite ({c})", k + 1),
            ));
        }
        Ok(Self {
            mass,
            omegas,
            couplings,
            beta,
        })
    }

    /// An environment without modes.
    pub fn empty(mass: f64, beta: f64) -> Result<Self> {
        Self::new(mass, Vec::new(), Vec::new(), beta)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.mass, self.omegas.clone(), self.couplings.clone(), beta)
    }

    pub fn with_couplings(&self, couplings: Vec<f64>) -> Result<Self> {
        Self::new(self.mass, self.omegas.clone(), couplings, self.beta)
    }

    pub fn modes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.omegas.iter().copied().zip(self.couplings.iter().copied())
    }

    pub fn max_frequency(&self) -> f64 {
        self.omegas.last().copied().unwrap_or(0.0)
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `M Omega^2 > S`: all hybrid frequencies real, motion stays bounded.
    Bounded,
    /// `M Omega^2 = S`: the lowest hybrid frequency sits at zero.
    Critical,
    /// `M Omega^2 < S`: one imaginary root, exponential runaway.
    Unstable,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Bounded => "bounded",
            Regime::Critical => "critical",
            Regime::Unstable => "unstable",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Regime label together with the ratio `S / (M Omega^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeClass {
    pub label: Regime,
    pub ratio: f64,
}

/// `S = sum_k C_k^2 / (m omega_k^2)`.
pub fn spectral_strength(env: &EnvironmentSpec) -> f64 {
    env.modes()
        .map(|(w, c)| c * c / (env.mass * w * w))
        .sum()
}

pub fn classify_regime(sys: &SystemParams, env: &EnvironmentSpec, tol: f64) -> RegimeClass {
    let s = spectral_strength(env);
    let b = sys.bounding_strength();
    let label = if b > (1.0 + tol) * s {
        Regime::Bounded
    } else if b < (1.0 - tol) * s {
        Regime::Unstable
    } else {
        Regime::Critical
    };
    RegimeClass {
        label,
        ratio: s / b,
    }
}

/// Dissipation kernel `K_I(dt) = -sum_k C_k^2/(2 m omega_k) sin(omega_k dt)`.
pub fn kernel_ki(env: &EnvironmentSpec, dt: f64) -> f64 {
    -env.modes()
        .map(|(w, c)| c * c / (2.0 * env.mass * w) * (w * dt).sin())
        .sum::<f64>()
}

/// Fluctuation kernel `K_R(dt) = sum_k C_k^2/(2 m omega_k) coth(hbar omega_k beta/2) cos(omega_k dt)`.
pub fn kernel_kr(env: &EnvironmentSpec, hbar: f64, dt: f64) -> f64 {
    env.modes()
        .map(|(w, c)| {
            c * c / (2.0 * env.mass * w) * coth(0.5 * hbar * w * env.beta) * (w * dt).cos()
        })
        .sum()
}

/// `coth(x)` for `x > 0`, written through `expm1` so tiny arguments stay finite.
pub fn coth(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    1.0 + 2.0 / (2.0 * x).exp_m1()
}

/// Modified Drude coupling `C_k = M Omega^2 gamma Gamma / sqrt((omega_k - Omega)^2 + Gamma^2)`.
pub fn coupling_from_drude(gamma: f64, cutoff: f64, sys: &SystemParams, omega_k: f64) -> f64 {
    let d = omega_k - sys.omega;
    sys.bounding_strength() * gamma * cutoff / (d * d + cutoff * cutoff).sqrt()
}

/// Builds the drude-coupled environment on the given frequencies.
pub fn drude_environment(
    sys: &SystemParams,
    env_mass: f64,
    omegas: Vec<f64>,
    gamma: f64,
    cutoff: f64,
    beta: f64,
) -> Result<EnvironmentSpec> {
    positive("drude.cutoff", cutoff)?;
    let couplings = omegas
        .iter()
        .map(|&w| coupling_from_drude(gamma, cutoff, sys, w))
        .collect();
    EnvironmentSpec::new(env_mass, omegas, couplings, beta)
}

/// The drude `gamma` at which the spectral strength equals the bounding strength.
///
/// `S` is quadratic in `gamma`, so the balance point is closed-form.
pub fn balance_gamma(sys: &SystemParams, env_mass: f64, omegas: &[f64], cutoff: f64) -> f64 {
    let unit: f64 = omegas
        .iter()
        .map(|&w| {
            let c = coupling_from_drude(1.0, cutoff, sys, w);
            c * c / (env_mass * w * w)
        })
        .sum();
    (sys.bounding_strength() / unit).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn single(c: f64, w: f64, beta: f64) -> EnvironmentSpec {
        EnvironmentSpec::new(1.0, vec![w], vec![c], beta).unwrap()
    }

    pub(crate) const FIG1_FREQS: [f64; 5] = [0.48, 0.86, 1.72, 1.84, 1.89];

    #[test]
    fn spectral_strength_single_mode() {
        assert_eq!(spectral_strength(&single(1.0, 1.0, 1.0)), 1.0);
        assert_eq!(spectral_strength(&single(0.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn spectral_strength_fig1_balance_set() {
        let sys = SystemParams::natural();
        let env = drude_environment(&sys, 1.0, FIG1_FREQS.to_vec(), 0.39, 500.0, 1.0 / 1.15)
            .unwrap();
        let s = spectral_strength(&env);
        // 0.39^2 * sum 1/omega_k^2 with sum ~= 6.606
        assert!((s - 1.005).abs() < 0.01, "S = {s}");
        assert!((s / sys.bounding_strength() - 1.0).abs() < 0.01);
    }

    #[test]
    fn classification_examples() {
        let sys = SystemParams::natural();
        let empty = EnvironmentSpec::empty(1.0, 1.0).unwrap();
        assert_eq!(classify_regime(&sys, &empty, 1e-9).label, Regime::Bounded);
        assert_eq!(
            classify_regime(&sys, &single(1.0, 1.0, 1.0), 1e-9).label,
            Regime::Critical
        );
        let c = classify_regime(&sys, &single(2.0, 1.0, 1.0), 1e-9);
        assert_eq!(c.label, Regime::Unstable);
        assert_eq!(c.ratio, 4.0);
    }

    #[test]
    fn kernel_values() {
        let env = single(1.0, 1.0, 2.0);
        assert_eq!(kernel_ki(&env, 0.0), 0.0);
        assert!((kernel_ki(&env, FRAC_PI_2) + 0.5).abs() < 1e-15);
        let kr = kernel_kr(&env, 1.0, 0.0);
        let expect = 0.5 * (1.0f64).cosh() / (1.0f64).sinh();
        assert!((kr - expect).abs() < 1e-14);
        assert!((kr - 0.6565).abs() < 1e-4);
        let cold = single(1.0, 1.0, 1e6);
        assert!((kernel_kr(&cold, 1.0, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coth_is_finite_for_hot_baths() {
        let x = 0.5e-8;
        let v = coth(x);
        assert!(v.is_finite());
        assert!((v * x - 1.0).abs() < 1e-12);
        assert_eq!(coth(800.0), 1.0);
        let env = single(1.0, 1.0, 1e-8);
        assert!(kernel_kr(&env, 1.0, 0.3).is_finite());
    }

    #[test]
    fn drude_coupling() {
        let sys = SystemParams::natural();
        assert_eq!(coupling_from_drude(0.39, 500.0, &sys, 1.0), 0.39);
        assert_eq!(coupling_from_drude(0.0, 500.0, &sys, 0.48), 0.0);
        let c = coupling_from_drude(0.39, 500.0, &sys, 0.48);
        let expect = 0.39 * 500.0 / (0.52f64 * 0.52 + 250000.0).sqrt();
        assert_eq!(c, expect);
        assert!((c - 0.3899998).abs() < 1e-7);
    }

    #[test]
    fn balance_gamma_matches_figure_caption() {
        let sys = SystemParams::natural();
        let g = balance_gamma(&sys, 1.0, &FIG1_FREQS, 500.0);
        assert!((g - 0.389).abs() < 0.002, "gamma = {g}");
        let env = drude_environment(&sys, 1.0, FIG1_FREQS.to_vec(), g, 500.0, 1.0).unwrap();
        assert!((spectral_strength(&env) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_unsorted_or_duplicate_frequencies() {
        assert!(EnvironmentSpec::new(1.0, vec![1.0, 1.0], vec![0.1, 0.1], 1.0).is_err());
        assert!(EnvironmentSpec::new(1.0, vec![2.0, 1.0], vec![0.1, 0.1], 1.0).is_err());
        assert!(EnvironmentSpec::new(1.0, vec![1.0], vec![0.1, 0.1], 1.0).is_err());
        assert!(EnvironmentSpec::new(1.0, vec![-1.0], vec![0.1], 1.0).is_err());
        assert!(EnvironmentSpec::new(1.0, vec![1.0], vec![0.1], 0.0).is_err());
        assert!(SystemParams::new(0.0, 1.0, 1.0).is_err());
    }
}

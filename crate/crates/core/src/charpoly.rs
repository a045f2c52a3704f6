//! Hybrid frequencies of the reduced dynamics.
//!
//! The characteristic polynomial
//!
//! ```text
//! P0(s) = M (Omega^2 - s) prod_i (omega_i^2 - s) - sum_k (C_k^2/m) prod_{i != k} (omega_i^2 - s)
//! ```
//!
//! is searched on the `s = nu^2` axis only (it is even in `nu`). Its sign at
//! `s = omega_n^2` is `(-1)^n`, so one root sits in every gap
//! `(omega_n^2, omega_{n+1}^2)`, one above `omega_N^2`, and the last one either
//! in `(0, omega_1^2)`, at zero, or on the negative axis depending on the sign
//! of `P0(0) = prod omega_i^2 (M Omega^2 - S)`.
//!
//! Modes with `C_k = 0` are exactly decoupled: `omega_k^2` is then a root with
//! zero amplitude and is factored out before the search.

use crate::error::{Error, Result};
use crate::model::{
    classify_regime, EnvironmentSpec, Regime, RegimeClass, SystemParams, DEFAULT_BALANCE_TOL,
};
use crate::scaled::Scaled;

/// Default relative bracket width for root refinement.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Largest allowed bracket expansion, as a factor on the frequency scale.
const MAX_EXPANSION: f64 = 1.152_921_504_606_847e18; // 2^60

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Relative width (in `nu^2`) at which bisection stops.
    pub tol_rel: f64,
    /// Relative tolerance of the bounding/spectral balance test.
    pub balance_tol: f64,
    /// Regime the caller insists on; `None` accepts the classification.
    pub regime: Option<Regime>,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            tol_rel: DEFAULT_ROOT_TOL,
            balance_tol: DEFAULT_BALANCE_TOL,
            regime: None,
        }
    }
}

impl RootOptions {
    pub fn forcing(regime: Regime) -> Self {
        Self {
            regime: Some(regime),
            ..Self::default()
        }
    }
}

/// One term `A sin(nu tau)/nu` of `Z(tau)`, stored through `s = nu^2`.
///
/// `s < 0` is the growing mode `sinh(mu0 tau)/mu0` with `s = -mu0^2`, and
/// `s = 0` the linear term `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub s: f64,
    pub amp: f64,
    /// Bare frequency of a mode with zero coupling.
    pub decoupled: bool,
}

/// Hybrid frequencies and amplitudes of `Z(tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalDecomposition {
    pub regime: RegimeClass,
    /// Sorted by `s`. Amplitudes are zero until [`amplitudes`] has run.
    modes: Vec<Mode>,
    tol_rel: f64,
    complete: bool,
}

impl ModalDecomposition {
    /// Root isolation followed by amplitude evaluation.
    pub fn solve(sys: &SystemParams, env: &EnvironmentSpec, opts: RootOptions) -> Result<Self> {
        let roots = isolate_roots(sys, env, opts)?;
        amplitudes(sys, env, roots)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn tol_rel(&self) -> f64 {
        self.tol_rel
    }

    /// Positive real hybrid frequencies in ascending order.
    pub fn nus(&self) -> Vec<f64> {
        self.modes
            .iter()
            .filter(|m| m.s > 0.0)
            .map(|m| m.s.sqrt())
            .collect()
    }

    /// Amplitudes paired with [`Self::nus`].
    pub fn sine_amps(&self) -> Vec<f64> {
        self.modes
            .iter()
            .filter(|m| m.s > 0.0)
            .map(|m| m.amp)
            .collect()
    }

    /// Magnitude of the imaginary root (unstable regime only).
    pub fn mu0(&self) -> Option<f64> {
        self.modes.first().filter(|m| m.s < 0.0).map(|m| (-m.s).sqrt())
    }

    /// Amplitude of `sinh(mu0 tau)/mu0` (unstable regime only).
    pub fn growth_amp(&self) -> Option<f64> {
        self.modes.first().filter(|m| m.s < 0.0).map(|m| m.amp)
    }

    /// Coefficient of the term linear in `tau` (critical regime only).
    pub fn linear_coef(&self) -> Option<f64> {
        self.modes.first().filter(|m| m.s == 0.0).map(|m| m.amp)
    }

    /// Largest oscillation or growth rate present.
    pub fn max_rate(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.s.abs().sqrt())
            .fold(0.0, f64::max)
    }

    /// `sum_k A_k`, which equals `Zdot(0) = 1`.
    pub fn amp_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.amp).sum()
    }

    /// `sum_k A_k nu_k^2`, which equals `Omega^2`.
    pub fn second_moment(&self) -> f64 {
        self.modes.iter().map(|m| m.amp * m.s).sum()
    }
}

/// Evaluates `P0` at `s = nu^2` (negative `s` probes the imaginary axis).
///
/// Values outside the `f64` range saturate to `+-inf`; the sign is exact.
pub fn eval_p0(sys: &SystemParams, env: &EnvironmentSpec, nu_sq: f64) -> f64 {
    let c2: Vec<f64> = env.couplings().iter().map(|c| c * c / env.mass()).collect();
    let w2: Vec<f64> = env.omegas().iter().map(|w| w * w).collect();
    p0_scaled(sys.mass(), sys.omega() * sys.omega(), &w2, &c2, nu_sq).to_f64()
}

fn p0_scaled(mass: f64, omega2: f64, w2: &[f64], c2: &[f64], s: f64) -> Scaled {
    let factors: Vec<f64> = w2.iter().map(|&w| w - s).collect();
    if let Some(n) = factors.iter().position(|&f| f == 0.0) {
        // only the k = n term survives at s = omega_n^2
        let rest: Scaled = factors
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != n)
            .map(|(_, &f)| Scaled::new(f))
            .product();
        return -(rest * c2[n]);
    }
    let w: Scaled = factors.iter().map(|&f| Scaled::new(f)).product();
    let bracket = mass * (omega2 - s)
        - c2.iter()
            .zip(&factors)
            .map(|(&c, &f)| c / f)
            .sum::<f64>();
    w * bracket
}

struct Reduced {
    mass: f64,
    omega2: f64,
    w2: Vec<f64>,
    c2: Vec<f64>,
}

impl Reduced {
    fn p0(&self, s: f64) -> Scaled {
        p0_scaled(self.mass, self.omega2, &self.w2, &self.c2, s)
    }
}

/// Splits off exactly decoupled modes and returns the coupled remainder.
fn reduce(sys: &SystemParams, env: &EnvironmentSpec) -> (Reduced, Vec<f64>) {
    let mut w2 = Vec::new();
    let mut c2 = Vec::new();
    let mut decoupled = Vec::new();
    for (w, c) in env.modes() {
        if c == 0.0 {
            decoupled.push(w * w);
        } else {
            w2.push(w * w);
            c2.push(c * c / env.mass());
        }
    }
    (
        Reduced {
            mass: sys.mass(),
            omega2: sys.omega() * sys.omega(),
            w2,
            c2,
        },
        decoupled,
    )
}

/// Locates every hybrid frequency by sign-change bracketing and refinement.
///
/// The returned decomposition has zero amplitudes; pass it to [`amplitudes`].
pub fn isolate_roots(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    opts: RootOptions,
) -> Result<ModalDecomposition> {
    if !(opts.tol_rel > 0.0 && opts.tol_rel <= 1e-3) {
        return Err(crate::error::invalid(
            "tol_rel",
            format!("must lie in (0, 1e-3], got {}", opts.tol_rel),
        ));
    }
    let class = classify_regime(sys, env, opts.balance_tol);
    let regime = resolve_regime(class, opts.regime)?;
    let (red, decoupled) = reduce(sys, env);
    let n = red.w2.len();
    let tol = opts.tol_rel;

    let mut roots = Vec::with_capacity(n + 1);
    if n == 0 {
        roots.push(red.omega2);
    } else {
        // lowest root
        match regime {
            Regime::Bounded => {
                roots.push(refine(|s| red.p0(s), 0.0, red.w2[0], tol));
            }
            Regime::Critical => roots.push(0.0),
            Regime::Unstable => {
                let scale = red.omega2.max(red.w2[0]);
                let g = |y2: f64| red.p0(-y2);
                let mut hi = scale;
                while g(hi).signum() <= 0.0 {
                    hi *= 4.0;
                    if hi > MAX_EXPANSION * MAX_EXPANSION * scale {
                        return Err(Error::BracketFailure {
                            what: "imaginary root".into(),
                        });
                    }
                }
                let y2 = refine(g, 0.0, hi, tol);
                roots.push(-y2);
            }
        }
        for k in 0..n - 1 {
            roots.push(refine(|s| red.p0(s), red.w2[k], red.w2[k + 1], tol));
        }
        // top root: expand geometrically above omega_N^2 until the sign flips
        let top = red.w2[n - 1];
        let sign_top = red.p0(top).signum();
        let scale = top.max(red.omega2);
        let mut hi = 2.0 * scale;
        while red.p0(hi).signum() == sign_top {
            hi *= 4.0;
            if hi > MAX_EXPANSION * MAX_EXPANSION * scale {
                return Err(Error::BracketFailure {
                    what: "root above the highest mode".into(),
                });
            }
        }
        roots.push(refine(|s| red.p0(s), top, hi, tol));
    }

    for pair in roots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if !(b > a) || (b - a) <= 8.0 * tol * b.abs().max(a.abs()) {
            return Err(Error::DegenerateRoots {
                a: a.abs().sqrt(),
                b: b.abs().sqrt(),
            });
        }
    }

    let mut modes: Vec<Mode> = roots
        .into_iter()
        .map(|s| Mode {
            s,
            amp: 0.0,
            decoupled: false,
        })
        .collect();
    // decoupled modes keep their bare frequency and carry no weight
    modes.extend(decoupled.into_iter().map(|s| Mode {
        s,
        amp: 0.0,
        decoupled: true,
    }));
    modes.sort_by(|a, b| a.s.total_cmp(&b.s));
    Ok(ModalDecomposition {
        regime: RegimeClass {
            label: regime,
            ratio: class.ratio,
        },
        modes,
        tol_rel: tol,
        complete: false,
    })
}

fn resolve_regime(class: RegimeClass, requested: Option<Regime>) -> Result<Regime> {
    match requested {
        None => Ok(class.label),
        Some(r) if r == class.label => Ok(r),
        Some(_) if class.label == Regime::Critical => Err(Error::BalanceAmbiguity {
            deviation: (1.0 - class.ratio).abs(),
        }),
        Some(r) => Err(Error::RegimeMismatch {
            requested: r.name(),
            computed: class.label.name(),
        }),
    }
}

/// Bracketed root refinement: bisection with a secant step whenever that step
/// stays inside the bracket, and never two secant steps in a row.
fn refine<F: Fn(f64) -> Scaled>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    debug_assert!(flo.signum() * fhi.signum() <= 0.0);
    if flo.is_zero() {
        return lo;
    }
    if fhi.is_zero() {
        return hi;
    }
    let mut secant_next = true;
    for _ in 0..400 {
        let width = hi - lo;
        if width <= tol * lo.abs().max(hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let mut x = mid;
        if secant_next {
            let t = flo.ratio(flo - fhi);
            let xs = lo + t * width;
            if t.is_finite() && xs > lo && xs < hi {
                x = xs;
            }
        }
        secant_next = !secant_next;
        let fx = f(x);
        if fx.is_zero() {
            return x;
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
    }
    // linear interpolation inside the final bracket
    let t = flo.ratio(flo - fhi);
    let x = lo + t * (hi - lo);
    if t.is_finite() && x > lo && x < hi {
        x
    } else {
        0.5 * (lo + hi)
    }
}

/// Fills in the amplitudes `A_k = prod_j (omega_j^2 - s_k) / prod_{l != k} (s_l - s_k)`.
///
/// The same formula covers all three regimes: with `s_0 = 0` it yields the
/// linear coefficient `prod omega^2 / prod nu^2` and with `s_0 = -mu0^2` the
/// `sinh` amplitude and the `1/(nu_k^2 + mu0^2)` sine weights.
pub fn amplitudes(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    mut roots: ModalDecomposition,
) -> Result<ModalDecomposition> {
    let (red, _) = reduce(sys, env);
    let coupled: Vec<usize> = roots
        .modes
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.decoupled)
        .map(|(i, _)| i)
        .collect();
    if coupled.len() != red.w2.len() + 1 {
        return Err(crate::error::invalid(
            "roots",
            "root set does not match the environment",
        ));
    }
    let s: Vec<f64> = coupled.iter().map(|&i| roots.modes[i].s).collect();
    for (a, b) in s.iter().zip(s.iter().skip(1)) {
        if (b - a) <= 8.0 * roots.tol_rel * b.abs().max(a.abs()) {
            return Err(Error::DegenerateRoots {
                a: a.abs().sqrt(),
                b: b.abs().sqrt(),
            });
        }
    }
    for (k, &i) in coupled.iter().enumerate() {
        let sk = s[k];
        // pair numerator j with denominator l = j so every ratio stays O(1)
        let mut acc = Scaled::ONE;
        for (l, &sl) in s.iter().enumerate().skip(1) {
            if l == k {
                continue;
            }
            acc = acc * Scaled::new((red.w2[l - 1] - sk) / (sl - sk));
        }
        if k >= 1 {
            acc = acc * Scaled::new((red.w2[k - 1] - sk) / (s[0] - sk));
        }
        roots.modes[i].amp = acc.to_f64();
    }
    roots.complete = true;
    Ok(roots)
}

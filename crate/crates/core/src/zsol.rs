//! The fundamental solution `Z(tau)` of
//!
//! ```text
//! Zdd + Omega^2 Z + (2/M) int_0^tau K_I(tau - s) Z(s) ds = 0,   Z(0) = 0, Zd(0) = 1
//! ```
//!
//! in closed modal form, the propagator coefficients built from it, the
//! memoryless (Markovian) variant, and a substitution residual that checks
//! the modal form against the integro-differential equation.

use crate::charpoly::ModalDecomposition;
use crate::error::{Error, Result};
use crate::model::{spectral_strength, EnvironmentSpec, SystemParams};

/// Relative threshold on `|Z(t)|` below which a horizon is a caustic.
pub const CAUSTIC_EPS: f64 = 1e-10;

/// `Z`, `Zdot`, `Zddot` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZEval {
    pub z: f64,
    pub zdot: f64,
    pub zddot: f64,
}

/// `(S, S', S'')` for `S(tau) = sin(nu tau)/nu` with `s = nu^2`, continued to
/// `tau` at `s = 0` and to `sinh(mu tau)/mu` for `s = -mu^2`.
#[inline]
pub(crate) fn mode_basis(s: f64, tau: f64) -> (f64, f64, f64) {
    if s > 0.0 {
        let nu = s.sqrt();
        let (sn, cs) = (nu * tau).sin_cos();
        (sn / nu, cs, -nu * sn)
    } else if s < 0.0 {
        let mu = (-s).sqrt();
        let (sh, ch) = ((mu * tau).sinh(), (mu * tau).cosh());
        (sh / mu, ch, mu * sh)
    } else {
        (tau, 1.0, 0.0)
    }
}

pub fn z_exact(modal: &ModalDecomposition, tau: f64) -> ZEval {
    let mut out = ZEval::default();
    for m in modal.modes() {
        if m.amp == 0.0 {
            continue;
        }
        let (s0, s1, s2) = mode_basis(m.s, tau);
        out.z += m.amp * s0;
        out.zdot += m.amp * s1;
        out.zddot += m.amp * s2;
    }
    out
}

/// Sampled `max |Z|` on `[0, t]`.
pub fn max_abs_z(modal: &ModalDecomposition, t: f64) -> f64 {
    let rate = modal.max_rate().max(1e-12);
    let step = (std::f64::consts::TAU / (16.0 * rate)).min(t / 8.0);
    let n = ((t / step).ceil() as usize).clamp(8, 200_000);
    (0..=n)
        .map(|i| z_exact(modal, t * i as f64 / n as f64).z.abs())
        .fold(0.0, f64::max)
}

/// Boundary derivatives of the propagator functions on `[0, t]`.
///
/// `u_1 = Zd - (Z/Z(t)) Zd(t)`, `u_2 = Z/Z(t)`, `v_1(tau) = u_2(t - tau)`,
/// `v_2(tau) = u_1(t - tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorBasis {
    pub t: f64,
    pub udot1_0: f64,
    pub udot1_t: f64,
    pub udot2_0: f64,
    pub udot2_t: f64,
    pub zt: f64,
    pub zdot_t: f64,
}

impl PropagatorBasis {
    pub fn u1(&self, modal: &ModalDecomposition, tau: f64) -> f64 {
        let z = z_exact(modal, tau);
        z.zdot - z.z / self.zt * self.zdot_t
    }

    pub fn u2(&self, modal: &ModalDecomposition, tau: f64) -> f64 {
        z_exact(modal, tau).z / self.zt
    }

    pub fn v1(&self, modal: &ModalDecomposition, tau: f64) -> f64 {
        self.u2(modal, self.t - tau)
    }

    pub fn v2(&self, modal: &ModalDecomposition, tau: f64) -> f64 {
        self.u1(modal, self.t - tau)
    }
}

pub fn propagator_basis(modal: &ModalDecomposition, t: f64) -> Result<PropagatorBasis> {
    if !(t > 0.0) {
        return Err(crate::error::invalid("t", format!("horizon must be > 0, got {t}")));
    }
    let zt = z_exact(modal, t);
    let zmax = max_abs_z(modal, t).max(zt.z.abs());
    if zt.z.abs() < CAUSTIC_EPS * zmax || zt.z == 0.0 {
        return Err(Error::CausticAtHorizon {
            t,
            z: zt.z,
            zmax,
        });
    }
    Ok(PropagatorBasis {
        t,
        udot1_0: -zt.zdot / zt.z,
        udot1_t: zt.zddot - zt.zdot * zt.zdot / zt.z,
        udot2_0: 1.0 / zt.z,
        udot2_t: zt.zdot / zt.z,
        zt: zt.z,
        zdot_t: zt.zdot,
    })
}

/// Closed form of `int_0^tau sin(omega (tau - u)) S(s, u) du`.
fn sine_convolution(omega: f64, s: f64, tau: f64) -> f64 {
    let w2 = omega * omega;
    let (sn, _, _) = mode_basis(s, tau);
    if (w2 - s).abs() <= 1e-12 * w2 {
        let (ws, wc) = (omega * tau).sin_cos();
        return (ws - omega * tau * wc) / (2.0 * w2);
    }
    (omega * sn - (omega * tau).sin()) / (w2 - s)
}

/// Substitution residual `Zdd + Omega^2 Z + (2/M) int K_I Z` at one time,
/// together with the magnitude of the largest contribution.
pub fn residual_at(
    modal: &ModalDecomposition,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    tau: f64,
) -> (f64, f64) {
    let omega2 = sys.omega() * sys.omega();
    let weights: Vec<(f64, f64)> = env
        .modes()
        .filter(|&(_, c)| c != 0.0)
        .map(|(w, c)| (w, c * c / (env.mass() * w * sys.mass())))
        .collect();
    let mut residual = 0.0;
    let mut scale = 0.0f64;
    for m in modal.modes() {
        if m.amp == 0.0 {
            continue;
        }
        let (s0, _, s2) = mode_basis(m.s, tau);
        let local = s2 + omega2 * s0;
        let memory: f64 = weights
            .iter()
            .map(|&(w, g)| g * sine_convolution(w, m.s, tau))
            .sum();
        residual += m.amp * (local - memory);
        scale = scale
            .max((m.amp * s2).abs())
            .max((m.amp * omega2 * s0).abs())
            .max((m.amp * memory).abs());
    }
    (residual, scale)
}

/// Maximum absolute substitution residual over `taus`.
pub fn residual_check(
    modal: &ModalDecomposition,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    taus: &[f64],
) -> f64 {
    taus.iter()
        .map(|&t| residual_at(modal, sys, env, t).0.abs())
        .fold(0.0, f64::max)
}

/// Maximum residual relative to `max(1, largest term)` at each time.
pub fn residual_check_scaled(
    modal: &ModalDecomposition,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    taus: &[f64],
) -> f64 {
    taus.iter()
        .map(|&t| {
            let (r, s) = residual_at(modal, sys, env, t);
            r.abs() / s.max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Time grid `t_i = i h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub h: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(h: f64, n: usize) -> Self {
        Self { h, n }
    }

    /// Step chosen so `h * rate <= target`, landing exactly on `t_max`.
    pub fn covering(t_max: f64, rate: f64, target: f64) -> Self {
        let steps = ((t_max * rate / target).ceil() as usize).max(1);
        Self {
            h: t_max / steps as f64,
            n: steps + 1,
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.n.saturating_sub(1))
    }
}

/// `kappa(tau) = int_0^tau K_I(s) ds = -sum_k C_k^2/(2 m omega_k^2) (1 - cos omega_k tau)`.
pub fn dissipation_integral(env: &EnvironmentSpec, tau: f64) -> f64 {
    -env.modes()
        .map(|(w, c)| c * c / (2.0 * env.mass() * w * w) * (1.0 - (w * tau).cos()))
        .sum::<f64>()
}

/// Largest rate the memoryless equation can develop.
pub fn markov_rate(sys: &SystemParams, env: &EnvironmentSpec) -> f64 {
    let omega2 = sys.omega() * sys.omega();
    let lowest = omega2 - 2.0 * spectral_strength(env) / sys.mass();
    omega2
        .max(lowest.abs())
        .sqrt()
        .max(env.max_frequency())
}

/// Memoryless solution on a uniform grid.
///
/// `z` is `Z` itself (`Z(0) = 0`, `Zd(0) = 1`); `y` is the companion solution
/// with `Y(0) = 1`, `Yd(0) = 0`, stored as `(Y, Yd)`. In the exact equation
/// `Y = Zd`; without memory that no longer holds.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovianSolution {
    pub grid: UniformGrid,
    pub z: Vec<ZEval>,
    pub y: Vec<(f64, f64)>,
}

impl MarkovianSolution {
    /// Wronskian `Y Zd - Z Yd`, conserved by the exact flow.
    pub fn wronskian(&self, i: usize) -> f64 {
        self.y[i].0 * self.z[i].zdot - self.z[i].z * self.y[i].1
    }
}

/// Solves `Zdd + [Omega^2 + (2/M) kappa(tau)] Z = 0` with classical RK4.
pub fn z_markovian(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    grid: UniformGrid,
) -> Result<MarkovianSolution> {
    let rate = markov_rate(sys, env);
    if !(grid.h > 0.0) || grid.h * rate > 0.2 {
        return Err(Error::StepTooCoarse {
            h: grid.h,
            freq: rate,
        });
    }
    let omega2 = sys.omega() * sys.omega();
    let w = |tau: f64| omega2 + 2.0 / sys.mass() * dissipation_integral(env, tau);
    let h = grid.h;
    // state: (Z, Zd, Y, Yd)
    let mut st = [0.0, 1.0, 1.0, 0.0];
    let deriv = |tau: f64, x: &[f64; 4]| {
        let wt = w(tau);
        [x[1], -wt * x[0], x[3], -wt * x[2]]
    };
    let mut z = Vec::with_capacity(grid.n);
    let mut y = Vec::with_capacity(grid.n);
    for i in 0..grid.n {
        let tau = grid.time(i);
        z.push(ZEval {
            z: st[0],
            zdot: st[1],
            zddot: -w(tau) * st[0],
        });
        y.push((st[2], st[3]));
        if i + 1 == grid.n {
            break;
        }
        st = rk4_step(&deriv, tau, &st, h);
    }
    Ok(MarkovianSolution { grid, z, y })
}

pub(crate) fn rk4_step<const D: usize, F: Fn(f64, &[f64; D]) -> [f64; D]>(
    f: &F,
    t: f64,
    x: &[f64; D],
    h: f64,
) -> [f64; D] {
    let add = |a: &[f64; D], b: &[f64; D], c: f64| {
        let mut o = *a;
        for i in 0..D {
            o[i] += c * b[i];
        }
        o
    };
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &add(x, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &add(x, &k2, 0.5 * h));
    let k4 = f(t + h, &add(x, &k3, h));
    let mut o = *x;
    for i in 0..D {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

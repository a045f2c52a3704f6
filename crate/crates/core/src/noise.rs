//! Fluctuation integrals.
//!
//! `chi_ij(t) = int_0^t dtau int_0^tau dtau' v_i(tau) K_R(tau - tau') v_j(tau')`
//! over the triangle, and the additive covariance they produce.
//!
//! With the central coordinate driven by `xi = -sum_k C_k q_k^free`, whose
//! symmetrized correlation is `hbar K_R`, the additive part of the final
//! covariance is
//!
//! ```text
//! sigma_xx = (hbar/M^2) QQ[Z, Z],  sigma_xp = (hbar/M) QQ[Z, Zd],  sigma_pp = hbar QQ[Zd, Zd]
//! ```
//!
//! where `QQ[a, b] = int_0^t int_0^t a(t-s) K_R(s-s') b(t-s') ds ds'` is the
//! full-square integral. The square splits into the two triangles, and
//! `Z(t - tau) = Z(t) v_1(tau)`, `Zd(t - tau) = v_2(tau) + Zd(t) v_1(tau)`,
//! which gives `sigma_xx = 2 (hbar/M^2) Z(t)^2 chi_11` and so on. In the
//! influence functional this term appears as the real damping
//! `exp(-(1/hbar) [...])`; the factor `i` printed in front of the `chi`
//! group of the propagator exponent is taken as `-1/hbar`.

use crate::charpoly::ModalDecomposition;
use crate::error::{Error, Result};
use crate::gaussian::CovarianceFactor;
use crate::model::{coth, EnvironmentSpec, SystemParams};
use crate::quadrature::GaussLegendre;
use crate::zsol::{propagator_basis, z_exact, ZEval};

/// Relative agreement required between two successive panel refinements.
pub const REFINE_TOL: f64 = 1e-8;
/// Refinements (panel doublings) attempted before giving up.
const MAX_REFINEMENTS: usize = 3;

/// A kernel of the form `K(dt) = sum_k a_k cos(omega_k dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineKernel {
    terms: Vec<(f64, f64)>,
}

impl CosineKernel {
    /// `(frequency, amplitude)` pairs.
    pub fn new(terms: Vec<(f64, f64)>) -> Self {
        Self { terms }
    }

    /// The fluctuation kernel `K_R` of a discrete environment.
    pub fn fluctuation(env: &EnvironmentSpec, hbar: f64) -> Self {
        Self::new(
            env.modes()
                .filter(|&(_, c)| c != 0.0)
                .map(|(w, c)| {
                    (
                        w,
                        c * c / (2.0 * env.mass() * w) * coth(0.5 * hbar * w * env.beta()),
                    )
                })
                .collect(),
        )
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn eval(&self, dt: f64) -> f64 {
        self.terms.iter().map(|&(w, a)| a * (w * dt).cos()).sum()
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.0).fold(0.0, f64::max)
    }

    fn abs_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.1.abs()).sum()
    }
}

/// The three `chi` combinations that enter the propagator, plus the
/// individual off-diagonal triangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseIntegrals {
    pub t: f64,
    pub chi11: f64,
    pub chi12: f64,
    pub chi21: f64,
    pub chi22: f64,
}

impl NoiseIntegrals {
    pub fn chi12_plus_21(&self) -> f64 {
        self.chi12 + self.chi21
    }
}

/// Additive (state-independent) part of the final covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseCovariance {
    pub xx: f64,
    pub xp: f64,
    pub pp: f64,
}

impl NoiseCovariance {
    pub fn det(&self) -> f64 {
        self.xx * self.pp - self.xp * self.xp
    }
}

/// Triangle integrals over the pair `g_x(tau) = Z(t - tau)`, `g_p(tau) = Zd(t - tau)`.
#[derive(Debug, Clone, Copy, Default)]
struct Triangles {
    xx: f64,
    xp: f64,
    px: f64,
    pp: f64,
}

impl Triangles {
    fn max_diff(&self, o: &Triangles) -> [f64; 4] {
        [
            (self.xx - o.xx).abs(),
            (self.xp - o.xp).abs(),
            (self.px - o.px).abs(),
            (self.pp - o.pp).abs(),
        ]
    }
}

fn initial_panels(t: f64, rate: f64) -> usize {
    let rate = rate.max(1e-9);
    let width = std::f64::consts::TAU / rate / 8.0;
    ((t / width).ceil() as usize).max(1)
}

/// Nested Gauss-Legendre evaluation of the four triangle integrals.
///
/// The outer variable runs over composite panels on `[0, t]`; the inner
/// integral up to each outer node is the running sum over completed panels
/// plus a mapped rule on the partial panel. `K_R` is separable
/// (`cos(w(a-b)) = cos(wa)cos(wb) + sin(wa)sin(wb)`), so the inner integrals
/// are carried per kernel frequency.
fn triangles(
    zf: &dyn Fn(f64) -> ZEval,
    kernel: &CosineKernel,
    t: f64,
    panels: usize,
) -> Triangles {
    let rule = GaussLegendre::panel();
    let k = kernel.terms.len();
    let h = t / panels as f64;
    // running inner integrals: [mode][basis] for cos and sin
    let mut cum_c = vec![[0.0f64; 2]; k];
    let mut cum_s = vec![[0.0f64; 2]; k];
    let mut out = Triangles::default();
    let mut part_c = vec![[0.0f64; 2]; k];
    let mut part_s = vec![[0.0f64; 2]; k];
    for p in 0..panels {
        let a = p as f64 * h;
        let b = a + h;
        let mut panel_c = vec![[0.0f64; 2]; k];
        let mut panel_s = vec![[0.0f64; 2]; k];
        for (tau, w) in rule.mapped(a, b) {
            let zo = zf(t - tau);
            let outer = [zo.z, zo.zdot];
            part_c.iter_mut().for_each(|v| *v = [0.0; 2]);
            part_s.iter_mut().for_each(|v| *v = [0.0; 2]);
            for (tp, wp) in rule.mapped(a, tau) {
                let zi = zf(t - tp);
                let inner = [zi.z, zi.zdot];
                for (j, &(om, _)) in kernel.terms.iter().enumerate() {
                    let (sn, cs) = (om * tp).sin_cos();
                    for q in 0..2 {
                        part_c[j][q] += wp * inner[q] * cs;
                        part_s[j][q] += wp * inner[q] * sn;
                    }
                }
            }
            let mut inner_tot = [0.0f64; 2];
            for (j, &(om, amp)) in kernel.terms.iter().enumerate() {
                let (sn, cs) = (om * tau).sin_cos();
                for q in 0..2 {
                    inner_tot[q] += amp
                        * (cs * (cum_c[j][q] + part_c[j][q]) + sn * (cum_s[j][q] + part_s[j][q]));
                    panel_c[j][q] += w * outer[q] * cs;
                    panel_s[j][q] += w * outer[q] * sn;
                }
            }
            out.xx += w * outer[0] * inner_tot[0];
            out.xp += w * outer[0] * inner_tot[1];
            out.px += w * outer[1] * inner_tot[0];
            out.pp += w * outer[1] * inner_tot[1];
        }
        for j in 0..k {
            for q in 0..2 {
                cum_c[j][q] += panel_c[j][q];
                cum_s[j][q] += panel_s[j][q];
            }
        }
    }
    out
}

/// L1 norms of `Z` and `Zd` on `[0, t]`, used as the natural scale of the
/// triangle integrals.
fn l1_norms(zf: &dyn Fn(f64) -> ZEval, t: f64, panels: usize) -> [f64; 2] {
    let rule = GaussLegendre::panel();
    let h = t / panels as f64;
    let mut n = [0.0; 2];
    for p in 0..panels {
        let a = p as f64 * h;
        for (x, w) in rule.mapped(a, a + h) {
            let z = zf(x);
            n[0] += w * z.z.abs();
            n[1] += w * z.zdot.abs();
        }
    }
    n
}

fn converged_triangles(
    zf: &dyn Fn(f64) -> ZEval,
    kernel: &CosineKernel,
    t: f64,
    rate: f64,
) -> Result<Triangles> {
    let mut panels = initial_panels(t, rate.max(kernel.max_frequency()));
    let norms = l1_norms(zf, t, panels);
    let kw = kernel.abs_weight();
    let scale = [
        kw * norms[0] * norms[0],
        kw * norms[0] * norms[1],
        kw * norms[1] * norms[0],
        kw * norms[1] * norms[1],
    ];
    let mut prev = triangles(zf, kernel, t, panels);
    for _ in 0..MAX_REFINEMENTS {
        panels *= 2;
        let next = triangles(zf, kernel, t, panels);
        let vals = [next.xx, next.xp, next.px, next.pp];
        let ok = next
            .max_diff(&prev)
            .iter()
            .zip(vals.iter().zip(scale.iter()))
            .all(|(d, (v, s))| *d <= REFINE_TOL * v.abs().max(1e-6 * s) || *s == 0.0);
        if ok {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureStall {
        what: format!("chi integrals at t = {t} did not settle after {MAX_REFINEMENTS} refinements"),
    })
}

/// All four `chi_ij` at horizon `t`.
pub fn noise_integrals(
    modal: &ModalDecomposition,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    t: f64,
) -> Result<NoiseIntegrals> {
    let basis = propagator_basis(modal, t)?;
    let kernel = CosineKernel::fluctuation(env, sys.hbar());
    let zf = |x: f64| z_exact(modal, x);
    let tr = converged_triangles(&zf, &kernel, t, modal.max_rate())?;
    // v_1 = g_x / Z(t), v_2 = g_p - (Zd(t)/Z(t)) g_x
    let zt = basis.zt;
    let r = basis.zdot_t / zt;
    Ok(NoiseIntegrals {
        t,
        chi11: tr.xx / (zt * zt),
        chi12: tr.xp / zt - r * tr.xx / zt,
        chi21: tr.px / zt - r * tr.xx / zt,
        chi22: tr.pp - r * (tr.xp + tr.px) + r * r * tr.xx,
    })
}

/// A single `chi_ij`, `i, j` in `{1, 2}`.
pub fn chi(
    modal: &ModalDecomposition,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    t: f64,
    i: u8,
    j: u8,
) -> Result<f64> {
    let n = noise_integrals(modal, sys, env, t)?;
    match (i, j) {
        (1, 1) => Ok(n.chi11),
        (1, 2) => Ok(n.chi12),
        (2, 1) => Ok(n.chi21),
        (2, 2) => Ok(n.chi22),
        _ => Err(crate::error::invalid("chi", format!("indices must be 1 or 2, got ({i}, {j})"))),
    }
}

/// Noise covariance assembled from the `chi` values and `Z(t)`, `Zd(t)`.
pub fn noise_covariance(
    modal: &ModalDecomposition,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    t: f64,
) -> Result<NoiseCovariance> {
    let n = noise_integrals(modal, sys, env, t)?;
    let zt = z_exact(modal, t);
    Ok(assemble_from_chi(&n, zt.z, zt.zdot, sys.mass(), sys.hbar()))
}

pub fn assemble_from_chi(
    n: &NoiseIntegrals,
    zt: f64,
    zdot_t: f64,
    mass: f64,
    hbar: f64,
) -> NoiseCovariance {
    let sym = n.chi12_plus_21();
    NoiseCovariance {
        xx: 2.0 * hbar / (mass * mass) * zt * zt * n.chi11,
        xp: hbar / mass * zt * (sym + 2.0 * zdot_t * n.chi11),
        pp: hbar * (2.0 * n.chi22 + 2.0 * zdot_t * sym + 2.0 * zdot_t * zdot_t * n.chi11),
    }
}

/// Running full-square noise along an increasing time grid.
///
/// Uses `int_0^t Z(t-s) cos(w s) ds = cos(wt) Ic(t) + sin(wt) Is(t)` with the
/// cumulative integrals `Ic(t) = int_0^t Z(u) cos(wu) du` (and the `sin`, `Zd`
/// analogues), so a whole trajectory costs one sweep. Nothing here divides by
/// `Z(t)`, so the result stays regular at caustics.
pub struct NoiseAccumulator<'a> {
    zf: &'a dyn Fn(f64) -> ZEval,
    kernel: &'a CosineKernel,
    rate: f64,
    mass: f64,
    hbar: f64,
    t: f64,
    // [mode] -> [Z cos, Z sin, Zd cos, Zd sin]
    cum: Vec<[f64; 4]>,
}

impl<'a> NoiseAccumulator<'a> {
    pub fn new(
        zf: &'a dyn Fn(f64) -> ZEval,
        kernel: &'a CosineKernel,
        rate: f64,
        mass: f64,
        hbar: f64,
    ) -> Self {
        Self {
            zf,
            kernel,
            rate: rate.max(kernel.max_frequency()),
            mass,
            hbar,
            t: 0.0,
            cum: vec![[0.0; 4]; kernel.terms.len()],
        }
    }

    fn increment(&self, a: f64, b: f64, panels: usize) -> Vec<[f64; 4]> {
        let rule = GaussLegendre::panel();
        let h = (b - a) / panels as f64;
        let mut inc = vec![[0.0; 4]; self.kernel.terms.len()];
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (x, w) in rule.mapped(lo, lo + h) {
                let z = (self.zf)(x);
                for (j, &(om, _)) in self.kernel.terms.iter().enumerate() {
                    let (sn, cs) = (om * x).sin_cos();
                    inc[j][0] += w * z.z * cs;
                    inc[j][1] += w * z.z * sn;
                    inc[j][2] += w * z.zdot * cs;
                    inc[j][3] += w * z.zdot * sn;
                }
            }
        }
        inc
    }

    /// Advances to `t` (must not decrease) and returns the noise covariance there.
    pub fn advance(&mut self, t: f64) -> Result<NoiseCovariance> {
        if t < self.t {
            return Err(crate::error::invalid("t", "noise accumulator cannot step backwards"));
        }
        if t > self.t {
            let mut panels = initial_panels(t - self.t, self.rate);
            let mut prev = self.increment(self.t, t, panels);
            let mut done = false;
            for _ in 0..MAX_REFINEMENTS {
                panels *= 2;
                let next = self.increment(self.t, t, panels);
                let ok = next.iter().zip(&prev).zip(&self.cum).all(|((n, p), c)| {
                    (0..4).all(|q| {
                        let scale = n[q].abs().max(c[q].abs()).max(f64::MIN_POSITIVE);
                        (n[q] - p[q]).abs() <= REFINE_TOL * scale
                    })
                });
                prev = next;
                if ok {
                    done = true;
                    break;
                }
            }
            if !done {
                return Err(Error::QuadratureStall {
                    what: format!("noise increment on [{}, {t}]", self.t),
                });
            }
            for (c, i) in self.cum.iter_mut().zip(&prev) {
                for q in 0..4 {
                    c[q] += i[q];
                }
            }
            self.t = t;
        }
        Ok(self.current())
    }

    /// Adds the noise as rank-one terms `sqrt(hbar a)(F/M, Fd)` and
    /// `sqrt(hbar a)(G/M, Gd)`. Returns `false`, adding nothing, when the
    /// kernel has a negative amplitude and so no such square root.
    pub fn factor_into(&self, f: &mut CovarianceFactor) -> bool {
        if self.kernel.terms.iter().any(|t| t.1 < 0.0) {
            return false;
        }
        let t = self.t;
        for (&(om, amp), c) in self.kernel.terms.iter().zip(&self.cum) {
            let (sn, cs) = (om * t).sin_cos();
            let w = (self.hbar * amp).sqrt();
            f.add(w * (cs * c[0] + sn * c[1]) / self.mass, w * (cs * c[2] + sn * c[3]));
            f.add(w * (sn * c[0] - cs * c[1]) / self.mass, w * (sn * c[2] - cs * c[3]));
        }
        true
    }

    fn current(&self) -> NoiseCovariance {
        let t = self.t;
        let (mut xx, mut xp, mut pp) = (0.0, 0.0, 0.0);
        for (&(om, amp), c) in self.kernel.terms.iter().zip(&self.cum) {
            let (sn, cs) = (om * t).sin_cos();
            let f = cs * c[0] + sn * c[1];
            let g = sn * c[0] - cs * c[1];
            let fd = cs * c[2] + sn * c[3];
            let gd = sn * c[2] - cs * c[3];
            xx += amp * (f * f + g * g);
            xp += amp * (f * fd + g * gd);
            pp += amp * (fd * fd + gd * gd);
        }
        NoiseCovariance {
            xx: self.hbar / (self.mass * self.mass) * xx,
            xp: self.hbar / self.mass * xp,
            pp: self.hbar * pp,
        }
    }
}

/// Noise covariance at a single horizon by the full-square route.
pub fn noise_covariance_direct(
    modal: &ModalDecomposition,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    t: f64,
) -> Result<NoiseCovariance> {
    let kernel = CosineKernel::fluctuation(env, sys.hbar());
    let zf = |x: f64| z_exact(modal, x);
    let mut acc = NoiseAccumulator::new(&zf, &kernel, modal.max_rate(), sys.mass(), sys.hbar());
    acc.advance(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charpoly::RootOptions;

    fn setup(c: f64, beta: f64) -> (SystemParams, EnvironmentSpec, ModalDecomposition) {
        let sys = SystemParams::natural();
        let env = EnvironmentSpec::new(1.0, vec![2.0], vec![c], beta).unwrap();
        let m = ModalDecomposition::solve(&sys, &env, RootOptions::default()).unwrap();
        (sys, env, m)
    }

    #[test]
    fn kernel_matches_model_kernel() {
        let env = EnvironmentSpec::new(1.0, vec![0.5, 2.0], vec![0.3, 0.7], 0.8).unwrap();
        let k = CosineKernel::fluctuation(&env, 1.0);
        for dt in [0.0, 0.3, -1.7, 12.0] {
            let a = k.eval(dt);
            let b = crate::model::kernel_kr(&env, 1.0, dt);
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_coupling_gives_zero_noise() {
        let (sys, env, m) = setup(0.0, 1.0);
        let n = noise_integrals(&m, &sys, &env, 1.0).unwrap();
        assert_eq!((n.chi11, n.chi12, n.chi21, n.chi22), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(noise_covariance(&m, &sys, &env, 1.0).unwrap(), NoiseCovariance::default());
        assert!(chi(&m, &sys, &env, 1.0, 3, 1).is_err());
    }

    #[test]
    fn chi_vanishes_quadratically_at_short_times() {
        let (sys, env, m) = setup(1.0, 1.0);
        let a = noise_integrals(&m, &sys, &env, 1e-2).unwrap();
        let b = noise_integrals(&m, &sys, &env, 5e-3).unwrap();
        // v_1 ~ (t - tau)/t is O(1), so chi_11 ~ K_R(0) t^2 / 6
        let ratio = a.chi11 / b.chi11;
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
        let nc = noise_covariance(&m, &sys, &env, 1e-3).unwrap();
        assert!(nc.xx.abs() < 1e-8 && nc.pp.abs() < 1e-5);
    }

    #[test]
    fn chi_route_agrees_with_full_square_route() {
        let (sys, env, m) = setup(1.0, 1.0);
        for t in [0.7, 2.0, 5.5, 13.0] {
            let a = noise_covariance(&m, &sys, &env, t).unwrap();
            let b = noise_covariance_direct(&m, &sys, &env, t).unwrap();
            for (x, y) in [(a.xx, b.xx), (a.xp, b.xp), (a.pp, b.pp)] {
                assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()), "t={t}: {x} vs {y}");
            }
            assert!(b.xx >= 0.0 && b.pp >= 0.0 && b.det() >= -1e-14);
        }
    }

    #[test]
    fn accumulator_is_path_independent() {
        let (sys, env, m) = setup(1.0, 0.5);
        let kernel = CosineKernel::fluctuation(&env, 1.0);
        let zf = |x: f64| z_exact(&m, x);
        let mut acc = NoiseAccumulator::new(&zf, &kernel, m.max_rate(), 1.0, 1.0);
        let mut last = NoiseCovariance::default();
        for i in 1..=30 {
            last = acc.advance(0.25 * i as f64).unwrap();
        }
        let direct = noise_covariance_direct(&m, &sys, &env, 7.5).unwrap();
        assert!((last.xx - direct.xx).abs() < 1e-12);
        assert!((last.pp - direct.pp).abs() < 1e-12);
        assert!(acc.advance(1.0).is_err());
    }
}

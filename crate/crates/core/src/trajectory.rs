//! Time series of the packet moments for each engine.

use std::fmt;
use std::str::FromStr;

use crate::charpoly::{ModalDecomposition, RootOptions};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{check_uncertainty, CovarianceFactor, GaussianState, Transport};
use crate::model::{
    classify_regime, coth, spectral_strength, EnvironmentSpec, RegimeClass, SystemParams,
    DEFAULT_BALANCE_TOL,
};
use crate::noise::{CosineKernel, NoiseAccumulator};
use crate::ohmic::{continuum_kernel, ohmic_z, OhmicParams};
use crate::oracle::{build_full_flow, flow_exponential, initial_moments, symplectic_defect, z_from_flow};
use crate::zsol::{dissipation_integral, markov_rate, propagator_basis, residual_at, z_exact, ZEval, CAUSTIC_EPS};

/// Fine-grid resolution of the memoryless integrator, `h * rate`.
const MARKOV_STEP: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Engine {
    Exact,
    Markovian,
    Oracle,
    Ohmic,
}

impl Engine {
    pub const ALL: [Engine; 4] = [Engine::Exact, Engine::Markovian, Engine::Oracle, Engine::Ohmic];

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Exact => "exact",
            Engine::Markovian => "markovian",
            Engine::Oracle => "oracle",
            Engine::Ohmic => "ohmic",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| invalid("engine", format!("unknown engine `{s}` (expected exact, markovian, oracle or ohmic)")))
    }
}

/// Per-time output of one engine.
///
/// `residual` is engine-specific: the relative substitution residual of `Z`
/// (exact), the Wronskian drift (Markovian), the symplectic defect of the
/// flow (oracle) or the damped-equation residual (Ohmic).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub engine: Engine,
    pub regime: RegimeClass,
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
    pub dc: Vec<f64>,
    pub z: Vec<ZEval>,
    pub residual: Vec<f64>,
    pub caustic: Vec<bool>,
}

impl Trajectory {
    fn with_capacity(engine: Engine, regime: RegimeClass, n: usize) -> Self {
        Self {
            engine,
            regime,
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            dc: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            residual: Vec::with_capacity(n),
            caustic: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, s: GaussianState, u: f64, z: ZEval, residual: f64, caustic: bool) {
        self.times.push(t);
        self.dc.push(u / s.dx2);
        self.states.push(s);
        self.z.push(z);
        self.residual.push(residual);
        self.caustic.push(caustic);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `n` points closed on both ends of `[0, t_max]`.
pub fn uniform_times(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(invalid("n_points", format!("need at least 2, got {n}")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid("t_max", format!("must be finite and > 0, got {t_max}")));
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { t_max } else { t_max * i as f64 / last }).collect())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] < 0.0 {
        return Err(invalid("times", "must be non-empty and start at t >= 0"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times", "must be strictly increasing"));
    }
    Ok(())
}

/// Flags points where `|Z(t)|` falls below the caustic threshold relative to
/// the largest `|Z|` seen so far on the output grid.
struct CausticTracker {
    zmax: f64,
}

impl CausticTracker {
    fn new() -> Self {
        Self { zmax: 0.0 }
    }

    fn flag(&mut self, t: f64, z: f64) -> bool {
        self.zmax = self.zmax.max(z.abs());
        t > 0.0 && z.abs() <= CAUSTIC_EPS * self.zmax
    }
}

/// Exact engine: modal `Z` and fluctuation integrals.
///
/// Horizons where the propagator coefficients are singular are still
/// evaluated, through the caustic-free moment formulas, and flagged.
pub fn exact_trajectory(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    state0: &GaussianState,
    times: &[f64],
    opts: RootOptions,
) -> Result<Trajectory> {
    check_times(times)?;
    state0.validate(sys.hbar())?;
    let modal = ModalDecomposition::solve(sys, env, opts)?;
    let kernel = CosineKernel::fluctuation(env, sys.hbar());
    let zf = |x: f64| z_exact(&modal, x);
    let mut acc = NoiseAccumulator::new(&zf, &kernel, modal.max_rate(), sys.mass(), sys.hbar());
    let mut out = Trajectory::with_capacity(Engine::Exact, modal.regime, times.len());
    for &t in times {
        let z = z_exact(&modal, t);
        let noise = acc.advance(t)?;
        let l = Transport::from_z(z, sys.mass());
        let s = l.propagate(state0, &noise);
        let u = factored_uncertainty(&l, state0, &acc, &s);
        check_uncertainty(u, sys.hbar())?;
        let (r, scale) = residual_at(&modal, sys, env, t);
        let caustic = t > 0.0 && matches!(propagator_basis(&modal, t), Err(Error::CausticAtHorizon { .. }));
        out.push(t, s, u, z, r.abs() / scale.max(f64::MIN_POSITIVE), caustic);
    }
    Ok(out)
}

/// Memoryless engine.
///
/// `Z` solves `Zdd + [Omega^2 + (2/M) kappa(tau)] Z = 0`. The moments come from
/// the same local equation driven by the free environment, i.e. the exact
/// noise force, integrated as a Lyapunov system for `(X, P)` and their
/// correlations with each environment mode.
pub fn markovian_trajectory(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    state0: &GaussianState,
    times: &[f64],
) -> Result<Trajectory> {
    check_times(times)?;
    state0.validate(sys.hbar())?;
    let regime = classify_regime(sys, env, DEFAULT_BALANCE_TOL);
    let rate = markov_rate(sys, env);
    let (mass, om2, hb) = (sys.mass(), sys.omega() * sys.omega(), sys.hbar());
    let modes: Vec<(f64, f64, f64)> = env
        .modes()
        .map(|(w, c)| (w, c, hb / (2.0 * env.mass() * w) * coth(0.5 * env.beta() * hb * w)))
        .collect();
    let me = env.mass();
    let n = modes.len();
    // layout: Z, Zd, Y, Yd, X, P, sxx, sxp, spp, then per mode (a, b, c, d)
    let base = 9;
    let mut st = vec![0.0; base + 4 * n];
    st[1] = 1.0;
    st[2] = 1.0;
    st[4] = state0.xc;
    st[5] = state0.pc;
    st[6] = state0.dx2;
    st[7] = state0.dxp;
    st[8] = state0.dp2;
    let deriv = |tau: f64, x: &[f64], dx: &mut [f64]| {
        let w = om2 + 2.0 / mass * dissipation_integral(env, tau);
        dx[0] = x[1];
        dx[1] = -w * x[0];
        dx[2] = x[3];
        dx[3] = -w * x[2];
        dx[4] = x[5] / mass;
        dx[5] = -mass * w * x[4];
        let (mut ca, mut cc) = (0.0, 0.0);
        for (k, &(om, c, q2)) in modes.iter().enumerate() {
            let i = base + 4 * k;
            let (a, b, cq, d) = (x[i], x[i + 1], x[i + 2], x[i + 3]);
            ca += c * a;
            cc += c * cq;
            dx[i] = cq / mass + b / me;
            dx[i + 1] = d / mass - me * om * om * a;
            dx[i + 2] = -mass * w * a - c * q2 + d / me;
            dx[i + 3] = -mass * w * b - me * om * om * cq;
        }
        dx[6] = 2.0 * x[7] / mass;
        dx[7] = x[8] / mass - mass * w * x[6] - ca;
        dx[8] = -2.0 * mass * w * x[7] - 2.0 * cc;
    };
    let mut rk = Rk4::new(st.len());
    let mut out = Trajectory::with_capacity(Engine::Markovian, regime, times.len());
    let mut tracker = CausticTracker::new();
    let mut t = 0.0;
    for &target in times {
        let steps = ((target - t) * rate / MARKOV_STEP).ceil() as usize;
        if steps > 0 {
            let h = (target - t) / steps as f64;
            for i in 0..steps {
                rk.step(&deriv, t + i as f64 * h, &mut st, h);
            }
        }
        t = target;
        let w = om2 + 2.0 / mass * dissipation_integral(env, t);
        let z = ZEval {
            z: st[0],
            zdot: st[1],
            zddot: -w * st[0],
        };
        let s = GaussianState {
            xc: st[4],
            pc: st[5],
            dx2: st[6],
            dp2: st[8],
            dxp: st[7],
        };
        // cross moments with each free mode give its rank-one contributions
        let mut f = CovarianceFactor::default();
        let l = Transport([[st[2], st[0] / mass], [mass * st[3], st[1]]]);
        f.add_transported(&l, state0);
        for (k, &(om, _, q2)) in modes.iter().enumerate() {
            let i = base + 4 * k;
            let sq = q2.sqrt();
            let sp = me * om * sq;
            f.add(st[i] / sq, st[i + 2] / sq);
            f.add(st[i + 1] / sp, st[i + 3] / sp);
        }
        let u = f.uncertainty();
        check_uncertainty(u, hb)?;
        let wronskian = st[2] * st[1] - st[0] * st[3];
        let caustic = tracker.flag(t, z.z);
        out.push(t, s, u, z, (wronskian - 1.0).abs(), caustic);
    }
    Ok(out)
}

/// Full-system engine: the joint flow propagated step by step.
pub fn oracle_trajectory(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    state0: &GaussianState,
    times: &[f64],
) -> Result<Trajectory> {
    check_times(times)?;
    state0.validate(sys.hbar())?;
    let regime = classify_regime(sys, env, DEFAULT_BALANCE_TOL);
    let gen = build_full_flow(sys, env);
    let (m0, c0) = initial_moments(&gen, env, sys.hbar(), state0);
    let (xi, pi) = (gen.x_index(0), gen.p_index(0));
    let factors = initial_factor(&gen, &c0);
    let dim = 2 * gen.dof();
    let mut s = nalgebra::DMatrix::<f64>::identity(dim, dim);
    let mut out = Trajectory::with_capacity(Engine::Oracle, regime, times.len());
    let mut tracker = CausticTracker::new();
    let mut t = 0.0;
    let mut step: Option<(f64, nalgebra::DMatrix<f64>)> = None;
    for &target in times {
        let dt = target - t;
        if dt > 0.0 {
            let reuse = matches!(&step, Some((h, _)) if (h - dt).abs() <= 1e-12 * dt);
            if !reuse {
                step = Some((dt, flow_exponential(&gen, dt)?));
            }
            let (_, sh) = step.as_ref().expect("step set above");
            s = sh * &s;
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NormOverflow { t: target });
            }
        }
        t = target;
        let rx = s.row(xi);
        let rp = s.row(pi);
        let cx = &c0 * rx.transpose();
        let cp = &c0 * rp.transpose();
        let st = GaussianState {
            xc: rx.dot(&m0.transpose()),
            pc: rp.dot(&m0.transpose()),
            dx2: rx.dot(&cx.transpose()),
            dp2: rp.dot(&cp.transpose()),
            dxp: rx.dot(&cp.transpose()),
        };
        let u = flow_uncertainty(&rx, &rp, &factors);
        check_uncertainty(u, sys.hbar())?;
        let z = z_from_flow(&gen, &s, sys.mass());
        let caustic = tracker.flag(t, z.z);
        out.push(t, st, u, z, symplectic_defect(&s), caustic);
    }
    Ok(out)
}

/// Continuum engine: damped `Z` with the continuum fluctuation kernel.
pub fn ohmic_trajectory(
    sys: &SystemParams,
    beta: f64,
    p: &OhmicParams,
    state0: &GaussianState,
    times: &[f64],
) -> Result<Trajectory> {
    check_times(times)?;
    state0.validate(sys.hbar())?;
    ohmic_z(p, 0.0)?;
    let shift = 4.0 * p.gamma0() * p.cutoff() / std::f64::consts::PI;
    let om2 = p.omega_r2() + shift;
    let regime = RegimeClass {
        label: if p.omega_r2() > DEFAULT_BALANCE_TOL * om2 {
            crate::model::Regime::Bounded
        } else if p.omega_r2() < -DEFAULT_BALANCE_TOL * om2 {
            crate::model::Regime::Unstable
        } else {
            crate::model::Regime::Critical
        },
        ratio: shift / om2,
    };
    let horizon = times.last().copied().unwrap_or(0.0);
    let kernel = continuum_kernel(sys, beta, p, horizon);
    let zf = |x: f64| ohmic_z(p, x).expect("underdamped checked above");
    let rate = p.omega_r2().sqrt().max(p.gamma0());
    let mut acc = NoiseAccumulator::new(&zf, &kernel, rate, sys.mass(), sys.hbar());
    let mut out = Trajectory::with_capacity(Engine::Ohmic, regime, times.len());
    let mut tracker = CausticTracker::new();
    for &t in times {
        let z = zf(t);
        let noise = acc.advance(t)?;
        let l = Transport::from_z(z, sys.mass());
        let s = l.propagate(state0, &noise);
        let u = factored_uncertainty(&l, state0, &acc, &s);
        let res = (z.zddot + 2.0 * p.gamma0() * z.zdot + p.omega_r2() * z.z).abs();
        let caustic = tracker.flag(t, z.z);
        out.push(t, s, u, z, res, caustic);
    }
    Ok(out)
}

fn factored_uncertainty(l: &Transport, state0: &GaussianState, acc: &NoiseAccumulator, s: &GaussianState) -> f64 {
    let mut f = CovarianceFactor::default();
    f.add_transported(l, state0);
    if acc.factor_into(&mut f) {
        f.uncertainty()
    } else {
        s.uncertainty()
    }
}

/// Columns of a square root `B` of the factorized initial covariance,
/// `C0 = B B^T`, as sparse `(index, value)` lists.
fn initial_factor(gen: &crate::oracle::FullFlowGenerator, c0: &nalgebra::DMatrix<f64>) -> Vec<Vec<(usize, f64)>> {
    let (x, p) = (gen.x_index(0), gen.p_index(0));
    let b11 = c0[(x, x)].sqrt();
    let b21 = c0[(p, x)] / b11;
    let b22 = (c0[(p, p)] - b21 * b21).max(0.0).sqrt();
    let mut cols = vec![vec![(x, b11), (p, b21)], vec![(p, b22)]];
    for k in 1..gen.dof() {
        for i in [gen.x_index(k), gen.p_index(k)] {
            cols.push(vec![(i, c0[(i, i)].sqrt())]);
        }
    }
    cols
}

fn flow_uncertainty<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<f64, R, C>>(
    rx: &nalgebra::Matrix<f64, R, C, S>,
    rp: &nalgebra::Matrix<f64, R, C, S>,
    cols: &[Vec<(usize, f64)>],
) -> f64 {
    let mut f = CovarianceFactor::default();
    for col in cols {
        let dot = |r: &nalgebra::Matrix<f64, R, C, S>| col.iter().map(|&(i, b)| r[i] * b).sum::<f64>();
        f.add(dot(rx), dot(rp));
    }
    f.uncertainty()
}

/// Convenience used by tests and the runner: spectral strength over `M Omega^2`.
pub fn balance_ratio(sys: &SystemParams, env: &EnvironmentSpec) -> f64 {
    spectral_strength(env) / sys.bounding_strength()
}

/// Classical RK4 on a dynamically sized state, with reusable scratch space.
struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    fn step<F: Fn(f64, &[f64], &mut [f64])>(&mut self, f: &F, t: f64, x: &mut [f64], h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        f(t, x, k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, &self.tmp, k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, &self.tmp, k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * k3[i];
        }
        f(t + h, &self.tmp, k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(c: f64) -> (SystemParams, EnvironmentSpec, GaussianState) {
        let sys = SystemParams::natural();
        let env = EnvironmentSpec::new(1.0, vec![0.7, 2.0], vec![c, 0.5 * c], 1.0).unwrap();
        let s0 = GaussianState::new(0.2, -0.1, 0.04, 25.0, 0.0, 1.0).unwrap();
        (sys, env, s0)
    }

    #[test]
    fn grid_is_closed() {
        let t = uniform_times(30.0, 301).unwrap();
        assert_eq!(t.len(), 301);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[300], 30.0);
        assert!(uniform_times(1.0, 1).is_err());
        assert!(check_times(&[0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn engine_names_round_trip() {
        for e in Engine::ALL {
            assert_eq!(e.name().parse::<Engine>().unwrap(), e);
        }
        assert!("nope".parse::<Engine>().is_err());
    }

    #[test]
    fn exact_matches_oracle_along_grid() {
        let (sys, env, s0) = scenario(0.4);
        let times = uniform_times(12.0, 25).unwrap();
        let a = exact_trajectory(&sys, &env, &s0, &times, RootOptions::default()).unwrap();
        let b = oracle_trajectory(&sys, &env, &s0, &times).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x.dx2 - y.dx2).abs() < 1e-8);
            assert!((x.dp2 - y.dp2).abs() < 1e-8);
            assert!((x.dxp - y.dxp).abs() < 1e-8);
            assert!((x.xc - y.xc).abs() < 1e-9);
        }
        for (x, y) in a.z.iter().zip(&b.z) {
            assert!((x.z - y.z).abs() < 1e-9 && (x.zdot - y.zdot).abs() < 1e-9);
        }
    }

    #[test]
    fn markovian_equals_exact_without_coupling() {
        let (sys, env, s0) = scenario(0.0);
        let times = uniform_times(10.0, 21).unwrap();
        let a = exact_trajectory(&sys, &env, &s0, &times, RootOptions::default()).unwrap();
        let b = markovian_trajectory(&sys, &env, &s0, &times).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x.dx2 - y.dx2).abs() < 1e-6 * y.dx2.max(1.0), "{} vs {}", x.dx2, y.dx2);
            assert!((x.dp2 - y.dp2).abs() < 1e-6 * y.dp2.max(1.0), "{} vs {}", x.dp2, y.dp2);
        }
        assert!(b.residual.iter().all(|r| *r < 1e-8));
    }

    #[test]
    fn decoupled_caustics_are_flagged() {
        let (sys, env, s0) = scenario(0.0);
        let times: Vec<f64> = (0..=4).map(|i| i as f64 * std::f64::consts::PI / 2.0).collect();
        let a = exact_trajectory(&sys, &env, &s0, &times, RootOptions::default()).unwrap();
        assert_eq!(a.caustic, vec![false, false, true, false, true]);
    }

    #[test]
    fn unstable_runs_report_physical_uncertainty() {
        let sys = SystemParams::natural();
        let env = EnvironmentSpec::new(1.0, vec![0.48, 0.86, 1.72], vec![0.45, 0.8, 1.6], 1.0).unwrap();
        let s0 = GaussianState::new(0.0, 0.0, 0.04, 25.0, 0.0, 1.0).unwrap();
        let times = uniform_times(40.0, 81).unwrap();
        let e = exact_trajectory(&sys, &env, &s0, &times, RootOptions::default()).unwrap();
        let o = oracle_trajectory(&sys, &env, &s0, &times).unwrap();
        let m = markovian_trajectory(&sys, &env, &s0, &times).unwrap();
        assert_eq!(e.regime.label, crate::model::Regime::Unstable);
        for tr in [&e, &o, &m] {
            let last = tr.states.last().unwrap();
            assert!(last.dx2 > 1e12, "{:?} {}", tr.engine, last.dx2);
            for (s, dc) in tr.states.iter().zip(&tr.dc) {
                assert!(dc * s.dx2 >= 0.25 - 1e-9);
            }
        }
        // the two engines round differently; their gap grows like exp(2 mu0 t)
        for ((t, a), b) in times.iter().zip(&e.dc).zip(&o.dc).filter(|((t, _), _)| **t <= 30.0) {
            assert!((a - b).abs() <= 1e-5 * b.abs(), "t={t}: {a} vs {b}");
        }
    }
}

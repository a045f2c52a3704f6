//! Brute-force reference: the full `(N+1)`-oscillator linear flow, evolved as
//! a matrix exponential and marginalized onto the central particle.
//!
//! Phase-space ordering is `(X, q_1..q_N, P, p_1..p_N)` throughout.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::model::{coth, EnvironmentSpec, SystemParams};
use crate::zsol::ZEval;

/// Generator `A` of `d/dt (x, p) = A (x, p)`, `A = [[0, M^-1], [-K, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullFlowGenerator {
    a: DMatrix<f64>,
    dof: usize,
}

impl FullFlowGenerator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Number of oscillators, `N + 1`.
    pub fn dof(&self) -> usize {
        self.dof
    }

    /// Index of a position coordinate (`0` is the central particle).
    pub fn x_index(&self, i: usize) -> usize {
        i
    }

    /// Index of a momentum coordinate.
    pub fn p_index(&self, i: usize) -> usize {
        self.dof + i
    }

    /// Stiffness block `K` (the negated lower-left block).
    pub fn stiffness(&self) -> DMatrix<f64> {
        -self.a.view((self.dof, 0), (self.dof, self.dof)).clone_owned()
    }
}

pub fn build_full_flow(sys: &SystemParams, env: &EnvironmentSpec) -> FullFlowGenerator {
    let n = env.len();
    let d = n + 1;
    let mut a = DMatrix::zeros(2 * d, 2 * d);
    a[(0, d)] = 1.0 / sys.mass();
    a[(d, 0)] = -sys.bounding_strength();
    for (k, (w, c)) in env.modes().enumerate() {
        let i = k + 1;
        a[(i, d + i)] = 1.0 / env.mass();
        a[(d + i, i)] = -env.mass() * w * w;
        a[(d, i)] = -c;
        a[(d + i, 0)] = -c;
    }
    FullFlowGenerator { a, dof: d }
}

fn max_abs_row_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(tA)` by scaling and squaring around a truncated Taylor series.
pub fn flow_exponential(gen: &FullFlowGenerator, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(crate::error::invalid("t", format!("must be >= 0, got {t}")));
    }
    let dim = gen.a.nrows();
    let norm = max_abs_row_sum(&gen.a) * t;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = &gen.a * (t / 2f64.powi(squarings));
    let mut sum = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if max_abs_row_sum(&term) < 1e-18 * max_abs_row_sum(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    if sum.iter().any(|x| !x.is_finite()) {
        return Err(Error::NormOverflow { t });
    }
    Ok(sum)
}

/// `max |S^T J S - J|` with `J = [[0, I], [-I, 0]]`.
pub fn symplectic_defect(s: &DMatrix<f64>) -> f64 {
    let d = s.nrows() / 2;
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = 1.0;
        j[(d + i, i)] = -1.0;
    }
    (s.transpose() * &j * s - &j).amax()
}

/// Thermal `(<q_k^2>, <p_k^2>)` for each environment mode.
pub fn thermal_env_covariance(env: &EnvironmentSpec, hbar: f64) -> Vec<(f64, f64)> {
    env.omegas()
        .iter()
        .map(|&w| {
            let c = coth(0.5 * env.beta() * hbar * w);
            (hbar / (2.0 * env.mass() * w) * c, hbar * env.mass() * w / 2.0 * c)
        })
        .collect()
}

/// Factorized initial moments: the packet times the thermal environment.
pub fn initial_moments(
    gen: &FullFlowGenerator,
    env: &EnvironmentSpec,
    hbar: f64,
    state0: &GaussianState,
) -> (DVector<f64>, DMatrix<f64>) {
    let dim = 2 * gen.dof;
    let (x0, p0) = (gen.x_index(0), gen.p_index(0));
    let mut mean = DVector::zeros(dim);
    mean[x0] = state0.xc;
    mean[p0] = state0.pc;
    let mut cov = DMatrix::zeros(dim, dim);
    cov[(x0, x0)] = state0.dx2;
    cov[(p0, p0)] = state0.dp2;
    cov[(x0, p0)] = state0.dxp;
    cov[(p0, x0)] = state0.dxp;
    for (k, (q2, p2)) in thermal_env_covariance(env, hbar).into_iter().enumerate() {
        let (qi, pi) = (gen.x_index(k + 1), gen.p_index(k + 1));
        cov[(qi, qi)] = q2;
        cov[(pi, pi)] = p2;
    }
    (mean, cov)
}

/// Central-particle marginal of full moments.
pub fn marginal(gen: &FullFlowGenerator, mean: &DVector<f64>, cov: &DMatrix<f64>) -> GaussianState {
    let (x, p) = (gen.x_index(0), gen.p_index(0));
    GaussianState {
        xc: mean[x],
        pc: mean[p],
        dx2: cov[(x, x)],
        dp2: cov[(p, p)],
        dxp: 0.5 * (cov[(x, p)] + cov[(p, x)]),
    }
}

/// Propagator functions read off the flow: `Zd = dX/dX0`, `Z = M dX/dP0`,
/// `Zdd = (1/M) dP/dX0`.
pub fn z_from_flow(gen: &FullFlowGenerator, s: &DMatrix<f64>, mass: f64) -> ZEval {
    let (x, p) = (gen.x_index(0), gen.p_index(0));
    ZEval {
        z: mass * s[(x, p)],
        zdot: s[(x, x)],
        zddot: s[(p, x)] / mass,
    }
}

pub fn oracle_covariance(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    state0: &GaussianState,
    t: f64,
) -> Result<GaussianState> {
    let gen = build_full_flow(sys, env);
    let s = flow_exponential(&gen, t)?;
    let (m0, c0) = initial_moments(&gen, env, sys.hbar(), state0);
    let mean = &s * m0;
    let cov = &s * c0 * s.transpose();
    Ok(marginal(&gen, &mean, &cov))
}

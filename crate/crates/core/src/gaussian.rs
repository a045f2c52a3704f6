//! First and second moments of the central particle, the decoherence measure
//! and the reduced density matrix of a single Gaussian packet.

use num_complex::Complex64;

use crate::charpoly::ModalDecomposition;
use crate::error::{invalid, Error, Result};
use crate::model::{EnvironmentSpec, SystemParams};
use crate::noise::{noise_covariance_direct, NoiseCovariance};
use crate::zsol::{propagator_basis, z_exact, ZEval};

/// Slack below `hbar^2/4` tolerated before a state is declared unphysical.
pub const UNCERTAINTY_SLACK: f64 = 1e-9;

/// Means and second moments of a Gaussian packet; `dxp` is the symmetrized
/// correlator `<{X - Xc, P - Pc}>/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub xc: f64,
    pub pc: f64,
    pub dx2: f64,
    pub dp2: f64,
    pub dxp: f64,
}

impl GaussianState {
    /// Checked constructor.
    pub fn new(xc: f64, pc: f64, dx2: f64, dp2: f64, dxp: f64, hbar: f64) -> Result<Self> {
        let s = Self { xc, pc, dx2, dp2, dxp };
        s.validate(hbar)?;
        Ok(s)
    }

    /// Minimum-uncertainty ground state of the bare trap.
    pub fn coherent(sys: &SystemParams, xc: f64, pc: f64) -> Self {
        let mw = sys.mass() * sys.omega();
        Self {
            xc,
            pc,
            dx2: sys.hbar() / (2.0 * mw),
            dp2: sys.hbar() * mw / 2.0,
            dxp: 0.0,
        }
    }

    pub fn validate(&self, hbar: f64) -> Result<()> {
        for (field, v) in [
            ("xc", self.xc),
            ("pc", self.pc),
            ("dx2", self.dx2),
            ("dp2", self.dp2),
            ("dxp", self.dxp),
        ] {
            if !v.is_finite() {
                return Err(invalid(field, format!("must be finite, got {v}")));
            }
        }
        if !(self.dx2 > 0.0) {
            return Err(invalid("dx2", format!("must be > 0, got {}", self.dx2)));
        }
        if !(self.dp2 > 0.0) {
            return Err(invalid("dp2", format!("must be > 0, got {}", self.dp2)));
        }
        let floor = 0.25 * hbar * hbar;
        let u = self.uncertainty();
        if u < floor - UNCERTAINTY_SLACK - 1e-12 * self.dx2 * self.dp2 {
            return Err(Error::UnphysicalResult { value: u, floor });
        }
        Ok(())
    }

    /// Schrodinger uncertainty `dX2 dP2 - dXP^2`.
    pub fn uncertainty(&self) -> f64 {
        self.dx2 * self.dp2 - self.dxp * self.dxp
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        [[self.dx2, self.dxp], [self.dxp, self.dp2]]
    }
}

/// Homogeneous transport `L(t)` acting on `(X, P)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transport(pub [[f64; 2]; 2]);

impl Transport {
    /// `[[Zd, Z/M], [M Zdd, Zd]]`: the position row is `X = Zd X0 + Z P0/M`,
    /// the momentum row its time derivative times `M`.
    pub fn from_z(z: ZEval, mass: f64) -> Self {
        Self([[z.zdot, z.z / mass], [mass * z.zddot, z.zdot]])
    }

    pub fn det(&self) -> f64 {
        let l = &self.0;
        l[0][0] * l[1][1] - l[0][1] * l[1][0]
    }

    pub fn apply_mean(&self, x: f64, p: f64) -> (f64, f64) {
        let l = &self.0;
        (l[0][0] * x + l[0][1] * p, l[1][0] * x + l[1][1] * p)
    }

    /// `L sigma L^T` plus the noise matrix, with the means transported too.
    pub fn propagate(&self, s: &GaussianState, noise: &NoiseCovariance) -> GaussianState {
        let l = &self.0;
        let c = s.covariance();
        let mut lc = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                lc[i][j] = l[i][0] * c[0][j] + l[i][1] * c[1][j];
            }
        }
        let q = |i: usize, j: usize| lc[i][0] * l[j][0] + lc[i][1] * l[j][1];
        let (xc, pc) = self.apply_mean(s.xc, s.pc);
        GaussianState {
            xc,
            pc,
            dx2: q(0, 0) + noise.xx,
            dp2: q(1, 1) + noise.pp,
            dxp: 0.5 * (q(0, 1) + q(1, 0)) + noise.xp,
        }
    }
}

/// Square root `sigma = R^T R` of a 2x2 covariance, `R` upper triangular,
/// accumulated from rank-one terms `v v^T` by Givens rotations.
///
/// The Schrodinger uncertainty `(r11 r22)^2` then involves no subtraction of
/// large moments, so it stays accurate when `dX2 dP2` is many orders of
/// magnitude above it (unstable runs).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CovarianceFactor {
    r11: f64,
    r12: f64,
    r22: f64,
}

impl CovarianceFactor {
    /// `sigma += (x, p)(x, p)^T`.
    pub fn add(&mut self, x: f64, p: f64) {
        let rho = self.r11.hypot(x);
        let y = if rho > 0.0 {
            let (c, s) = (self.r11 / rho, x / rho);
            let y = c * p - s * self.r12;
            self.r12 = c * self.r12 + s * p;
            y
        } else {
            p
        };
        self.r11 = rho;
        self.r22 = self.r22.hypot(y);
    }

    /// Adds `L sigma0 L^T` through the Cholesky factor of `sigma0`.
    pub fn add_transported(&mut self, l: &Transport, s: &GaussianState) {
        let b11 = s.dx2.sqrt();
        let b21 = s.dxp / b11;
        let b22 = (s.uncertainty() / s.dx2).max(0.0).sqrt();
        let l = &l.0;
        self.add(l[0][0] * b11 + l[0][1] * b21, l[1][0] * b11 + l[1][1] * b21);
        self.add(l[0][1] * b22, l[1][1] * b22);
    }

    pub fn uncertainty(&self) -> f64 {
        let d = self.r11 * self.r22;
        d * d
    }

    /// `[[dX2, dXP], [dXP, dP2]]` rebuilt from the factor.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let xp = self.r11 * self.r12;
        [[self.r11 * self.r11, xp], [xp, self.r12 * self.r12 + self.r22 * self.r22]]
    }
}

pub fn evolve_mean(modal: &ModalDecomposition, sys: &SystemParams, x0: f64, p0: f64, t: f64) -> (f64, f64) {
    Transport::from_z(z_exact(modal, t), sys.mass()).apply_mean(x0, p0)
}

/// Exact covariance at horizon `t`.
///
/// Fails with `CausticAtHorizon` where `Z(t)` vanishes, since the propagator
/// coefficients are singular there, even though the moments themselves are
/// regular.
pub fn evolve_covariance(
    modal: &ModalDecomposition,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    state0: &GaussianState,
    t: f64,
) -> Result<GaussianState> {
    state0.validate(sys.hbar())?;
    if t == 0.0 {
        return Ok(*state0);
    }
    propagator_basis(modal, t)?;
    evolve_covariance_regular(modal, sys, env, state0, t)
}

/// Same as [`evolve_covariance`] without the caustic check.
pub fn evolve_covariance_regular(
    modal: &ModalDecomposition,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    state0: &GaussianState,
    t: f64,
) -> Result<GaussianState> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let noise = noise_covariance_direct(modal, sys, env, t)?;
    let out = Transport::from_z(z_exact(modal, t), sys.mass()).propagate(state0, &noise);
    check_physical(&out, sys.hbar())?;
    Ok(out)
}

/// Floor test for an uncertainty computed without cancellation.
pub(crate) fn check_uncertainty(u: f64, hbar: f64) -> Result<()> {
    let floor = 0.25 * hbar * hbar;
    if !u.is_finite() || u < floor - UNCERTAINTY_SLACK {
        return Err(Error::UnphysicalResult { value: u, floor });
    }
    Ok(())
}

/// Floor test from the moments, allowing for their cancellation error.
pub(crate) fn check_physical(s: &GaussianState, hbar: f64) -> Result<()> {
    let floor = 0.25 * hbar * hbar;
    let u = s.uncertainty();
    if !u.is_finite() || u < floor - UNCERTAINTY_SLACK - 1e-12 * (s.dx2 * s.dp2).abs() {
        return Err(Error::UnphysicalResult { value: u, floor });
    }
    Ok(())
}

/// `D_c = (dX2 dP2 - dXP^2)/dX2`.
pub fn decoherence_measure(state: &GaussianState) -> f64 {
    state.uncertainty() / state.dx2
}

/// Coherence factor `exp(-D_c r^2 / (2 hbar^2))` at off-diagonal distance `r`.
pub fn off_diagonal(state: &GaussianState, hbar: f64, r: f64) -> f64 {
    (-decoherence_measure(state) * r * r / (2.0 * hbar * hbar)).exp()
}

/// `rho(R, r)` in centre/relative coordinates, normalized so that the
/// diagonal `r = 0` integrates to one over `R`.
pub fn density_matrix_value(state: &GaussianState, hbar: f64, big_r: f64, r: f64) -> Complex64 {
    let d = big_r - state.xc;
    let amp = -d * d / (2.0 * state.dx2) - decoherence_measure(state) * r * r / (2.0 * hbar * hbar);
    let phase = r * (state.pc + state.dxp * d / state.dx2) / hbar;
    let norm = (std::f64::consts::TAU * state.dx2).sqrt().recip();
    Complex64::from_polar(norm * amp.exp(), phase)
}

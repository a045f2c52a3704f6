//! Continuum (Ohmic) limit: spectral density `(2 M gamma0 / pi) omega` below a
//! sharp cutoff `Lambda`.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::model::{coth, EnvironmentSpec, SystemParams};
use crate::noise::CosineKernel;
use crate::quadrature::{adaptive, GaussLegendre};
use crate::zsol::ZEval;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicParams {
    gamma0: f64,
    cutoff: f64,
    omega_r2: f64,
}

impl OhmicParams {
    /// From the bare trap frequency `Omega`.
    pub fn new(gamma0: f64, cutoff: f64, omega: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(invalid("gamma0", format!("must be > 0, got {gamma0}")));
        }
        if !(cutoff > gamma0 && cutoff.is_finite()) {
            return Err(invalid("cutoff", format!("must exceed gamma0 = {gamma0}, got {cutoff}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("must be > 0, got {omega}")));
        }
        Ok(Self {
            gamma0,
            cutoff,
            omega_r2: omega * omega - 4.0 * gamma0 * cutoff / PI,
        })
    }

    /// From the renormalized frequency `Omega_r`.
    pub fn from_renormalized(gamma0: f64, cutoff: f64, omega_r: f64) -> Result<Self> {
        let omega = (omega_r * omega_r + 4.0 * gamma0 * cutoff / PI).sqrt();
        Self::new(gamma0, cutoff, omega)
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn omega_r2(&self) -> f64 {
        self.omega_r2
    }

    /// Bare frequency `Omega` that renormalizes to `Omega_r`.
    pub fn bare_omega(&self) -> f64 {
        (self.omega_r2 + 4.0 * self.gamma0 * self.cutoff / PI).sqrt()
    }

    fn damped_frequency(&self) -> Result<f64> {
        let w2 = self.omega_r2 - self.gamma0 * self.gamma0;
        if !(w2 > 0.0) {
            return Err(Error::OverdampedUnsupported {
                omega_r2: self.omega_r2,
                gamma0: self.gamma0,
            });
        }
        Ok(w2.sqrt())
    }

    fn omega_r(&self) -> Result<f64> {
        self.damped_frequency()?;
        Ok(self.omega_r2.sqrt())
    }
}

/// Underdamped `Z = exp(-gamma0 tau) sin(W tau)/W`, `W^2 = Omega_r^2 - gamma0^2`.
pub fn ohmic_z(p: &OhmicParams, tau: f64) -> Result<ZEval> {
    let w = p.damped_frequency()?;
    let g = p.gamma0;
    let e = (-g * tau).exp();
    let (sn, cs) = (w * tau).sin_cos();
    let z = e * sn / w;
    let zdot = e * (cs - g * sn / w);
    Ok(ZEval {
        z,
        zdot,
        zddot: -2.0 * g * zdot - p.omega_r2 * z,
    })
}

/// `x coth(x)`, finite at the origin.
fn x_coth_x(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + x * x / 3.0
    } else {
        x * coth(x)
    }
}

/// Long-time width from the fluctuation-dissipation relation,
/// `(hbar/pi) int_0^inf coth(beta hbar w/2) Im chi(w) dw` with the
/// oscillator susceptibility `chi = 1/(M (Omega_r^2 - w^2 - 2 i gamma0 w))`.
pub fn stationary_width(sys: &SystemParams, beta: f64, p: &OhmicParams) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid("beta", format!("must be > 0, got {beta}")));
    }
    let wr = p.omega_r()?;
    let (g, wr2, hb, m) = (p.gamma0, p.omega_r2, sys.hbar(), sys.mass());
    let half = 0.5 * beta * hb;
    // w coth(beta hbar w / 2) written as (2/(beta hbar)) x coth x
    let f = |w: f64| {
        let d = wr2 - w * w;
        let denom = d * d + 4.0 * g * g * w * w;
        hb / PI * (2.0 * g / m) * x_coth_x(half * w) / half / denom
    };
    let tol = 1e-11;
    let max = 4000;
    let a = adaptive(f, 0.0, wr, tol, 0.0, max)?;
    let b = adaptive(f, wr, 2.0 * wr, tol, 0.0, max)?;
    // w = 2 Omega_r / u on (0, 1]
    let tail = |u: f64| {
        if u <= 0.0 {
            0.0
        } else {
            let w = 2.0 * wr / u;
            f(w) * 2.0 * wr / (u * u)
        }
    };
    let c = adaptive(tail, 0.0, 1.0, tol, 0.0, max)?;
    Ok(a + b + c)
}

/// `(hbar / (2 M Omega_r)) coth(beta hbar Omega_r / 2)`.
pub fn coth_width(sys: &SystemParams, beta: f64, omega_r: f64) -> Result<f64> {
    if !(omega_r > 0.0) {
        return Err(invalid("omega_r", format!("must be > 0, got {omega_r}")));
    }
    let hb = sys.hbar();
    Ok(hb / (2.0 * sys.mass() * omega_r) * coth(0.5 * beta * hb * omega_r))
}

/// Midpoint discretization `omega_k = (k - 1/2) Lambda/N`,
/// `C_k^2 = (4 M m gamma0 / pi) omega_k^2 dw`.
pub fn discretize_ohmic(
    gamma0: f64,
    cutoff: f64,
    n: usize,
    env_mass: f64,
    sys_mass: f64,
    beta: f64,
) -> Result<EnvironmentSpec> {
    if n < 2 {
        return Err(invalid("n", format!("need at least 2 modes, got {n}")));
    }
    if !(gamma0 > 0.0) {
        return Err(invalid("gamma0", format!("must be > 0, got {gamma0}")));
    }
    if !(cutoff > 0.0) {
        return Err(invalid("cutoff", format!("must be > 0, got {cutoff}")));
    }
    let dw = cutoff / n as f64;
    let omegas: Vec<f64> = (1..=n).map(|k| (k as f64 - 0.5) * dw).collect();
    let pref = 4.0 * sys_mass * env_mass * gamma0 / PI * dw;
    let couplings = omegas.iter().map(|w| w * (pref).sqrt()).collect();
    EnvironmentSpec::new(env_mass, omegas, couplings, beta)
}

/// Continuum fluctuation kernel
/// `K_R(dt) = int_0^Lambda (2 M gamma0/pi) w coth(beta hbar w/2) cos(w dt) dw`
/// as a Gauss-Legendre cosine sum, resolved for `|dt| <= horizon`.
pub fn continuum_kernel(sys: &SystemParams, beta: f64, p: &OhmicParams, horizon: f64) -> CosineKernel {
    let lam = p.cutoff;
    let panels = ((lam * horizon.max(1.0) / PI).ceil() as usize).max(4);
    let h = lam / panels as f64;
    let rule = GaussLegendre::panel();
    let half = 0.5 * beta * sys.hbar();
    let pref = 2.0 * sys.mass() * p.gamma0 / PI;
    let terms = (0..panels)
        .flat_map(|i| rule.mapped(i as f64 * h, (i + 1) as f64 * h))
        .map(|(w, wt)| (w, wt * pref * x_coth_x(half * w) / half))
        .collect();
    CosineKernel::new(terms)
}

//! Scenario files: a TOML schema, its validation, and resolution into core
//! parameter objects.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qbm_core::model::{balance_gamma, drude_environment};
use qbm_core::ohmic::{discretize_ohmic, OhmicParams};
use qbm_core::trajectory::uniform_times;
use qbm_core::{Engine, EnvironmentSpec, GaussianState, Regime, SystemParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub engines: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub system: SystemSection,
    pub environment: EnvironmentSection,
    pub initial: InitialSection,
    pub grid: GridSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub mass: f64,
    /// Bare trap frequency. Omitted when an Ohmic environment fixes the
    /// renormalized frequency instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    pub hbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub mass: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omegas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drude: Option<DrudeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ohmic: Option<OhmicSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrudeSection {
    pub gamma: Gamma,
    pub cutoff: f64,
    pub omegas: Vec<f64>,
}

/// A fixed coupling strength, or the keyword `"balance"` for the value at
/// which the spectral strength equals the bounding strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OhmicSection {
    pub gamma0: f64,
    pub cutoff: f64,
    pub n_modes: usize,
    /// Renormalized frequency; when set, `system.omega` must be omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub xc: f64,
    #[serde(default)]
    pub pc: f64,
    pub dx2: f64,
    pub dp2: f64,
    #[serde(default)]
    pub dxp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub t_max: f64,
    pub n_points: usize,
}

/// One violated invariant, addressed by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario:\n{}", render(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
}

fn render(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses TOML text, locating syntax and schema errors by line.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start).min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = offset - before.rfind('\n').map_or(0, |i| i + 1) + 1;
        ConfigError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn to_toml(cfg: &ScenarioConfig) -> Result<String, ConfigError> {
    Ok(toml::to_string(cfg)?)
}

/// Reads and checks a scenario file. Parse failures are errors; invariant
/// violations are returned as diagnostics (empty when the file is valid).
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>, ConfigError> {
    Ok(load_config(path)?.diagnostics())
}

pub fn parse_regime(s: &str) -> Option<Regime> {
    match s {
        "bounded" => Some(Regime::Bounded),
        "critical" => Some(Regime::Critical),
        "unstable" => Some(Regime::Unstable),
        _ => None,
    }
}

struct Collector(Vec<Diagnostic>);

impl Collector {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            path: path.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.push(path, format!("must be finite and > 0, got {v}"));
        }
    }

    fn frequencies(&mut self, path: &str, ws: &[f64]) {
        if ws.is_empty() {
            self.push(path, "must list at least one frequency");
        }
        for (k, &w) in ws.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                self.push(format!("{path}[{k}]"), format!("must be finite and > 0, got {w}"));
            }
        }
        for (k, p) in ws.windows(2).enumerate() {
            if p[1] <= p[0] {
                self.push(
                    format!("{path}[{}]", k + 1),
                    format!(
                        "frequencies must be strictly increasing: {} does not exceed the previous value {}",
                        p[1], p[0]
                    ),
                );
            }
        }
    }
}

impl ScenarioConfig {
    /// Every invariant violation, in field order.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut c = Collector(Vec::new());
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-')
        {
            c.push("name", "must be non-empty and use only ASCII letters, digits, '_' or '-'");
        }
        if self.engines.is_empty() {
            c.push("engines", "must name at least one engine");
        }
        let mut seen = Vec::new();
        for (i, e) in self.engines.iter().enumerate() {
            match e.parse::<Engine>() {
                Ok(engine) if seen.contains(&engine) => {
                    c.push(format!("engines[{i}]"), format!("engine `{e}` listed twice"))
                }
                Ok(engine) => seen.push(engine),
                Err(_) => c.push(
                    format!("engines[{i}]"),
                    format!("unknown engine `{e}` (expected exact, markovian, oracle or ohmic)"),
                ),
            }
        }

        let sys = &self.system;
        c.positive("system.mass", sys.mass);
        c.positive("system.hbar", sys.hbar);
        let ohmic_omega_r = self.environment.ohmic.as_ref().and_then(|o| o.omega_r);
        match (sys.omega, ohmic_omega_r) {
            (Some(w), None) => c.positive("system.omega", w),
            (Some(_), Some(_)) => c.push(
                "system.omega",
                "mutually exclusive with environment.ohmic.omega_r (the bare frequency follows from it)",
            ),
            (None, None) => c.push("system.omega", "required unless environment.ohmic.omega_r is set"),
            (None, Some(_)) => {}
        }

        let env = &self.environment;
        c.positive("environment.mass", env.mass);
        c.positive("environment.beta", env.beta);
        if let Some(r) = &env.regime {
            if parse_regime(r).is_none() {
                c.push(
                    "environment.regime",
                    format!("unknown regime `{r}` (expected bounded, critical or unstable)"),
                );
            }
        }
        let explicit = env.omegas.is_some() || env.couplings.is_some();
        let sources = [explicit, env.drude.is_some(), env.ohmic.is_some()];
        match sources.iter().filter(|s| **s).count() {
            0 => c.push(
                "environment",
                "needs one mode source: explicit omegas/couplings, [environment.drude] or [environment.ohmic]",
            ),
            1 => {}
            _ => {
                let mut names = Vec::new();
                if explicit {
                    names.push("explicit omegas/couplings");
                }
                if env.drude.is_some() {
                    names.push("environment.drude");
                }
                if env.ohmic.is_some() {
                    names.push("environment.ohmic");
                }
                c.push(
                    "environment",
                    format!("mode sources are mutually exclusive, found {}", names.join(" and ")),
                );
            }
        }
        if explicit {
            match (&env.omegas, &env.couplings) {
                (Some(ws), Some(cs)) => {
                    c.frequencies("environment.omegas", ws);
                    if ws.len() != cs.len() {
                        c.push(
                            "environment.couplings",
                            format!("expected {} couplings (one per frequency), got {}", ws.len(), cs.len()),
                        );
                    }
                    for (k, v) in cs.iter().enumerate() {
                        if !v.is_finite() {
                            c.push(format!("environment.couplings[{k}]"), format!("must be finite, got {v}"));
                        }
                    }
                }
                (Some(_), None) => c.push("environment.couplings", "required alongside environment.omegas"),
                (None, _) => c.push("environment.omegas", "required alongside environment.couplings"),
            }
        }
        if let Some(d) = &env.drude {
            c.frequencies("environment.drude.omegas", &d.omegas);
            c.positive("environment.drude.cutoff", d.cutoff);
            match &d.gamma {
                Gamma::Value(g) if !(g.is_finite() && *g >= 0.0) => {
                    c.push("environment.drude.gamma", format!("must be finite and >= 0, got {g}"))
                }
                Gamma::Keyword(k) if k != "balance" => c.push(
                    "environment.drude.gamma",
                    format!("expected a number or \"balance\", got \"{k}\""),
                ),
                _ => {}
            }
            if d.gamma == Gamma::Keyword("balance".into())
                && env.regime.as_deref().is_some_and(|r| r != "critical")
            {
                c.push(
                    "environment.regime",
                    "a balance-calibrated gamma sits on the critical boundary; regime must be critical or omitted",
                );
            }
        }
        if let Some(o) = &env.ohmic {
            c.positive("environment.ohmic.gamma0", o.gamma0);
            c.positive("environment.ohmic.cutoff", o.cutoff);
            if o.n_modes < 2 {
                c.push("environment.ohmic.n_modes", format!("need at least 2 modes, got {}", o.n_modes));
            }
            if let Some(w) = o.omega_r {
                c.positive("environment.ohmic.omega_r", w);
            }
            if o.gamma0 > 0.0 {
                let wr2 = match (o.omega_r, sys.omega) {
                    (Some(w), _) => Some(w * w),
                    (None, Some(w)) => Some(w * w - 4.0 * o.gamma0 * o.cutoff / std::f64::consts::PI),
                    _ => None,
                };
                if wr2.is_some_and(|wr2| wr2 <= o.gamma0 * o.gamma0) && seen.contains(&Engine::Ohmic) {
                    c.push(
                        "environment.ohmic",
                        "the ohmic engine needs an underdamped trap (renormalized Omega^2 > gamma0^2)",
                    );
                }
            }
        }
        if seen.contains(&Engine::Ohmic) && env.ohmic.is_none() {
            c.push("engines", "the ohmic engine requires an [environment.ohmic] section");
        }

        let s = &self.initial;
        c.positive("initial.dx2", s.dx2);
        c.positive("initial.dp2", s.dp2);
        for (path, v) in [("initial.xc", s.xc), ("initial.pc", s.pc), ("initial.dxp", s.dxp)] {
            if !v.is_finite() {
                c.push(path, format!("must be finite, got {v}"));
            }
        }
        let floor = 0.25 * sys.hbar * sys.hbar;
        let u = s.dx2 * s.dp2 - s.dxp * s.dxp;
        if s.dx2 > 0.0 && s.dp2 > 0.0 && u < floor - qbm_core::gaussian::UNCERTAINTY_SLACK {
            c.push(
                "initial",
                format!("Schrodinger uncertainty dx2*dp2 - dxp^2 = {u} is below hbar^2/4 = {floor}"),
            );
        }

        if self.grid.n_points < 2 {
            c.push("grid.n_points", format!("need at least 2, got {}", self.grid.n_points));
        }
        c.positive("grid.t_max", self.grid.t_max);
        c.0
    }

    /// Validates and resolves the config into core objects.
    pub fn resolve(&self) -> Result<Scenario, ConfigError> {
        let diags = self.diagnostics();
        if !diags.is_empty() {
            return Err(ConfigError::Invalid(diags));
        }
        let core = |path: &str, e: qbm_core::Error| {
            ConfigError::Invalid(vec![Diagnostic {
                path: path.to_string(),
                message: e.to_string(),
            }])
        };
        let env_cfg = &self.environment;
        let ohmic = env_cfg
            .ohmic
            .as_ref()
            .map(|o| match (o.omega_r, self.system.omega) {
                (Some(wr), _) => OhmicParams::from_renormalized(o.gamma0, o.cutoff, wr),
                (None, Some(w)) => OhmicParams::new(o.gamma0, o.cutoff, w),
                (None, None) => unreachable!("checked by diagnostics"),
            })
            .transpose()
            .map_err(|e| core("environment.ohmic", e))?;
        let omega = match (&ohmic, self.system.omega) {
            (Some(p), None) => p.bare_omega(),
            (_, Some(w)) => w,
            (None, None) => unreachable!("checked by diagnostics"),
        };
        let sys = SystemParams::new(self.system.mass, omega, self.system.hbar).map_err(|e| core("system", e))?;
        let mut regime = env_cfg.regime.as_deref().and_then(parse_regime);
        let env = if let Some(d) = &env_cfg.drude {
            let gamma = match &d.gamma {
                Gamma::Value(g) => *g,
                Gamma::Keyword(_) => {
                    regime.get_or_insert(Regime::Critical);
                    balance_gamma(&sys, env_cfg.mass, &d.omegas, d.cutoff)
                }
            };
            drude_environment(&sys, env_cfg.mass, d.omegas.clone(), gamma, d.cutoff, env_cfg.beta)
        } else if let Some(o) = &env_cfg.ohmic {
            discretize_ohmic(o.gamma0, o.cutoff, o.n_modes, env_cfg.mass, sys.mass(), env_cfg.beta)
        } else {
            EnvironmentSpec::new(
                env_cfg.mass,
                env_cfg.omegas.clone().unwrap_or_default(),
                env_cfg.couplings.clone().unwrap_or_default(),
                env_cfg.beta,
            )
        }
        .map_err(|e| core("environment", e))?;
        let s = &self.initial;
        let state0 =
            GaussianState::new(s.xc, s.pc, s.dx2, s.dp2, s.dxp, sys.hbar()).map_err(|e| core("initial", e))?;
        let times = uniform_times(self.grid.t_max, self.grid.n_points).map_err(|e| core("grid", e))?;
        let engines = self
            .engines
            .iter()
            .map(|e| e.parse().expect("checked by diagnostics"))
            .collect();
        Ok(Scenario {
            name: self.name.clone(),
            sys,
            env,
            regime,
            ohmic,
            state0,
            times,
            engines,
        })
    }
}

/// A validated scenario in terms of core types.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub sys: SystemParams,
    pub env: EnvironmentSpec,
    /// Regime the exact engine is asked to enforce, if any.
    pub regime: Option<Regime>,
    pub ohmic: Option<OhmicParams>,
    pub state0: GaussianState,
    pub times: Vec<f64>,
    pub engines: Vec<Engine>,
}

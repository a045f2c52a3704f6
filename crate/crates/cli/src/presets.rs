//! Built-in scenarios.

use crate::config::{
    DrudeSection, EnvironmentSection, Gamma, GridSection, InitialSection, OhmicSection, ScenarioConfig,
    SystemSection,
};

pub const FIG1_FREQUENCIES: [f64; 5] = [0.48, 0.86, 1.72, 1.84, 1.89];
pub const FIG2_HIGH: [f64; 5] = [2.43, 2.66, 2.69, 2.70, 2.77];
pub const FIG2_LOW: [f64; 5] = [0.19, 0.23, 0.44, 0.89, 0.96];
pub const DRUDE_CUTOFF: f64 = 500.0;
pub const FIG_BETA: f64 = 1.0 / 1.15;
pub const FIG2_GAMMA: f64 = 0.39;

fn unit_system() -> SystemSection {
    SystemSection {
        mass: 1.0,
        omega: Some(1.0),
        hbar: 1.0,
    }
}

fn squeezed_packet() -> InitialSection {
    InitialSection {
        xc: 0.0,
        pc: 0.0,
        dx2: 0.04,
        dp2: 25.0,
        dxp: 0.0,
    }
}

fn figure_grid() -> GridSection {
    GridSection {
        t_max: 30.0,
        n_points: 301,
    }
}

fn drude(name: &str, description: &str, engines: &[&str], omegas: &[f64], gamma: Gamma) -> ScenarioConfig {
    let regime = matches!(gamma, Gamma::Keyword(_)).then(|| "critical".to_string());
    ScenarioConfig {
        name: name.into(),
        description: description.into(),
        engines: engines.iter().map(|e| e.to_string()).collect(),
        output: None,
        system: unit_system(),
        environment: EnvironmentSection {
            mass: 1.0,
            beta: FIG_BETA,
            regime,
            omegas: None,
            couplings: None,
            drude: Some(DrudeSection {
                gamma,
                cutoff: DRUDE_CUTOFF,
                omegas: omegas.to_vec(),
            }),
            ohmic: None,
        },
        initial: squeezed_packet(),
        grid: figure_grid(),
    }
}

/// Every preset, in display order.
pub fn presets() -> Vec<ScenarioConfig> {
    let fig1 = ["exact", "oracle"];
    let fig2 = ["exact", "markovian"];
    let balance = || Gamma::Keyword("balance".into());
    let mut out = vec![
        drude("fig1a", "position spread, bounded regime (gamma = 0.01)", &fig1, &FIG1_FREQUENCIES, Gamma::Value(0.01)),
        drude("fig1b", "position spread at the balance point (calibrated gamma, critical)", &fig1, &FIG1_FREQUENCIES, balance()),
        drude("fig1c", "position spread, unstable regime (gamma = 0.58)", &fig1, &FIG1_FREQUENCIES, Gamma::Value(0.58)),
        drude("fig1d", "decoherence measure, bounded regime (gamma = 0.01)", &fig1, &FIG1_FREQUENCIES, Gamma::Value(0.01)),
        drude("fig1e", "decoherence measure at the balance point (calibrated gamma, critical)", &fig1, &FIG1_FREQUENCIES, balance()),
        drude("fig1f", "decoherence measure, unstable regime (gamma = 0.58)", &fig1, &FIG1_FREQUENCIES, Gamma::Value(0.58)),
        drude("fig2a", "memoryless vs exact, high-frequency environment", &fig2, &FIG2_HIGH, Gamma::Value(FIG2_GAMMA)),
        drude("fig2b", "memoryless vs exact, environment near balance", &fig2, &FIG1_FREQUENCIES, Gamma::Value(FIG2_GAMMA)),
        drude("fig2c", "memoryless vs exact, low-frequency environment", &fig2, &FIG2_LOW, Gamma::Value(FIG2_GAMMA)),
        drude("fig2d", "memoryless vs exact decoherence, high-frequency environment", &fig2, &FIG2_HIGH, Gamma::Value(FIG2_GAMMA)),
        drude("fig2e", "memoryless vs exact decoherence, environment near balance", &fig2, &FIG1_FREQUENCIES, Gamma::Value(FIG2_GAMMA)),
        drude("fig2f", "memoryless vs exact decoherence, low-frequency environment", &fig2, &FIG2_LOW, Gamma::Value(FIG2_GAMMA)),
    ];
    out.push(ScenarioConfig {
        name: "ohmic_fdt".into(),
        description: "150-mode Ohmic bath against the continuum engine, relaxing toward the thermal width".into(),
        engines: vec!["exact".into(), "ohmic".into()],
        output: None,
        system: SystemSection {
            mass: 1.0,
            omega: None,
            hbar: 1.0,
        },
        environment: EnvironmentSection {
            mass: 1.0,
            beta: 1.0,
            regime: None,
            omegas: None,
            couplings: None,
            drude: None,
            ohmic: Some(OhmicSection {
                gamma0: 0.1,
                cutoff: 5.0,
                n_modes: 150,
                omega_r: Some(1.0),
            }),
        },
        initial: InitialSection {
            xc: 1.0,
            pc: 0.0,
            dx2: 0.25,
            dp2: 2.0,
            dxp: 0.0,
        },
        grid: GridSection {
            t_max: 60.0,
            n_points: 301,
        },
    });
    out.push(ScenarioConfig {
        name: "critical_n1".into(),
        description: "single resonant mode tuned exactly to the balance point".into(),
        engines: vec!["exact".into(), "oracle".into(), "markovian".into()],
        output: None,
        system: unit_system(),
        environment: EnvironmentSection {
            mass: 1.0,
            beta: FIG_BETA,
            regime: Some("critical".into()),
            omegas: Some(vec![1.0]),
            couplings: Some(vec![1.0]),
            drude: None,
            ohmic: None,
        },
        initial: squeezed_packet(),
        grid: figure_grid(),
    });
    out
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    presets().into_iter().find(|p| p.name == name)
}

/// `(name, description)` for each preset.
pub fn list_presets() -> Vec<(String, String)> {
    presets().into_iter().map(|p| (p.name, p.description)).collect()
}

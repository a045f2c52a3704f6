//! Engine dispatch and CSV emission.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use qbm_core::trajectory::{exact_trajectory, markovian_trajectory, ohmic_trajectory, oracle_trajectory};
use qbm_core::{Engine, RootOptions, Trajectory};

use crate::config::Scenario;

pub const CSV_HEADER: &str = "time,dX2,dP2,dXP,Dc,Xc,Pc,Z,Zdot,residual,caustic_flag";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{engine} engine failed: {source}")]
    Engine {
        engine: Engine,
        #[source]
        source: qbm_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

pub fn trajectory(s: &Scenario, engine: Engine) -> Result<Trajectory, RunError> {
    let r = match engine {
        Engine::Exact => {
            let opts = RootOptions {
                regime: s.regime,
                ..RootOptions::default()
            };
            exact_trajectory(&s.sys, &s.env, &s.state0, &s.times, opts)
        }
        Engine::Markovian => markovian_trajectory(&s.sys, &s.env, &s.state0, &s.times),
        Engine::Oracle => oracle_trajectory(&s.sys, &s.env, &s.state0, &s.times),
        Engine::Ohmic => match &s.ohmic {
            Some(p) => ohmic_trajectory(&s.sys, s.env.beta(), p, &s.state0, &s.times),
            None => Err(qbm_core::Error::InvalidParameter {
                field: "environment.ohmic",
                reason: "the ohmic engine needs Ohmic bath parameters".into(),
            }),
        },
    };
    r.map_err(|source| RunError::Engine { engine, source })
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for i in 0..traj.len() {
        let s = &traj.states[i];
        let z = &traj.z[i];
        let row = [
            traj.times[i],
            s.dx2,
            s.dp2,
            s.dxp,
            traj.dc[i],
            s.xc,
            s.pc,
            z.z,
            z.zdot,
            traj.residual[i],
        ]
        .map(num)
        .join(",");
        writeln!(w, "{row},{}", u8::from(traj.caustic[i]))?;
    }
    w.flush()
}

pub fn csv_path(out: &Path, name: &str, engine: Engine) -> PathBuf {
    out.join(format!("{name}_{engine}.csv"))
}

/// Outcome of one engine in a scenario run.
#[derive(Debug)]
pub struct EngineOutcome {
    pub engine: Engine,
    pub result: Result<PathBuf, RunError>,
}

/// Runs `engines` on up to `threads` workers and writes one CSV per engine.
///
/// A failing engine does not stop the others; outcomes come back in the
/// order of `engines`.
pub fn run_scenario(s: &Scenario, engines: &[Engine], out: &Path, threads: usize) -> Result<Vec<EngineOutcome>, RunError> {
    fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<PathBuf, RunError>>>> = engines.iter().map(|_| Mutex::new(None)).collect();
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&engine) = engines.get(i) else { break };
        let path = csv_path(out, &s.name, engine);
        let result = trajectory(s, engine).and_then(|t| {
            let io_err = |source| RunError::Io {
                path: path.display().to_string(),
                source,
            };
            let file = fs::File::create(&path).map_err(io_err)?;
            write_csv(&t, BufWriter::new(file)).map_err(io_err)?;
            Ok(path.clone())
        });
        *slots[i].lock().expect("slot lock") = Some(result);
    };
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, engines.len().max(1)) {
            scope.spawn(work);
        }
    });
    Ok(engines
        .iter()
        .zip(slots)
        .map(|(&engine, slot)| EngineOutcome {
            engine,
            result: slot.into_inner().expect("slot lock").expect("every engine ran"),
        })
        .collect())
}

/// Gnuplot script overlaying `dX2` and `Dc` for each engine's CSV.
pub fn gnuplot_script(name: &str, engines: &[Engine]) -> String {
    let plot = |col: usize| {
        engines
            .iter()
            .map(|e| format!("'{name}_{e}.csv' using 1:{col} with lines title '{e}'"))
            .collect::<Vec<_>>()
            .join(", \\\n     ")
    };
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n\
         set multiplot layout 2,1\nset ylabel 'dX2'\nplot {}\nset ylabel 'Dc'\nplot {}\nunset multiplot\n",
        plot(2),
        plot(5)
    )
}

//! Time integration driver: initial data, stepping, diagnostics and
//! snapshot emission.

use std::fs;
use std::path::PathBuf;

use thiserror::Error;

use crate::config::{InitialProfile, RunConfig, Stepper, TimeStepControl};
use crate::diagnostics::{diagnostics_record, DiagnosticsError, DiagnosticsRecord};
use crate::equilibrium::{equilibrium_of_state, Equilibrium, EquilibriumError};
use crate::geometry::{build_geometry, EvolvingGeometry, GeometryError};
use crate::mesh::{build_mesh, MeshError, ReferenceMesh};
use crate::solver::{advective_time_step, Solver, SolverError, State};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("initial condition: {0}")]
    Initial(String),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("step at t = {t} failed: {source}")]
    Step {
        t: f64,
        #[source]
        source: SolverError,
    },
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub state: State,
}

impl Snapshot {
    /// Text grid for one field: a header line, then one comma-separated row
    /// per radial index (a single row for surface fields).
    pub fn field_text(&self, field: &str, mesh: &ReferenceMesh) -> String {
        let (rows, data) = match field {
            "u" => (mesh.n_r(), &self.state.u),
            "w" => (1, &self.state.w),
            _ => (1, &self.state.z),
        };
        let mut out = format!(
            "# t={:.16e} field={} n_r={} n_theta={}\n",
            self.state.t,
            field,
            rows,
            mesh.n_theta()
        );
        for row in data.chunks(mesh.n_theta()) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub enum RunEvent<'a> {
    Record(&'a DiagnosticsRecord),
    Snapshot(&'a Snapshot),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: State,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub equilibrium: Equilibrium,
    pub steps: usize,
}

/// Geometry, mesh and initial state described by a configuration.
pub fn setup(config: &RunConfig) -> Result<(EvolvingGeometry, ReferenceMesh, State), RunError> {
    let geom = build_geometry(config.geometry)?;
    let mesh = build_mesh(
        config.n_r,
        config.n_theta,
        config.geometry.r_inner0,
        config.geometry.r_outer0,
    )?;
    let state = initial_state(config, &geom, &mesh)?;
    Ok((geom, mesh, state))
}

/// Smooth perturbation of `eq` with zero radial flux on both circles.
pub fn perturbed_equilibrium(mesh: &ReferenceMesh, eq: &Equilibrium, amplitude: f64, mode: u32) -> State {
    let m = mode as f64;
    let (ri, ro) = (mesh.r_inner(), mesh.r_outer());
    State {
        t: 0.0,
        u: mesh.bulk_field(|r, th| {
            let radial = (std::f64::consts::PI * (r - ri) / (ro - ri)).cos();
            eq.u_inf * (1.0 + amplitude * radial * (m * th).cos())
        }),
        w: mesh.surface_field(|th| eq.w_inf * (1.0 + amplitude * (m * th).sin())),
        z: mesh.surface_field(|th| eq.z_inf * (1.0 + amplitude * (m * th).cos())),
    }
}

fn initial_state(config: &RunConfig, geom: &EvolvingGeometry, mesh: &ReferenceMesh) -> Result<State, RunError> {
    match &config.initial {
        InitialProfile::Uniform { u, w, z } => Ok(State::uniform(mesh, *u, *w, *z)),
        InitialProfile::PerturbedEquilibrium {
            u,
            w,
            z,
            amplitude,
            mode,
        } => {
            let base = State::uniform(mesh, *u, *w, *z);
            let eq = equilibrium_of_state(&base, geom, mesh, &config.params, config.equilibrium_mode)?;
            Ok(perturbed_equilibrium(mesh, &eq, *amplitude, *mode))
        }
        InitialProfile::Grid(path) => read_grid(path, mesh),
    }
}

/// Grid file: `n_r` rows of `u` followed by one row of `w` and one of `z`,
/// comma-separated with `n_theta` values each; `#` lines are ignored.
fn read_grid(path: &PathBuf, mesh: &ReferenceMesh) -> Result<State, RunError> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| RunError::Initial(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if row.len() != mesh.n_theta() {
            return Err(RunError::Initial(format!(
                "{}:{}: expected {} values, got {}",
                path.display(),
                i + 1,
                mesh.n_theta(),
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RunError::Initial(format!(
                "{}:{}: values must be finite and nonnegative",
                path.display(),
                i + 1
            )));
        }
        rows.push(row);
    }
    if rows.len() != mesh.n_r() + 2 {
        return Err(RunError::Initial(format!(
            "{}: expected {} data rows, got {}",
            path.display(),
            mesh.n_r() + 2,
            rows.len()
        )));
    }
    let z = rows.pop().unwrap();
    let w = rows.pop().unwrap();
    Ok(State {
        t: 0.0,
        u: rows.concat(),
        w,
        z,
    })
}

/// Run without side effects, collecting everything in memory.
pub fn run(config: &RunConfig) -> Result<RunOutput, RunError> {
    run_with(config, &mut |_| Ok(()))
}

/// Run, handing every record and snapshot to `observer` as soon as it is
/// produced so callers can stream output before a later failure.
pub fn run_with(
    config: &RunConfig,
    observer: &mut dyn FnMut(RunEvent) -> std::io::Result<()>,
) -> Result<RunOutput, RunError> {
    let (geom, mesh, mut state) = setup(config)?;
    let eq = equilibrium_of_state(&state, &geom, &mesh, &config.params, config.equilibrium_mode)?;
    let solver = Solver::new(&geom, &mesh, config.params, &config.nonlinearity);

    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut emit = |state: &State,
                    step: usize,
                    records: &mut Vec<DiagnosticsRecord>,
                    snapshots: &mut Vec<Snapshot>|
     -> Result<(), RunError> {
        let rec = diagnostics_record(state, &eq, &geom, &mesh, &config.params, config.floor_eps)?;
        observer(RunEvent::Record(&rec))?;
        records.push(rec);
        if config.snapshots {
            let snap = Snapshot {
                step,
                state: state.clone(),
            };
            observer(RunEvent::Snapshot(&snap))?;
            snapshots.push(snap);
        }
        Ok(())
    };
    emit(&state, 0, &mut records, &mut snapshots)?;

    let t_end = config.t_end;
    let tol = 1e-12 * t_end.max(1.0);
    let mut next_output = config.output_interval;
    let mut step = 0usize;
    let fixed_n = match config.time_step {
        TimeStepControl::Fixed(dt) => Some((t_end / dt).ceil() as usize),
        TimeStepControl::Cfl { .. } => None,
    };
    while state.t < t_end - tol {
        let dt = match (config.time_step, fixed_n) {
            (TimeStepControl::Fixed(_), Some(n)) => t_end / n as f64,
            (TimeStepControl::Cfl { safety, dt_max }, _) => {
                let ops = solver.assemble(state.t).map_err(|source| RunError::Step { t: state.t, source })?;
                let bound = safety * advective_time_step(&ops);
                bound.min(dt_max).min(next_output - state.t).min(t_end - state.t)
            }
            _ => unreachable!(),
        };
        let result = match config.stepper {
            Stepper::Imex => solver.step_imex(&state, dt),
            Stepper::Implicit => solver.step_implicit(&state, dt),
        };
        let (mut next, _) = result.map_err(|source| RunError::Step { t: state.t, source })?;
        step += 1;
        if let Some(n) = fixed_n {
            // avoid drift of the accumulated time
            next.t = t_end * step as f64 / n as f64;
        }
        state = next;
        let last = state.t >= t_end - tol;
        if state.t >= next_output - tol || last {
            while next_output <= state.t + tol {
                next_output += config.output_interval;
            }
            emit(&state, step, &mut records, &mut snapshots)?;
        }
    }

    Ok(RunOutput {
        final_state: state,
        records,
        snapshots,
        equilibrium: eq,
        steps: step,
    })
}

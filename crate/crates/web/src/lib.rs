//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Everything here is plain Rust behind `#[wasm_bindgen]`, so the same
//! methods are exercised natively by the tests.

use bulksurf::diagnostics::{estimate_poincare_constants, relative_entropy};
use bulksurf::equilibrium::{conserved_masses, equilibrium_of_state, solve_equilibrium, Equilibrium, EquilibriumMode};
use bulksurf::geometry::{build_geometry, EvolvingGeometry, GeometryKind, GeometryPreset};
use bulksurf::mesh::{build_mesh, ReferenceMesh};
use bulksurf::model::{ModelParams, Nonlinearity};
use bulksurf::simulation::perturbed_equilibrium;
use bulksurf::solver::{Solver, State};
use wasm_bindgen::prelude::*;

fn preset(kind: &str) -> Result<GeometryPreset, String> {
    Ok(match GeometryKind::parse(kind) {
        Some(GeometryKind::Fixed) => GeometryPreset::fixed(1.0, 2.0),
        Some(GeometryKind::Rotation) => GeometryPreset::rotation(1.0, 2.0, 1.0, 0.2),
        Some(GeometryKind::Breathing) => GeometryPreset::breathing(1.0, 2.0, 0.3, 1.5, 0.05),
        Some(GeometryKind::SurfaceWind) => GeometryPreset::surface_wind(1.0, 2.0, 0.5, 0.2),
        None => return Err(format!("unknown geometry '{kind}'")),
    })
}

/// Diverging blue-white-red map of `x` in `[-1, 1]`.
fn diverging(x: f64) -> [u8; 3] {
    let x = x.clamp(-1.0, 1.0);
    let (lo, mid, hi) = ([59.0, 76.0, 192.0], [242.0, 242.0, 242.0], [180.0, 4.0, 38.0]);
    let (a, b, s) = if x < 0.0 { (mid, lo, -x) } else { (mid, hi, x) };
    [0, 1, 2].map(|i| (a[i] + (b[i] - a[i]) * s).round() as u8)
}

#[wasm_bindgen]
pub struct Simulation {
    geom: EvolvingGeometry,
    mesh: ReferenceMesh,
    params: ModelParams,
    spec: Nonlinearity,
    state: State,
    eq: Equilibrium,
    masses: (f64, f64),
    dt: f64,
    scale: f64,
}

#[wasm_bindgen]
impl Simulation {
    /// Perturbed equilibrium of unit masses on annulus(1, 2).
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, n_r: usize, n_theta: usize, amplitude: f64, mode: u32, dt: f64) -> Result<Simulation, String> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(format!("time step must be positive, got {dt}"));
        }
        if !(0.0..1.0).contains(&amplitude) {
            return Err(format!("amplitude must lie in [0, 1), got {amplitude}"));
        }
        let geom = build_geometry(preset(kind)?).map_err(|e| e.to_string())?;
        let mesh = build_mesh(n_r, n_theta, 1.0, 2.0).map_err(|e| e.to_string())?;
        let params = ModelParams::default();
        let base = State::uniform(&mesh, 1.0, 1.0, 1.0);
        let eq = equilibrium_of_state(&base, &geom, &mesh, &params, EquilibriumMode::RateBalance)
            .map_err(|e| e.to_string())?;
        let state = perturbed_equilibrium(&mesh, &eq, amplitude, mode);
        let masses = conserved_masses(&state, &geom, &mesh);
        Ok(Simulation {
            geom,
            mesh,
            params,
            spec: Nonlinearity::MassAction,
            state,
            eq,
            masses,
            dt,
            scale: amplitude.max(1e-6),
        })
    }

    /// Advance `n` IMEX steps.
    pub fn advance(&mut self, n: usize) -> Result<(), String> {
        let solver = Solver::new(&self.geom, &self.mesh, self.params, &self.spec);
        for _ in 0..n {
            self.state = solver.step_imex(&self.state, self.dt).map_err(|e| e.to_string())?.0;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn entropy(&self) -> f64 {
        relative_entropy(&self.state, &self.eq, &self.geom, &self.mesh).unwrap_or(f64::NAN)
    }

    /// Largest relative change of the two conserved masses since the start.
    pub fn mass_drift(&self) -> f64 {
        let (m1, m2) = conserved_masses(&self.state, &self.geom, &self.mesh);
        ((m1 - self.masses.0).abs() / self.masses.0).max((m2 - self.masses.1).abs() / self.masses.1)
    }

    pub fn min_value(&self) -> f64 {
        self.state.min_value()
    }

    /// Physical corners of every bulk cell, 8 numbers per cell in the
    /// cell order of the state.
    pub fn cell_quads(&self) -> Vec<f64> {
        let (m, t) = (&self.mesh, self.state.t);
        let mut out = Vec::with_capacity(8 * m.n_bulk());
        for i in 0..m.n_r() {
            for k in 0..m.n_theta() {
                let (r0, r1) = (m.r_face(i), m.r_face(i + 1));
                let (a0, a1) = (k as f64 * m.dtheta(), m.theta_face(k));
                for (r, a) in [(r0, a0), (r1, a0), (r1, a1), (r0, a1)] {
                    out.extend_from_slice(&self.geom.flow_map_polar(t, r, a));
                }
            }
        }
        out
    }

    /// Physical end points of the surface cells, 4 numbers per cell.
    pub fn surface_segments(&self) -> Vec<f64> {
        let (m, t) = (&self.mesh, self.state.t);
        let ri = m.r_inner();
        (0..m.n_theta())
            .flat_map(|k| {
                let a = self.geom.flow_map_polar(t, ri, k as f64 * m.dtheta());
                let b = self.geom.flow_map_polar(t, ri, m.theta_face(k));
                [a[0], a[1], b[0], b[1]]
            })
            .collect()
    }

    /// RGB colours of the relative deviation from equilibrium of field
    /// `u`, `w` or `z`, three bytes per cell.
    pub fn colors(&self, field: &str) -> Result<Vec<u8>, String> {
        let (values, reference) = match field {
            "u" => (&self.state.u, self.eq.u_inf),
            "w" => (&self.state.w, self.eq.w_inf),
            "z" => (&self.state.z, self.eq.z_inf),
            other => return Err(format!("unknown field '{other}'")),
        };
        Ok(values
            .iter()
            .flat_map(|v| diverging((v / reference - 1.0) / self.scale))
            .collect())
    }
}

/// `[u, w, z, residual_1, residual_2, residual_3]` for the given masses.
#[wasm_bindgen]
pub fn equilibrium(
    m1: f64,
    m2: f64,
    area: f64,
    length: f64,
    mode: &str,
    delta_k: f64,
    delta_k_prime: f64,
) -> Result<Vec<f64>, String> {
    let mode = EquilibriumMode::parse(mode).ok_or_else(|| format!("unknown mode '{mode}'"))?;
    let params = ModelParams {
        delta_k,
        delta_k_prime,
        ..ModelParams::default()
    };
    params.validate().map_err(|e| e.to_string())?;
    let eq = solve_equilibrium(m1, m2, area, length, &params, mode).map_err(|e| e.to_string())?;
    let r = eq.residuals();
    Ok(vec![eq.u_inf, eq.w_inf, eq.z_inf, r[0], r[1], r[2]])
}

/// Smallest nonzero eigenvalue of the discrete Laplacian on a circle.
#[wasm_bindgen]
pub fn circle_poincare(radius: f64, n_theta: usize) -> Result<f64, String> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(format!("radius must be positive, got {radius}"));
    }
    let geom = build_geometry(GeometryPreset::fixed(radius, 2.0 * radius)).map_err(|e| e.to_string())?;
    let mesh = build_mesh(4, n_theta, radius, 2.0 * radius).map_err(|e| e.to_string())?;
    Ok(estimate_poincare_constants(&mesh, &geom, 0.0).map_err(|e| e.to_string())?.c_pw)
}

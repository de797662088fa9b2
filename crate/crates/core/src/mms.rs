//! Manufactured solutions for verifying the discretization.
//!
//! Exact fields are given in reference coordinates with vanishing radial
//! derivative on both boundary circles, so the Robin data reduces to
//! `g = -f1(u, w, z)` and the innermost-ring trace is second-order accurate.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{build_geometry, EvolvingGeometry, GeometryError, GeometryKind, GeometryPreset};
use crate::mesh::{build_mesh, weighted_sum, MeshError, ReferenceMesh};
use crate::model::{ModelParams, Nonlinearity};
use crate::solver::{Solver, SolverError, SourceTerms, State};

pub const MMS_CASES: [&str; 2] = ["constant", "sinusoidal"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MmsError {
    #[error("unknown manufactured case '{0}' (known: constant, sinusoidal)")]
    UnknownCase(String),
    #[error("manufactured solutions need the fixed or rotation preset, got {0}")]
    UnsupportedGeometry(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Case {
    Constant,
    Sinusoidal,
}

/// Exact solution and derived forcing for one case.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedSolution {
    case: Case,
    r_inner: f64,
    r_outer: f64,
    params: ModelParams,
}

impl ManufacturedSolution {
    pub fn new(case_id: &str, r_inner: f64, r_outer: f64, params: ModelParams) -> Result<Self, MmsError> {
        let case = match case_id {
            "constant" => Case::Constant,
            "sinusoidal" => Case::Sinusoidal,
            other => return Err(MmsError::UnknownCase(other.to_string())),
        };
        Ok(ManufacturedSolution {
            case,
            r_inner,
            r_outer,
            params,
        })
    }

    fn amp(&self, t: f64) -> (f64, f64) {
        (1.0 + 0.5 * t.sin(), 0.5 * t.cos())
    }

    fn radial(&self, r: f64) -> (f64, f64, f64) {
        let k = PI / (self.r_outer - self.r_inner);
        let x = k * (r - self.r_inner);
        (x.cos(), -k * x.sin(), -k * k * x.cos())
    }

    pub fn u(&self, t: f64, r: f64, theta: f64) -> f64 {
        match self.case {
            Case::Constant => 2.0,
            Case::Sinusoidal => 2.0 + self.radial(r).0 * theta.cos() * self.amp(t).0,
        }
    }

    pub fn w(&self, t: f64, theta: f64) -> f64 {
        match self.case {
            Case::Constant => 1.0,
            Case::Sinusoidal => 2.0 + 0.5 * theta.sin() * self.amp(t).0,
        }
    }

    pub fn z(&self, t: f64, theta: f64) -> f64 {
        match self.case {
            Case::Constant => 0.5,
            Case::Sinusoidal => 1.0 + 0.5 * (2.0 * theta).cos() * self.amp(t).0,
        }
    }

    fn reaction(&self, t: f64, theta: f64) -> [f64; 3] {
        Nonlinearity::MassAction.eval(
            self.u(t, self.r_inner, theta),
            self.w(t, theta),
            self.z(t, theta),
            &self.params,
        )
    }
}

/// Forcing valid for presets whose pulled-back metric is the polar one and
/// whose relative velocities vanish (fixed and rotation).
impl SourceTerms for ManufacturedSolution {
    fn bulk(&self, t: f64, r: f64, theta: f64) -> f64 {
        match self.case {
            Case::Constant => 0.0,
            Case::Sinusoidal => {
                let (a, da) = self.amp(t);
                let (c, dc, ddc) = self.radial(r);
                let lap = (ddc + dc / r - c / (r * r)) * theta.cos() * a;
                c * theta.cos() * da - self.params.delta_omega * lap
            }
        }
    }

    fn boundary(&self, t: f64, theta: f64) -> f64 {
        -self.reaction(t, theta)[0]
    }

    fn surface_w(&self, t: f64, theta: f64) -> f64 {
        let f = self.reaction(t, theta)[1];
        match self.case {
            Case::Constant => -f,
            Case::Sinusoidal => {
                let (a, da) = self.amp(t);
                let r2 = self.r_inner * self.r_inner;
                0.5 * theta.sin() * da + self.params.delta_gamma * 0.5 * theta.sin() * a / r2 - f
            }
        }
    }

    fn surface_z(&self, t: f64, theta: f64) -> f64 {
        let f = self.reaction(t, theta)[2];
        match self.case {
            Case::Constant => -f,
            Case::Sinusoidal => {
                let (a, da) = self.amp(t);
                let r2 = self.r_inner * self.r_inner;
                0.5 * (2.0 * theta).cos() * da + self.params.delta_gamma_prime * 2.0 * (2.0 * theta).cos() * a / r2 - f
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsErrors {
    pub n_r: usize,
    pub n_theta: usize,
    pub h: f64,
    pub bulk_l2: f64,
    pub surface_l2: f64,
}

fn l2_error(measure: &[f64], num: &[f64], exact: &[f64]) -> f64 {
    let d: Vec<f64> = num.iter().zip(exact).map(|(a, b)| (a - b) * (a - b)).collect();
    weighted_sum(measure, &d).sqrt()
}

fn exact_state(mms: &ManufacturedSolution, mesh: &ReferenceMesh, t: f64) -> State {
    State {
        t,
        u: mesh.bulk_field(|r, th| mms.u(t, r, th)),
        w: mesh.surface_field(|th| mms.w(t, th)),
        z: mesh.surface_field(|th| mms.z(t, th)),
    }
}

/// Discrete `L2` errors at `t_end` of the IMEX scheme driven by the
/// manufactured forcing, on annulus(1, 2) with default constants.
pub fn manufactured_solution_error(
    case_id: &str,
    preset: &GeometryPreset,
    n_r: usize,
    n_theta: usize,
    dt: f64,
    t_end: f64,
) -> Result<MmsErrors, MmsError> {
    if !matches!(preset.kind, GeometryKind::Fixed | GeometryKind::Rotation) {
        return Err(MmsError::UnsupportedGeometry(preset.kind.name()));
    }
    let geom: EvolvingGeometry = build_geometry(*preset)?;
    let mesh = build_mesh(n_r, n_theta, preset.r_inner0, preset.r_outer0)?;
    let params = ModelParams::default();
    let mms = ManufacturedSolution::new(case_id, preset.r_inner0, preset.r_outer0, params)?;
    let spec = Nonlinearity::MassAction;
    let solver = Solver::new(&geom, &mesh, params, &spec).with_source(&mms);

    let mut state = exact_state(&mms, &mesh, 0.0);
    let n_steps = (t_end / dt).round().max(0.0) as usize;
    let dt = if n_steps > 0 { t_end / n_steps as f64 } else { dt };
    for _ in 0..n_steps {
        state = solver.step_imex(&state, dt)?.0;
    }
    let exact = exact_state(&mms, &mesh, state.t);
    let bulk = mesh.bulk_measures(&geom, state.t);
    let surf = mesh.surface_measures(&geom, state.t);
    let ew = l2_error(&surf, &state.w, &exact.w);
    let ez = l2_error(&surf, &state.z, &exact.z);
    Ok(MmsErrors {
        n_r,
        n_theta,
        h: mesh.dr().max(mesh.r_inner() * mesh.dtheta()),
        bulk_l2: l2_error(&bulk, &state.u, &exact.u),
        surface_l2: ew.hypot(ez),
    })
}

/// Least-squares slope of `log err` against `log h`.
pub fn observed_order(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    sxy / sxx
}

/// Refinement study doubling `n_r` and `n_theta` from `(n_r0, n_theta0)`,
/// with `dt` scaled by `h^2` so the temporal error stays below the spatial.
pub fn refinement_study(
    case_id: &str,
    preset: &GeometryPreset,
    n_r0: usize,
    n_theta0: usize,
    levels: usize,
    dt0: f64,
    t_end: f64,
) -> Result<Vec<MmsErrors>, MmsError> {
    (0..levels)
        .map(|l| {
            let f = 1usize << l;
            manufactured_solution_error(case_id, preset, n_r0 * f, n_theta0 * f, dt0 / (f * f) as f64, t_end)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_case_and_geometry() {
        let p = GeometryPreset::fixed(1.0, 2.0);
        assert!(matches!(
            manufactured_solution_error("nope", &p, 4, 8, 0.1, 0.1),
            Err(MmsError::UnknownCase(_))
        ));
        let b = GeometryPreset::breathing(1.0, 2.0, 0.2, 1.0, 0.0);
        assert!(matches!(
            manufactured_solution_error("constant", &b, 4, 8, 0.1, 0.1),
            Err(MmsError::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn constant_case_is_reproduced() {
        for p in [GeometryPreset::fixed(1.0, 2.0), GeometryPreset::rotation(1.0, 2.0, 1.0, 0.5)] {
            let e = manufactured_solution_error("constant", &p, 8, 16, 0.05, 1.0).unwrap();
            assert!(e.bulk_l2 <= 1e-10 && e.surface_l2 <= 1e-10, "{e:?}");
        }
    }

    #[test]
    fn forcing_matches_finite_differences() {
        // the exact fields satisfy the strong equations with the forcing
        let mms = ManufacturedSolution::new("sinusoidal", 1.0, 2.0, ModelParams::default()).unwrap();
        let (t, r, th, h) = (0.3, 1.4, 0.7, 1e-4);
        let ut = (mms.u(t + h, r, th) - mms.u(t - h, r, th)) / (2.0 * h);
        let urr = (mms.u(t, r + h, th) - 2.0 * mms.u(t, r, th) + mms.u(t, r - h, th)) / (h * h);
        let ur = (mms.u(t, r + h, th) - mms.u(t, r - h, th)) / (2.0 * h);
        let utt = (mms.u(t, r, th + h) - 2.0 * mms.u(t, r, th) + mms.u(t, r, th - h)) / (h * h);
        let f = ut - (urr + ur / r + utt / (r * r));
        assert!((f - mms.bulk(t, r, th)).abs() < 1e-5);
        // zero radial derivative on both circles
        for rb in [1.0, 2.0] {
            let d = (mms.u(t, rb + h, th) - mms.u(t, rb - h, th)) / (2.0 * h);
            assert!(d.abs() < 1e-8);
        }
    }
}
